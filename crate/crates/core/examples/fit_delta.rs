//! Recover the step size and the log-likelihood ratios behind a belief
//! trace.
//!
//! cargo run --example fit_delta

use social_learning::inverse::{default_grid, estimate_log_likelihoods, scan_delta, simulated_series};
use social_learning::models::LikelihoodProfile;
use social_learning::sbm::{sample_sbm, SbmParams};

fn main() -> social_learning::Result<()> {
    let params = SbmParams::symmetric(15, 0.8, 0.1)?;
    let net = sample_sbm(&params, 2, true, 100)?;
    let profile = LikelihoodProfile::bernoulli(&[0.1, 0.5], net.clusters.clone())?;

    let series = simulated_series(&net, &profile, 0.5, 13, 2, 10.0, Some(6))?;
    let scan = scan_delta(&series, &net.combination, &default_grid(), true)?;
    println!("fitted delta = {} (error {:.4})", scan.argmin, scan.min_error);
    if let Some(t) = scan.traditional {
        println!("traditional learning error = {t:.4}");
    }

    let c = estimate_log_likelihoods(&series, &net.combination, scan.argmin)?;
    let m0 = c[..15].iter().sum::<f64>() / 15.0;
    let m1 = c[15..].iter().sum::<f64>() / 15.0;
    println!("mean estimated log-likelihood ratio: cluster 0 {m0:+.3}, cluster 1 {m1:+.3}");
    Ok(())
}
