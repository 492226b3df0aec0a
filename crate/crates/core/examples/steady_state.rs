//! Expected steady-state log-belief ratios from the series and from the
//! closed form.
//!
//! cargo run --example steady_state

use social_learning::models::{kl_divergence, LikelihoodProfile};
use social_learning::sbm::SbmParams;
use social_learning::theory::{expected_rho, symmetric_rho, NetworkLaw, RhoKind, DEFAULT_TRUNCATION_TOL};

fn main() -> social_learning::Result<()> {
    let params = SbmParams::symmetric(15, 0.8, 0.1)?;
    let clusters: Vec<usize> = (0..30).map(|k| usize::from(k >= 15)).collect();
    let profile = LikelihoodProfile::bernoulli(&[0.1, 0.5], clusters.clone())?;
    let d0 = kl_divergence(&[0.9, 0.1], &[0.5, 0.5])?;
    let d1 = kl_divergence(&[0.5, 0.5], &[0.9, 0.1])?;

    for delta in [0.01, 0.05, 0.1, 0.3] {
        let pred = expected_rho(
            &NetworkLaw::Sbm(params),
            &profile,
            delta,
            (0, 1),
            DEFAULT_TRUNCATION_TOL,
            RhoKind::Private,
        )?;
        let (c0, c1) = symmetric_rho(d0, d1, 0.8, 0.1, delta)?;
        println!(
            "delta = {delta:4}: series {:+.4} / {:+.4}, closed form {c0:+.4} / {c1:+.4} ({} terms)",
            pred.cluster_mean(&clusters, 0).unwrap(),
            pred.cluster_mean(&clusters, 1).unwrap(),
            pred.horizon
        );
    }
    Ok(())
}
