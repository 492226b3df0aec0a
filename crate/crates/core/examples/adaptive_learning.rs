//! Adaptive social learning keeps each community on its own hypothesis
//! when the step size is large enough.
//!
//! cargo run --example adaptive_learning

use social_learning::learning::{run, windowed_mean_log_ratio, RecordOptions, Strategy};
use social_learning::models::LikelihoodProfile;
use social_learning::sbm::{sample_sbm, SbmParams};

fn main() -> social_learning::Result<()> {
    let params = SbmParams::symmetric(15, 0.8, 0.1)?;
    let net = sample_sbm(&params, 3, true, 100)?;
    let profile = LikelihoodProfile::bernoulli(&[0.1, 0.5], net.clusters.clone())?;

    for delta in [0.01, 0.1, 0.3] {
        let trace = run(&net, &profile, Strategy::Asl { delta }, 1500, 3, &RecordOptions::default())?;
        let means = windowed_mean_log_ratio(&trace, 1000)?;
        let last = |k: usize| means[k].last().copied().flatten().unwrap();
        let c0 = (0..15).map(last).sum::<f64>() / 15.0;
        let c1 = (15..30).map(last).sum::<f64>() / 15.0;
        println!("delta = {delta:4}: mean log-ratio over the last 1000 steps c0 {c0:+.3}, c1 {c1:+.3}");
    }

    let trace = run(&net, &profile, Strategy::Asl { delta: 0.1 }, 20, 3, &RecordOptions::default())?;
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    println!("trace CSV: {} lines", String::from_utf8(csv).unwrap().lines().count());
    Ok(())
}
