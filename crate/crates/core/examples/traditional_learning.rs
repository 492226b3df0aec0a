//! Traditional social learning drives every agent to the hypothesis
//! favored by the network divergence.
//!
//! cargo run --example traditional_learning

use social_learning::learning::{run, RecordOptions, Strategy};
use social_learning::models::LikelihoodProfile;
use social_learning::sbm::{perron_vector, sample_sbm, SbmParams, PERRON_MAX_ITER, PERRON_TOL};
use social_learning::theory::{network_divergence, optimal_hypothesis_set};

fn main() -> social_learning::Result<()> {
    let params = SbmParams::symmetric(15, 0.8, 0.1)?;
    let net = sample_sbm(&params, 1, true, 100)?;
    let profile = LikelihoodProfile::bernoulli(&[0.1, 0.5], net.clusters.clone())?;

    let u = perron_vector(&net.combination, PERRON_TOL, PERRON_MAX_ITER)?;
    let k = network_divergence(&profile, u.as_slice(), 0, 1)?;
    let set = optimal_hypothesis_set(&profile, u.as_slice())?;
    println!("K(theta0, theta1) = {k:+.4}, optimal set {:?}", set.hypotheses);

    let trace = run(&net, &profile, Strategy::Traditional, 2000, 1, &RecordOptions::default())?;
    let last = trace.len() - 1;
    let estimates: Vec<usize> = (0..trace.agents()).map(|a| trace.estimate(last, a)).collect();
    println!("estimates at i = {last}: {estimates:?}");
    let slope = (trace.public_log_ratio(last, 0) - trace.public_log_ratio(last - 500, 0)) / 500.0;
    println!("log-ratio slope of agent 0: {slope:+.4} per step");
    Ok(())
}
