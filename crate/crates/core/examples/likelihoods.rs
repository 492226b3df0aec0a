//! Likelihood profiles, divergences and informativeness.
//!
//! cargo run --example likelihoods

use social_learning::models::{
    check_global_identifiability, cluster_informativeness, kl_divergence, LikelihoodProfile, HOMOGENEITY_TOL,
};

fn main() -> social_learning::Result<()> {
    let clusters: Vec<usize> = (0..30).map(|k| usize::from(k >= 15)).collect();
    let profile = LikelihoodProfile::bernoulli(&[0.1, 0.5], clusters.clone())?;
    let info = cluster_informativeness(&profile, &clusters, HOMOGENEITY_TOL)?;
    println!("d0 = {:.3}, d1 = {:.3}", info.d0.unwrap(), info.d1.unwrap());
    println!("KL(B(0.1) || B(0.5)) = {:.4}", kl_divergence(&[0.9, 0.1], &[0.5, 0.5])?);

    let id = check_global_identifiability(&profile, 0)?;
    println!("theta0 identifiable: {}", id.identifiable);

    let three: Vec<usize> = [20, 25, 30].iter().enumerate().flat_map(|(c, &n)| vec![c; n]).collect();
    let multi = LikelihoodProfile::random_multinomial_descending(3, 25, 1445, three.clone())?;
    let info = cluster_informativeness(&multi, &three, HOMOGENEITY_TOL)?;
    println!("summed informativeness per cluster: {:.3?}", info.cluster_values);
    Ok(())
}
