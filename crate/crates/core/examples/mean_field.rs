//! The expected combination matrix, its powers and its finite-size
//! correction.
//!
//! cargo run --example mean_field

use social_learning::sbm::{
    closed_form_perron, closed_form_power, exact_expected_combination, expected_combination, inverse_binomial_moment,
    MomentMode, SbmParams,
};

fn main() -> social_learning::Result<()> {
    let params = SbmParams::symmetric(15, 0.8, 0.1)?;
    let bar = expected_combination(&params)?;
    println!("mean-field blocks: {:?}", bar.blocks);
    println!("Perron vector entry: {:.5}", closed_form_perron(&params)?[0]);

    for t in [1, 5, 20] {
        let pow = closed_form_power(0.8, 0.1, 15, t)?;
        println!("t = {t:2}: in-block {:.5}, cross-block {:.5}", pow[(0, 0)], pow[(0, 15)]);
    }

    for n in [10, 20, 40] {
        let p = SbmParams::symmetric(n, 0.8, 0.1)?;
        let exact = exact_expected_combination(&p.block_model())?;
        let gap = (&exact - expected_combination(&p)?.to_dense()).amax();
        println!("n = {n:2}: max |E[A] - mean field| = {gap:.2e}");
    }

    for n in [10, 40, 160] {
        let e = inverse_binomial_moment(1.0, n, 0.5, 1, MomentMode::Exact)?;
        let a = inverse_binomial_moment(1.0, n, 0.5, 1, MomentMode::Approx)?;
        println!("E[1/(1+B)], n = {n:3}: exact {e:.6}, plug-in {a:.6}");
    }
    Ok(())
}
