//! Minimal step sizes for per-community truth recovery.
//!
//! cargo run --example thresholds

use social_learning::models::kl_divergence;
use social_learning::sbm::SbmParams;
use social_learning::theory::{asymmetric_delta_thresholds, exact_recovery_infeasible, symmetric_delta_threshold};

fn main() -> social_learning::Result<()> {
    let d0 = kl_divergence(&[0.9, 0.1], &[0.5, 0.5])?;
    let d1 = kl_divergence(&[0.5, 0.5], &[0.9, 0.1])?;
    for (p, q) in [(0.8, 0.1), (0.25, 0.1)] {
        let t = symmetric_delta_threshold(d0, d1, p, q)?;
        let rec = exact_recovery_infeasible(15, p, q)?;
        println!(
            "p = {p}, q = {q}: delta > {t:.4}; exact community recovery infeasible: {} (margin {:.3})",
            rec.infeasible, rec.margin
        );
    }

    let uneven = SbmParams::new(10, 8, 0.8, 0.8, 0.2, 0.2)?;
    let a = asymmetric_delta_thresholds(&uneven, 0.035, 0.04)?;
    println!("n0 = 10, n1 = 8: delta > {:.4} (cluster thresholds {:.4}, {:.4})", a.delta0, a.delta_c0, a.delta_c1);
    let even = SbmParams::symmetric(10, 0.8, 0.2)?;
    let a = asymmetric_delta_thresholds(&even, 0.035, 0.04)?;
    let s = symmetric_delta_threshold(0.035, 0.04, 0.8, 0.2)?;
    println!("n0 = n1 = 10: general bound {:.4}, symmetric bound {s:.4}", a.delta0);
    Ok(())
}
