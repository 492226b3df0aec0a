//! Replicated experiment from a config file, compared with theory.
//!
//! cargo run --release --example monte_carlo

use std::path::Path;

use social_learning::harness::{compare_theory, run_experiment, ExperimentConfig, NetworkSpec};
use social_learning::learning::Strategy;
use social_learning::theory::{expected_rho, NetworkLaw, RhoKind, DEFAULT_TRUNCATION_TOL};

fn main() -> social_learning::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/two_communities.toml");
    let mut cfg = ExperimentConfig::load(&path)?;
    cfg.run.replicates = 100;
    let NetworkSpec::Sbm(params) = cfg.network.clone() else { unreachable!() };

    let strategy = Strategy::Asl { delta: 0.1 };
    let report = run_experiment(&cfg, strategy)?;
    for c in &report.summary.errors.clusters {
        println!("cluster {}: P(error) = {:.3} ± {:.3}", c.cluster, c.p_err, c.stderr);
    }

    let profile = cfg.profile(&report.clusters)?;
    let pred = expected_rho(&NetworkLaw::Sbm(params), &profile, 0.1, (0, 1), DEFAULT_TRUNCATION_TOL, RhoKind::Private)?;
    let slack = 0.368 * 15f64.powf(-1.0 / 3.0);
    let cmp = compare_theory(&report, &pred, slack)?;
    print!("{}", cmp.to_csv());
    Ok(())
}
