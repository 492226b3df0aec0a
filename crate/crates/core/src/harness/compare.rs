//! Empirical steady state against predicted expected log-belief ratios.

use serde::{Deserialize, Serialize};

use super::experiment::ExperimentReport;
use crate::error::{Error, Result};
use crate::theory::{RhoKind, RhoPrediction};

/// Default z-score beyond which a cluster is flagged.
pub const Z_FLAG: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub cluster: usize,
    pub empirical: f64,
    pub stderr: f64,
    pub theory: f64,
    /// `(empirical - theory) / stderr`; zero when both sides agree exactly.
    pub z: f64,
    /// Allowed deviation: `Z_FLAG * stderr + slack`.
    pub tolerance: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryComparison {
    pub kind: RhoKind,
    pub delta: f64,
    pub pair: (usize, usize),
    pub slack: f64,
    pub rows: Vec<ComparisonRow>,
}

impl TheoryComparison {
    pub fn any_flagged(&self) -> bool {
        self.rows.iter().any(|r| r.flagged)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("cluster,empirical,stderr,theory,z,tolerance,flagged\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.cluster, r.empirical, r.stderr, r.theory, r.z, r.tolerance, r.flagged
            ));
        }
        s
    }
}

/// Compares per-cluster steady-state means of `report` with `prediction`.
///
/// Private predictions are compared with the private-belief statistics and
/// public predictions with the public ones. A cluster is flagged when its
/// deviation exceeds `Z_FLAG` standard errors plus `slack`.
pub fn compare_theory(report: &ExperimentReport, prediction: &RhoPrediction, slack: f64) -> Result<TheoryComparison> {
    let s = &report.summary;
    let delta = s
        .delta
        .ok_or_else(|| Error::MismatchedConfig("traditional runs have no δ to compare".into()))?;
    if (delta - prediction.delta).abs() > 1e-12 {
        return Err(Error::MismatchedConfig(format!(
            "experiment δ = {delta} but prediction δ = {}",
            prediction.delta
        )));
    }
    if s.pair != prediction.pair {
        return Err(Error::MismatchedConfig(format!(
            "experiment pair {:?} but prediction pair {:?}",
            s.pair, prediction.pair
        )));
    }
    if prediction.values.len() != report.clusters.len() {
        return Err(Error::MismatchedConfig(format!(
            "prediction covers {} agents, experiment {}",
            prediction.values.len(),
            report.clusters.len()
        )));
    }
    if s.steady_state.is_empty() {
        return Err(Error::MismatchedConfig("experiment has no post-burn-in window".into()));
    }
    let rows = s
        .steady_state
        .iter()
        .map(|st| {
            let (empirical, stderr) = match prediction.kind {
                RhoKind::Private => (st.mean_private, st.se_private),
                RhoKind::Public => (st.mean_public, st.se_public),
            };
            let theory = prediction
                .cluster_mean(&report.clusters, st.cluster)
                .unwrap_or(f64::NAN);
            let dev = empirical - theory;
            let z = if dev == 0.0 {
                0.0
            } else if stderr > 0.0 {
                dev / stderr
            } else {
                dev.signum() * f64::INFINITY
            };
            let tolerance = Z_FLAG * stderr + slack;
            ComparisonRow {
                cluster: st.cluster,
                empirical,
                stderr,
                theory,
                z,
                tolerance,
                flagged: !(dev.abs() <= tolerance),
            }
        })
        .collect();
    Ok(TheoryComparison {
        kind: prediction.kind,
        delta,
        pair: prediction.pair,
        slack,
        rows,
    })
}
