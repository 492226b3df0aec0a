//! Closed-form and series predictions: network divergence, the consensus
//! set of traditional learning, steady-state log-belief ratios under
//! adaptive learning, step-size thresholds and the exact-recovery bound.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::check_delta;
use crate::models::{agent_divergence, LikelihoodProfile};
use crate::sbm::{expected_combination, BlockModel, SbmParams};

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-10;
pub const TIE_TOL: f64 = 1e-12;
const MAX_SERIES_TERMS: usize = 100_000_000;

fn check_perron(perron: &[f64], agents: usize) -> Result<()> {
    if perron.len() != agents {
        return Err(Error::DimensionMismatch(format!(
            "Perron vector has {} entries for {agents} agents",
            perron.len()
        )));
    }
    if perron.iter().any(|&u| !(u > 0.0)) || (perron.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParams(
            "Perron vector must be positive and sum to 1".into(),
        ));
    }
    Ok(())
}

/// `E ν_k(θ, θ') = D_KL(L_k(θ*_k) || L_k(θ')) - D_KL(L_k(θ*_k) || L_k(θ))`,
/// the mean log-likelihood ratio `log L_k(ζ|θ) / L_k(ζ|θ')` of every agent.
pub fn expected_log_likelihood_ratios(
    profile: &LikelihoodProfile,
    theta: usize,
    theta_prime: usize,
) -> Result<Vec<f64>> {
    let h = profile.num_hypotheses();
    if theta >= h || theta_prime >= h {
        return Err(Error::InvalidParams(format!(
            "hypotheses ({theta}, {theta_prime}) out of range"
        )));
    }
    Ok((0..profile.num_agents())
        .map(|k| agent_divergence(profile, k, theta_prime) - agent_divergence(profile, k, theta))
        .collect())
}

/// `K(θ, θ') = Σ_k u_k [D_KL(L_k(θ*_k)||L_k(θ')) - D_KL(L_k(θ*_k)||L_k(θ))]`.
pub fn network_divergence(
    profile: &LikelihoodProfile,
    perron: &[f64],
    theta: usize,
    theta_prime: usize,
) -> Result<f64> {
    check_perron(perron, profile.num_agents())?;
    let nu = expected_log_likelihood_ratios(profile, theta, theta_prime)?;
    Ok(perron.iter().zip(&nu).map(|(u, v)| u * v).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalSet {
    /// Minimizers, in increasing index order.
    pub hypotheses: Vec<usize>,
    /// `Σ_k u_k D_KL(L_k(θ*_k) || L_k(θ))` for every `θ`.
    pub objective: Vec<f64>,
}

/// Hypotheses minimizing the Perron-weighted divergence from the agents'
/// true models, with ties resolved within [`TIE_TOL`].
pub fn optimal_hypothesis_set(profile: &LikelihoodProfile, perron: &[f64]) -> Result<OptimalSet> {
    check_perron(perron, profile.num_agents())?;
    let objective: Vec<f64> = (0..profile.num_hypotheses())
        .map(|t| {
            perron
                .iter()
                .enumerate()
                .map(|(k, u)| u * agent_divergence(profile, k, t))
                .sum()
        })
        .collect();
    let best = objective.iter().copied().fold(f64::INFINITY, f64::min);
    let hypotheses = (0..objective.len())
        .filter(|&t| objective[t] - best <= TIE_TOL)
        .collect();
    Ok(OptimalSet {
        hypotheses,
        objective,
    })
}

/// Which belief the steady-state ratio refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoKind {
    /// Private beliefs `μ`, weights `(Aᵀ)^{t+1}`.
    #[default]
    Private,
    /// Public beliefs `ψ`, weights `(Aᵀ)^t`.
    Public,
}

/// Source of the combination matrix used in the series.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkLaw {
    /// Two-block SBM; its mean-field matrix `Ā` is used.
    Sbm(SbmParams),
    /// General block model; its mean-field matrix is used.
    Blocks(BlockModel),
    /// A given left-stochastic matrix, powered directly.
    Explicit(DMatrix<f64>),
}

impl NetworkLaw {
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        let a = match self {
            NetworkLaw::Sbm(params) => expected_combination(params)?.to_dense(),
            NetworkLaw::Blocks(model) => model.mean_field_combination()?,
            NetworkLaw::Explicit(a) => a.clone(),
        };
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch("combination matrix must be square".into()));
        }
        for (k, col) in a.column_iter().enumerate() {
            if col.iter().any(|&v| v < 0.0) || (col.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParams(format!(
                    "column {k} is not a probability vector"
                )));
            }
        }
        Ok(a)
    }

    fn echo(&self) -> serde_json::Value {
        match self {
            NetworkLaw::Sbm(p) => serde_json::json!({ "sbm": p }),
            NetworkLaw::Blocks(m) => serde_json::json!({ "blocks": m }),
            NetworkLaw::Explicit(a) => serde_json::json!({ "explicit": { "size": a.nrows() } }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoPrediction {
    /// `E ρ_k(θ, θ')` per agent, in nats.
    pub values: Vec<f64>,
    /// Number of series terms evaluated.
    pub horizon: usize,
    /// Whether the remainder was closed with the consensus tail estimate.
    pub tail_corrected: bool,
    pub kind: RhoKind,
    pub delta: f64,
    pub pair: (usize, usize),
    pub truncation_tol: f64,
    pub law: serde_json::Value,
    pub note: String,
}

impl RhoPrediction {
    /// Mean value over the agents labeled `cluster`.
    pub fn cluster_mean(&self, clusters: &[usize], cluster: usize) -> Option<f64> {
        let vals: Vec<f64> = self
            .values
            .iter()
            .zip(clusters)
            .filter(|(_, &c)| c == cluster)
            .map(|(v, _)| *v)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Steady-state expectation of the log-belief ratio
/// `E ρ_k = δ Σ_{t≥0} (1-δ)^t [(Aᵀ)^{t+s} E ν]_k`, with `s = 1` for private
/// and `s = 0` for public beliefs.
///
/// Summation stops once the geometric bound `(1-δ)^T max|E ν| / δ` drops
/// below `truncation_tol`, or earlier once the iterates have nearly reached
/// consensus: every later iterate lies entrywise in the range of the current
/// one, so adding the remaining mass at the range midpoint leaves an error
/// of at most `(1-δ)^T · spread / 2`.
pub fn expected_rho(
    law: &NetworkLaw,
    profile: &LikelihoodProfile,
    delta: f64,
    pair: (usize, usize),
    truncation_tol: f64,
    kind: RhoKind,
) -> Result<RhoPrediction> {
    check_delta(delta)?;
    if !(truncation_tol > 0.0) {
        return Err(Error::InvalidParams("truncation tolerance must be positive".into()));
    }
    let a = law.matrix()?;
    let n = a.nrows();
    if n != profile.num_agents() {
        return Err(Error::DimensionMismatch(format!(
            "network has {n} agents but the profile has {}",
            profile.num_agents()
        )));
    }
    let nu = DVector::from_vec(expected_log_likelihood_ratios(profile, pair.0, pair.1)?);
    let nu_max = nu.amax();
    let at = a.transpose();

    let mut w = match kind {
        RhoKind::Private => &at * &nu,
        RhoKind::Public => nu.clone(),
    };
    let mut next = w.clone();
    let mut sum = DVector::zeros(n);
    let mut weight = delta;
    // Remaining mass δ Σ_{t>T} (1-δ)^t = (1-δ)^{T+1}.
    let mut tail = 1.0;
    let mut tail_corrected = false;
    let mut terms = 0;
    loop {
        sum.axpy(weight, &w, 1.0);
        terms += 1;
        tail *= 1.0 - delta;
        weight *= 1.0 - delta;
        next.gemv(1.0, &at, &w, 0.0);
        std::mem::swap(&mut w, &mut next);

        if tail * nu_max / delta < truncation_tol {
            break;
        }
        let (lo, hi) = (w.min(), w.max());
        if tail * (hi - lo) / 2.0 < truncation_tol {
            sum.add_scalar_mut(tail * (hi + lo) / 2.0);
            tail_corrected = true;
            break;
        }
        if terms >= MAX_SERIES_TERMS {
            return Err(Error::NoConvergence {
                iterations: terms,
                residual: tail * (hi - lo) / 2.0,
            });
        }
    }

    Ok(RhoPrediction {
        values: sum.iter().copied().collect(),
        horizon: terms,
        tail_corrected,
        kind,
        delta,
        pair,
        truncation_tol,
        law: law.echo(),
        note: "expectation under the mean-field combination matrix; realized graphs add an O(n^{-1/3}) deviation"
            .into(),
    })
}

/// Two-cluster symmetric closed form for the private log-ratio
/// `log μ(θ0)/μ(θ1)`: returns the (cluster 0, cluster 1) values
/// `½(d0 - d1) ± ½ δ (d0 + d1)(p - q) / (p + q - (1-δ)(p - q))`.
pub fn symmetric_rho(d0: f64, d1: f64, p: f64, q: f64, delta: f64) -> Result<(f64, f64)> {
    check_delta(delta)?;
    if !(p + q > 0.0) {
        return Err(Error::DegenerateBlock("p + q must be positive".into()));
    }
    let mean = 0.5 * (d0 - d1);
    let gap = 0.5 * delta * (d0 + d1) * (p - q) / (p + q - (1.0 - delta) * (p - q));
    Ok((mean + gap, mean - gap))
}

/// Smallest step size for which both clusters of a symmetric network
/// favour their own hypothesis:
/// `max{(d1-d0)/d0, (d0-d1)/d1} · q/(p-q)`, floored at 0.
pub fn symmetric_delta_threshold(d0: f64, d1: f64, p: f64, q: f64) -> Result<f64> {
    if !(p > q) {
        return Err(Error::InvalidRegime(format!("need p > q, got p = {p}, q = {q}")));
    }
    if !(d0 > 0.0 && d1 > 0.0) {
        return Err(Error::ZeroInformativeness { d0, d1 });
    }
    let m = ((d1 - d0) / d0).max((d0 - d1) / d1);
    Ok((m * q / (p - q)).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricThresholds {
    pub r0: f64,
    pub r1: f64,
    /// `q1 n1 r1 d1 - q0 n0 r0 d0`: positive when `θ1` is prevalent.
    pub prevalence: f64,
    pub delta_c0: f64,
    pub delta_c1: f64,
    pub delta0: f64,
    pub feasible: bool,
}

/// Cluster thresholds for a general two-block SBM. The cluster whose
/// hypothesis is prevalent needs no constraint (threshold 0); the other
/// cluster's threshold follows from the sign condition on its expected
/// log-ratio.
pub fn asymmetric_delta_thresholds(
    params: &SbmParams,
    d0: f64,
    d1: f64,
) -> Result<AsymmetricThresholds> {
    params.validate()?;
    let (n0, n1) = (params.n0 as f64, params.n1 as f64);
    let SbmParams { p0, p1, q0, q1, .. } = *params;
    let c0 = p0 * n0 * d0 - q1 * n1 * d1;
    let c1 = p1 * n1 * d1 - q0 * n0 * d0;
    if !(c0 > 0.0) {
        return Err(Error::PreconditionFailed(format!(
            "p0 n0 d0 - q1 n1 d1 = {c0} is not positive"
        )));
    }
    if !(c1 > 0.0) {
        return Err(Error::PreconditionFailed(format!(
            "p1 n1 d1 - q0 n0 d0 = {c1} is not positive"
        )));
    }
    let r0 = p0 * n0 + q1 * n1;
    let r1 = q0 * n0 + p1 * n1;
    let s = q1 * n1 * r1 * d1 - q0 * n0 * r0 * d0;
    let z = q0 * n0 * r0 + q1 * n1 * r1;
    let (mut delta_c0, mut delta_c1) = (0.0, 0.0);
    if s > 0.0 {
        delta_c0 = r0 * s / (c0 * z + r0 * s);
    } else if s < 0.0 {
        delta_c1 = r1 * -s / (c1 * z + r1 * -s);
    }
    let delta0 = f64::max(delta_c0, delta_c1);
    Ok(AsymmetricThresholds {
        r0,
        r1,
        prevalence: s,
        delta_c0,
        delta_c1,
        delta0,
        feasible: delta0 < 1.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdInputs {
    pub params: SbmParams,
    pub d0: f64,
    pub d1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub inputs: ThresholdInputs,
    /// Symmetric-analysis threshold; present when `n0 = n1`, `p0 = p1` and
    /// `q0 = q1`, or forced by [`threshold_report`]'s caller.
    pub symmetric: Option<f64>,
    pub symmetric_feasible: Option<bool>,
    /// `None` when the positivity precondition fails.
    pub asymmetric: Option<AsymmetricThresholds>,
    /// Which precondition failed, if any.
    pub precondition: Option<String>,
    pub symmetric_error: Option<String>,
}

/// Every applicable threshold for `params`, with failures reported instead
/// of returned as errors.
pub fn threshold_report(params: &SbmParams, d0: f64, d1: f64, force_symmetric: bool) -> Result<ThresholdReport> {
    params.validate()?;
    let (mut symmetric, mut symmetric_error) = (None, None);
    if params.is_symmetric() || force_symmetric {
        match symmetric_delta_threshold(d0, d1, params.p0, params.q0) {
            Ok(t) => symmetric = Some(t),
            Err(e) => symmetric_error = Some(e.to_string()),
        }
    }
    let (asymmetric, precondition) = match asymmetric_delta_thresholds(params, d0, d1) {
        Ok(t) => (Some(t), None),
        Err(Error::PreconditionFailed(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    Ok(ThresholdReport {
        inputs: ThresholdInputs {
            params: *params,
            d0,
            d1,
        },
        symmetric_feasible: symmetric.map(|t| t < 1.0),
        symmetric,
        asymmetric,
        precondition,
        symmetric_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCheck {
    pub infeasible: bool,
    /// `|√(n p / ln n) - √(n q / ln n)|`
    pub margin: f64,
}

/// Information-theoretic test for exact community recovery with `n`
/// agents per cluster: recovery is impossible when the margin is below √2.
pub fn exact_recovery_infeasible(n_per_cluster: usize, p: f64, q: f64) -> Result<RecoveryCheck> {
    if n_per_cluster < 2 {
        return Err(Error::InvalidParams("need at least two agents per cluster".into()));
    }
    let n = n_per_cluster as f64;
    let ln = n.ln();
    let margin = ((n * p / ln).sqrt() - (n * q / ln).sqrt()).abs();
    Ok(RecoveryCheck {
        infeasible: margin < std::f64::consts::SQRT_2,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{kl_divergence, HypothesisSet};
    use crate::sbm::{closed_form_power, perron_vector, sample_sbm};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop_assert, proptest};

    fn d_values() -> (f64, f64) {
        (
            kl_divergence(&[0.9, 0.1], &[0.5, 0.5]).unwrap(),
            kl_divergence(&[0.5, 0.5], &[0.9, 0.1]).unwrap(),
        )
    }

    fn paper_profile(n: usize) -> LikelihoodProfile {
        let truth = (0..2 * n).map(|k| usize::from(k >= n)).collect();
        LikelihoodProfile::bernoulli(&[0.1, 0.5], truth).unwrap()
    }

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    #[test]
    fn network_divergence_examples() {
        let profile = paper_profile(15);
        let u = uniform(30);
        assert_eq!(network_divergence(&profile, &u, 1, 1).unwrap(), 0.0);
        let k01 = network_divergence(&profile, &u, 0, 1).unwrap();
        let k10 = network_divergence(&profile, &u, 1, 0).unwrap();
        assert_abs_diff_eq!(k01, -k10, epsilon = 1e-15);
        let (d0, d1) = d_values();
        // Direct summation: fifteen agents contribute d0/30, fifteen -d1/30.
        let direct: f64 = (0..30).map(|k| if k < 15 { d0 } else { -d1 } / 30.0).sum();
        assert_abs_diff_eq!(k01, direct, epsilon = 1e-14);
        assert_abs_diff_eq!(k01, -0.0715, epsilon = 5e-4);
        assert!(network_divergence(&profile, &uniform(29), 0, 1).is_err());
    }

    #[test]
    fn optimal_set_examples() {
        let homogeneous = LikelihoodProfile::bernoulli(&[0.1, 0.5], vec![0; 6]).unwrap();
        let set = optimal_hypothesis_set(&homogeneous, &uniform(6)).unwrap();
        assert_eq!(set.hypotheses, vec![0]);
        assert_eq!(set.objective[0], 0.0);

        let profile = paper_profile(15);
        let set = optimal_hypothesis_set(&profile, &uniform(30)).unwrap();
        assert_eq!(set.hypotheses, vec![1]);
        assert!(network_divergence(&profile, &uniform(30), 1, 0).unwrap() > 0.0);

        // Mirrored models: D(B(0.2)||B(0.8)) = D(B(0.8)||B(0.2)).
        let mirrored = LikelihoodProfile::bernoulli(&[0.2, 0.8], vec![0, 0, 1, 1]).unwrap();
        let set = optimal_hypothesis_set(&mirrored, &uniform(4)).unwrap();
        assert_eq!(set.hypotheses, vec![0, 1]);
    }

    #[test]
    fn rho_matches_closed_form() {
        let (d0, d1) = d_values();
        let params = SbmParams::symmetric(15, 0.8, 0.1).unwrap();
        let profile = paper_profile(15);
        for delta in [0.01, 0.1, 0.3, 0.9] {
            let pred = expected_rho(
                &NetworkLaw::Sbm(params),
                &profile,
                delta,
                (0, 1),
                DEFAULT_TRUNCATION_TOL,
                RhoKind::Private,
            )
            .unwrap();
            let (c0, c1) = symmetric_rho(d0, d1, 0.8, 0.1, delta).unwrap();
            for k in 0..30 {
                let want = if k < 15 { c0 } else { c1 };
                assert!((pred.values[k] - want).abs() < 1e-9, "δ = {delta}, agent {k}");
            }
        }
        let (c0, c1) = symmetric_rho(d0, d1, 0.8, 0.1, 0.1).unwrap();
        assert_abs_diff_eq!(c0, 0.0425, epsilon = 1e-4);
        assert_abs_diff_eq!(c1, -0.1853, epsilon = 1e-4);
        let (c0, c1) = symmetric_rho(d0, d1, 0.8, 0.1, 0.01).unwrap();
        assert!(c0 < 0.0 && c1 < 0.0);
        assert_abs_diff_eq!(c0, -0.057, epsilon = 1e-3);
    }

    /// Independent oracle: sum the series with the closed-form powers.
    #[test]
    fn rho_matches_power_series() {
        let (d0, d1) = d_values();
        let delta: f64 = 0.2;
        let mut nu = DVector::zeros(30);
        for k in 0..30 {
            nu[k] = if k < 15 { d0 } else { -d1 };
        }
        let mut sum = DVector::zeros(30);
        for t in 0..400u32 {
            let pw = closed_form_power(0.8, 0.1, 15, t + 1).unwrap();
            sum += pw.transpose() * &nu * (delta * (1.0 - delta).powi(t as i32));
        }
        let pred = expected_rho(
            &NetworkLaw::Sbm(SbmParams::symmetric(15, 0.8, 0.1).unwrap()),
            &paper_profile(15),
            delta,
            (0, 1),
            1e-12,
            RhoKind::Private,
        )
        .unwrap();
        for k in 0..30 {
            assert!((pred.values[k] - sum[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn rho_small_delta_limit() {
        let profile = paper_profile(15);
        let params = SbmParams::symmetric(15, 0.8, 0.1).unwrap();
        let pred = expected_rho(&NetworkLaw::Sbm(params), &profile, 1e-6, (0, 1), 1e-10, RhoKind::Private)
            .unwrap();
        assert!(pred.tail_corrected);
        let k = network_divergence(&profile, &uniform(30), 0, 1).unwrap();
        for v in &pred.values {
            assert!((v - k).abs() < 1e-3);
        }
        assert!(expected_rho(&NetworkLaw::Sbm(params), &profile, 1.0, (0, 1), 1e-10, RhoKind::Private).is_err());
    }

    #[test]
    fn rho_public_and_explicit_paths() {
        let params = SbmParams::new(10, 8, 0.8, 0.7, 0.2, 0.1).unwrap();
        let truth = (0..18).map(|k| usize::from(k >= 10)).collect();
        let profile = LikelihoodProfile::bernoulli(&[0.2, 0.6], truth).unwrap();
        let bar = expected_combination(&params).unwrap().to_dense();
        for kind in [RhoKind::Private, RhoKind::Public] {
            let a = expected_rho(&NetworkLaw::Sbm(params), &profile, 0.15, (0, 1), 1e-12, kind).unwrap();
            let b = expected_rho(&NetworkLaw::Explicit(bar.clone()), &profile, 0.15, (0, 1), 1e-12, kind)
                .unwrap();
            let c = expected_rho(&NetworkLaw::Blocks(params.block_model()), &profile, 0.15, (0, 1), 1e-12, kind)
                .unwrap();
            for k in 0..18 {
                assert!((a.values[k] - b.values[k]).abs() < 1e-11);
                assert!((a.values[k] - c.values[k]).abs() < 1e-11);
            }
        }
        // Public and private ratios obey λ = δν + (1-δ)μ at steady state.
        let nu = expected_log_likelihood_ratios(&profile, 0, 1).unwrap();
        let mu = expected_rho(&NetworkLaw::Sbm(params), &profile, 0.15, (0, 1), 1e-12, RhoKind::Private).unwrap();
        let psi = expected_rho(&NetworkLaw::Sbm(params), &profile, 0.15, (0, 1), 1e-12, RhoKind::Public).unwrap();
        for k in 0..18 {
            assert!((psi.values[k] - (0.15 * nu[k] + 0.85 * mu.values[k])).abs() < 1e-10);
        }
    }

    #[test]
    fn threshold_examples() {
        let t = symmetric_delta_threshold(0.368, 0.511, 0.8, 0.1).unwrap();
        assert!((0.054..=0.058).contains(&t), "{t}");
        let t = symmetric_delta_threshold(0.368, 0.511, 0.25, 0.1).unwrap();
        assert!((0.25..=0.27).contains(&t), "{t}");
        assert_eq!(symmetric_delta_threshold(0.3, 0.3, 0.8, 0.1).unwrap(), 0.0);
        assert!(matches!(
            symmetric_delta_threshold(0.3, 0.4, 0.1, 0.1),
            Err(Error::InvalidRegime(_))
        ));
        assert!(matches!(
            symmetric_delta_threshold(0.0, 0.4, 0.8, 0.1),
            Err(Error::ZeroInformativeness { .. })
        ));
    }

    #[test]
    fn asymmetric_examples() {
        let ex1 = SbmParams::new(10, 8, 0.8, 0.8, 0.2, 0.2).unwrap();
        let r = asymmetric_delta_thresholds(&ex1, 0.035, 0.04).unwrap();
        // Hand evaluation: 8.4 · 0.1344 / (0.186 · 32.64 + 8.4 · 0.1344).
        assert_abs_diff_eq!(r.delta0, 1.12896 / 7.2, epsilon = 1e-12);
        assert!((0.14..=0.16).contains(&r.delta0));
        assert_eq!(r.delta_c0, 0.0);
        assert!(r.feasible);

        let ex2 = SbmParams::symmetric(10, 0.8, 0.2).unwrap();
        let r = asymmetric_delta_thresholds(&ex2, 0.035, 0.04).unwrap();
        assert_abs_diff_eq!(r.delta0, 1.0 / 9.0, epsilon = 1e-12);
        let s = symmetric_delta_threshold(0.035, 0.04, 0.8, 0.2).unwrap();
        assert_abs_diff_eq!(s, 0.05, epsilon = 0.01);
        assert!(r.delta0 >= s);

        let decoupled = SbmParams::new(10, 8, 0.8, 0.8, 0.0, 0.0).unwrap();
        let r = asymmetric_delta_thresholds(&decoupled, 0.035, 0.04).unwrap();
        assert_eq!((r.prevalence, r.delta0), (0.0, 0.0));

        let bad = SbmParams::new(10, 8, 0.1, 0.8, 0.2, 0.9).unwrap();
        assert!(matches!(
            asymmetric_delta_thresholds(&bad, 0.035, 0.04),
            Err(Error::PreconditionFailed(_))
        ));
        let report = threshold_report(&bad, 0.035, 0.04, false).unwrap();
        assert!(report.asymmetric.is_none() && report.precondition.is_some());
        let json = serde_json::to_string(&threshold_report(&ex2, 0.035, 0.04, false).unwrap()).unwrap();
        assert!(json.contains("\"n0\":10") && json.contains("\"symmetric\":"));
    }

    #[test]
    fn recovery_examples() {
        let r = exact_recovery_infeasible(15, 0.25, 0.1).unwrap();
        assert!(r.infeasible);
        assert_abs_diff_eq!(r.margin, 0.4326, epsilon = 1e-4);
        let r = exact_recovery_infeasible(15, 0.8, 0.1).unwrap();
        assert!(r.infeasible);
        assert_abs_diff_eq!(r.margin, 1.3608, epsilon = 1e-4);
        assert_eq!(exact_recovery_infeasible(15, 0.3, 0.3).unwrap().margin, 0.0);
        assert!(!exact_recovery_infeasible(1000, 0.9, 0.01).unwrap().infeasible);
        assert!(exact_recovery_infeasible(1, 0.9, 0.1).is_err());
    }

    #[test]
    fn perron_weighted_consensus_on_sampled_graph() {
        let params = SbmParams::symmetric(15, 0.8, 0.1).unwrap();
        let net = sample_sbm(&params, 3, true, 100).unwrap();
        let u = perron_vector(&net.combination, 1e-13, 1_000_000).unwrap();
        let profile = paper_profile(15);
        let set = optimal_hypothesis_set(&profile, u.as_slice()).unwrap();
        let theta = set.hypotheses[0];
        for other in 0..2 {
            if other != theta {
                assert!(network_divergence(&profile, u.as_slice(), theta, other).unwrap() > 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn symmetric_threshold_is_exact_boundary(
            d0 in 0.05f64..1.0, d1 in 0.05f64..1.0, q in 0.01f64..0.3, gap in 0.05f64..0.6,
        ) {
            let p = (q + gap).min(1.0);
            let t = symmetric_delta_threshold(d0, d1, p, q).unwrap();
            prop_assert!(t >= 0.0);
            if (d0 - d1).abs() > 1e-3 && t * (1.0 + 1e-6) < 1.0 {
                let (a, b) = symmetric_rho(d0, d1, p, q, t * (1.0 + 1e-6)).unwrap();
                prop_assert!(a > 0.0 && b < 0.0);
                let (a, b) = symmetric_rho(d0, d1, p, q, t * (1.0 - 1e-6)).unwrap();
                prop_assert!((a > 0.0) != (b < 0.0));
            }
        }

        #[test]
        fn asymmetric_upper_bounds_symmetric(
            n in 2usize..40, d0 in 0.01f64..0.5, d1 in 0.01f64..0.5, q in 0.01f64..0.3, gap in 0.05f64..0.6,
        ) {
            let p = (q + gap).min(1.0);
            let params = SbmParams::symmetric(n, p, q).unwrap();
            if let Ok(r) = asymmetric_delta_thresholds(&params, d0, d1) {
                let s = symmetric_delta_threshold(d0, d1, p, q).unwrap();
                prop_assert!(r.delta0 + 1e-12 >= s);
            }
        }

        #[test]
        fn antisymmetry(seed in 0u64..1000, a in 0usize..3, b in 0usize..3) {
            let profile = LikelihoodProfile::random_multinomial(3, 5, seed, vec![0, 1, 2, 2]).unwrap();
            let u = [0.1, 0.2, 0.3, 0.4];
            let kab = network_divergence(&profile, &u, a, b).unwrap();
            let kba = network_divergence(&profile, &u, b, a).unwrap();
            prop_assert!((kab + kba).abs() < 1e-12);
            let set = optimal_hypothesis_set(&profile, &u).unwrap();
            for t in 0..3 {
                if !set.hypotheses.contains(&t) {
                    prop_assert!(network_divergence(&profile, &u, set.hypotheses[0], t).unwrap() > 0.0);
                }
            }
        }
    }

    #[test]
    fn hypothesis_labels_do_not_matter() {
        let h = HypothesisSet::new(vec!["up".into(), "down".into()]).unwrap();
        let p = LikelihoodProfile::shared(h, vec![vec![0.9, 0.1], vec![0.5, 0.5]], vec![0, 1]).unwrap();
        let (d0, d1) = d_values();
        assert_abs_diff_eq!(
            network_divergence(&p, &[0.5, 0.5], 0, 1).unwrap(),
            0.5 * (d0 - d1),
            epsilon = 1e-15
        );
    }
}
