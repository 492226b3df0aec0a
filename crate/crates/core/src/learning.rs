//! Social-learning recursions in the log domain: local update (Bayesian or
//! adaptive), geometric combination over the network, and state estimates.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{LikelihoodProfile, ObservationSampler};
use crate::rng::{self, StreamRng};
use crate::sbm::Network;

const SIMPLEX_TOL: f64 = 1e-10;

/// Private (`μ`) and public (`ψ`) log-beliefs, one row per agent and one
/// column per hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    log_mu: DMatrix<f64>,
    log_psi: DMatrix<f64>,
    iteration: usize,
}

impl BeliefState {
    pub fn uniform(agents: usize, hypotheses: usize) -> Self {
        let v = -(hypotheses as f64).ln();
        let m = DMatrix::from_element(agents, hypotheses, v);
        BeliefState {
            log_mu: m.clone(),
            log_psi: m,
            iteration: 0,
        }
    }

    /// Every agent starts from the same prior `prior`.
    pub fn shared_prior(agents: usize, prior: &[f64]) -> Result<Self> {
        if prior.len() < 2 || prior.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidParams(format!(
                "prior must have at least two strictly positive entries, got {prior:?}"
            )));
        }
        let s: f64 = prior.iter().sum();
        let mut m = DMatrix::from_fn(agents, prior.len(), |_, t| (prior[t] / s).ln());
        normalize_log_rows(&mut m);
        Ok(BeliefState {
            log_mu: m.clone(),
            log_psi: m,
            iteration: 0,
        })
    }

    /// Builds a state from private log-beliefs; rows are renormalized and
    /// the public beliefs start equal to the private ones.
    pub fn from_log_private(mut log_mu: DMatrix<f64>) -> Result<Self> {
        if log_mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("log-beliefs must be finite".into()));
        }
        normalize_log_rows(&mut log_mu);
        Ok(BeliefState {
            log_psi: log_mu.clone(),
            log_mu,
            iteration: 0,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.log_mu.nrows()
    }

    pub fn num_hypotheses(&self) -> usize {
        self.log_mu.ncols()
    }

    pub fn log_private(&self) -> &DMatrix<f64> {
        &self.log_mu
    }

    pub fn log_public(&self) -> &DMatrix<f64> {
        &self.log_psi
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// `log(μ_k(θa) / μ_k(θb))`
    pub fn private_log_ratio(&self, agent: usize, a: usize, b: usize) -> f64 {
        self.log_mu[(agent, a)] - self.log_mu[(agent, b)]
    }

    /// `log(ψ_k(θa) / ψ_k(θb))`
    pub fn public_log_ratio(&self, agent: usize, a: usize, b: usize) -> f64 {
        self.log_psi[(agent, a)] - self.log_psi[(agent, b)]
    }

    /// Largest deviation of `Σ_θ exp(row)` from 1 over both belief tables.
    pub fn simplex_deviation(&self) -> f64 {
        [&self.log_mu, &self.log_psi]
            .iter()
            .flat_map(|m| m.row_iter().map(|r| (r.iter().map(|v| v.exp()).sum::<f64>() - 1.0).abs()))
            .fold(0.0, f64::max)
    }

    pub fn is_valid(&self) -> bool {
        self.log_mu.iter().chain(self.log_psi.iter()).all(|v| v.is_finite())
            && self.simplex_deviation() <= SIMPLEX_TOL
    }
}

/// Subtracts each row's log-sum-exp so every row exponentiates to a simplex.
pub fn normalize_log_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
}

fn check_observations(obs: &[usize], profile: &LikelihoodProfile, agents: usize) -> Result<()> {
    if obs.len() != agents || profile.num_agents() != agents {
        return Err(Error::DimensionMismatch(format!(
            "{} observations, {} profile agents, {agents} belief rows",
            obs.len(),
            profile.num_agents()
        )));
    }
    if let Some(&s) = obs.iter().find(|&&s| s >= profile.alphabet()) {
        return Err(Error::InvalidParams(format!("symbol {s} outside the alphabet")));
    }
    Ok(())
}

/// `log ψ = w_lik · log L + w_prior · log μ`, normalized per row.
fn local_update(
    log_mu: &DMatrix<f64>,
    log_psi: &mut DMatrix<f64>,
    obs: &[usize],
    profile: &LikelihoodProfile,
    w_lik: f64,
    w_prior: f64,
) {
    for k in 0..log_mu.nrows() {
        for t in 0..log_mu.ncols() {
            log_psi[(k, t)] =
                w_lik * profile.log_likelihood(k, t, obs[k]) + w_prior * log_mu[(k, t)];
        }
    }
    normalize_log_rows(log_psi);
}

/// Bayesian update `ψ_k(θ) ∝ L_k(ζ_k | θ) μ_k(θ)`; returns public log-beliefs.
pub fn bayesian_update(
    state: &BeliefState,
    observations: &[usize],
    profile: &LikelihoodProfile,
) -> Result<DMatrix<f64>> {
    check_observations(observations, profile, state.num_agents())?;
    let mut out = state.log_mu.clone();
    local_update(&state.log_mu, &mut out, observations, profile, 1.0, 1.0);
    Ok(out)
}

pub fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::DeltaOutOfRange(delta))
    }
}

/// Adaptive update `ψ_k(θ) ∝ L_k(ζ_k | θ)^δ μ_k(θ)^{1-δ}`; returns public
/// log-beliefs.
pub fn asl_update(
    state: &BeliefState,
    observations: &[usize],
    profile: &LikelihoodProfile,
    delta: f64,
) -> Result<DMatrix<f64>> {
    check_delta(delta)?;
    check_observations(observations, profile, state.num_agents())?;
    let mut out = state.log_mu.clone();
    local_update(&state.log_mu, &mut out, observations, profile, delta, 1.0 - delta);
    Ok(out)
}

/// Geometric averaging `μ_k(θ) ∝ Π_ℓ ψ_ℓ(θ)^{a_ℓk}`; returns private
/// log-beliefs.
pub fn geometric_combine(log_public: &DMatrix<f64>, combination: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = log_public.nrows();
    if combination.nrows() != n || combination.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "combination is {}x{} but there are {n} agents",
            combination.nrows(),
            combination.ncols()
        )));
    }
    let mut out = combination.tr_mul(log_public);
    normalize_log_rows(&mut out);
    Ok(out)
}

/// Row-wise argmax; ties go to the lowest hypothesis index. Works on
/// beliefs or log-beliefs alike.
pub fn estimate_state(beliefs: &DMatrix<f64>) -> Vec<usize> {
    beliefs
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for (t, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = t;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Strategy {
    Traditional,
    Asl { delta: f64 },
}

impl Strategy {
    pub fn delta(&self) -> Option<f64> {
        match self {
            Strategy::Traditional => None,
            Strategy::Asl { delta } => Some(*delta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Strategy::Traditional => Ok(()),
            Strategy::Asl { delta } => check_delta(*delta),
        }
    }

    /// Weights on `(log L, log μ)` in the local update.
    fn weights(&self) -> (f64, f64) {
        match self {
            Strategy::Traditional => (1.0, 1.0),
            Strategy::Asl { delta } => (*delta, 1.0 - delta),
        }
    }

    /// Default steady-state burn-in: `ceil(5/δ)` for ASL, none otherwise.
    pub fn default_burn_in(&self) -> usize {
        match self {
            Strategy::Traditional => 0,
            Strategy::Asl { delta } => (5.0 / delta).ceil() as usize,
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Traditional => write!(f, "traditional"),
            Strategy::Asl { delta } => write!(f, "asl({delta})"),
        }
    }
}

/// Which belief the state estimate is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    #[default]
    Mu,
    Psi,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialBelief {
    #[default]
    Uniform,
    Shared(Vec<f64>),
}

impl InitialBelief {
    pub fn state(&self, agents: usize, hypotheses: usize) -> Result<BeliefState> {
        match self {
            InitialBelief::Uniform => Ok(BeliefState::uniform(agents, hypotheses)),
            InitialBelief::Shared(prior) => {
                if prior.len() != hypotheses {
                    return Err(Error::DimensionMismatch(format!(
                        "prior has {} entries for {hypotheses} hypotheses",
                        prior.len()
                    )));
                }
                BeliefState::shared_prior(agents, prior)
            }
        }
    }
}

/// A running learning process over a fixed network.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    combination: &'a DMatrix<f64>,
    profile: &'a LikelihoodProfile,
    strategy: Strategy,
    sampler: ObservationSampler,
    rngs: Vec<StreamRng>,
    state: BeliefState,
    observations: Vec<usize>,
}

impl<'a> Simulation<'a> {
    pub fn new(
        combination: &'a DMatrix<f64>,
        profile: &'a LikelihoodProfile,
        strategy: Strategy,
        seed: u64,
        initial: &InitialBelief,
    ) -> Result<Self> {
        strategy.validate()?;
        let n = profile.num_agents();
        if combination.nrows() != n || combination.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "network has {} agents but the profile has {n}",
                combination.nrows()
            )));
        }
        Ok(Simulation {
            combination,
            profile,
            strategy,
            sampler: ObservationSampler::new(profile)?,
            rngs: (0..n).map(|k| rng::agent_stream(seed, k)).collect(),
            state: initial.state(n, profile.num_hypotheses())?,
            observations: vec![0; n],
        })
    }

    /// Samples one observation per agent, then updates and combines.
    pub fn step(&mut self) {
        for (k, (rng, obs)) in self.rngs.iter_mut().zip(&mut self.observations).enumerate() {
            *obs = self.sampler.sample(k, rng);
        }
        self.advance();
    }

    /// Like [`Simulation::step`] with externally supplied observations.
    pub fn step_with(&mut self, observations: &[usize]) -> Result<()> {
        check_observations(observations, self.profile, self.state.num_agents())?;
        self.observations.copy_from_slice(observations);
        self.advance();
        Ok(())
    }

    fn advance(&mut self) {
        let (w_lik, w_prior) = self.strategy.weights();
        let s = &mut self.state;
        local_update(&s.log_mu, &mut s.log_psi, &self.observations, self.profile, w_lik, w_prior);
        s.log_mu.gemm_tr(1.0, self.combination, &s.log_psi, 0.0);
        normalize_log_rows(&mut s.log_mu);
        s.iteration += 1;
    }

    pub fn state(&self) -> &BeliefState {
        &self.state
    }

    /// Observations consumed by the latest step.
    pub fn observations(&self) -> &[usize] {
        &self.observations
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn estimates(&self, estimator: Estimator) -> Vec<usize> {
        match estimator {
            Estimator::Mu => estimate_state(&self.state.log_mu),
            Estimator::Psi => estimate_state(&self.state.log_psi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOptions {
    /// Hypothesis pair `(a, b)` of the recorded ratio `log(·(θa)/·(θb))`.
    pub pair: (usize, usize),
    pub estimator: Estimator,
    pub observations: bool,
    pub initial: InitialBelief,
}

impl Default for RecordOptions {
    fn default() -> Self {
        RecordOptions {
            pair: (0, 1),
            estimator: Estimator::Mu,
            observations: false,
            initial: InitialBelief::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub seed: u64,
    pub strategy: Strategy,
    pub delta: Option<f64>,
    pub horizon: usize,
    pub agents: usize,
    pub hypotheses: usize,
    pub pair: (usize, usize),
    pub estimator: Estimator,
    pub initial: InitialBelief,
    pub graph_draws: usize,
    pub burn_in: usize,
    /// Free-form description of the network law (e.g. serialized SBM
    /// parameters) supplied by the caller.
    pub network: Option<serde_json::Value>,
    pub profile: Option<String>,
    pub version: String,
}

/// Record of one run. Iteration 0 is the initial state; iterations
/// `1..=horizon` follow each update/combine step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub clusters: Vec<usize>,
    public_ratio: Vec<f64>,
    private_ratio: Vec<f64>,
    estimates: Vec<usize>,
    observations: Option<Vec<usize>>,
}

impl Trace {
    pub fn agents(&self) -> usize {
        self.meta.agents
    }

    /// Number of recorded iterations including the initial state.
    pub fn len(&self) -> usize {
        self.meta.horizon + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn idx(&self, iter: usize, agent: usize) -> usize {
        iter * self.meta.agents + agent
    }

    pub fn public_log_ratio(&self, iter: usize, agent: usize) -> f64 {
        self.public_ratio[self.idx(iter, agent)]
    }

    pub fn private_log_ratio(&self, iter: usize, agent: usize) -> f64 {
        self.private_ratio[self.idx(iter, agent)]
    }

    pub fn estimate(&self, iter: usize, agent: usize) -> usize {
        self.estimates[self.idx(iter, agent)]
    }

    /// Observation consumed at `iter` (`None` at iteration 0 or when not
    /// recorded).
    pub fn observation(&self, iter: usize, agent: usize) -> Option<usize> {
        match &self.observations {
            Some(obs) if iter > 0 => Some(obs[(iter - 1) * self.meta.agents + agent]),
            _ => None,
        }
    }

    /// Public log-ratio series of one agent over iterations `0..=horizon`.
    pub fn public_series(&self, agent: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.public_log_ratio(i, agent)).collect()
    }

    pub fn private_series(&self, agent: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.private_log_ratio(i, agent)).collect()
    }

    /// Writes `iter,agent,cluster,log_ratio,estimate[,obs]` rows, with the
    /// public log-ratio in the `log_ratio` column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let with_obs = self.observations.is_some();
        if with_obs {
            writeln!(out, "iter,agent,cluster,log_ratio,estimate,obs")?;
        } else {
            writeln!(out, "iter,agent,cluster,log_ratio,estimate")?;
        }
        for i in 0..self.len() {
            for k in 0..self.agents() {
                write!(
                    out,
                    "{i},{k},{},{:.17e},{}",
                    self.clusters[k],
                    self.public_log_ratio(i, k),
                    self.estimate(i, k)
                )?;
                if with_obs {
                    match self.observation(i, k) {
                        Some(o) => write!(out, ",{o}")?,
                        None => write!(out, ",")?,
                    }
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    pub fn write_meta<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.meta)?;
        Ok(())
    }
}

/// Runs `horizon` steps from the configured initial beliefs.
pub fn run(
    network: &Network,
    profile: &LikelihoodProfile,
    strategy: Strategy,
    horizon: usize,
    seed: u64,
    record: &RecordOptions,
) -> Result<Trace> {
    let (a, b) = record.pair;
    let h = profile.num_hypotheses();
    if a >= h || b >= h || a == b {
        return Err(Error::InvalidParams(format!(
            "hypothesis pair ({a}, {b}) is invalid for {h} hypotheses"
        )));
    }
    let mut sim = Simulation::new(&network.combination, profile, strategy, seed, &record.initial)?;
    let n = network.size();
    let cap = (horizon + 1) * n;
    let mut public_ratio = Vec::with_capacity(cap);
    let mut private_ratio = Vec::with_capacity(cap);
    let mut estimates = Vec::with_capacity(cap);
    let mut observations = record.observations.then(|| Vec::with_capacity(horizon * n));

    let mut push = |sim: &Simulation| {
        let s = sim.state();
        for k in 0..n {
            public_ratio.push(s.public_log_ratio(k, a, b));
            private_ratio.push(s.private_log_ratio(k, a, b));
        }
        estimates.extend(sim.estimates(record.estimator));
    };
    push(&sim);
    for _ in 0..horizon {
        sim.step();
        if let Some(obs) = observations.as_mut() {
            obs.extend_from_slice(sim.observations());
        }
        push(&sim);
    }

    Ok(Trace {
        meta: TraceMeta {
            seed,
            strategy,
            delta: strategy.delta(),
            horizon,
            agents: n,
            hypotheses: h,
            pair: record.pair,
            estimator: record.estimator,
            initial: record.initial.clone(),
            graph_draws: network.draws,
            burn_in: strategy.default_burn_in().min(horizon),
            network: None,
            profile: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        clusters: network.clusters.clone(),
        public_ratio,
        private_ratio,
        estimates,
        observations,
    })
}

/// Trailing mean over `window` samples; the first `window - 1` entries are
/// `None`.
pub fn windowed_mean(series: &[f64], window: usize) -> Result<Vec<Option<f64>>> {
    if window == 0 || window > series.len() {
        return Err(Error::WindowTooLarge {
            window,
            horizon: series.len(),
        });
    }
    let mut out = vec![None; series.len()];
    let mut sum: f64 = series[..window - 1].iter().sum();
    for i in window - 1..series.len() {
        sum += series[i];
        out[i] = Some(sum / window as f64);
        sum -= series[i + 1 - window];
    }
    Ok(out)
}

/// Trailing-window mean of each agent's public log-ratio over iterations
/// `1..=horizon`; `result[k][i - 1]` belongs to iteration `i`.
pub fn windowed_mean_log_ratio(trace: &Trace, window: usize) -> Result<Vec<Vec<Option<f64>>>> {
    let horizon = trace.meta.horizon;
    if window == 0 || window > horizon {
        return Err(Error::WindowTooLarge { window, horizon });
    }
    (0..trace.agents())
        .map(|k| windowed_mean(&trace.public_series(k)[1..], window))
        .collect()
}

/// Reads the `log_ratio` column of a trace CSV back as a `[iter][agent]`
/// table together with the cluster column.
pub fn read_trace_csv<R: BufRead>(input: R) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty trace file"))?;
    let header = header?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::parse(1, format!("missing `{name}` column")))
    };
    let (ci, ca, cc, cr) = (col("iter")?, col("agent")?, col("cluster")?, col("log_ratio")?);

    let mut rows: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |c: usize| {
            f.get(c)
                .copied()
                .ok_or_else(|| Error::parse(i + 1, "too few columns"))
        };
        let parse_u = |c: usize| -> Result<usize> {
            let s = get(c)?;
            s.parse().map_err(|e| Error::parse(i + 1, format!("`{s}`: {e}")))
        };
        let s = get(cr)?;
        let r: f64 = s.parse().map_err(|e| Error::parse(i + 1, format!("`{s}`: {e}")))?;
        rows.push((parse_u(ci)?, parse_u(ca)?, parse_u(cc)?, r));
    }
    let iters = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let agents = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    let mut table = vec![vec![f64::NAN; agents]; iters];
    let mut clusters = vec![0; agents];
    for (it, k, c, r) in rows {
        table[it][k] = r;
        clusters[k] = c;
    }
    if let Some(it) = table.iter().position(|row| row.iter().any(|v| v.is_nan())) {
        return Err(Error::parse(0, format!("trace has no value for some agent at iteration {it}")));
    }
    Ok((table, clusters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::HypothesisSet;
    use crate::sbm::{sample_sbm, SbmParams};
    use approx::assert_abs_diff_eq;
    use super::Strategy;
    use proptest::prelude::{prop_assert, proptest};

    fn probs(m: &DMatrix<f64>, k: usize) -> Vec<f64> {
        m.row(k).iter().map(|v| v.exp()).collect()
    }

    fn single_agent(dists: Vec<Vec<f64>>) -> LikelihoodProfile {
        let h = HypothesisSet::indexed(dists.len()).unwrap();
        LikelihoodProfile::shared(h, dists, vec![0]).unwrap()
    }

    fn state_from(p: &[&[f64]]) -> BeliefState {
        let m = DMatrix::from_fn(p.len(), p[0].len(), |k, t| p[k][t].ln());
        BeliefState::from_log_private(m).unwrap()
    }

    #[test]
    fn bayesian_update_examples() {
        let flat = single_agent(vec![vec![0.3, 0.7], vec![0.3, 0.7]]);
        let s = BeliefState::uniform(1, 2);
        let psi = bayesian_update(&s, &[1], &flat).unwrap();
        assert_abs_diff_eq!(probs(&psi, 0)[0], 0.5, epsilon = 1e-15);

        let two_to_one = single_agent(vec![vec![0.6, 0.4], vec![0.3, 0.7]]);
        let psi = bayesian_update(&s, &[0], &two_to_one).unwrap();
        assert_abs_diff_eq!(probs(&psi, 0)[0], 2.0 / 3.0, epsilon = 1e-15);

        // Observed symbol 1 has likelihood 0.1 under θ0 and 0.5 under θ1.
        let bern = single_agent(vec![vec![0.9, 0.1], vec![0.5, 0.5]]);
        let s = state_from(&[&[0.9, 0.1]]);
        let p = probs(&bayesian_update(&s, &[1], &bern).unwrap(), 0);
        assert_abs_diff_eq!(p[0], 9.0 / 14.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p[1], 5.0 / 14.0, epsilon = 1e-14);
    }

    #[test]
    fn asl_update_examples() {
        let bern = single_agent(vec![vec![0.9, 0.1], vec![0.5, 0.5]]);
        let s = BeliefState::uniform(1, 2);
        let psi = asl_update(&s, &[1], &bern, 0.5).unwrap();
        assert_abs_diff_eq!(psi[(0, 0)] - psi[(0, 1)], 0.5 * 0.2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(psi[(0, 0)] - psi[(0, 1)], -0.8047, epsilon = 1e-4);

        let s = state_from(&[&[0.99, 0.01]]);
        let llr = 0.2f64.ln();
        let prior = 99f64.ln();
        let hi = asl_update(&s, &[1], &bern, 1.0 - 1e-12).unwrap();
        assert!((hi[(0, 0)] - hi[(0, 1)] - llr).abs() < 1e-9);
        let lo = asl_update(&s, &[1], &bern, 1e-12).unwrap();
        assert!((lo[(0, 0)] - lo[(0, 1)] - prior).abs() < 1e-9);

        for d in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(asl_update(&s, &[1], &bern, d), Err(Error::DeltaOutOfRange(_))));
        }
    }

    #[test]
    fn combine_examples() {
        let psi = state_from(&[&[0.8, 0.2], &[0.2, 0.8]]).log_private().clone();
        let id = DMatrix::<f64>::identity(2, 2);
        let mu = geometric_combine(&psi, &id).unwrap();
        assert!((&mu - &psi).amax() < 1e-15);

        let half = DMatrix::from_element(2, 2, 0.5);
        let mu = geometric_combine(&psi, &half).unwrap();
        assert_abs_diff_eq!(probs(&mu, 0)[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(probs(&mu, 1)[0], 0.5, epsilon = 1e-15);

        // Column 0 of A holds agent 0's weights on (agent 0, agent 1).
        let a = DMatrix::from_row_slice(2, 2, &[0.75, 0.5, 0.25, 0.5]);
        let mu = geometric_combine(&psi, &a).unwrap();
        let ratio = 0.75 * 4f64.ln() + 0.25 * 0.25f64.ln();
        assert_abs_diff_eq!(mu[(0, 0)] - mu[(0, 1)], ratio, epsilon = 1e-14);
        assert_abs_diff_eq!(ratio, 2f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(probs(&mu, 0)[0], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn estimate_examples() {
        let m = DMatrix::from_row_slice(3, 3, &[0.9, 0.1, 0.0, 0.5, 0.5, 0.0, 0.2, 0.3, 0.5]);
        assert_eq!(estimate_state(&m), vec![0, 0, 2]);
        let logm = m.map(|v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY });
        assert_eq!(estimate_state(&logm), vec![0, 0, 2]);
    }

    #[test]
    fn windowed_examples() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(windowed_mean(&s, 1).unwrap(), s.map(Some).to_vec());
        assert_eq!(
            windowed_mean(&s, 2).unwrap(),
            vec![None, Some(1.5), Some(2.5), Some(3.5)]
        );
        let c = windowed_mean(&[0.7; 10], 4).unwrap();
        assert!(c[3..].iter().all(|v| (v.unwrap() - 0.7).abs() < 1e-15));
        assert!(matches!(windowed_mean(&s, 5), Err(Error::WindowTooLarge { .. })));
        assert!(windowed_mean(&s, 0).is_err());
    }

    fn paper_setup(seed: u64) -> (Network, LikelihoodProfile) {
        let params = SbmParams::symmetric(15, 0.8, 0.1).unwrap();
        let net = sample_sbm(&params, seed, true, 100).unwrap();
        let truth = net.clusters.clone();
        (net, LikelihoodProfile::bernoulli(&[0.1, 0.5], truth).unwrap())
    }

    #[test]
    fn horizon_zero_is_initial_state() {
        let (net, profile) = paper_setup(1);
        let t = run(&net, &profile, Strategy::Asl { delta: 0.1 }, 0, 3, &RecordOptions::default())
            .unwrap();
        assert_eq!(t.len(), 1);
        assert!((0..30).all(|k| t.public_log_ratio(0, k) == 0.0 && t.estimate(0, k) == 0));
        assert!(windowed_mean_log_ratio(&t, 1).is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let (net, profile) = paper_setup(2);
        let rec = RecordOptions {
            observations: true,
            ..Default::default()
        };
        let a = run(&net, &profile, Strategy::Asl { delta: 0.2 }, 50, 11, &rec).unwrap();
        let b = run(&net, &profile, Strategy::Asl { delta: 0.2 }, 50, 11, &rec).unwrap();
        let c = run(&net, &profile, Strategy::Asl { delta: 0.2 }, 50, 12, &rec).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn trace_csv_round_trip() {
        let (net, profile) = paper_setup(3);
        let rec = RecordOptions {
            observations: true,
            ..Default::default()
        };
        let t = run(&net, &profile, Strategy::Traditional, 20, 5, &rec).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iter,agent,cluster,log_ratio,estimate,obs\n0,0,0,"));
        let (table, clusters) = read_trace_csv(buf.as_slice()).unwrap();
        assert_eq!(clusters, net.clusters);
        assert_eq!(table.len(), 21);
        for (i, row) in table.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                assert_eq!(v, t.public_log_ratio(i, k));
            }
        }
        let mut meta = Vec::new();
        t.write_meta(&mut meta).unwrap();
        let back: TraceMeta = serde_json::from_slice(&meta).unwrap();
        assert_eq!(back, t.meta);
    }

    #[test]
    fn traditional_learning_reaches_theta1() {
        // Mean-field network: uniform Perron vector, so θ1 is the network optimum.
        let params = SbmParams::symmetric(15, 0.8, 0.1).unwrap();
        let bar = crate::sbm::expected_combination(&params).unwrap().to_dense();
        let mut net = sample_sbm(&params, 0, true, 100).unwrap();
        net.adjacency = DMatrix::from_element(30, 30, 1);
        net.combination = bar;
        let profile = LikelihoodProfile::bernoulli(&[0.1, 0.5], net.clusters.clone()).unwrap();
        let runs = 100;
        let agree = (0..runs)
            .filter(|&seed| {
                let t = run(&net, &profile, Strategy::Traditional, 2000, seed, &RecordOptions::default())
                    .unwrap();
                (0..30).all(|k| t.estimate(2000, k) == 1)
            })
            .count();
        assert!(agree >= 95, "{agree}/{runs} runs settled on θ1");
    }

    #[test]
    fn interpolation_identity_per_step() {
        let (net, profile) = paper_setup(4);
        for delta in [0.05, 0.3, 0.9] {
            let mut sim =
                Simulation::new(&net.combination, &profile, Strategy::Asl { delta }, 8, &InitialBelief::Uniform)
                    .unwrap();
            for _ in 0..200 {
                let prev: Vec<f64> = (0..30).map(|k| sim.state().private_log_ratio(k, 0, 1)).collect();
                sim.step();
                for k in 0..30 {
                    let z = sim.observations()[k];
                    let llr = profile.log_likelihood(k, 0, z) - profile.log_likelihood(k, 1, z);
                    let expect = delta * llr + (1.0 - delta) * prev[k];
                    assert!((sim.state().public_log_ratio(k, 0, 1) - expect).abs() < 1e-12);
                }
                assert!(sim.state().is_valid());
            }
        }
    }

    proptest! {
        #[test]
        fn steps_conserve_simplex(seed in 0u64..500, h in 2usize..5, delta in 0.01f64..0.99) {
            let truth: Vec<usize> = (0..6).map(|k| k % h).collect();
            let profile = LikelihoodProfile::random_multinomial(h, 4, seed, truth).unwrap();
            let params = SbmParams::symmetric(3, 0.9, 0.3).unwrap();
            let net = sample_sbm(&params, seed, true, 100).unwrap();
            let strategy = if seed % 2 == 0 { Strategy::Traditional } else { Strategy::Asl { delta } };
            let mut sim = Simulation::new(&net.combination, &profile, strategy, seed, &InitialBelief::Uniform).unwrap();
            for _ in 0..50 {
                sim.step();
                prop_assert!(sim.state().is_valid());
            }
        }
    }
}
