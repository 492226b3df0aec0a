//! Monte Carlo replicates of one configuration with streaming statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, NetworkSpec};
use crate::error::{Error, Result};
use crate::learning::{run, Estimator, RecordOptions, Simulation, Strategy, Trace};
use crate::models::LikelihoodProfile;
use crate::sbm::{sample_block_model, sample_sbm, Network};

/// Replicates evaluated concurrently before their results are folded.
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentError {
    pub agent: usize,
    pub cluster: usize,
    pub p_err: f64,
    pub stderr: f64,
    pub errors: u64,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterError {
    pub cluster: usize,
    pub p_err: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Empirical `P(θ̂_k,i ≠ θ*_k)` over post-burn-in iterations and replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub estimator: Estimator,
    pub agents: Vec<AgentError>,
    pub clusters: Vec<ClusterError>,
}

impl ErrorReport {
    fn from_counts(errors: &[u64], samples: u64, clusters: &[usize], estimator: Estimator) -> Self {
        let se = |p: f64, n: u64| if n == 0 { 0.0 } else { (p * (1.0 - p) / n as f64).sqrt() };
        let frac = |e: u64, n: u64| if n == 0 { 0.0 } else { e as f64 / n as f64 };
        let agents = errors
            .iter()
            .enumerate()
            .map(|(k, &e)| {
                let p = frac(e, samples);
                AgentError {
                    agent: k,
                    cluster: clusters[k],
                    p_err: p,
                    stderr: se(p, samples),
                    errors: e,
                    samples,
                }
            })
            .collect();
        let c = clusters.iter().max().map_or(0, |m| m + 1);
        let clusters = (0..c)
            .map(|cl| {
                let (e, n) = errors
                    .iter()
                    .zip(clusters)
                    .filter(|(_, &x)| x == cl)
                    .fold((0, 0), |(e, n), (&x, _)| (e + x, n + samples));
                let p = frac(e, n);
                ClusterError {
                    cluster: cl,
                    p_err: p,
                    stderr: se(p, n),
                    samples: n,
                }
            })
            .collect();
        ErrorReport {
            estimator,
            agents,
            clusters,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("agent,cluster,p_err,stderr\n");
        for a in &self.agents {
            s.push_str(&format!("{},{},{},{}\n", a.agent, a.cluster, a.p_err, a.stderr));
        }
        s
    }
}

/// Steady-state statistics of one cluster's log-belief ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub cluster: usize,
    /// Mean over replicates of the cluster- and time-averaged public ratio.
    pub mean_public: f64,
    /// Standard error of `mean_public` across replicates.
    pub se_public: f64,
    pub mean_private: f64,
    pub se_private: f64,
    /// Per-agent variance over replicates and post-burn-in iterations,
    /// averaged over the cluster.
    pub var_public: f64,
    pub var_private: f64,
    /// Fraction of post-burn-in estimates equal to the agent's own truth.
    pub accuracy: f64,
}

/// Across-replicate statistics of one cluster's mean log-ratio at one
/// iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iter: usize,
    pub cluster: usize,
    pub mean_public: f64,
    pub sd_public: f64,
    pub mean_private: f64,
    pub sd_private: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub strategy: Strategy,
    pub delta: Option<f64>,
    pub horizon: usize,
    pub burn_in: usize,
    pub replicates: usize,
    pub completed: usize,
    pub base_seed: u64,
    pub fixed_graph: bool,
    pub pair: (usize, usize),
    pub cluster_sizes: Vec<usize>,
    pub max_graph_draws: usize,
    pub steady_state: Vec<SteadyState>,
    pub errors: ErrorReport,
    pub failures: Vec<ReplicateFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub summary: ExperimentSummary,
    pub curves: Vec<CurvePoint>,
    pub clusters: Vec<usize>,
    pub truth: Vec<usize>,
    /// Full traces of the leading replicates.
    pub traces: Vec<Trace>,
    /// Graph used by every replicate when the graph is fixed.
    pub fixed_network: Option<Network>,
}

impl ExperimentReport {
    pub fn steady(&self, cluster: usize) -> Option<&SteadyState> {
        self.summary.steady_state.iter().find(|s| s.cluster == cluster)
    }

    pub fn curves_csv(&self) -> String {
        let mut s = String::from("iter,cluster,mean_public,sd_public,mean_private,sd_private\n");
        for c in &self.curves {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.iter, c.cluster, c.mean_public, c.sd_public, c.mean_private, c.sd_private
            ));
        }
        s
    }
}

/// Per-replicate sums, folded in replicate order.
struct ReplicateStats {
    errors: Vec<u64>,
    sum_pub: Vec<f64>,
    sumsq_pub: Vec<f64>,
    sum_priv: Vec<f64>,
    sumsq_priv: Vec<f64>,
    /// `[iter * clusters + c]` cluster-mean ratios.
    curve_pub: Vec<f64>,
    curve_priv: Vec<f64>,
    draws: usize,
    trace: Option<Trace>,
}

struct Setup<'a> {
    config: &'a ExperimentConfig,
    strategy: Strategy,
    burn_in: usize,
    clusters: Vec<usize>,
    cluster_sizes: Vec<usize>,
    profile: LikelihoodProfile,
    fixed: Option<Network>,
}

impl Setup<'_> {
    fn network(&self, seed: u64) -> Result<Network> {
        if let Some(n) = &self.fixed {
            return Ok(n.clone());
        }
        let run = &self.config.run;
        match &self.config.network {
            NetworkSpec::Sbm(p) => sample_sbm(p, seed, true, run.max_retries),
            NetworkSpec::Blocks(m) => sample_block_model(m, seed, true, run.max_retries),
            NetworkSpec::File { .. } => self.config.load_network_file(),
        }
    }

    fn replicate(&self, r: usize) -> Result<ReplicateStats> {
        let run_cfg = &self.config.run;
        let seed = run_cfg.seed.wrapping_add(r as u64);
        let network = self.network(seed)?;
        if network.clusters != self.clusters {
            return Err(Error::MismatchedConfig("network clusters changed between replicates".into()));
        }
        let (a, b) = run_cfg.pair;
        let n = self.clusters.len();
        let c = self.cluster_sizes.len();
        let horizon = run_cfg.horizon;
        let mut st = ReplicateStats {
            errors: vec![0; n],
            sum_pub: vec![0.0; n],
            sumsq_pub: vec![0.0; n],
            sum_priv: vec![0.0; n],
            sumsq_priv: vec![0.0; n],
            curve_pub: vec![0.0; (horizon + 1) * c],
            curve_priv: vec![0.0; (horizon + 1) * c],
            draws: network.draws,
            trace: None,
        };
        let truth = self.profile.truth();
        let mut observe = |sim: &Simulation| {
            let s = sim.state();
            let i = s.iteration();
            for k in 0..n {
                let (x, y) = (s.public_log_ratio(k, a, b), s.private_log_ratio(k, a, b));
                let cl = self.clusters[k];
                let w = 1.0 / self.cluster_sizes[cl] as f64;
                st.curve_pub[i * c + cl] += x * w;
                st.curve_priv[i * c + cl] += y * w;
                if i > self.burn_in {
                    st.sum_pub[k] += x;
                    st.sumsq_pub[k] += x * x;
                    st.sum_priv[k] += y;
                    st.sumsq_priv[k] += y * y;
                }
            }
            if i > self.burn_in {
                for (k, e) in sim.estimates(run_cfg.estimator).into_iter().enumerate() {
                    if e != truth[k] {
                        st.errors[k] += 1;
                    }
                }
            }
        };
        let record = RecordOptions {
            pair: run_cfg.pair,
            estimator: run_cfg.estimator,
            ..Default::default()
        };
        let mut sim = Simulation::new(&network.combination, &self.profile, self.strategy, seed, &record.initial)?;
        observe(&sim);
        for _ in 0..horizon {
            sim.step();
            observe(&sim);
        }
        if r < run_cfg.traces {
            let mut trace = run(&network, &self.profile, self.strategy, horizon, seed, &record)?;
            trace.meta.burn_in = self.burn_in;
            trace.meta.network = serde_json::to_value(&self.config.network).ok();
            trace.meta.profile = Some(self.config.profile_reference());
            st.trace = Some(trace);
        }
        Ok(st)
    }
}

/// Runs every replicate of `config` for one `strategy`.
///
/// Replicate `r` uses seed `seed + r` for both its graph (unless the graph
/// is fixed) and its observations. Results do not depend on scheduling:
/// replicates are evaluated in parallel chunks and folded in order.
/// Failed replicates are listed in the summary; the run fails only when
/// no replicate completes.
pub fn run_experiment(config: &ExperimentConfig, strategy: Strategy) -> Result<ExperimentReport> {
    config.validate()?;
    strategy.validate()?;
    let run_cfg = &config.run;
    let cluster_sizes = config.sizes()?;
    let clusters: Vec<usize> = cluster_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
        .collect();
    let profile = config.profile(&clusters)?;
    let (a, b) = run_cfg.pair;
    if a >= profile.num_hypotheses() || b >= profile.num_hypotheses() || a == b {
        return Err(Error::Config(format!("invalid hypothesis pair ({a}, {b})")));
    }
    let fixed = match (&config.network, run_cfg.fixed_graph) {
        (NetworkSpec::File { .. }, _) => Some(config.load_network_file()?),
        (NetworkSpec::Sbm(p), true) => Some(sample_sbm(p, run_cfg.seed, true, run_cfg.max_retries)?),
        (NetworkSpec::Blocks(m), true) => Some(sample_block_model(m, run_cfg.seed, true, run_cfg.max_retries)?),
        _ => None,
    };
    let setup = Setup {
        config,
        strategy,
        burn_in: config.burn_in(strategy),
        clusters: clusters.clone(),
        cluster_sizes: cluster_sizes.clone(),
        profile,
        fixed,
    };

    let n = clusters.len();
    let c = cluster_sizes.len();
    let horizon = run_cfg.horizon;
    let window = (horizon - setup.burn_in) as u64;

    let mut errors = vec![0u64; n];
    let mut sum_pub = vec![0.0; n];
    let mut sumsq_pub = vec![0.0; n];
    let mut sum_priv = vec![0.0; n];
    let mut sumsq_priv = vec![0.0; n];
    // Replicate-level cluster time-averages: Σ and Σ².
    let mut rep_pub = vec![(0.0, 0.0); c];
    let mut rep_priv = vec![(0.0, 0.0); c];
    let mut curve = vec![[0.0f64; 4]; (horizon + 1) * c];
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    let mut completed = 0usize;
    let mut max_draws = 0;

    let ids: Vec<usize> = (0..run_cfg.replicates).collect();
    for chunk in ids.chunks(CHUNK) {
        let results: Vec<Result<ReplicateStats>> = if run_cfg.parallel {
            chunk.par_iter().map(|&r| setup.replicate(r)).collect()
        } else {
            chunk.iter().map(|&r| setup.replicate(r)).collect()
        };
        for (&r, res) in chunk.iter().zip(results) {
            let st = match res {
                Ok(st) => st,
                Err(e) => {
                    failures.push(ReplicateFailure {
                        replicate: r,
                        seed: run_cfg.seed.wrapping_add(r as u64),
                        error: e.to_string(),
                    });
                    continue;
                }
            };
            completed += 1;
            max_draws = max_draws.max(st.draws);
            for k in 0..n {
                errors[k] += st.errors[k];
                sum_pub[k] += st.sum_pub[k];
                sumsq_pub[k] += st.sumsq_pub[k];
                sum_priv[k] += st.sum_priv[k];
                sumsq_priv[k] += st.sumsq_priv[k];
            }
            if window > 0 {
                let mut cm_pub = vec![0.0; c];
                let mut cm_priv = vec![0.0; c];
                for k in 0..n {
                    let w = 1.0 / (window as f64 * cluster_sizes[clusters[k]] as f64);
                    cm_pub[clusters[k]] += st.sum_pub[k] * w;
                    cm_priv[clusters[k]] += st.sum_priv[k] * w;
                }
                for cl in 0..c {
                    rep_pub[cl].0 += cm_pub[cl];
                    rep_pub[cl].1 += cm_pub[cl] * cm_pub[cl];
                    rep_priv[cl].0 += cm_priv[cl];
                    rep_priv[cl].1 += cm_priv[cl] * cm_priv[cl];
                }
            }
            for (j, acc) in curve.iter_mut().enumerate() {
                let (x, y) = (st.curve_pub[j], st.curve_priv[j]);
                acc[0] += x;
                acc[1] += x * x;
                acc[2] += y;
                acc[3] += y * y;
            }
            if let Some(t) = st.trace {
                traces.push(t);
            }
        }
    }
    if completed == 0 {
        let first = failures.first().map_or(String::new(), |f| f.error.clone());
        return Err(Error::PreconditionFailed(format!(
            "all {} replicates failed; first error: {first}",
            run_cfg.replicates
        )));
    }

    let r = completed as f64;
    let mean_sd = |s: f64, ss: f64| {
        let m = s / r;
        let var = if completed > 1 {
            ((ss - s * s / r) / (r - 1.0)).max(0.0)
        } else {
            0.0
        };
        (m, var.sqrt())
    };
    let samples = completed as u64 * window;
    let error_report = ErrorReport::from_counts(&errors, samples, &clusters, run_cfg.estimator);

    let steady_state = if window > 0 {
        let per_agent_var = |s: &[f64], ss: &[f64], k: usize| {
            let m = samples as f64;
            if m > 1.0 {
                ((ss[k] - s[k] * s[k] / m) / (m - 1.0)).max(0.0)
            } else {
                0.0
            }
        };
        (0..c)
            .map(|cl| {
                let members: Vec<usize> = (0..n).filter(|&k| clusters[k] == cl).collect();
                let size = members.len() as f64;
                let (mp, sdp) = mean_sd(rep_pub[cl].0, rep_pub[cl].1);
                let (mq, sdq) = mean_sd(rep_priv[cl].0, rep_priv[cl].1);
                SteadyState {
                    cluster: cl,
                    mean_public: mp,
                    se_public: sdp / r.sqrt(),
                    mean_private: mq,
                    se_private: sdq / r.sqrt(),
                    var_public: members.iter().map(|&k| per_agent_var(&sum_pub, &sumsq_pub, k)).sum::<f64>() / size,
                    var_private: members.iter().map(|&k| per_agent_var(&sum_priv, &sumsq_priv, k)).sum::<f64>() / size,
                    accuracy: 1.0 - error_report.clusters[cl].p_err,
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    let curves = curve
        .iter()
        .enumerate()
        .map(|(j, acc)| {
            let (mp, sp) = mean_sd(acc[0], acc[1]);
            let (mq, sq) = mean_sd(acc[2], acc[3]);
            CurvePoint {
                iter: j / c,
                cluster: j % c,
                mean_public: mp,
                sd_public: sp,
                mean_private: mq,
                sd_private: sq,
            }
        })
        .collect();

    Ok(ExperimentReport {
        summary: ExperimentSummary {
            strategy,
            delta: strategy.delta(),
            horizon,
            burn_in: setup.burn_in,
            replicates: run_cfg.replicates,
            completed,
            base_seed: run_cfg.seed,
            fixed_graph: setup.fixed.is_some(),
            pair: run_cfg.pair,
            cluster_sizes,
            max_graph_draws: max_draws,
            steady_state,
            errors: error_report,
            failures,
        },
        curves,
        clusters,
        truth: setup.profile.truth().to_vec(),
        traces,
        fixed_network: setup.fixed,
    })
}

/// Error counts recomputed from a stored trace (estimates after
/// `burn_in`), for cross-checking the streaming counters.
pub fn error_counts_from_trace(trace: &Trace, truth: &[usize], burn_in: usize) -> Vec<u64> {
    (0..trace.agents())
        .map(|k| {
            (burn_in + 1..trace.len())
                .filter(|&i| trace.estimate(i, k) != truth[k])
                .count() as u64
        })
        .collect()
}
