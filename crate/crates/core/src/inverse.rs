//! Recovering step sizes from observed belief sequences: estimate each
//! agent's expected log-likelihood ratio under an assumed `δ`, score how
//! well the pair fits the recursion on held-out steps, and scan `δ`.

use std::collections::BTreeMap;
use std::io::BufRead;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{check_delta, read_trace_csv, run, InitialBelief, RecordOptions, Strategy, Trace};
use crate::models::LikelihoodProfile;
use crate::sbm::Network;

/// Public log-belief ratios `[step][agent]` with a train/validation split:
/// steps `0..split` train, steps `split..` validate.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefSeries {
    ratios: Vec<Vec<f64>>,
    split: usize,
    pub clusters: Option<Vec<usize>>,
}

impl BeliefSeries {
    /// `split = None` uses the first half for training.
    pub fn new(ratios: Vec<Vec<f64>>, split: Option<usize>) -> Result<Self> {
        let steps = ratios.len();
        if steps < 2 {
            return Err(Error::InsufficientSteps(format!("{steps} steps; need at least 2")));
        }
        let agents = ratios[0].len();
        if agents == 0 {
            return Err(Error::InvalidParams("series has no agents".into()));
        }
        if let Some(i) = ratios.iter().position(|r| r.len() != agents) {
            return Err(Error::DimensionMismatch(format!(
                "step {i} has {} agents instead of {agents}",
                ratios[i].len()
            )));
        }
        if ratios.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("log-ratios must be finite".into()));
        }
        let split = split.unwrap_or((steps / 2).max(1));
        if split < 1 || split >= steps {
            return Err(Error::InsufficientSteps(format!(
                "split {split} must lie in [1, {steps})"
            )));
        }
        Ok(BeliefSeries {
            ratios,
            split,
            clusters: None,
        })
    }

    /// Public log-ratios of a simulated trace.
    pub fn from_trace(trace: &Trace, split: Option<usize>) -> Result<Self> {
        let ratios = (0..trace.len())
            .map(|i| (0..trace.agents()).map(|k| trace.public_log_ratio(i, k)).collect())
            .collect();
        let mut s = Self::new(ratios, split)?;
        s.clusters = Some(trace.clusters.clone());
        Ok(s)
    }

    /// Reads a trace CSV written by [`Trace::write_csv`].
    pub fn read_trace<R: BufRead>(input: R, split: Option<usize>) -> Result<Self> {
        let (ratios, clusters) = read_trace_csv(input)?;
        let mut s = Self::new(ratios, split)?;
        s.clusters = Some(clusters);
        Ok(s)
    }

    /// Reads `step,agent,log_ratio` rows. Steps run from 0 to the largest
    /// step seen; a missing step repeats the agent's previous value, and
    /// steps before an agent's first row hold 0 (an undecided belief).
    /// Several rows for the same agent and step are averaged.
    pub fn read_generic_csv<R: BufRead>(input: R, split: Option<usize>) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty file"))?;
        let header = header?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let col = |name: &str| {
            cols.iter()
                .position(|c| *c == name)
                .ok_or_else(|| Error::parse(1, format!("missing `{name}` column")))
        };
        let (cs, ca, cr) = (col("step")?, col("agent")?, col("log_ratio")?);

        let mut cells: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
        let (mut steps, mut agents) = (0, 0);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let field = |c: usize| {
                f.get(c)
                    .copied()
                    .ok_or_else(|| Error::parse(i + 1, "too few columns"))
            };
            let step: usize = field(cs)?
                .parse()
                .map_err(|e| Error::parse(i + 1, format!("step: {e}")))?;
            let agent: usize = field(ca)?
                .parse()
                .map_err(|e| Error::parse(i + 1, format!("agent: {e}")))?;
            let r: f64 = field(cr)?
                .parse()
                .map_err(|e| Error::parse(i + 1, format!("log_ratio: {e}")))?;
            let cell = cells.entry((agent, step)).or_insert((0.0, 0));
            cell.0 += r;
            cell.1 += 1;
            steps = steps.max(step + 1);
            agents = agents.max(agent + 1);
        }
        let mut ratios = vec![vec![0.0; agents]; steps];
        for k in 0..agents {
            let mut last = 0.0;
            for (i, row) in ratios.iter_mut().enumerate() {
                if let Some(&(sum, count)) = cells.get(&(k, i)) {
                    last = sum / count as f64;
                }
                row[k] = last;
            }
        }
        Self::new(ratios, split)
    }

    pub fn steps(&self) -> usize {
        self.ratios.len()
    }

    pub fn agents(&self) -> usize {
        self.ratios[0].len()
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn with_split(mut self, split: usize) -> Result<Self> {
        if split < 1 || split >= self.steps() {
            return Err(Error::InsufficientSteps(format!(
                "split {split} must lie in [1, {})",
                self.steps()
            )));
        }
        self.split = split;
        Ok(self)
    }

    pub fn ratio(&self, step: usize, agent: usize) -> f64 {
        self.ratios[step][agent]
    }

    fn step_vector(&self, step: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.ratios[step])
    }

    /// Same series with agents reordered: new agent `i` is old `order[i]`.
    pub fn permute_agents(&self, order: &[usize]) -> Self {
        BeliefSeries {
            ratios: self
                .ratios
                .iter()
                .map(|r| order.iter().map(|&o| r[o]).collect())
                .collect(),
            split: self.split,
            clusters: self
                .clusters
                .as_ref()
                .map(|c| order.iter().map(|&o| c[o]).collect()),
        }
    }
}

fn check_combination(series: &BeliefSeries, a: &DMatrix<f64>) -> Result<()> {
    let n = series.agents();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "combination is {}x{} for {n} agents",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Recursion weights `(w_prev, w_lik)` in `ψ_i = w_prev Aᵀψ_{i-1} + w_lik ν`.
fn weights(delta: Option<f64>) -> Result<(f64, f64)> {
    match delta {
        Some(d) => {
            check_delta(d)?;
            Ok((1.0 - d, d))
        }
        None => Ok((1.0, 1.0)),
    }
}

fn estimate_with(series: &BeliefSeries, a: &DMatrix<f64>, delta: Option<f64>) -> Result<Vec<f64>> {
    let (w_prev, w_lik) = weights(delta)?;
    check_combination(series, a)?;
    let n1 = series.split();
    if n1 < 2 {
        return Err(Error::InsufficientSteps(format!(
            "training segment has {n1} steps; need at least 2"
        )));
    }
    let mut acc = DVector::zeros(series.agents());
    let mut prev = series.step_vector(0);
    for i in 1..n1 {
        let cur = series.step_vector(i);
        let mut r = a.tr_mul(&prev);
        r *= -w_prev;
        r += &cur;
        acc += r / w_lik;
        prev = cur;
    }
    Ok((acc / (n1 - 1) as f64).iter().copied().collect())
}

/// Per-agent expected log-likelihood ratio implied by the training steps
/// under step size `delta`:
/// `mean_{i=1..N1-1} (ψ_{k,i} - (1-δ) Σ_ℓ a_ℓk ψ_{ℓ,i-1}) / δ`.
pub fn estimate_log_likelihoods(series: &BeliefSeries, combination: &DMatrix<f64>, delta: f64) -> Result<Vec<f64>> {
    estimate_with(series, combination, Some(delta))
}

/// Traditional-learning counterpart of [`estimate_log_likelihoods`]:
/// `mean (ψ_{k,i} - Σ_ℓ a_ℓk ψ_{ℓ,i-1})`.
pub fn estimate_log_likelihoods_traditional(series: &BeliefSeries, combination: &DMatrix<f64>) -> Result<Vec<f64>> {
    estimate_with(series, combination, None)
}

fn fit_error_with(
    series: &BeliefSeries,
    a: &DMatrix<f64>,
    delta: Option<f64>,
    estimates: &[f64],
) -> Result<f64> {
    let (w_prev, w_lik) = weights(delta)?;
    check_combination(series, a)?;
    let n = series.agents();
    if estimates.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} estimates for {n} agents",
            estimates.len()
        )));
    }
    let (start, end) = (series.split(), series.steps());
    if start >= end {
        return Err(Error::InsufficientSteps("validation segment is empty".into()));
    }
    let mut cur = DVector::zeros(n);
    let mut prev = DVector::zeros(n);
    for i in start..end {
        cur += series.step_vector(i);
        prev += series.step_vector(i - 1);
    }
    let m = (end - start) as f64;
    cur /= m;
    prev /= m;
    let resid = cur - a.tr_mul(&prev) * w_prev - DVector::from_column_slice(estimates) * w_lik;
    Ok((resid.norm_squared() / n as f64).sqrt())
}

/// Root-mean-square residual of the recursion on the validation steps:
/// `r(δ) = sqrt(mean_k (E ψ_{k,i} - (1-δ) Σ_ℓ a_ℓk E ψ_{ℓ,i-1} - δ c_k)²)`,
/// with `E ψ_{·,i}` the mean over validation steps and `E ψ_{·,i-1}` the
/// mean over the same steps shifted back by one.
pub fn fit_error(series: &BeliefSeries, combination: &DMatrix<f64>, delta: f64, estimates: &[f64]) -> Result<f64> {
    fit_error_with(series, combination, Some(delta), estimates)
}

/// Fit error of traditional learning (`ψ_i = Aᵀψ_{i-1} + ν`).
pub fn fit_error_traditional(series: &BeliefSeries, combination: &DMatrix<f64>, estimates: &[f64]) -> Result<f64> {
    fit_error_with(series, combination, None, estimates)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub delta: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    /// Fit error of traditional learning, reported in place of `δ = 0`.
    pub traditional: Option<f64>,
    pub argmin: f64,
    pub min_error: f64,
}

impl ScanResult {
    /// `delta,error` rows; traditional learning appears as `0` first.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,error,strategy\n");
        if let Some(t) = self.traditional {
            s.push_str(&format!("0,{t:.17e},traditional\n"));
        }
        for p in &self.points {
            s.push_str(&format!("{},{:.17e},asl\n", p.delta, p.error));
        }
        s
    }
}

/// `0.025, 0.05, …, 0.975`.
pub fn default_grid() -> Vec<f64> {
    (1..=39).map(|i| i as f64 * 0.025).collect()
}

/// Fits every `δ` of `grid` on the training steps, scores it on the
/// validation steps and returns the best. Ties keep the first grid value.
pub fn scan_delta(
    series: &BeliefSeries,
    combination: &DMatrix<f64>,
    grid: &[f64],
    include_traditional: bool,
) -> Result<ScanResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("empty δ grid".into()));
    }
    let points = grid
        .par_iter()
        .map(|&delta| {
            let c = estimate_log_likelihoods(series, combination, delta)?;
            Ok(ScanPoint {
                delta,
                error: fit_error(series, combination, delta, &c)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let traditional = if include_traditional {
        let c = estimate_log_likelihoods_traditional(series, combination)?;
        Some(fit_error_traditional(series, combination, &c)?)
    } else {
        None
    };
    let best = points
        .iter()
        .fold(&points[0], |b, p| if p.error < b.error { p } else { b });
    Ok(ScanResult {
        argmin: best.delta,
        min_error: best.error,
        points,
        traditional,
    })
}

/// Noiseless adaptive recursion `ψ_i = δ c + (1-δ) Aᵀ ψ_{i-1}` started from
/// `initial`, for `steps` steps including the initial one.
pub fn noiseless_series(
    combination: &DMatrix<f64>,
    log_likelihoods: &[f64],
    delta: f64,
    initial: &[f64],
    steps: usize,
    split: Option<usize>,
) -> Result<BeliefSeries> {
    check_delta(delta)?;
    let n = combination.nrows();
    if combination.ncols() != n || log_likelihoods.len() != n || initial.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "combination {}x{}, {} log-likelihoods, {} initial values",
            combination.nrows(),
            combination.ncols(),
            log_likelihoods.len(),
            initial.len()
        )));
    }
    let c = DVector::from_column_slice(log_likelihoods);
    let mut psi = DVector::from_column_slice(initial);
    let mut ratios = Vec::with_capacity(steps);
    for i in 0..steps {
        if i > 0 {
            psi = combination.tr_mul(&psi) * (1.0 - delta) + &c * delta;
        }
        ratios.push(psi.iter().copied().collect());
    }
    BeliefSeries::new(ratios, split)
}

/// Sampled adaptive-learning series over `network` starting from a shared
/// prior whose log-ratio `log(μ(θ0)/μ(θ1))` is `prior_log_ratio`.
pub fn simulated_series(
    network: &Network,
    profile: &LikelihoodProfile,
    delta: f64,
    steps: usize,
    seed: u64,
    prior_log_ratio: f64,
    split: Option<usize>,
) -> Result<BeliefSeries> {
    if steps < 2 {
        return Err(Error::InsufficientSteps(format!("{steps} steps; need at least 2")));
    }
    let h = profile.num_hypotheses();
    // log μ(θ0) - log μ(θ1) = prior_log_ratio; the rest share θ1's mass.
    let mut prior = vec![1.0; h];
    prior[0] = prior_log_ratio.exp();
    let record = RecordOptions {
        pair: (0, 1),
        initial: InitialBelief::Shared(prior),
        ..Default::default()
    };
    let trace = run(network, profile, Strategy::Asl { delta }, steps - 1, seed, &record)?;
    BeliefSeries::from_trace(&trace, split)
}
