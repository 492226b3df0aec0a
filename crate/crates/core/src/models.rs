//! Hypotheses, per-agent discrete likelihood models, observation sampling,
//! and KL-divergence based informativeness measures.

use std::io::{BufRead, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Smallest likelihood entry accepted in a profile; keeps log-likelihood
/// ratios finite.
pub const MIN_LIKELIHOOD: f64 = 1e-12;
const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisSet {
    labels: Vec<String>,
}

impl HypothesisSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidParams("need at least two hypotheses".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidParams(format!("duplicate hypothesis label `{l}`")));
            }
        }
        Ok(HypothesisSet { labels })
    }

    /// `theta0`, `theta1`, ...
    pub fn indexed(count: usize) -> Result<Self> {
        Self::new((0..count).map(|i| format!("theta{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Likelihood tables `L_k(· | θ)` over a finite alphabet for every agent,
/// plus each agent's true hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodProfile {
    hypotheses: HypothesisSet,
    alphabet: usize,
    /// `[agent][hypothesis][symbol]`, flattened.
    table: Vec<f64>,
    log_table: Vec<f64>,
    truth: Vec<usize>,
}

impl LikelihoodProfile {
    /// `likelihoods[k][θ]` is agent `k`'s distribution under hypothesis `θ`.
    pub fn new(
        hypotheses: HypothesisSet,
        likelihoods: Vec<Vec<Vec<f64>>>,
        truth: Vec<usize>,
    ) -> Result<Self> {
        let agents = likelihoods.len();
        if agents == 0 {
            return Err(Error::InvalidParams("profile has no agents".into()));
        }
        if truth.len() != agents {
            return Err(Error::DimensionMismatch(format!(
                "{agents} agents but {} true states",
                truth.len()
            )));
        }
        let h = hypotheses.len();
        let alphabet = likelihoods[0].first().map_or(0, Vec::len);
        if alphabet == 0 {
            return Err(Error::InvalidLikelihood("empty observation alphabet".into()));
        }
        let mut table = Vec::with_capacity(agents * h * alphabet);
        for (k, per_agent) in likelihoods.iter().enumerate() {
            if per_agent.len() != h {
                return Err(Error::DimensionMismatch(format!(
                    "agent {k} has {} distributions for {h} hypotheses",
                    per_agent.len()
                )));
            }
            for (theta, dist) in per_agent.iter().enumerate() {
                if dist.len() != alphabet {
                    return Err(Error::DimensionMismatch(format!(
                        "agent {k}, hypothesis {theta}: alphabet size {} instead of {alphabet}",
                        dist.len()
                    )));
                }
                check_distribution(dist).map_err(|msg| {
                    Error::InvalidLikelihood(format!("agent {k}, hypothesis {theta}: {msg}"))
                })?;
                table.extend_from_slice(dist);
            }
        }
        if let Some(&bad) = truth.iter().find(|&&t| t >= h) {
            return Err(Error::InvalidParams(format!("true state {bad} out of range")));
        }
        let log_table = table.iter().map(|p| p.ln()).collect();
        Ok(LikelihoodProfile {
            hypotheses,
            alphabet,
            table,
            log_table,
            truth,
        })
    }

    /// Every agent shares the same per-hypothesis distributions.
    pub fn shared(
        hypotheses: HypothesisSet,
        distributions: Vec<Vec<f64>>,
        truth: Vec<usize>,
    ) -> Result<Self> {
        let likelihoods = vec![distributions; truth.len()];
        Self::new(hypotheses, likelihoods, truth)
    }

    /// Bernoulli models: hypothesis `θ` emits symbol 1 with probability
    /// `success[θ]`.
    pub fn bernoulli(success: &[f64], truth: Vec<usize>) -> Result<Self> {
        let dists = success.iter().map(|&p| vec![1.0 - p, p]).collect();
        Self::shared(HypothesisSet::indexed(success.len())?, dists, truth)
    }

    /// Shared multinomial models with entries drawn uniform(0, 1) and then
    /// normalized, one distribution per hypothesis.
    pub fn random_multinomial(
        hypotheses: usize,
        alphabet: usize,
        seed: u64,
        truth: Vec<usize>,
    ) -> Result<Self> {
        let mut rng = rng::aux_stream(seed);
        let dists = (0..hypotheses)
            .map(|_| {
                // Reject exact zeros so every entry stays strictly positive.
                let raw: Vec<f64> = (0..alphabet)
                    .map(|_| loop {
                        let x: f64 = rng.random();
                        if x > 0.0 {
                            break x;
                        }
                    })
                    .collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / s).collect()
            })
            .collect();
        Self::shared(HypothesisSet::indexed(hypotheses)?, dists, truth)
    }

    /// Like [`LikelihoodProfile::random_multinomial`], with hypotheses
    /// relabeled so that the summed divergence
    /// `d_i = Σ_{j≠i} D_KL(L(θ_i) || L(θ_j))` is descending in `i`.
    pub fn random_multinomial_descending(
        hypotheses: usize,
        alphabet: usize,
        seed: u64,
        truth: Vec<usize>,
    ) -> Result<Self> {
        let raw = Self::random_multinomial(hypotheses, alphabet, seed, vec![0])?;
        let dists: Vec<Vec<f64>> = (0..hypotheses).map(|t| raw.distribution(0, t).to_vec()).collect();
        let summed: Vec<f64> = (0..hypotheses)
            .map(|i| {
                (0..hypotheses)
                    .filter(|&j| j != i)
                    .map(|j| kl_divergence(&dists[i], &dists[j]).expect("positive entries"))
                    .sum()
            })
            .collect();
        let mut order: Vec<usize> = (0..hypotheses).collect();
        order.sort_by(|&a, &b| summed[b].total_cmp(&summed[a]));
        let sorted = order.iter().map(|&o| dists[o].clone()).collect();
        Self::shared(HypothesisSet::indexed(hypotheses)?, sorted, truth)
    }

    pub fn hypotheses(&self) -> &HypothesisSet {
        &self.hypotheses
    }

    pub fn num_hypotheses(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn num_agents(&self) -> usize {
        self.truth.len()
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn truth(&self) -> &[usize] {
        &self.truth
    }

    pub fn true_state(&self, agent: usize) -> usize {
        self.truth[agent]
    }

    fn offset(&self, agent: usize, theta: usize) -> usize {
        (agent * self.num_hypotheses() + theta) * self.alphabet
    }

    pub fn distribution(&self, agent: usize, theta: usize) -> &[f64] {
        let o = self.offset(agent, theta);
        &self.table[o..o + self.alphabet]
    }

    pub fn log_likelihood(&self, agent: usize, theta: usize, symbol: usize) -> f64 {
        self.log_table[self.offset(agent, theta) + symbol]
    }

    /// Copy of this profile with different true states.
    pub fn with_truth(&self, truth: Vec<usize>) -> Result<Self> {
        if truth.len() != self.num_agents() {
            return Err(Error::DimensionMismatch(format!(
                "{} agents but {} true states",
                self.num_agents(),
                truth.len()
            )));
        }
        if let Some(&bad) = truth.iter().find(|&&t| t >= self.num_hypotheses()) {
            return Err(Error::InvalidParams(format!("true state {bad} out of range")));
        }
        Ok(LikelihoodProfile {
            truth,
            ..self.clone()
        })
    }

    /// Relabels hypotheses by `order`: new hypothesis `i` is old `order[i]`.
    /// True states are remapped so every agent keeps its data model.
    pub fn permute_hypotheses(&self, order: &[usize]) -> Result<Self> {
        let h = self.num_hypotheses();
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..h).collect::<Vec<_>>() {
            return Err(Error::InvalidParams(format!("{order:?} is not a permutation of 0..{h}")));
        }
        let likelihoods = (0..self.num_agents())
            .map(|k| {
                order
                    .iter()
                    .map(|&old| self.distribution(k, old).to_vec())
                    .collect()
            })
            .collect();
        let truth = self
            .truth
            .iter()
            .map(|&t| order.iter().position(|&o| o == t).expect("permutation"))
            .collect();
        Self::new(self.hypotheses.clone(), likelihoods, truth)
    }
}

fn check_distribution(dist: &[f64]) -> std::result::Result<(), String> {
    if let Some(&bad) = dist.iter().find(|p| !(p.is_finite() && **p >= MIN_LIKELIHOOD)) {
        return Err(format!("entry {bad} is below the positivity floor {MIN_LIKELIHOOD}"));
    }
    let s: f64 = dist.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(format!("entries sum to {s}, not 1"));
    }
    Ok(())
}

/// Draws one symbol from an arbitrary finite distribution.
pub fn sample_symbol<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> Result<usize> {
    let w = WeightedIndex::new(dist)
        .map_err(|e| Error::InvalidLikelihood(format!("cannot sample from {dist:?}: {e}")))?;
    Ok(w.sample(rng))
}

/// Draws agent `agent`'s next observation from `L_agent(· | θ*_agent)`.
pub fn sample_observation<R: Rng + ?Sized>(
    profile: &LikelihoodProfile,
    agent: usize,
    rng: &mut R,
) -> Result<usize> {
    if agent >= profile.num_agents() {
        return Err(Error::InvalidParams(format!("agent {agent} out of range")));
    }
    sample_symbol(profile.distribution(agent, profile.true_state(agent)), rng)
}

/// Per-agent observation samplers with the true-state distribution
/// pre-indexed; used by the simulation loop.
#[derive(Debug, Clone)]
pub struct ObservationSampler {
    samplers: Vec<WeightedIndex<f64>>,
}

impl ObservationSampler {
    pub fn new(profile: &LikelihoodProfile) -> Result<Self> {
        let samplers = (0..profile.num_agents())
            .map(|k| {
                WeightedIndex::new(profile.distribution(k, profile.true_state(k)))
                    .map_err(|e| Error::InvalidLikelihood(e.to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(ObservationSampler { samplers })
    }

    pub fn sample<R: Rng + ?Sized>(&self, agent: usize, rng: &mut R) -> usize {
        self.samplers[agent].sample(rng)
    }
}

/// `D_KL(p || q)` in nats, with `0 log 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "distributions of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    let mut d = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Err(Error::SupportMismatch { index: i });
        }
        d += pi * (pi / qi).ln();
    }
    // Rounding can leave a tiny negative value for p ≈ q.
    Ok(d.max(0.0))
}

/// `D_KL(L_k(θ*_k) || L_k(θ))` for one agent.
pub fn agent_divergence(profile: &LikelihoodProfile, agent: usize, theta: usize) -> f64 {
    let truth = profile.true_state(agent);
    kl_divergence(
        profile.distribution(agent, truth),
        profile.distribution(agent, theta),
    )
    .expect("profile entries are strictly positive")
}

/// `Σ_{θ ≠ θ*_k} D_KL(L_k(θ*_k) || L_k(θ))`.
pub fn summed_divergence(profile: &LikelihoodProfile, agent: usize) -> f64 {
    (0..profile.num_hypotheses())
        .filter(|&t| t != profile.true_state(agent))
        .map(|t| agent_divergence(profile, agent, t))
        .sum()
}

/// Which divergence a per-cluster informativeness value reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    /// `D_KL(L(θ_0) || L(θ_1))` for cluster 0 and the mirror for cluster 1.
    Pairwise,
    /// Sum of divergences from the true hypothesis to every other one.
    Summed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformativenessReport {
    /// Two-cluster `d0 = D_KL(L_k(θ0) || L_k(θ1))` over cluster 0 (mean).
    pub d0: Option<f64>,
    /// Two-cluster `d1 = D_KL(L_k(θ1) || L_k(θ0))` over cluster 1 (mean).
    pub d1: Option<f64>,
    /// Per-cluster mean informativeness, measured as `cluster_kind`.
    pub cluster_values: Vec<f64>,
    pub cluster_kind: DivergenceKind,
    /// `table[k][θ] = D_KL(L_k(θ*_k) || L_k(θ))`.
    pub table: Vec<Vec<f64>>,
    /// Per-agent value entering the homogeneity check.
    pub agent_values: Vec<f64>,
    pub homogeneous: bool,
    /// Largest within-cluster spread of `agent_values`.
    pub max_deviation: f64,
}

pub const HOMOGENEITY_TOL: f64 = 1e-9;

/// Informativeness of each cluster.
///
/// With two clusters and at least two hypotheses, the per-agent value is
/// the pairwise `d` form (`θ0` vs `θ1` for cluster 0, the mirror for
/// cluster 1). Otherwise it is the summed divergence from each agent's
/// truth.
pub fn cluster_informativeness(
    profile: &LikelihoodProfile,
    clusters: &[usize],
    tol: f64,
) -> Result<InformativenessReport> {
    let n = profile.num_agents();
    if clusters.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} agents but {} cluster labels",
            clusters.len()
        )));
    }
    let num_clusters = clusters.iter().max().map_or(0, |m| m + 1);
    let h = profile.num_hypotheses();
    let table: Vec<Vec<f64>> = (0..n)
        .map(|k| (0..h).map(|t| agent_divergence(profile, k, t)).collect())
        .collect();

    let pairwise = num_clusters == 2;
    let agent_values: Vec<f64> = (0..n)
        .map(|k| {
            if pairwise {
                let (a, b) = if clusters[k] == 0 { (0, 1) } else { (1, 0) };
                kl_divergence(profile.distribution(k, a), profile.distribution(k, b))
                    .expect("profile entries are strictly positive")
            } else {
                summed_divergence(profile, k)
            }
        })
        .collect();

    let mut cluster_values = vec![0.0; num_clusters];
    let mut max_deviation: f64 = 0.0;
    for (c, value) in cluster_values.iter_mut().enumerate() {
        let members: Vec<f64> = (0..n)
            .filter(|&k| clusters[k] == c)
            .map(|k| agent_values[k])
            .collect();
        if members.is_empty() {
            continue;
        }
        *value = members.iter().sum::<f64>() / members.len() as f64;
        let hi = members.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = members.iter().copied().fold(f64::INFINITY, f64::min);
        max_deviation = max_deviation.max(hi - lo);
    }

    Ok(InformativenessReport {
        d0: pairwise.then(|| cluster_values[0]),
        d1: pairwise.then(|| cluster_values[1]),
        cluster_values,
        cluster_kind: if pairwise {
            DivergenceKind::Pairwise
        } else {
            DivergenceKind::Summed
        },
        table,
        agent_values,
        homogeneous: max_deviation <= tol,
        max_deviation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identifiability {
    pub identifiable: bool,
    /// `(θ, agents k with D_KL(L_k(θ*) || L_k(θ)) > 0)` for every `θ ≠ θ*`.
    pub witnesses: Vec<(usize, Vec<usize>)>,
}

/// Global identifiability of `theta_star`: every competing hypothesis is
/// distinguishable by at least one agent.
pub fn check_global_identifiability(
    profile: &LikelihoodProfile,
    theta_star: usize,
) -> Result<Identifiability> {
    let h = profile.num_hypotheses();
    if theta_star >= h {
        return Err(Error::InvalidParams(format!("hypothesis {theta_star} out of range")));
    }
    let witnesses: Vec<(usize, Vec<usize>)> = (0..h)
        .filter(|&t| t != theta_star)
        .map(|t| {
            let agents = (0..profile.num_agents())
                .filter(|&k| {
                    kl_divergence(
                        profile.distribution(k, theta_star),
                        profile.distribution(k, t),
                    )
                    .is_ok_and(|d| d > 0.0)
                })
                .collect();
            (t, agents)
        })
        .collect();
    Ok(Identifiability {
        identifiable: witnesses.iter().all(|(_, w)| !w.is_empty()),
        witnesses,
    })
}

/// Writes a profile as text:
///
/// ```text
/// profile <agents> <hypotheses> <alphabet>
/// hypotheses <label0> <label1> ...
/// agent <k> truth <θ*>
/// <probabilities under θ0>
/// <probabilities under θ1>
/// ...
/// ```
pub fn write_profile<W: Write>(profile: &LikelihoodProfile, mut out: W) -> Result<()> {
    writeln!(
        out,
        "profile {} {} {}",
        profile.num_agents(),
        profile.num_hypotheses(),
        profile.alphabet()
    )?;
    writeln!(out, "hypotheses {}", profile.hypotheses().labels().join(" "))?;
    for k in 0..profile.num_agents() {
        writeln!(out, "agent {k} truth {}", profile.true_state(k))?;
        for t in 0..profile.num_hypotheses() {
            let row: Vec<String> = profile
                .distribution(k, t)
                .iter()
                .map(|p| format!("{p:.17e}"))
                .collect();
            writeln!(out, "{}", row.join(" "))?;
        }
    }
    Ok(())
}

pub fn read_profile<R: BufRead>(input: R) -> Result<LikelihoodProfile> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('#')));
    let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
        match lines.next() {
            Some((no, line)) => Ok((no, line?.split_whitespace().map(String::from).collect())),
            None => Err(Error::parse(0, format!("unexpected end of file, expected {what}"))),
        }
    };

    let (no, header) = next("profile header")?;
    if header.len() != 4 || header[0] != "profile" {
        return Err(Error::parse(no, "expected `profile <agents> <hypotheses> <alphabet>`"));
    }
    let dims: Vec<usize> = header[1..]
        .iter()
        .map(|t| t.parse().map_err(|e| Error::parse(no, format!("`{t}`: {e}"))))
        .collect::<Result<_>>()?;
    let (agents, h, m) = (dims[0], dims[1], dims[2]);

    let (no, labels) = next("hypotheses line")?;
    if labels.first().map(String::as_str) != Some("hypotheses") || labels.len() != h + 1 {
        return Err(Error::parse(no, format!("expected `hypotheses` followed by {h} labels")));
    }
    let hypotheses = HypothesisSet::new(labels[1..].to_vec())?;

    let mut likelihoods = Vec::with_capacity(agents);
    let mut truth = Vec::with_capacity(agents);
    for k in 0..agents {
        let (no, head) = next("agent line")?;
        let ok = head.len() == 4
            && head[0] == "agent"
            && head[1].parse::<usize>().ok() == Some(k)
            && head[2] == "truth";
        if !ok {
            return Err(Error::parse(no, format!("expected `agent {k} truth <label>`")));
        }
        let t = head[3]
            .parse::<usize>()
            .ok()
            .or_else(|| hypotheses.index_of(&head[3]))
            .ok_or_else(|| Error::parse(no, format!("unknown hypothesis `{}`", head[3])))?;
        truth.push(t);
        let mut dists = Vec::with_capacity(h);
        for _ in 0..h {
            let (no, row) = next("probability row")?;
            if row.len() != m {
                return Err(Error::parse(no, format!("expected {m} probabilities")));
            }
            let dist = row
                .iter()
                .map(|t| t.parse::<f64>().map_err(|e| Error::parse(no, format!("`{t}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            dists.push(dist);
        }
        likelihoods.push(dists);
    }
    if let Ok((no, _)) = next("") {
        return Err(Error::parse(no, "trailing data after the last agent"));
    }
    LikelihoodProfile::new(hypotheses, likelihoods, truth)
}
