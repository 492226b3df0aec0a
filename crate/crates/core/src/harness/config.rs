//! Experiment configuration files (TOML).
//!
//! ```toml
//! version = 1
//!
//! [network]
//! kind = "sbm"          # or "blocks" (sizes + probs) or "file" (path)
//! n0 = 15
//! n1 = 15
//! p0 = 0.8
//! p1 = 0.8
//! q0 = 0.1
//! q1 = 0.1
//!
//! [likelihood]
//! kind = "bernoulli"    # or "multinomial" or "file"
//! success = [0.1, 0.5]
//!
//! [run]
//! strategy = "asl"      # or "traditional"
//! delta = 0.1           # or deltas = [0.01, 0.1, 0.3]
//! horizon = 1500
//! burn_in = 500
//! replicates = 500
//! seed = 1
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{Estimator, Strategy};
use crate::models::{read_profile, LikelihoodProfile};
use crate::sbm::{read_network, BlockModel, Network, SbmParams, DEFAULT_MAX_RETRIES};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NetworkSpec {
    Sbm(SbmParams),
    Blocks(BlockModel),
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisOrder {
    /// Hypotheses in generation order.
    #[default]
    Generated,
    /// Relabeled by descending summed divergence.
    Descending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LikelihoodSpec {
    /// Hypothesis `θ` emits symbol 1 with probability `success[θ]`.
    Bernoulli {
        success: Vec<f64>,
        /// Per-agent true hypothesis; defaults to the agent's cluster.
        #[serde(default)]
        truth: Option<Vec<usize>>,
    },
    /// Random shared multinomials, entries uniform then normalized.
    Multinomial {
        hypotheses: usize,
        alphabet: usize,
        seed: u64,
        #[serde(default)]
        order: HypothesisOrder,
        #[serde(default)]
        truth: Option<Vec<usize>>,
    },
    /// A profile text file (includes true states).
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyName {
    Traditional,
    Asl,
}

fn default_replicates() -> usize {
    1
}
fn default_pair() -> (usize, usize) {
    (0, 1)
}
fn default_max_retries() -> usize {
    DEFAULT_MAX_RETRIES
}
fn default_true() -> bool {
    true
}
fn default_traces() -> usize {
    1
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub strategy: StrategyName,
    #[serde(default)]
    pub delta: Option<f64>,
    /// Step-size sweep; overrides `delta`.
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    pub horizon: usize,
    /// Iterations discarded before steady-state statistics; defaults to
    /// `ceil(5/δ)` for adaptive learning and 0 otherwise.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_pair")]
    pub pair: (usize, usize),
    #[serde(default)]
    pub estimator: Estimator,
    /// Condition every replicate on the graph drawn from the base seed.
    #[serde(default)]
    pub fixed_graph: bool,
    #[serde(default = "default_max_retries")]
    pub max_retries: usize,
    /// Number of leading replicates whose full traces are kept.
    #[serde(default = "default_traces")]
    pub traces: usize,
    #[serde(default = "default_true")]
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub network: NetworkSpec,
    pub likelihood: LikelihoodSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub replicates: Option<usize>,
    pub delta: Option<f64>,
    pub fixed_graph: bool,
    pub estimator: Option<Estimator>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let NetworkSpec::File { path } = &mut self.network {
            fix(path);
        }
        if let LikelihoodSpec::File { path } = &mut self.likelihood {
            fix(path);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(d) = &o.out {
            self.output.dir = d.clone();
        }
        if let Some(r) = o.replicates {
            self.run.replicates = r;
        }
        if let Some(d) = o.delta {
            self.run.strategy = StrategyName::Asl;
            self.run.delta = Some(d);
            self.run.deltas = None;
        }
        if o.fixed_graph {
            self.run.fixed_graph = true;
        }
        if let Some(e) = o.estimator {
            self.run.estimator = e;
        }
    }

    /// One strategy per configured step size.
    pub fn strategies(&self) -> Result<Vec<Strategy>> {
        match self.run.strategy {
            StrategyName::Traditional => Ok(vec![Strategy::Traditional]),
            StrategyName::Asl => {
                let deltas = match (&self.run.deltas, self.run.delta) {
                    (Some(ds), _) if !ds.is_empty() => ds.clone(),
                    (_, Some(d)) => vec![d],
                    _ => return Err(Error::Config("adaptive strategy needs `delta` or `deltas`".into())),
                };
                deltas
                    .into_iter()
                    .map(|delta| {
                        let s = Strategy::Asl { delta };
                        s.validate()?;
                        Ok(s)
                    })
                    .collect()
            }
        }
    }

    pub fn burn_in(&self, strategy: Strategy) -> usize {
        self.run
            .burn_in
            .unwrap_or_else(|| strategy.default_burn_in())
            .min(self.run.horizon)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.run.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.run.max_retries == 0 {
            return Err(Error::Config("max_retries must be at least 1".into()));
        }
        if let Some(b) = self.run.burn_in {
            if self.run.horizon > 0 && b >= self.run.horizon {
                return Err(Error::Config(format!(
                    "burn_in {b} must be smaller than the horizon {}",
                    self.run.horizon
                )));
            }
        }
        for p in [self.network_path(), self.profile_path()].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        self.strategies()?;
        match &self.network {
            NetworkSpec::Sbm(p) => p.validate()?,
            NetworkSpec::Blocks(m) => m.validate()?,
            NetworkSpec::File { .. } => {}
        }
        Ok(())
    }

    fn network_path(&self) -> Option<&Path> {
        match &self.network {
            NetworkSpec::File { path } => Some(path),
            _ => None,
        }
    }

    fn profile_path(&self) -> Option<&Path> {
        match &self.likelihood {
            LikelihoodSpec::File { path } => Some(path),
            _ => None,
        }
    }

    /// Block sizes of the configured network.
    pub fn sizes(&self) -> Result<Vec<usize>> {
        match &self.network {
            NetworkSpec::Sbm(p) => Ok(vec![p.n0, p.n1]),
            NetworkSpec::Blocks(m) => Ok(m.sizes.clone()),
            NetworkSpec::File { .. } => Ok(self.load_network_file()?.sizes),
        }
    }

    pub fn load_network_file(&self) -> Result<Network> {
        let path = self
            .network_path()
            .ok_or_else(|| Error::Config("network is not read from a file".into()))?;
        let f = std::fs::File::open(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        read_network(std::io::BufReader::new(f))
    }

    /// Builds the likelihood profile for agents with cluster labels
    /// `clusters`.
    pub fn profile(&self, clusters: &[usize]) -> Result<LikelihoodProfile> {
        let truth_or = |t: &Option<Vec<usize>>| t.clone().unwrap_or_else(|| clusters.to_vec());
        let profile = match &self.likelihood {
            LikelihoodSpec::Bernoulli { success, truth } => {
                LikelihoodProfile::bernoulli(success, truth_or(truth))?
            }
            LikelihoodSpec::Multinomial {
                hypotheses,
                alphabet,
                seed,
                order,
                truth,
            } => match order {
                HypothesisOrder::Generated => {
                    LikelihoodProfile::random_multinomial(*hypotheses, *alphabet, *seed, truth_or(truth))?
                }
                HypothesisOrder::Descending => LikelihoodProfile::random_multinomial_descending(
                    *hypotheses,
                    *alphabet,
                    *seed,
                    truth_or(truth),
                )?,
            },
            LikelihoodSpec::File { path } => {
                let f = std::fs::File::open(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                read_profile(std::io::BufReader::new(f))?
            }
        };
        if profile.num_agents() != clusters.len() {
            return Err(Error::Config(format!(
                "profile has {} agents but the network has {}",
                profile.num_agents(),
                clusters.len()
            )));
        }
        Ok(profile)
    }

    /// Human-readable reference to the likelihood source.
    pub fn profile_reference(&self) -> String {
        match &self.likelihood {
            LikelihoodSpec::Bernoulli { success, .. } => format!("bernoulli{success:?}"),
            LikelihoodSpec::Multinomial {
                hypotheses,
                alphabet,
                seed,
                ..
            } => format!("multinomial(h={hypotheses}, m={alphabet}, seed={seed})"),
            LikelihoodSpec::File { path } => path.display().to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"
version = 1

[network]
kind = "sbm"
n0 = 15
n1 = 15
p0 = 0.8
p1 = 0.8
q0 = 0.1
q1 = 0.1

[likelihood]
kind = "bernoulli"
success = [0.1, 0.5]

[run]
strategy = "asl"
deltas = [0.01, 0.1]
horizon = 100
replicates = 4
seed = 3
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(TWO).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.strategies().unwrap().len(), 2);
        assert_eq!(cfg.burn_in(Strategy::Asl { delta: 0.1 }), 50);
        assert_eq!(cfg.burn_in(Strategy::Asl { delta: 0.01 }), 100);
        assert_eq!(cfg.output.dir, PathBuf::from("out"));
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        let mut short = cfg.clone();
        short.likelihood = LikelihoodSpec::Bernoulli {
            success: vec![0.1, 0.5],
            truth: Some(vec![0, 1]),
        };
        let p = short.profile(&[0, 0, 1]).unwrap_err();
        assert!(matches!(p, Error::Config(_)));
    }

    #[test]
    fn overrides() {
        let mut cfg = ExperimentConfig::from_toml(TWO).unwrap();
        cfg.apply(&Overrides {
            seed: Some(9),
            delta: Some(0.3),
            replicates: Some(2),
            fixed_graph: true,
            estimator: Some(Estimator::Psi),
            out: Some("x".into()),
        });
        assert_eq!(cfg.strategies().unwrap(), vec![Strategy::Asl { delta: 0.3 }]);
        assert_eq!((cfg.run.seed, cfg.run.replicates, cfg.run.fixed_graph), (9, 2, true));
        assert_eq!(cfg.run.estimator, Estimator::Psi);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = TWO.replace("version = 1", "version = 7");
        assert!(ExperimentConfig::from_toml(&bad).unwrap().validate().is_err());
        let bad = TWO.replace("replicates = 4", "replicates = 0");
        assert!(ExperimentConfig::from_toml(&bad).unwrap().validate().is_err());
        let bad = TWO.replace("deltas = [0.01, 0.1]", "deltas = [1.5]");
        assert!(ExperimentConfig::from_toml(&bad).unwrap().validate().is_err());
        let bad = TWO.replace("horizon = 100", "horizon = 100\nburn_in = 100");
        assert!(ExperimentConfig::from_toml(&bad).unwrap().validate().is_err());
        let bad = TWO.replace("seed = 3", "seed = 3\nunknown = 1");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        let missing = TWO.replace(
            "kind = \"bernoulli\"\nsuccess = [0.1, 0.5]",
            "kind = \"file\"\npath = \"/nonexistent/profile.txt\"",
        );
        assert!(ExperimentConfig::from_toml(&missing).unwrap().validate().is_err());
    }

    #[test]
    fn block_network_and_multinomial() {
        let text = r#"
version = 1
[network]
kind = "blocks"
sizes = [2, 2, 3]
probs = [[0.9, 0.1, 0.1], [0.1, 0.9, 0.1], [0.1, 0.1, 0.9]]
[likelihood]
kind = "multinomial"
hypotheses = 3
alphabet = 25
seed = 4
order = "descending"
[run]
strategy = "traditional"
horizon = 10
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.sizes().unwrap(), vec![2, 2, 3]);
        let p = cfg.profile(&[0, 0, 1, 1, 2, 2, 2]).unwrap();
        assert_eq!(p.truth(), &[0, 0, 1, 1, 2, 2, 2]);
        assert_eq!(cfg.strategies().unwrap(), vec![Strategy::Traditional]);
    }
}
