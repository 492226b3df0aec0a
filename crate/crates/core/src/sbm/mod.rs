//! Stochastic block model networks and the algebra of their combination
//! matrices.
//!
//! Orientation follows the block layout of the edge-probability matrix:
//! entry `(ℓ, k)` is the probability that agent `k` receives from agent `ℓ`.
//! For two clusters, `q0` fills the block with rows in cluster 0 and columns
//! in cluster 1 (edges from cluster 0 into cluster 1), and `q1` the mirrored
//! block.

mod io;
mod matrix;
mod moments;
mod sample;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{read_matrix_csv, read_network, write_combination_csv, write_network};
pub use matrix::{
    averaging_combination, closed_form_perron, closed_form_power, column_sum_deviation,
    expected_combination, is_strongly_connected, perron_vector, Connectivity, ExpectedMatrix,
    PERRON_MAX_ITER, PERRON_TOL,
};
pub use moments::{binomial_pmf, exact_expected_combination, inverse_binomial_moment, MomentMode};
pub use sample::{sample_block_model, sample_sbm, DEFAULT_MAX_RETRIES};

/// Two-community SBM parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub n0: usize,
    pub n1: usize,
    pub p0: f64,
    pub p1: f64,
    /// Edge probability from cluster 0 into cluster 1.
    pub q0: f64,
    /// Edge probability from cluster 1 into cluster 0.
    pub q1: f64,
}

impl SbmParams {
    pub fn new(n0: usize, n1: usize, p0: f64, p1: f64, q0: f64, q1: f64) -> Result<Self> {
        let params = SbmParams {
            n0,
            n1,
            p0,
            p1,
            q0,
            q1,
        };
        params.validate()?;
        Ok(params)
    }

    /// Equal sizes and equal probabilities in both communities.
    pub fn symmetric(n: usize, p: f64, q: f64) -> Result<Self> {
        Self::new(n, n, p, p, q, q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.n1 == 0 {
            return Err(Error::InvalidParams(format!(
                "cluster sizes must be positive (n0 = {}, n1 = {})",
                self.n0, self.n1
            )));
        }
        for (name, v) in [
            ("p0", self.p0),
            ("p1", self.p1),
            ("q0", self.q0),
            ("q1", self.q1),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParams(format!("{name} = {v} is not in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.n0 + self.n1
    }

    pub fn is_symmetric(&self) -> bool {
        self.n0 == self.n1 && self.p0 == self.p1 && self.q0 == self.q1
    }

    /// Checks `q0, q1 < min(p0, p1)`, the regime the closed-form theory assumes.
    pub fn check_regime(&self) -> Result<()> {
        let pmin = self.p0.min(self.p1);
        if self.q0 < pmin && self.q1 < pmin {
            Ok(())
        } else {
            Err(Error::InvalidRegime(format!(
                "expected q0, q1 < min(p0, p1); got q0 = {}, q1 = {}, min p = {pmin}",
                self.q0, self.q1
            )))
        }
    }

    pub fn block_model(&self) -> BlockModel {
        BlockModel {
            sizes: vec![self.n0, self.n1],
            probs: vec![vec![self.p0, self.q0], vec![self.q1, self.p1]],
        }
    }
}

/// General k-community block model: `probs[a][b]` is the probability of an
/// edge from an agent in block `a` to an agent in block `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockModel {
    pub sizes: Vec<usize>,
    pub probs: Vec<Vec<f64>>,
}

impl BlockModel {
    pub fn new(sizes: Vec<usize>, probs: Vec<Vec<f64>>) -> Result<Self> {
        let model = BlockModel { sizes, probs };
        model.validate()?;
        Ok(model)
    }

    /// Diagonal `within` probabilities and a common off-diagonal probability.
    pub fn planted(sizes: Vec<usize>, within: &[f64], between: f64) -> Result<Self> {
        if within.len() != sizes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} block sizes but {} within-block probabilities",
                sizes.len(),
                within.len()
            )));
        }
        let k = sizes.len();
        let probs = (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| if a == b { within[a] } else { between })
                    .collect()
            })
            .collect();
        Self::new(sizes, probs)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.sizes.len();
        if k == 0 {
            return Err(Error::InvalidParams("block model needs at least one block".into()));
        }
        if self.sizes.contains(&0) {
            return Err(Error::InvalidParams("block sizes must be positive".into()));
        }
        if self.probs.len() != k || self.probs.iter().any(|row| row.len() != k) {
            return Err(Error::DimensionMismatch(format!(
                "probability matrix must be {k}x{k}"
            )));
        }
        for row in &self.probs {
            for &v in row {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParams(format!("probability {v} is not in [0, 1]")));
                }
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    /// Cluster label of every agent; blocks occupy contiguous index ranges.
    pub fn labels(&self) -> Vec<usize> {
        cluster_labels(&self.sizes)
    }

    /// The full N×N edge-probability matrix.
    pub fn probability_matrix(&self) -> DMatrix<f64> {
        let labels = self.labels();
        let n = labels.len();
        DMatrix::from_fn(n, n, |l, k| self.probs[labels[l]][labels[k]])
    }

    /// Two-block parameters, when this model has exactly two blocks.
    pub fn as_sbm_params(&self) -> Option<SbmParams> {
        if self.sizes.len() != 2 {
            return None;
        }
        Some(SbmParams {
            n0: self.sizes[0],
            n1: self.sizes[1],
            p0: self.probs[0][0],
            p1: self.probs[1][1],
            q0: self.probs[0][1],
            q1: self.probs[1][0],
        })
    }

    /// Block-constant mean-field combination matrix: entry `(ℓ, k)` is
    /// `P[a][b] / Σ_c n_c P[c][b]` with `ℓ ∈ a`, `k ∈ b`.
    pub fn mean_field_combination(&self) -> Result<DMatrix<f64>> {
        let k = self.sizes.len();
        let mut denom = vec![0.0; k];
        for (b, d) in denom.iter_mut().enumerate() {
            *d = (0..k).map(|c| self.sizes[c] as f64 * self.probs[c][b]).sum();
            if *d <= 0.0 {
                return Err(Error::DegenerateBlock(format!(
                    "block {b} receives no expected edges"
                )));
            }
        }
        let labels = self.labels();
        let n = labels.len();
        Ok(DMatrix::from_fn(n, n, |l, c| {
            let (a, b) = (labels[l], labels[c]);
            self.probs[a][b] / denom[b]
        }))
    }
}

pub(crate) fn cluster_labels(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect()
}

/// A realized network: binary adjacency, its averaging-rule combination
/// matrix, and the block each agent belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub adjacency: DMatrix<u8>,
    pub combination: DMatrix<f64>,
    pub clusters: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Number of graph draws it took to obtain this network (1 = first draw).
    pub draws: usize,
}

impl Network {
    /// Builds a network from an adjacency matrix and contiguous block sizes.
    pub fn from_adjacency(adjacency: DMatrix<u8>, sizes: Vec<usize>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::DimensionMismatch("adjacency must be square".into()));
        }
        if sizes.iter().sum::<usize>() != n {
            return Err(Error::DimensionMismatch(format!(
                "block sizes sum to {} but the network has {n} agents",
                sizes.iter().sum::<usize>()
            )));
        }
        let combination = averaging_combination(&adjacency)?;
        Ok(Network {
            adjacency,
            combination,
            clusters: cluster_labels(&sizes),
            sizes,
            draws: 1,
        })
    }

    pub fn size(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn connectivity(&self) -> Connectivity {
        is_strongly_connected(&self.adjacency)
    }

    /// Empirical edge density of the block `(from, to)`.
    pub fn block_density(&self, from: usize, to: usize) -> f64 {
        let mut edges = 0usize;
        let mut total = 0usize;
        for l in 0..self.size() {
            for k in 0..self.size() {
                if self.clusters[l] == from && self.clusters[k] == to {
                    total += 1;
                    edges += self.adjacency[(l, k)] as usize;
                }
            }
        }
        edges as f64 / total as f64
    }
}
