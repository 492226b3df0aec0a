use nalgebra::DMatrix;
use rand::Rng;

use super::matrix::{averaging_combination, is_strongly_connected};
use super::{BlockModel, Network, SbmParams};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_MAX_RETRIES: usize = 100;

/// Samples a two-community SBM network.
///
/// Every adjacency entry, diagonal included, is an independent Bernoulli
/// draw with its block probability. With `require_strong_connectivity` the
/// whole graph is redrawn until it is strongly connected and has at least
/// one self-loop.
pub fn sample_sbm(
    params: &SbmParams,
    seed: u64,
    require_strong_connectivity: bool,
    max_retries: usize,
) -> Result<Network> {
    params.validate()?;
    sample_block_model(
        &params.block_model(),
        seed,
        require_strong_connectivity,
        max_retries,
    )
}

/// Samples a k-community block model network; see [`sample_sbm`].
pub fn sample_block_model(
    model: &BlockModel,
    seed: u64,
    require_strong_connectivity: bool,
    max_retries: usize,
) -> Result<Network> {
    model.validate()?;
    if max_retries == 0 {
        return Err(Error::InvalidParams("max_retries must be at least 1".into()));
    }
    let mut rng = rng::graph_stream(seed);
    let labels = model.labels();
    let n = labels.len();
    let mut last_err = None;

    for draw in 1..=max_retries {
        let adjacency = DMatrix::from_fn(n, n, |l, k| {
            u8::from(rng.random_bool(model.probs[labels[l]][labels[k]]))
        });
        let combination = match averaging_combination(&adjacency) {
            Ok(c) => c,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        if require_strong_connectivity && !is_strongly_connected(&adjacency).is_primitive() {
            last_err = Some(Error::NotStronglyConnected {
                retries: max_retries,
            });
            continue;
        }
        return Ok(Network {
            adjacency,
            combination,
            clusters: labels,
            sizes: model.sizes.clone(),
            draws: draw,
        });
    }
    Err(last_err.expect("at least one draw was attempted"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_graph_has_uniform_weights() {
        let params = SbmParams::symmetric(2, 1.0, 1.0).unwrap();
        let net = sample_sbm(&params, 3, true, 1).unwrap();
        assert!(net.adjacency.iter().all(|&e| e == 1));
        assert!(net.combination.iter().all(|&a| (a - 0.25).abs() < 1e-15));
        assert_eq!(net.draws, 1);
    }

    #[test]
    fn empty_graph_reports_zero_column() {
        let params = SbmParams::symmetric(3, 0.0, 0.0).unwrap();
        let err = sample_sbm(&params, 1, false, 5).unwrap_err();
        assert!(matches!(err, Error::ZeroColumn { agent: 0 }));
    }

    #[test]
    fn disconnected_blocks_exhaust_retries() {
        let params = SbmParams::symmetric(3, 1.0, 0.0).unwrap();
        let err = sample_sbm(&params, 1, true, 4).unwrap_err();
        assert!(matches!(err, Error::NotStronglyConnected { retries: 4 }));
        // Without the connectivity requirement the draw is accepted.
        assert!(sample_sbm(&params, 1, false, 4).is_ok());
    }

    #[test]
    fn same_seed_same_graph() {
        let params = SbmParams::new(20, 15, 0.8, 0.9, 0.1, 0.1).unwrap();
        let a = sample_sbm(&params, 11, true, 100).unwrap();
        let b = sample_sbm(&params, 11, true, 100).unwrap();
        let c = sample_sbm(&params, 12, true, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.adjacency, c.adjacency);
    }

    #[test]
    fn intra_block_density_is_near_p0() {
        let params = SbmParams::new(20, 15, 0.8, 0.9, 0.1, 0.1).unwrap();
        for seed in 0..5 {
            let net = sample_sbm(&params, seed, true, 100).unwrap();
            let trials = 400.0;
            let se = (0.8f64 * 0.2 / trials).sqrt();
            let density = net.block_density(0, 0);
            assert!((density - 0.8).abs() < 3.0 * se, "seed {seed}: {density}");
        }
    }

    #[test]
    fn zero_retries_rejected() {
        let params = SbmParams::symmetric(2, 1.0, 1.0).unwrap();
        assert!(sample_sbm(&params, 0, true, 0).is_err());
    }
}
