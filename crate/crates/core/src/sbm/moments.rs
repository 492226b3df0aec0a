use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::BlockModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentMode {
    /// `1 / (c + n p)^t`
    Approx,
    /// `Σ_b P(B = b) / (c + b)^t` with `B ~ Binomial(n, p)`.
    Exact,
}

/// Inverse moment `E[(c + B)^{-t}]` of a binomial variable, either by the
/// plug-in approximation or by direct summation over the pmf.
pub fn inverse_binomial_moment(c: f64, n: usize, p: f64, t: u32, mode: MomentMode) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::InvalidParams(format!("c must be positive, got {c}")));
    }
    if t == 0 {
        return Err(Error::InvalidParams("t must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParams(format!("p = {p} is not in [0, 1]")));
    }
    let t = t as i32;
    Ok(match mode {
        MomentMode::Approx => (c + n as f64 * p).powi(-t),
        MomentMode::Exact => binomial_pmf(n, p)
            .iter()
            .enumerate()
            .map(|(b, &w)| w * (c + b as f64).powi(-t))
            .sum(),
    })
}

/// Binomial(n, p) probability mass function on `0..=n`.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n + 1];
    if p <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if p >= 1.0 {
        pmf[n] = 1.0;
        return pmf;
    }
    // Log-domain recurrence keeps large n free of overflow.
    let log_odds = (p / (1.0 - p)).ln();
    let mut log_w = n as f64 * (1.0 - p).ln();
    for (b, w) in pmf.iter_mut().enumerate() {
        *w = log_w.exp();
        if b < n {
            log_w += ((n - b) as f64 / (b + 1) as f64).ln() + log_odds;
        }
    }
    pmf
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Exact `E A` of the averaging-rule combination matrix of a block model.
///
/// `E A[i, j] = P[i, j] · E[1 / (1 + X)]` where `X` counts the other
/// in-neighbors of `j`, a sum of independent binomials (one per block).
/// Realizations where column `j` is empty contribute zero.
pub fn exact_expected_combination(model: &BlockModel) -> Result<DMatrix<f64>> {
    model.validate()?;
    let k = model.num_blocks();
    // inv[a][b]: E[1/(1+X)] for a row in block a and a column in block b.
    let mut inv = vec![vec![0.0; k]; k];
    for (a, row) in inv.iter_mut().enumerate() {
        for (b, slot) in row.iter_mut().enumerate() {
            let mut dist = vec![1.0];
            for c in 0..k {
                let trials = if c == a {
                    model.sizes[c] - 1
                } else {
                    model.sizes[c]
                };
                dist = convolve(&dist, &binomial_pmf(trials, model.probs[c][b]));
            }
            *slot = dist
                .iter()
                .enumerate()
                .map(|(x, &w)| w / (1.0 + x as f64))
                .sum();
        }
    }
    let labels = model.labels();
    let n = labels.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (labels[i], labels[j]);
        model.probs[a][b] * inv[a][b]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::{averaging_combination, expected_combination, SbmParams};
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_small_case() {
        // b ∈ {0,1,2} with weights 1/4, 1/2, 1/4: 1/4 + 1/4 + 1/12 = 7/12.
        let v = inverse_binomial_moment(1.0, 2, 0.5, 1, MomentMode::Exact).unwrap();
        assert_abs_diff_eq!(v, 7.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_binomial() {
        for t in 1..4 {
            let e = inverse_binomial_moment(2.5, 9, 1.0, t, MomentMode::Exact).unwrap();
            let a = inverse_binomial_moment(2.5, 9, 1.0, t, MomentMode::Approx).unwrap();
            assert_abs_diff_eq!(e, a, epsilon = 1e-15);
            assert_abs_diff_eq!(a, 11.5f64.powi(-(t as i32)), epsilon = 1e-15);
        }
    }

    #[test]
    fn pmf_sums_to_one() {
        for &(n, p) in &[(0, 0.3), (1, 0.5), (40, 0.05), (500, 0.7)] {
            let s: f64 = binomial_pmf(n, p).iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(inverse_binomial_moment(0.0, 3, 0.5, 1, MomentMode::Exact).is_err());
        assert!(inverse_binomial_moment(1.0, 3, 0.5, 0, MomentMode::Exact).is_err());
    }

    /// Enumerates all 16 adjacency matrices of a 1+1 network.
    fn enumerate_two_agents(p: f64, q: f64) -> DMatrix<f64> {
        let prob = [[p, q], [q, p]];
        let mut mean = DMatrix::zeros(2, 2);
        for mask in 0u32..16 {
            let e = DMatrix::<u8>::from_fn(2, 2, |l, k| ((mask >> (2 * l + k)) & 1) as u8);
            let mut weight = 1.0;
            for l in 0..2 {
                for k in 0..2 {
                    weight *= if e[(l, k)] == 1 {
                        prob[l][k]
                    } else {
                        1.0 - prob[l][k]
                    };
                }
            }
            // Empty columns contribute zero weight to every entry.
            let mut a = DMatrix::zeros(2, 2);
            for k in 0..2 {
                let deg = e[(0, k)] + e[(1, k)];
                for l in 0..2 {
                    if e[(l, k)] == 1 {
                        a[(l, k)] = 1.0 / deg as f64;
                    }
                }
            }
            mean += a * weight;
        }
        mean
    }

    #[test]
    fn exact_expectation_matches_enumeration() {
        for &(p, q) in &[(0.8, 0.1), (0.5, 0.5), (0.9, 0.3)] {
            let params = SbmParams::symmetric(1, p, q).unwrap();
            let exact = exact_expected_combination(&params.block_model()).unwrap();
            let brute = enumerate_two_agents(p, q);
            assert!((&exact - &brute).amax() < 1e-15);
            // The mean-field Ā differs by the finite-size residual.
            let bar = expected_combination(&params).unwrap().to_dense();
            if p != q {
                assert!((&bar - &exact).amax() > 1e-3);
            }
        }
    }

    #[test]
    fn exact_expectation_matches_monte_carlo() {
        use rand::{Rng, SeedableRng};
        let params = SbmParams::new(6, 4, 0.7, 0.8, 0.2, 0.3).unwrap();
        let model = params.block_model();
        let exact = exact_expected_combination(&model).unwrap();
        let pm = model.probability_matrix();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let samples = 40_000;
        let n = params.size();
        let mut sum = DMatrix::zeros(n, n);
        let mut sumsq = DMatrix::zeros(n, n);
        for _ in 0..samples {
            let e = DMatrix::from_fn(n, n, |l, k| u8::from(rng.random_bool(pm[(l, k)])));
            let mut a = DMatrix::zeros(n, n);
            if let Ok(c) = averaging_combination(&e) {
                a = c;
            } else {
                for k in 0..n {
                    let deg: u32 = e.column(k).iter().map(|&x| x as u32).sum();
                    for l in 0..n {
                        if e[(l, k)] == 1 {
                            a[(l, k)] = 1.0 / deg as f64;
                        }
                    }
                }
            }
            sumsq += a.component_mul(&a);
            sum += a;
        }
        let s = samples as f64;
        let mean = &sum / s;
        for i in 0..n {
            for j in 0..n {
                let var = sumsq[(i, j)] / s - mean[(i, j)].powi(2);
                let se = (var / s).sqrt();
                assert!(
                    (mean[(i, j)] - exact[(i, j)]).abs() < 4.5 * se + 1e-12,
                    "entry ({i},{j}): {} vs {}",
                    mean[(i, j)],
                    exact[(i, j)]
                );
            }
        }
    }
}
