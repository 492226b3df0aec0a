use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SbmParams;
use crate::error::{Error, Result};

pub const PERRON_TOL: f64 = 1e-12;
pub const PERRON_MAX_ITER: usize = 1_000_000;

/// Averaging rule: `A[ℓ, k] = E[ℓ, k] / Σ_ℓ' E[ℓ', k]`.
pub fn averaging_combination(adjacency: &DMatrix<u8>) -> Result<DMatrix<f64>> {
    let (rows, cols) = adjacency.shape();
    if rows != cols {
        return Err(Error::DimensionMismatch(format!(
            "adjacency must be square, got {rows}x{cols}"
        )));
    }
    let mut a = DMatrix::zeros(rows, cols);
    for k in 0..cols {
        let col = adjacency.column(k);
        if col.iter().any(|&e| e > 1) {
            return Err(Error::InvalidParams(format!(
                "adjacency column {k} is not binary"
            )));
        }
        let degree: usize = col.iter().map(|&e| e as usize).sum();
        if degree == 0 {
            return Err(Error::ZeroColumn { agent: k });
        }
        let w = 1.0 / degree as f64;
        for l in 0..rows {
            if col[l] == 1 {
                a[(l, k)] = w;
            }
        }
    }
    Ok(a)
}

/// Largest `|Σ_ℓ A[ℓ, k] − 1|` over columns.
pub fn column_sum_deviation(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| (c.sum() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Block form of the mean-field combination matrix Ā of a two-community SBM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedMatrix {
    pub n0: usize,
    pub n1: usize,
    /// `blocks[a][b]` is the value of every entry with row in cluster `a`
    /// and column in cluster `b`.
    pub blocks: [[f64; 2]; 2],
}

impl ExpectedMatrix {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n0 + self.n1;
        let n0 = self.n0;
        DMatrix::from_fn(n, n, |l, k| {
            self.blocks[usize::from(l >= n0)][usize::from(k >= n0)]
        })
    }
}

/// Ā with block values `p0/r0`, `q0/r1`, `q1/r0`, `p1/r1`, where
/// `r0 = p0 n0 + q1 n1` and `r1 = q0 n0 + p1 n1`.
pub fn expected_combination(params: &SbmParams) -> Result<ExpectedMatrix> {
    params.validate()?;
    let (n0, n1) = (params.n0 as f64, params.n1 as f64);
    let r0 = params.p0 * n0 + params.q1 * n1;
    let r1 = params.q0 * n0 + params.p1 * n1;
    if r0 <= 0.0 {
        return Err(Error::DegenerateBlock(
            "p0 n0 + q1 n1 = 0: cluster-0 columns have no expected edges".into(),
        ));
    }
    if r1 <= 0.0 {
        return Err(Error::DegenerateBlock(
            "q0 n0 + p1 n1 = 0: cluster-1 columns have no expected edges".into(),
        ));
    }
    Ok(ExpectedMatrix {
        n0: params.n0,
        n1: params.n1,
        blocks: [
            [params.p0 / r0, params.q0 / r1],
            [params.q1 / r0, params.p1 / r1],
        ],
    })
}

/// `t`-th power of Ā for symmetric communities (size `n` each), in closed
/// form: block scalars `(1 ± ((p − q)/(p + q))^t) / (2n)`.
///
/// `p == q` is accepted (every entry becomes `1/(2n)`); `q > p` is rejected
/// as outside the community regime.
pub fn closed_form_power(p: f64, q: f64, n: usize, t: u32) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParams(format!(
            "probabilities must be in [0, 1] (p = {p}, q = {q})"
        )));
    }
    if n == 0 || t == 0 {
        return Err(Error::InvalidParams("n and t must be at least 1".into()));
    }
    if p + q <= 0.0 {
        return Err(Error::DegenerateBlock("p + q = 0".into()));
    }
    if q > p {
        return Err(Error::InvalidRegime(format!(
            "closed-form powers assume q <= p (p = {p}, q = {q})"
        )));
    }
    let lambda = ((p - q) / (p + q)).powi(t as i32);
    let scale = 1.0 / (2 * n) as f64;
    let same = (1.0 + lambda) * scale;
    let cross = (1.0 - lambda) * scale;
    Ok(DMatrix::from_fn(2 * n, 2 * n, |l, k| {
        if (l < n) == (k < n) {
            same
        } else {
            cross
        }
    }))
}

/// Right Perron eigenvector of a column-stochastic matrix by power
/// iteration from the uniform vector. Stops once `‖A u − u‖∞ ≤ tol`.
pub fn perron_vector(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::DimensionMismatch("matrix must be square and non-empty".into()));
    }
    if a.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidParams("matrix entries must be finite and nonnegative".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tol must be positive".into()));
    }
    let mut u = DVector::from_element(n, 1.0 / n as f64);
    let mut next = DVector::zeros(n);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        next.gemv(1.0, a, &u, 0.0);
        residual = (&next - &u).amax();
        if residual <= tol {
            let s = u.sum();
            u /= s;
            if u.iter().any(|&x| x <= 0.0) {
                return Err(Error::InvalidParams(
                    "limit vector has zero entries; matrix is not primitive".into(),
                ));
            }
            return Ok(u);
        }
        let s = next.sum();
        if s <= 0.0 {
            break;
        }
        std::mem::swap(&mut u, &mut next);
        u /= s;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Perron eigenvector of Ā in closed form: block values
/// `q0 r0 / (q0 r0 n0 + q1 r1 n1)` and `q1 r1 / (q0 r0 n0 + q1 r1 n1)`.
pub fn closed_form_perron(params: &SbmParams) -> Result<DVector<f64>> {
    expected_combination(params)?;
    let (n0, n1) = (params.n0 as f64, params.n1 as f64);
    let r0 = params.p0 * n0 + params.q1 * n1;
    let r1 = params.q0 * n0 + params.p1 * n1;
    let w0 = params.q0 * r0;
    let w1 = params.q1 * r1;
    let z = w0 * n0 + w1 * n1;
    if z <= 0.0 {
        return Err(Error::DegenerateBlock(
            "q0 = q1 = 0: the clusters are decoupled and Ā is reducible".into(),
        ));
    }
    let n = params.size();
    Ok(DVector::from_fn(n, |k, _| {
        if k < params.n0 {
            w0 / z
        } else {
            w1 / z
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connectivity {
    pub strongly_connected: bool,
    pub has_self_loop: bool,
}

impl Connectivity {
    /// Strong connectivity plus a self-loop makes the combination matrix
    /// primitive.
    pub fn is_primitive(&self) -> bool {
        self.strongly_connected && self.has_self_loop
    }
}

/// Strong connectivity by forward and backward reachability from agent 0.
/// Edge `ℓ → k` exists when `E[ℓ, k] = 1`.
pub fn is_strongly_connected(adjacency: &DMatrix<u8>) -> Connectivity {
    let n = adjacency.nrows();
    let has_self_loop = (0..n.min(adjacency.ncols())).any(|i| adjacency[(i, i)] != 0);
    if n == 0 || adjacency.ncols() != n {
        return Connectivity {
            strongly_connected: false,
            has_self_loop,
        };
    }
    let forward = reach_all(n, |from, to| adjacency[(from, to)] != 0);
    let backward = forward && reach_all(n, |from, to| adjacency[(to, from)] != 0);
    Connectivity {
        strongly_connected: backward,
        has_self_loop,
    }
}

fn reach_all(n: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for w in 0..n {
            if !seen[w] && edge(v, w) {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == n
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn averaging_identity_and_ones() {
        let id = DMatrix::<u8>::identity(5, 5);
        assert_eq!(averaging_combination(&id).unwrap(), DMatrix::identity(5, 5));
        let ones = DMatrix::<u8>::from_element(4, 4, 1);
        let a = averaging_combination(&ones).unwrap();
        assert!(a.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn averaging_single_column() {
        let mut e = DMatrix::<u8>::identity(4, 4);
        e[(0, 1)] = 1;
        e[(3, 1)] = 1;
        let a = averaging_combination(&e).unwrap();
        let col: Vec<f64> = a.column(1).iter().copied().collect();
        assert_eq!(col, vec![1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0]);
    }

    #[test]
    fn averaging_zero_column() {
        let mut e = DMatrix::<u8>::identity(3, 3);
        e[(2, 2)] = 0;
        assert!(matches!(
            averaging_combination(&e),
            Err(Error::ZeroColumn { agent: 2 })
        ));
    }

    #[test]
    fn expected_matrix_blocks() {
        let params = SbmParams::new(20, 15, 0.8, 0.9, 0.1, 0.1).unwrap();
        let e = expected_combination(&params).unwrap();
        assert_abs_diff_eq!(e.blocks[0][0], 0.8 / 17.5, epsilon = 1e-15);
        assert_abs_diff_eq!(e.blocks[0][0], 0.045714285714, epsilon = 1e-11);
        assert_abs_diff_eq!(e.blocks[0][1], 0.1 / 15.5, epsilon = 1e-15);
        assert_abs_diff_eq!(e.blocks[1][0], 0.1 / 17.5, epsilon = 1e-15);
        assert_abs_diff_eq!(e.blocks[1][1], 0.9 / 15.5, epsilon = 1e-15);
        assert!(column_sum_deviation(&e.to_dense()) < 1e-12);
    }

    #[test]
    fn expected_matrix_symmetric_form() {
        let (n, p, q) = (12, 0.7, 0.2);
        let e = expected_combination(&SbmParams::symmetric(n, p, q).unwrap()).unwrap();
        let nf = n as f64;
        assert_abs_diff_eq!(e.blocks[0][0], p / (nf * (p + q)), epsilon = 1e-15);
        assert_abs_diff_eq!(e.blocks[0][1], q / (nf * (p + q)), epsilon = 1e-15);
        assert_abs_diff_eq!(e.blocks[1][1], p / (nf * (p + q)), epsilon = 1e-15);
    }

    #[test]
    fn expected_matrix_degenerate() {
        let params = SbmParams::new(3, 3, 0.0, 0.5, 0.5, 0.0).unwrap();
        assert!(matches!(
            expected_combination(&params),
            Err(Error::DegenerateBlock(_))
        ));
    }

    #[test]
    fn closed_form_power_t1_matches_expected() {
        let (p, q, n) = (0.8, 0.1, 15);
        let direct = expected_combination(&SbmParams::symmetric(n, p, q).unwrap())
            .unwrap()
            .to_dense();
        let closed = closed_form_power(p, q, n, 1).unwrap();
        assert!((direct - closed).amax() < 1e-15);
    }

    #[test]
    fn closed_form_power_equal_probabilities() {
        let m = closed_form_power(0.4, 0.4, 3, 7).unwrap();
        assert!(m.iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
        assert!(matches!(
            closed_form_power(0.1, 0.4, 3, 2),
            Err(Error::InvalidRegime(_))
        ));
    }

    #[test]
    fn closed_form_power_matches_repeated_product() {
        let (p, q, n) = (0.8, 0.1, 15);
        let a = closed_form_power(p, q, n, 1).unwrap();
        let mut prod = a.clone();
        for _ in 1..5 {
            prod = &prod * &a;
        }
        let closed = closed_form_power(p, q, n, 5).unwrap();
        assert!((prod - closed).amax() < 1e-12);
    }

    #[test]
    fn perron_uniform() {
        let a = DMatrix::from_element(6, 6, 1.0 / 6.0);
        let u = perron_vector(&a, 1e-14, 100).unwrap();
        assert!(u.iter().all(|&x| (x - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn perron_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.1, 0.8]);
        let u = perron_vector(&a, 1e-13, PERRON_MAX_ITER).unwrap();
        assert_abs_diff_eq!(u[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn perron_closed_form_agrees() {
        let params = SbmParams::new(20, 15, 0.8, 0.9, 0.1, 0.2).unwrap();
        let a = expected_combination(&params).unwrap().to_dense();
        let iterated = perron_vector(&a, PERRON_TOL, PERRON_MAX_ITER).unwrap();
        let closed = closed_form_perron(&params).unwrap();
        assert!((iterated - closed).amax() < 1e-10);
    }

    #[test]
    fn perron_periodic_fails() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        // The uniform start is already fixed; start is symmetric so it converges.
        assert!(perron_vector(&a, 1e-12, 10).is_ok());
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0, 0.5]);
        assert!(perron_vector(&a, 1e-12, 10).is_ok());
        let err = perron_vector(&b, 1e-12, 3).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 3, .. }));
    }

    #[test]
    fn connectivity_cases() {
        let id = DMatrix::<u8>::identity(4, 4);
        let c = is_strongly_connected(&id);
        assert!(!c.strongly_connected);
        assert!(c.has_self_loop);

        let mut ring = DMatrix::<u8>::zeros(5, 5);
        for i in 0..5 {
            ring[(i, (i + 1) % 5)] = 1;
        }
        ring[(2, 2)] = 1;
        let c = is_strongly_connected(&ring);
        assert!(c.strongly_connected && c.has_self_loop && c.is_primitive());

        let mut cliques = DMatrix::<u8>::zeros(6, 6);
        for l in 0..6 {
            for k in 0..6 {
                if (l < 3) == (k < 3) {
                    cliques[(l, k)] = 1;
                }
            }
        }
        assert!(!is_strongly_connected(&cliques).strongly_connected);

        // One-way bridge: reachable forward but not backward.
        cliques[(0, 3)] = 1;
        assert!(!is_strongly_connected(&cliques).strongly_connected);
        cliques[(4, 1)] = 1;
        assert!(is_strongly_connected(&cliques).strongly_connected);
    }

    mod properties {
        use super::super::*;
        use crate::sbm::{sample_sbm, SbmParams};
        use proptest::{prop_assert, proptest};

        proptest! {
            #![proptest_config(proptest::test_runner::Config::with_cases(64))]

            #[test]
            fn sampled_columns_sum_to_one(
                n0 in 1usize..12, n1 in 1usize..12, p in 0.3f64..1.0, q in 0.05f64..0.3, seed in 0u64..1000,
            ) {
                let params = SbmParams::new(n0, n1, p, p, q, q).unwrap();
                if let Ok(net) = sample_sbm(&params, seed, true, 100) {
                    for k in 0..net.size() {
                        let s: f64 = net.combination.column(k).sum();
                        prop_assert!((s - 1.0).abs() <= 1e-12);
                    }
                }
            }

            #[test]
            fn averaging_columns_sum_to_one(bits in proptest::collection::vec(0u8..2, 49)) {
                let mut adj = DMatrix::from_vec(7, 7, bits);
                for k in 0..7 {
                    adj[(k, k)] = 1;
                }
                let a = averaging_combination(&adj).unwrap();
                for k in 0..7 {
                    prop_assert!((a.column(k).sum() - 1.0).abs() <= 1e-12);
                }
            }

            #[test]
            fn closed_form_power_is_repeated_product(
                q in 0.0f64..0.5, gap in 0.0f64..0.5, n in 1usize..20, t in 2u32..=50,
            ) {
                let p = q + gap;
                let base = closed_form_power(p, q, n, 1).unwrap();
                let mut prod = base.clone();
                for _ in 1..t {
                    prod = &prod * &base;
                }
                prop_assert!((prod - closed_form_power(p, q, n, t).unwrap()).amax() <= 1e-10);
            }

            #[test]
            fn perron_vector_is_fixed_point(
                n0 in 1usize..10, n1 in 1usize..10, p in 0.3f64..1.0, q in 0.05f64..0.3, seed in 0u64..1000,
            ) {
                let params = SbmParams::new(n0, n1, p, p, q, q).unwrap();
                if let Ok(net) = sample_sbm(&params, seed, true, 100) {
                    let tol = 1e-12;
                    let u = perron_vector(&net.combination, tol, PERRON_MAX_ITER).unwrap();
                    prop_assert!((&net.combination * &u - &u).amax() <= tol);
                    prop_assert!((u.sum() - 1.0).abs() <= 1e-12);
                    prop_assert!(u.iter().all(|&x| x > 0.0));
                }
            }

            #[test]
            fn exact_moment_dominates_plug_in(
                c in 0.1f64..5.0, n in 0usize..200, p in 0.0f64..=1.0, t in 1u32..5,
            ) {
                use crate::sbm::{inverse_binomial_moment, MomentMode};
                let e = inverse_binomial_moment(c, n, p, t, MomentMode::Exact).unwrap();
                let a = inverse_binomial_moment(c, n, p, t, MomentMode::Approx).unwrap();
                prop_assert!(e >= a * (1.0 - 1e-12));
            }
        }
    }
}
