//! The kernel quasi-independence statistic for truncated, censored data.
//!
//! With a factorised kernel `K(x,x') L(y,y')` the squared statistic is
//!
//! ```text
//! n^2 Psi^2 = tr(K P Lt P) - 2 tr(K P Lt B') + tr(K B Lt B')
//! ```
//!
//! where `K` is the Gram matrix over entry times, `Lt[i][k] = D_i D_k L(T_i, T_k)`,
//! `B[i][k] = 1{X_k <= X_i < T_k <= T_i} / n` and `P` is the diagonal of
//! at-risk proportions `pi(X_i, T_i)`. `Lt` is used in all three terms.
//! Uncensored data is the special case `D = 1`.
//!
//! Two evaluation routes are provided: [`kqic_statistic`] contracts the trace
//! terms through `K B` and `B Lt`, while [`build_m`] forms the Hadamard
//! matrix `M` used by the wild bootstrap through `Lt B'` and `B (Lt B')`.
//! [`kqic_statistic_oracle`] expands the index sums directly.

use ndarray::{Array1, Array2, Zip};
use thiserror::Error;

use crate::data::TruncatedDataset;
use crate::kernels::{gram_matrix, KernelSpec};

/// Largest sample the O(n^4) oracle accepts.
pub const ORACLE_MAX_N: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum KqicError {
    #[error("oracle limited to n <= {ORACLE_MAX_N}, got n = {0}")]
    OracleTooLarge(usize),
    #[error("Kendall's K_a needs uncensored data; subject {0} is censored")]
    CensoredSample(usize),
}

/// Building blocks of the statistic.
#[derive(Debug, Clone)]
pub struct StatisticMatrices {
    pub k: Array2<f64>,
    pub l_tilde: Array2<f64>,
    pub b: Array2<f64>,
    pub pi_diag: Array1<f64>,
}

/// `(1/n) #{m : X_m <= x, T_m >= y}`.
pub fn pi_hat(dataset: &TruncatedDataset, x: f64, y: f64) -> f64 {
    let n = dataset.len();
    if n == 0 {
        return 0.0;
    }
    let hits = dataset
        .samples()
        .iter()
        .filter(|s| s.entry <= x && s.observed >= y)
        .count();
    hits as f64 / n as f64
}

/// `1{X_k <= X_i < T_k <= T_i}`: subject `k` was at risk when subject `i`
/// entered and left no later than `i`.
#[inline]
pub(crate) fn chain(xi: f64, ti: f64, xk: f64, tk: f64) -> bool {
    xk <= xi && xi < tk && tk <= ti
}

pub fn build_matrices(
    dataset: &TruncatedDataset,
    kx: &KernelSpec,
    ky: &KernelSpec,
) -> StatisticMatrices {
    let n = dataset.len();
    let x = dataset.entries();
    let t = dataset.observed();
    let delta: Vec<f64> = dataset
        .events()
        .iter()
        .map(|&d| if d { 1.0 } else { 0.0 })
        .collect();
    let inv_n = 1.0 / n as f64;

    let k = gram_matrix(kx, &x);
    let mut l_tilde = gram_matrix(ky, &t);
    Zip::indexed(&mut l_tilde).for_each(|(i, j), v| *v *= delta[i] * delta[j]);

    let b = Array2::from_shape_fn((n, n), |(i, k)| {
        if chain(x[i], t[i], x[k], t[k]) {
            inv_n
        } else {
            0.0
        }
    });
    let pi_diag = Array1::from_shape_fn(n, |i| {
        let hits = (0..n).filter(|&m| x[m] <= x[i] && t[m] >= t[i]).count();
        hits as f64 * inv_n
    });
    StatisticMatrices {
        k,
        l_tilde,
        b,
        pi_diag,
    }
}

impl StatisticMatrices {
    pub fn n(&self) -> usize {
        self.pi_diag.len()
    }

    /// Trace route: `tr(K B Lt B') = sum (K B) .* (B Lt)` and
    /// `tr(K P Lt B') = sum_ij K_ij pi_j (B Lt)_ij`.
    pub fn statistic(&self) -> f64 {
        let n = self.n();
        if n == 0 {
            return 0.0;
        }
        let kb = self.k.dot(&self.b);
        let bl = self.b.dot(&self.l_tilde);
        let pi = &self.pi_diag;
        let mut first = 0.0;
        let mut cross = 0.0;
        let mut last = 0.0;
        for i in 0..n {
            for j in 0..n {
                let kij = self.k[[i, j]];
                first += kij * pi[i] * self.l_tilde[[j, i]] * pi[j];
                cross += kij * pi[j] * bl[[i, j]];
                last += kb[[i, j]] * bl[[i, j]];
            }
        }
        (first - 2.0 * cross + last) / (n * n) as f64
    }

    /// `M = K .* (P Lt P - 2 P Lt B' + B Lt B') / n^2`.
    pub fn bootstrap_matrix(&self) -> BootstrapMatrix {
        let n = self.n();
        let scale = if n == 0 { 0.0 } else { 1.0 / (n * n) as f64 };
        let lbt = self.l_tilde.dot(&self.b.t());
        let blbt = self.b.dot(&lbt);
        let pi = &self.pi_diag;
        let m = Array2::from_shape_fn((n, n), |(i, j)| {
            let inner =
                pi[i] * self.l_tilde[[i, j]] * pi[j] - 2.0 * pi[i] * lbt[[i, j]] + blbt[[i, j]];
            self.k[[i, j]] * inner * scale
        });
        BootstrapMatrix { m }
    }
}

/// The `n x n` matrix whose entry sum is the statistic; wild-bootstrap
/// replicates are quadratic forms `w' M w`.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapMatrix {
    m: Array2<f64>,
}

impl BootstrapMatrix {
    pub fn from_matrix(m: Array2<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "bootstrap matrix must be square");
        Self { m }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.m
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    /// `w' M w`, accumulated row by row in index order.
    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        assert_eq!(w.len(), self.n());
        let mut total = 0.0;
        for (row, &wi) in self.m.rows().into_iter().zip(w) {
            let mut s = 0.0;
            for (&mij, &wj) in row.iter().zip(w) {
                s += mij * wj;
            }
            total += wi * s;
        }
        total
    }

    /// `sum_ij M_ij`, bit-identical to `quadratic_form` with all-ones weights.
    pub fn total(&self) -> f64 {
        self.quadratic_form(&vec![1.0; self.n()])
    }
}

pub fn build_m(dataset: &TruncatedDataset, kx: &KernelSpec, ky: &KernelSpec) -> BootstrapMatrix {
    build_matrices(dataset, kx, ky).bootstrap_matrix()
}

pub fn kqic_statistic(dataset: &TruncatedDataset, kx: &KernelSpec, ky: &KernelSpec) -> f64 {
    build_matrices(dataset, kx, ky).statistic()
}

/// Signed constant-kernel statistic `Psi_n = (1/n) sum_i (D_i pi_i - sum_k B_ik D_k)`.
/// Its square is the constant-kernel [`kqic_statistic`], and on uncensored
/// data with distinct times `n^2 Psi_n = -K_a`.
pub fn psi_constant(dataset: &TruncatedDataset) -> f64 {
    let n = dataset.len();
    if n == 0 {
        return 0.0;
    }
    let c = KernelSpec::constant();
    let parts = build_matrices(dataset, &c, &c);
    let delta: Array1<f64> = dataset
        .events()
        .iter()
        .map(|&d| if d { 1.0 } else { 0.0 })
        .collect();
    let bd = parts.b.dot(&delta);
    let total: f64 = (0..n).map(|i| delta[i] * parts.pi_diag[i] - bd[i]).sum();
    total / n as f64
}

/// Direct expansion of the squared RKHS norm into index sums:
///
/// ```text
/// n^2 Psi^2 = sum_ij K_ij Lt_ij pi_i pi_j
///           - 2 sum_ijl K_ij Lt_il pi_i B_jl
///           + sum_ijkl K_ij Lt_kl B_ik B_jl
/// ```
///
/// Recomputes every ingredient from the raw samples and forms no matrix
/// products. Cost is O(nnz(B)^2).
#[allow(clippy::needless_range_loop)]
pub fn kqic_statistic_oracle(
    dataset: &TruncatedDataset,
    kx: &KernelSpec,
    ky: &KernelSpec,
) -> Result<f64, KqicError> {
    let n = dataset.len();
    if n > ORACLE_MAX_N {
        return Err(KqicError::OracleTooLarge(n));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let s = dataset.samples();
    let nf = n as f64;
    let kk = |i: usize, j: usize| kx.eval(s[i].entry, s[j].entry);
    let lt = |i: usize, j: usize| {
        if s[i].event && s[j].event {
            ky.eval(s[i].observed, s[j].observed)
        } else {
            0.0
        }
    };
    let pi: Vec<f64> = (0..n)
        .map(|i| {
            let c = s
                .iter()
                .filter(|m| m.entry <= s[i].entry && m.observed >= s[i].observed)
                .count();
            c as f64 / nf
        })
        .collect();
    let mut support = Vec::new();
    for i in 0..n {
        for k in 0..n {
            if s[k].entry <= s[i].entry
                && s[i].entry < s[k].observed
                && s[k].observed <= s[i].observed
            {
                support.push((i, k));
            }
        }
    }
    let b = 1.0 / nf;

    let mut first = 0.0;
    for i in 0..n {
        for j in 0..n {
            first += kk(i, j) * lt(i, j) * pi[i] * pi[j];
        }
    }
    let mut cross = 0.0;
    for i in 0..n {
        for &(j, l) in &support {
            cross += kk(i, j) * lt(i, l) * pi[i] * b;
        }
    }
    let mut last = 0.0;
    for &(i, k) in &support {
        for &(j, l) in &support {
            last += kk(i, j) * lt(k, l) * b * b;
        }
    }
    Ok((first - 2.0 * cross + last) / (nf * nf))
}

/// `K_a = sum_{i<k} 1{X_i v X_k <= Y_i ^ Y_k} sign((X_i - X_k)(Y_i - Y_k))`
/// on uncensored data.
pub fn kendall_ka(dataset: &TruncatedDataset) -> Result<i64, KqicError> {
    let s = dataset.samples();
    if let Some(i) = s.iter().position(|s| !s.event) {
        return Err(KqicError::CensoredSample(i));
    }
    let mut ka = 0i64;
    for i in 0..s.len() {
        for k in (i + 1)..s.len() {
            if s[i].entry.max(s[k].entry) <= s[i].observed.min(s[k].observed) {
                let prod = (s[i].entry - s[k].entry) * (s[i].observed - s[k].observed);
                ka += if prod > 0.0 {
                    1
                } else if prod < 0.0 {
                    -1
                } else {
                    0
                };
            }
        }
    }
    Ok(ka)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d3() -> TruncatedDataset {
        TruncatedDataset::from_triples(&[(1., 4., true), (2., 5., true), (3., 6., true)])
    }

    fn d3c() -> TruncatedDataset {
        TruncatedDataset::from_triples(&[(1., 4., true), (2., 5., false), (3., 6., true)])
    }

    fn c() -> KernelSpec {
        KernelSpec::constant()
    }

    #[test]
    fn pi_hat_examples() {
        assert!((pi_hat(&d3(), 2.0, 5.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(pi_hat(&d3(), f64::INFINITY, 0.0), 1.0);
        assert_eq!(pi_hat(&d3(), 0.0, 10.0), 0.0);
    }

    #[test]
    fn matrices_on_d3() {
        for d in [d3(), d3c()] {
            let m = build_matrices(&d, &c(), &c());
            let scaled = m.b.mapv(|v| v * 3.0);
            let expected = [[1., 0., 0.], [1., 1., 0.], [1., 1., 1.]];
            for i in 0..3 {
                for k in 0..3 {
                    assert_eq!(scaled[[i, k]], expected[i][k], "B[{i}][{k}]");
                }
                assert!((m.pi_diag[i] - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        let m = build_matrices(&d3c(), &c(), &c());
        for j in 0..3 {
            assert_eq!(m.l_tilde[[1, j]], 0.0);
            assert_eq!(m.l_tilde[[j, 1]], 0.0);
        }
    }

    #[test]
    fn disjoint_windows_give_identity_b() {
        let d = TruncatedDataset::from_triples(&[(0., 1., true), (2., 3., true)]);
        let m = build_matrices(&d, &c(), &c());
        assert_eq!(m.b[[0, 0]], 0.5);
        assert_eq!(m.b[[1, 1]], 0.5);
        assert_eq!(m.b[[0, 1]], 0.0);
        assert_eq!(m.b[[1, 0]], 0.0);
    }

    #[test]
    fn hand_computed_statistics() {
        assert!((kqic_statistic(&d3c(), &c(), &c()) - 4.0 / 81.0).abs() < 1e-15);
        assert!((kqic_statistic(&d3(), &c(), &c()) - 1.0 / 9.0).abs() < 1e-15);
        assert!((kqic_statistic_oracle(&d3c(), &c(), &c()).unwrap() - 4.0 / 81.0).abs() < 1e-12);
        assert!((kqic_statistic_oracle(&d3(), &c(), &c()).unwrap() - 1.0 / 9.0).abs() < 1e-12);
        assert!((build_m(&d3c(), &c(), &c()).total() - 4.0 / 81.0).abs() < 1e-15);
    }

    #[test]
    fn all_censored_is_zero() {
        let d =
            TruncatedDataset::from_triples(&[(0., 1., false), (0.5, 2., false), (0.2, 3., false)]);
        let g = KernelSpec::gaussian(1.0).unwrap();
        let m = build_m(&d, &g, &g);
        assert!(m.matrix().iter().all(|&v| v == 0.0));
        assert_eq!(kqic_statistic(&d, &g, &g), 0.0);
    }

    #[test]
    fn oracle_size_limit() {
        let triples: Vec<_> = (0..201).map(|i| (i as f64, i as f64 + 1.0, true)).collect();
        let d = TruncatedDataset::from_triples(&triples);
        assert_eq!(
            kqic_statistic_oracle(&d, &c(), &c()),
            Err(KqicError::OracleTooLarge(201))
        );
    }

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall_ka(&d3()), Ok(3));
        let disc = TruncatedDataset::from_triples(&[(1., 10., true), (2., 9., true)]);
        assert_eq!(kendall_ka(&disc), Ok(-1));
        let incomparable = TruncatedDataset::from_triples(&[(0., 1., true), (2., 3., true)]);
        assert_eq!(kendall_ka(&incomparable), Ok(0));
        assert_eq!(kendall_ka(&d3c()), Err(KqicError::CensoredSample(1)));
    }

    #[test]
    fn signed_statistic_on_d3() {
        assert!((psi_constant(&d3()) * 9.0 + 3.0).abs() < 1e-14);
        let disc = TruncatedDataset::from_triples(&[(1., 10., true), (2., 9., true)]);
        assert!((psi_constant(&disc) * 4.0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_form_sign_symmetry() {
        let m = build_m(
            &d3c(),
            &KernelSpec::gaussian(1.3).unwrap(),
            &KernelSpec::imq(0.7).unwrap(),
        );
        let w = [1.0, -1.0, 1.0];
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        assert_eq!(m.quadratic_form(&w), m.quadratic_form(&neg));
        let mut direct = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                direct += w[i] * w[j] * m.matrix()[[i, j]];
            }
        }
        assert!((m.quadratic_form(&w) - direct).abs() < 1e-15);
    }
}
