//! Scalar positive-definite kernels on event times.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("kernel scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("median heuristic needs at least two values")]
    TooFewValues,
    #[error("all pairwise distances are zero; no scale can be inferred")]
    DegenerateScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Imq,
    Constant,
}

/// A kernel family with its scale: the Gaussian bandwidth `sigma`, or the
/// IMQ offset `c` in `(c^2 + (a-b)^2)^(-1/2)`. Constant kernels ignore the
/// scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub scale: f64,
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::Gaussian, sigma)
    }

    pub fn imq(c: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::Imq, c)
    }

    pub fn constant() -> Self {
        Self {
            family: KernelFamily::Constant,
            scale: 1.0,
        }
    }

    pub fn new(family: KernelFamily, scale: f64) -> Result<Self, KernelError> {
        match family {
            KernelFamily::Constant => Ok(Self::constant()),
            _ if scale > 0.0 && scale.is_finite() => Ok(Self { family, scale }),
            _ => Err(KernelError::InvalidScale(scale)),
        }
    }

    #[inline]
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        let d = a - b;
        match self.family {
            KernelFamily::Gaussian => (-(d * d) / (2.0 * self.scale * self.scale)).exp(),
            KernelFamily::Imq => 1.0 / (self.scale * self.scale + d * d).sqrt(),
            KernelFamily::Constant => 1.0,
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::Gaussian => write!(f, "gauss(sigma={})", self.scale),
            KernelFamily::Imq => write!(f, "imq(c={})", self.scale),
            KernelFamily::Constant => write!(f, "const"),
        }
    }
}

pub fn eval_kernel(spec: &KernelSpec, a: f64, b: f64) -> f64 {
    spec.eval(a, b)
}

/// `G[i][k] = k(values[i], values[k])`. Only the upper triangle is evaluated.
pub fn gram_matrix(spec: &KernelSpec, values: &[f64]) -> Array2<f64> {
    let n = values.len();
    let mut g = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        g[[i, i]] = spec.eval(values[i], values[i]);
        for k in (i + 1)..n {
            let v = spec.eval(values[i], values[k]);
            g[[i, k]] = v;
            g[[k, i]] = v;
        }
    }
    g
}

/// Median of the `n(n-1)/2` pairwise absolute differences, taking the lower
/// median when the pair count is even.
pub fn median_heuristic(values: &[f64]) -> Result<f64, KernelError> {
    let n = values.len();
    if n < 2 {
        return Err(KernelError::TooFewValues);
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push((values[i] - values[j]).abs());
        }
    }
    let mid = (dists.len() - 1) / 2;
    let (_, median, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    if *median > 0.0 {
        Ok(*median)
    } else {
        Err(KernelError::DegenerateScale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_values() {
        let g = KernelSpec::gaussian(2.5).unwrap();
        assert_eq!(g.eval(3.0, 3.0), 1.0);
        let imq = KernelSpec::imq(1.0).unwrap();
        assert!((imq.eval(0.0, 1.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(KernelSpec::constant().eval(3.0, 100.0), 1.0);
    }

    #[test]
    fn rejects_bad_scales() {
        assert_eq!(
            KernelSpec::gaussian(0.0),
            Err(KernelError::InvalidScale(0.0))
        );
        assert!(KernelSpec::imq(-1.0).is_err());
        assert!(KernelSpec::gaussian(f64::NAN).is_err());
        assert!(KernelSpec::new(KernelFamily::Constant, -3.0).is_ok());
    }

    #[test]
    fn gram_examples() {
        let ones = gram_matrix(&KernelSpec::constant(), &[0.3, 7.0, 2.0]);
        assert!(ones.iter().all(|&v| v == 1.0));
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert!(gram_matrix(&g, &[0.0, 0.0]).iter().all(|&v| v == 1.0));
        let m = gram_matrix(&g, &[0.0, 1.0]);
        assert!((m[[0, 1]] - 0.6065306597126334).abs() < 1e-12);
        assert_eq!(m[[0, 1]], m[[1, 0]]);
        let imq = gram_matrix(&KernelSpec::imq(0.5).unwrap(), &[1.0, 4.0]);
        assert_eq!(imq[[0, 0]], 2.0);
    }

    #[test]
    fn median_examples() {
        assert_eq!(median_heuristic(&[0.0, 1.0, 2.0]), Ok(1.0));
        assert_eq!(median_heuristic(&[0.0, 1.0]), Ok(1.0));
        assert_eq!(
            median_heuristic(&[5.0, 5.0, 5.0]),
            Err(KernelError::DegenerateScale)
        );
        assert_eq!(median_heuristic(&[5.0]), Err(KernelError::TooFewValues));
        // 4 points -> 6 distances {1,2,3,1,2,1} sorted {1,1,1,2,2,3}; lower median index 2.
        assert_eq!(median_heuristic(&[0.0, 1.0, 2.0, 3.0]), Ok(1.0));
    }
}
