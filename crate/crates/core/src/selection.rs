//! Kernel-parameter selection by a power proxy.
//!
//! The statistic is a V-statistic `Psi^2 = (1/n^2) sum_ij J(i, j)` with
//! `J(i, j) = D_i D_j L(T_i, T_j) g(i, j)` and
//!
//! ```text
//! g(i, j) = K_ij pi_i pi_j - 2 pi_i (K B)_ij + (B' K B)_ij
//! ```
//!
//! Candidates are scored on a random selection split by
//! `Psi^2 / (sigma_H1 + lambda)`, where `sigma_H1^2` is the spread of the row
//! means of `J`. The winner is then used on the held-out remainder.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::TruncatedDataset;
use crate::kernels::{gram_matrix, median_heuristic, KernelError, KernelFamily, KernelSpec};
use crate::kqic::build_matrices;
use crate::rng::stream_rng;

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("candidate grid is empty")]
    EmptyGrid,
    #[error("split fraction must lie in (0, 1), got {0}")]
    InvalidSplit(f64),
    #[error("regulariser must be positive, got {0}")]
    InvalidLambda(f64),
    #[error(
        "degenerate split: {selection} selection subjects ({events} events), {held_out} held out"
    )]
    DegenerateSplit {
        selection: usize,
        events: usize,
        held_out: usize,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Candidate kernels. `MedianScaled` multiplies the median heuristic of the
/// selection split by `2^k` for each exponent, independently for the entry
/// and time kernels, so the held-out subjects never shape the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grid {
    Explicit(Vec<(KernelSpec, KernelSpec)>),
    MedianScaled {
        family: KernelFamily,
        exponents: Vec<i32>,
    },
}

impl Grid {
    pub fn median_scaled(family: KernelFamily) -> Self {
        Grid::MedianScaled {
            family,
            exponents: (-3..=3).collect(),
        }
    }

    /// Concrete candidate list for `dataset`, outer loop over the entry
    /// kernel.
    pub fn resolve(
        &self,
        dataset: &TruncatedDataset,
    ) -> Result<Vec<(KernelSpec, KernelSpec)>, SelectionError> {
        match self {
            Grid::Explicit(pairs) => Ok(pairs.clone()),
            Grid::MedianScaled { family, exponents } => {
                let scales = |values: Vec<f64>| -> Result<Vec<KernelSpec>, SelectionError> {
                    let med = if *family == KernelFamily::Constant {
                        1.0
                    } else {
                        median_heuristic(&values)?
                    };
                    exponents
                        .iter()
                        .map(|&k| {
                            KernelSpec::new(*family, med * 2f64.powi(k))
                                .map_err(SelectionError::from)
                        })
                        .collect()
                };
                let xs = scales(dataset.entries())?;
                let ts = scales(dataset.observed())?;
                Ok(xs
                    .iter()
                    .flat_map(|kx| ts.iter().map(move |ky| (*kx, *ky)))
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub grid: Grid,
    pub split_fraction: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            grid: Grid::median_scaled(KernelFamily::Gaussian),
            split_fraction: 0.2,
            lambda: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub chosen: (KernelSpec, KernelSpec),
    pub chosen_index: usize,
    pub candidates: Vec<(KernelSpec, KernelSpec)>,
    pub proxy_values: Vec<f64>,
    #[serde(skip)]
    pub test_subset: TruncatedDataset,
    pub selection_size: usize,
    pub selection_events: usize,
    pub test_events: usize,
    /// Set when the split was unusable and median-heuristic kernels on the
    /// full dataset were substituted.
    pub fallback: bool,
}

/// `g(i, j)` for every pair, given the entry kernel.
fn g_matrix(k: &Array2<f64>, b: &Array2<f64>, pi: &Array1<f64>) -> Array2<f64> {
    let kb = k.dot(b);
    let btkb = b.t().dot(&kb);
    Array2::from_shape_fn(k.dim(), |(i, j)| {
        k[[i, j]] * pi[i] * pi[j] - 2.0 * pi[i] * kb[[i, j]] + btkb[[i, j]]
    })
}

/// `J(i, j) = D_i D_j L(T_i, T_j) g(i, j)`.
pub fn jn_matrix(dataset: &TruncatedDataset, kx: &KernelSpec, ky: &KernelSpec) -> Array2<f64> {
    let parts = build_matrices(dataset, kx, ky);
    let g = g_matrix(&parts.k, &parts.b, &parts.pi_diag);
    &parts.l_tilde * &g
}

/// `(1/n) sum_i ((1/n) sum_j J_ij)^2 - ((1/n^2) sum_ij J_ij)^2`, clamped at 0.
pub fn variance_h1(jn: &Array2<f64>) -> f64 {
    let n = jn.nrows();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let row_means: Vec<f64> = jn.rows().into_iter().map(|r| r.sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let second = row_means.iter().map(|r| r * r).sum::<f64>() / nf;
    (second - grand * grand).max(0.0)
}

fn proxy(jn: &Array2<f64>, lambda: f64) -> f64 {
    let n = jn.nrows() as f64;
    let stat = jn.sum() / (n * n);
    stat / (variance_h1(jn).sqrt() + lambda)
}

/// Proxy score of every candidate on `dataset`. Entry-kernel work is shared
/// between candidates with the same entry kernel.
pub fn score_candidates(
    dataset: &TruncatedDataset,
    candidates: &[(KernelSpec, KernelSpec)],
    lambda: f64,
) -> Vec<f64> {
    let c = KernelSpec::constant();
    let base = build_matrices(dataset, &c, &c);
    let x = dataset.entries();
    let t = dataset.observed();
    let delta: Vec<f64> = dataset
        .events()
        .iter()
        .map(|&d| if d { 1.0 } else { 0.0 })
        .collect();

    let mut g_cache: Vec<(KernelSpec, Array2<f64>)> = Vec::new();
    let mut l_cache: Vec<(KernelSpec, Array2<f64>)> = Vec::new();
    candidates
        .iter()
        .map(|(kx, ky)| {
            let gi = match g_cache.iter().position(|(s, _)| s == kx) {
                Some(i) => i,
                None => {
                    let k = gram_matrix(kx, &x);
                    g_cache.push((*kx, g_matrix(&k, &base.b, &base.pi_diag)));
                    g_cache.len() - 1
                }
            };
            let li = match l_cache.iter().position(|(s, _)| s == ky) {
                Some(i) => i,
                None => {
                    let mut l = gram_matrix(ky, &t);
                    ndarray::Zip::indexed(&mut l).for_each(|(i, j), v| *v *= delta[i] * delta[j]);
                    l_cache.push((*ky, l));
                    l_cache.len() - 1
                }
            };
            let jn = &l_cache[li].1 * &g_cache[gi].1;
            proxy(&jn, lambda)
        })
        .collect()
}

/// Index of the largest finite score; ties go to the lowest index.
fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            continue;
        }
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Seeded split into `(selection, held_out)` index lists, each in original
/// order.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, 0));
    let take = ((n as f64 * fraction).round() as usize).min(n);
    let mut sel = idx[..take].to_vec();
    let mut rest = idx[take..].to_vec();
    sel.sort_unstable();
    rest.sort_unstable();
    (sel, rest)
}

pub fn select_bandwidths(
    dataset: &TruncatedDataset,
    config: &SelectionConfig,
) -> Result<SelectionResult, SelectionError> {
    if !(config.split_fraction > 0.0 && config.split_fraction < 1.0) {
        return Err(SelectionError::InvalidSplit(config.split_fraction));
    }
    if config.lambda.is_nan() || config.lambda <= 0.0 {
        return Err(SelectionError::InvalidLambda(config.lambda));
    }
    let (sel_idx, test_idx) = split_indices(dataset.len(), config.split_fraction, config.seed);
    let selection = dataset.subset(&sel_idx);
    let test_subset = dataset.subset(&test_idx);
    let selection_events = selection.event_count();
    if selection.len() < 2 || selection_events == 0 || test_subset.len() < 2 {
        return Err(SelectionError::DegenerateSplit {
            selection: selection.len(),
            events: selection_events,
            held_out: test_subset.len(),
        });
    }
    let candidates = match config.grid.resolve(&selection) {
        Err(SelectionError::Kernel(_)) => {
            return Err(SelectionError::DegenerateSplit {
                selection: selection.len(),
                events: selection_events,
                held_out: test_subset.len(),
            })
        }
        other => other?,
    };
    if candidates.is_empty() {
        return Err(SelectionError::EmptyGrid);
    }
    let proxy_values = score_candidates(&selection, &candidates, config.lambda);
    // All-NaN scores cannot occur for valid kernels; fall back to the first.
    let chosen_index = argmax(&proxy_values).unwrap_or(0);
    Ok(SelectionResult {
        chosen: candidates[chosen_index],
        chosen_index,
        candidates,
        proxy_values,
        test_events: test_subset.event_count(),
        test_subset,
        selection_size: sel_idx.len(),
        selection_events,
        fallback: false,
    })
}

/// Median-heuristic kernels of `family` for entry and observed times.
pub fn median_kernels(
    dataset: &TruncatedDataset,
    family: KernelFamily,
) -> Result<(KernelSpec, KernelSpec), KernelError> {
    if family == KernelFamily::Constant {
        return Ok((KernelSpec::constant(), KernelSpec::constant()));
    }
    Ok((
        KernelSpec::new(family, median_heuristic(&dataset.entries())?)?,
        KernelSpec::new(family, median_heuristic(&dataset.observed())?)?,
    ))
}

/// [`select_bandwidths`], falling back to median-heuristic kernels of
/// `family` on the full dataset when the split is degenerate.
pub fn select_or_fallback(
    dataset: &TruncatedDataset,
    config: &SelectionConfig,
    family: KernelFamily,
) -> Result<SelectionResult, SelectionError> {
    match select_bandwidths(dataset, config) {
        Err(SelectionError::DegenerateSplit { .. }) => {
            let chosen = median_kernels(dataset, family)?;
            Ok(SelectionResult {
                chosen,
                chosen_index: 0,
                candidates: vec![chosen],
                proxy_values: vec![f64::NAN],
                test_subset: dataset.clone(),
                selection_size: 0,
                selection_events: 0,
                test_events: dataset.event_count(),
                fallback: true,
            })
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn variance_examples() {
        assert_eq!(variance_h1(&Array2::zeros((3, 3))), 0.0);
        assert_eq!(variance_h1(&Array2::ones((2, 2))), 0.0);
        assert!((variance_h1(&array![[1.0, 0.0], [0.0, 0.0]]) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn jn_on_hand_fixtures() {
        let d3c =
            TruncatedDataset::from_triples(&[(1., 4., true), (2., 5., false), (3., 6., true)]);
        let c = KernelSpec::constant();
        let jn = jn_matrix(&d3c, &c, &c);
        assert!((jn.sum() / 9.0 - 4.0 / 81.0).abs() < 1e-15);
        let censored = TruncatedDataset::from_triples(&[(1., 4., false), (2., 5., false)]);
        assert!(jn_matrix(&censored, &c, &c).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmax(&[f64::NAN, 0.5]), Some(1));
        assert_eq!(argmax(&[f64::NAN]), None);
    }

    #[test]
    fn split_is_a_partition() {
        let (a, b) = split_indices(10, 0.2, 4);
        assert_eq!(a.len(), 2);
        let mut all: Vec<_> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_indices(10, 0.2, 4), (a, b));
    }

    #[test]
    fn single_candidate_and_degenerate_split() {
        let triples: Vec<_> = (0..20)
            .map(|i| {
                (
                    i as f64 * 0.1,
                    i as f64 * 0.1 + 1.0 + (i % 3) as f64,
                    i % 4 != 0,
                )
            })
            .collect();
        let d = TruncatedDataset::from_triples(&triples);
        let pair = (
            KernelSpec::gaussian(0.5).unwrap(),
            KernelSpec::gaussian(1.0).unwrap(),
        );
        let cfg = SelectionConfig {
            grid: Grid::Explicit(vec![pair]),
            ..Default::default()
        };
        let r = select_bandwidths(&d, &cfg).unwrap();
        assert_eq!(r.chosen, pair);
        assert_eq!(r.test_subset.len(), 16);

        let tiny =
            TruncatedDataset::from_triples(&[(0., 1., true), (0.5, 2., true), (0.2, 3., true)]);
        assert!(matches!(
            select_bandwidths(&tiny, &cfg),
            Err(SelectionError::DegenerateSplit { .. })
        ));
        let fb = select_or_fallback(&tiny, &cfg, KernelFamily::Gaussian).unwrap();
        assert!(fb.fallback);
        assert_eq!(fb.test_subset, tiny);
    }
}
