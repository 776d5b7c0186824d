//! Permutations of entry times that respect truncation.

use rand::seq::SliceRandom;

use super::BaselineError;
use crate::data::TruncatedDataset;
use crate::rng::{stream_rng, StreamRng};

pub const MAX_PERMUTATION_ATTEMPTS: usize = 10_000;

/// Shuffles `entry` until every reassigned entry is below its observed
/// time.
pub(crate) fn permute_entries(
    entry: &[f64],
    observed: &[f64],
    rng: &mut StreamRng,
) -> Result<Vec<f64>, BaselineError> {
    let mut x = entry.to_vec();
    for _ in 0..MAX_PERMUTATION_ATTEMPTS {
        x.shuffle(rng);
        if x.iter().zip(observed).all(|(a, b)| a < b) {
            return Ok(x);
        }
    }
    Err(BaselineError::PermutationInfeasible {
        attempts: MAX_PERMUTATION_ATTEMPTS,
    })
}

/// Uniform draw from the permutations of the entry times that keep every
/// `X < T`, by rejection over whole permutations. Observed times and event
/// flags stay in place.
pub fn truncation_permutation(
    dataset: &TruncatedDataset,
    seed: u64,
    stream_id: u64,
) -> Result<TruncatedDataset, BaselineError> {
    let x = permute_entries(
        &dataset.entries(),
        &dataset.observed(),
        &mut stream_rng(seed, stream_id),
    )?;
    Ok(dataset
        .with_entries(&x)
        .expect("accepted permutation keeps entry < observed"))
}
