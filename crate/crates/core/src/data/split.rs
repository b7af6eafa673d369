use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Utterance;
use crate::error::{Error, Result};

/// Fraction of the training set held out for model selection when no
/// dev file is given.
pub const DEFAULT_DEV_FRACTION: f64 = 0.1;

/// Number of utterances kept by [`fractional_split`]: `ceil(fraction · n)`.
pub fn split_size(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "split fraction must be in (0, 1], got {fraction}"
        )));
    }
    // tolerate representation error such as 0.1 · 10 = 1.0000000000000002
    let exact = fraction * n as f64;
    Ok(((exact - 1e-9).ceil().max(0.0) as usize).min(n))
}

fn sampled_indices(n: usize, keep: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut idx = sample(&mut rng, n, keep).into_vec();
    idx.sort_unstable();
    idx
}

/// Samples `ceil(fraction · N)` utterances without replacement, keeping
/// corpus order. Deterministic for a given seed and fraction; different
/// fractions draw from independent streams.
pub fn fractional_split<T: Clone>(corpus: &[T], fraction: f64, seed: u64) -> Result<Vec<T>> {
    let keep = split_size(corpus.len(), fraction)?;
    if keep == corpus.len() {
        return Ok(corpus.to_vec());
    }
    Ok(sampled_indices(corpus.len(), keep, seed, fraction.to_bits())
        .into_iter()
        .map(|i| corpus[i].clone())
        .collect())
}

/// Holds out `ceil(fraction · N)` utterances as a dev set; returns
/// `(train, dev)`. A corpus of one utterance cannot be split and is
/// returned as `(corpus, [])`.
pub fn holdout_dev<T: Clone>(corpus: &[T], fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let n_dev = split_size(corpus.len(), fraction)?;
    if corpus.len() < 2 || n_dev == 0 {
        return Ok((corpus.to_vec(), Vec::new()));
    }
    let n_dev = n_dev.min(corpus.len() - 1);
    let dev_idx = sampled_indices(corpus.len(), n_dev, seed, u64::MAX);
    let mut is_dev = vec![false; corpus.len()];
    dev_idx.iter().for_each(|&i| is_dev[i] = true);
    let (dev, train): (Vec<_>, Vec<_>) = corpus.iter().cloned().zip(is_dev).partition(|(_, d)| *d);
    Ok((
        train.into_iter().map(|(u, _)| u).collect(),
        dev.into_iter().map(|(u, _)| u).collect(),
    ))
}

/// Holds out the dev share of the whole corpus, then samples
/// `ceil(fraction · N)` training utterances (at most all of the rest) from
/// the remainder. The dev set depends only on the seed and the dev
/// fraction, so it is the same for every training size.
pub fn train_dev_split<T: Clone>(
    corpus: &[T],
    fraction: f64,
    dev_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    let keep = split_size(corpus.len(), fraction)?;
    let (rest, dev) = holdout_dev(corpus, dev_fraction, seed)?;
    let keep = keep.min(rest.len());
    if keep == rest.len() {
        return Ok((rest, dev));
    }
    let train = sampled_indices(rest.len(), keep, seed, fraction.to_bits())
        .into_iter()
        .map(|i| rest[i].clone())
        .collect();
    Ok((train, dev))
}

/// Utterance ids per split, written next to a checkpoint for reproducibility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub fraction: f64,
    pub train: Vec<String>,
    pub dev: Vec<String>,
}

impl SplitManifest {
    pub fn new(seed: u64, fraction: f64, train: &[Utterance], dev: &[Utterance]) -> Self {
        Self {
            seed,
            fraction,
            train: train.iter().map(|u| u.id.clone()).collect(),
            dev: dev.iter().map(|u| u.id.clone()).collect(),
        }
    }
}
