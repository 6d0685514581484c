//! Class-balanced mini-batch selection by accept/reject over shuffled
//! candidate batches.

use crate::error::{Error, Result};
use crate::tensor::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbundanceBand {
    pub lo: f64,
    pub hi: f64,
}

impl Default for AbundanceBand {
    fn default() -> Self {
        AbundanceBand { lo: 0.20, hi: 0.40 }
    }
}

impl AbundanceBand {
    /// Whether the pooled class fractions of `counts` all lie in the band.
    pub fn accepts(&self, counts: &[u64]) -> bool {
        let total: u64 = counts.iter().sum();
        total > 0
            && counts.iter().all(|&c| {
                let f = c as f64 / total as f64;
                f >= self.lo && f <= self.hi
            })
    }
}

/// One epoch's worth of batches (item indices).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    pub batches: Vec<Vec<usize>>,
    /// No candidate satisfied the band; batches are unfiltered.
    pub fallback: bool,
    /// Fewer full batches than the data would allow were accepted.
    pub under_supplied: bool,
    pub rejected: usize,
}

/// Pooled per-class pixel counts of a batch.
pub fn batch_counts(class_counts: &[Vec<u64>], batch: &[usize]) -> Vec<u64> {
    let n = class_counts.first().map_or(0, Vec::len);
    let mut acc = vec![0u64; n];
    for &i in batch {
        acc.iter_mut().zip(&class_counts[i]).for_each(|(a, c)| *a += c);
    }
    acc
}

/// Draws candidate batches from a shuffled pool; a candidate is kept iff
/// its pooled class abundance lies in `band` for every class, otherwise the
/// pool is reshuffled and its tiles stay available. Stops after
/// `max_attempts` rejections. When nothing is accepted the epoch falls back
/// to plain shuffled batches and a warning is logged.
pub fn stratified_batches(
    class_counts: &[Vec<u64>],
    batch_size: usize,
    band: AbundanceBand,
    rng: &mut Rng,
    max_attempts: usize,
) -> Result<BatchPlan> {
    if class_counts.is_empty() {
        return Err(Error::Contract("stratified sampling over an empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let bs = batch_size.min(class_counts.len());
    let mut pool: Vec<usize> = (0..class_counts.len()).collect();
    rng.shuffle(&mut pool);
    let mut batches = Vec::new();
    let mut rejected = 0;
    while pool.len() >= bs && rejected < max_attempts {
        let candidate = &pool[..bs];
        if band.accepts(&batch_counts(class_counts, candidate)) {
            batches.push(candidate.to_vec());
            pool.drain(..bs);
        } else {
            rejected += 1;
            rng.shuffle(&mut pool);
        }
    }
    let possible = class_counts.len() / bs;
    if batches.is_empty() {
        log::warn!(
            "no batch of {bs} met the class abundance band [{}, {}] after {rejected} attempts; using unfiltered batches",
            band.lo,
            band.hi
        );
        let mut order: Vec<usize> = (0..class_counts.len()).collect();
        rng.shuffle(&mut order);
        return Ok(BatchPlan {
            batches: order.chunks(bs).map(<[usize]>::to_vec).collect(),
            fallback: true,
            under_supplied: true,
            rejected,
        });
    }
    let under_supplied = batches.len() < possible;
    if under_supplied {
        log::warn!(
            "only {} of {possible} batches met the class abundance band after {rejected} rejections",
            batches.len()
        );
    }
    Ok(BatchPlan {
        batches,
        fallback: false,
        under_supplied,
        rejected,
    })
}
