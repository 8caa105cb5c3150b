//! Seeded mini-batch ordering.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::{Manifest, ManifestEntry, Split};
use super::{DataError, Result};

/// Index batches covering `0..n` once, shuffled by `(seed, epoch)`.
/// The last batch is short when `batch_size` does not divide `n`.
pub fn epoch_batches(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    assert!(batch_size > 0, "batch_size must be positive");
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    idx.shuffle(&mut rng);
    idx.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Endless batch stream over one split, reshuffled every epoch.
pub struct BatchIter<'a> {
    entries: Vec<&'a ManifestEntry>,
    batch_size: usize,
    seed: u64,
    epoch: u64,
    pending: std::vec::IntoIter<Vec<usize>>,
}

impl<'a> BatchIter<'a> {
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn len_entries(&self) -> usize {
        self.entries.len()
    }
}

impl<'a> Iterator for BatchIter<'a> {
    type Item = Vec<&'a ManifestEntry>;

    fn next(&mut self) -> Option<Self::Item> {
        let batch = match self.pending.next() {
            Some(b) => b,
            None => {
                self.epoch += 1;
                self.pending = epoch_batches(self.entries.len(), self.batch_size, self.seed, self.epoch).into_iter();
                self.pending.next()?
            }
        };
        Some(batch.into_iter().map(|i| self.entries[i]).collect())
    }
}

pub fn batch_iter(manifest: &Manifest, split: Split, batch_size: usize, seed: u64) -> Result<BatchIter<'_>> {
    if batch_size == 0 {
        return Err(DataError::Plan("batch_size must be positive".into()));
    }
    let entries: Vec<&ManifestEntry> = manifest.split(split).collect();
    if entries.is_empty() {
        return Err(DataError::EmptySplit(split));
    }
    let pending = epoch_batches(entries.len(), batch_size, seed, 0).into_iter();
    Ok(BatchIter {
        entries,
        batch_size,
        seed,
        epoch: 0,
        pending,
    })
}
