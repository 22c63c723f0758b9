use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::pathmine::{sample_seed, EncodedBag, PAD};

/// A batch of bags padded to a common width with PAD triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Positions of the member bags in the source slice.
    pub indices: Vec<usize>,
    pub width: usize,
    /// `indices.len() × width` triplets, row-major.
    pub contexts: Vec<[u32; 3]>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn row(&self, i: usize) -> &[[u32; 3]] {
        &self.contexts[i * self.width..(i + 1) * self.width]
    }

    /// `true` where the triplet is a real context.
    pub fn mask(&self, i: usize) -> Vec<bool> {
        self.row(i).iter().map(|t| *t != [PAD; 3]).collect()
    }
}

/// Shuffle seed for one epoch.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    sample_seed(seed, epoch as u64)
}

/// Splits `bags` into batches of `batch_size` (the last may be short).
/// With `shuffle_seed` the order is a seeded permutation; without it the
/// corpus order is kept.
pub fn make_batches(bags: &[EncodedBag], batch_size: usize, shuffle_seed: Option<u64>) -> Vec<Batch> {
    assert!(batch_size > 0, "batch size must be positive");
    let mut order: Vec<usize> = (0..bags.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order
        .chunks(batch_size)
        .map(|indices| {
            let width = indices.iter().map(|&i| bags[i].contexts.len()).max().unwrap_or(0);
            let mut contexts = Vec::with_capacity(indices.len() * width);
            for &i in indices {
                let bag = &bags[i].contexts;
                contexts.extend_from_slice(bag);
                contexts.extend(std::iter::repeat_n([PAD; 3], width - bag.len()));
            }
            Batch { indices: indices.to_vec(), width, contexts }
        })
        .collect()
}
