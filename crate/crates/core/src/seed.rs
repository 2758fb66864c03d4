//! Deterministic random sources.
//!
//! Every random draw in the pipeline goes through [`SeedStream`]: a ChaCha8
//! keystream (`rand_chacha::ChaCha8Rng::seed_from_u64`) read as little-endian
//! `u64` words. Floats take the top 53 bits of a word; bounded integers use
//! rejection sampling on the raw word, so a port only needs ChaCha8 and the
//! two helpers below to reproduce a run.
//!
//! Per-task seeds are derived from a root seed by folding a list of parts
//! through SplitMix64 (see [`derive_seed`]). Shuffle iterations are the one
//! exception: iteration `i` of a randomized baseline uses the literal seed `i`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pipeline stage tags mixed into derived seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    WarmStart = 1,
    KMeans = 2,
    Synthetic = 3,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `root`: `h = splitmix64(h ^ splitmix64(part))` per part.
pub fn derive_seed(root: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(root), |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Seed for one `(stage, proposal)` task under `root`.
pub fn stage_seed(root: u64, stage: Stage, proposal_id: u64) -> u64 {
    derive_seed(root, &[stage as u64, proposal_id])
}

pub struct SeedStream {
    rng: ChaCha8Rng,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`. `bound` must be positive.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        // reject the tail that would bias the modulo
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }

    /// In-place Fisher–Yates using [`SeedStream::below`].
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
