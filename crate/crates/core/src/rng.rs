//! Seeds and generators.
//!
//! Every stochastic routine takes either a [`Seed`] or a `&mut GaussRng`.
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded through
//! `SeedableRng::seed_from_u64`, which is platform independent, so all runs
//! replay bit-exactly. Independent streams are obtained with
//! [`Seed::derive`], a SplitMix64-based mix of the parent seed and a stream
//! index; sharded Monte-Carlo loops derive one seed per fixed-size chunk so
//! results do not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type GaussRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn new(value: u64) -> Self {
        Seed(value)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> GaussRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Seed of sub-stream `stream`. Distinct streams give statistically
    /// independent generators; the mapping is fixed forever.
    pub fn derive(self, stream: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(stream.wrapping_add(0x9E37_79B9_7F4A_7C15))))
    }

    /// Shorthand for a two-level derivation.
    pub fn derive2(self, a: u64, b: u64) -> Seed {
        self.derive(a).derive(b)
    }
}

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Seed(value)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fixed chunk size for sharded Monte-Carlo loops.
pub const MC_CHUNK: usize = 1 << 16;

/// Splits `n` draws into fixed chunks `(chunk_index, len)`.
pub(crate) fn chunks(n: usize) -> impl Iterator<Item = (u64, usize)> {
    let full = n / MC_CHUNK;
    let rem = n % MC_CHUNK;
    (0..full)
        .map(|c| (c as u64, MC_CHUNK))
        .chain((rem > 0).then_some((full as u64, rem)))
}

/// Runs `f` over the fixed chunks of `n` draws in parallel; chunk `c` uses
/// the generator of `seed.derive(c)`. Results come back in chunk order, so
/// any fold over them is independent of the thread count.
pub(crate) fn par_chunks<T, F>(seed: Seed, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut GaussRng, usize) -> T + Sync,
{
    use rayon::prelude::*;
    let list: Vec<(u64, usize)> = chunks(n).collect();
    list.into_par_iter()
        .map(|(c, len)| f(&mut seed.derive(c).rng(), len))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Seed(7).rng();
        let mut b = Seed(7).rng();
        for _ in 0..100 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn derived_streams_differ() {
        let s = Seed(1);
        assert_ne!(s.derive(0), s.derive(1));
        assert_ne!(s.derive(0), s);
        assert_eq!(s.derive(3), Seed(1).derive(3));
    }

    #[test]
    fn chunking_covers_everything() {
        let total: usize = chunks(3 * MC_CHUNK + 17).map(|(_, n)| n).sum();
        assert_eq!(total, 3 * MC_CHUNK + 17);
        assert_eq!(chunks(0).count(), 0);
        assert_eq!(chunks(MC_CHUNK).count(), 1);
    }
}
