use rand::Rng;

const ROUNDS: usize = 4;

/// A bijection on `0..n` used to shuffle update probabilities among weights.
///
/// The random variant is a keyed balanced Feistel network over the smallest
/// even bit width covering `n`, with cycle-walking to stay inside the domain.
/// Evaluating it is O(1), so reshuffling per sample costs only a few key
/// draws instead of a full Fisher-Yates pass over every weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShufflePermutation {
    Identity,
    Feistel { n: u64, half_bits: u32, keys: [u64; ROUNDS] },
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl ShufflePermutation {
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        assert!(n > 0, "empty permutation domain");
        let bits = (usize::BITS - (n - 1).leading_zeros()).max(2);
        let half_bits = bits.div_ceil(2);
        let mut keys = [0u64; ROUNDS];
        keys.iter_mut().for_each(|k| *k = rng.random());
        Self::Feistel { n: n as u64, half_bits, keys }
    }

    /// Draws fresh keys, keeping the domain.
    pub fn reshuffle<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if let Self::Feistel { keys, .. } = self {
            keys.iter_mut().for_each(|k| *k = rng.random());
        }
    }

    #[inline]
    pub fn apply(&self, idx: usize) -> usize {
        match *self {
            Self::Identity => idx,
            Self::Feistel { n, half_bits, ref keys } => {
                let mask = (1u64 << half_bits) - 1;
                let mut x = idx as u64;
                loop {
                    let (mut l, mut r) = (x >> half_bits, x & mask);
                    for &k in keys {
                        let f = mix(r ^ k) & mask;
                        (l, r) = (r, l ^ f);
                    }
                    x = (l << half_bits) | r;
                    if x < n {
                        return x as usize;
                    }
                }
            }
        }
    }
}
