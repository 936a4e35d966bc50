//! Seeded random streams. Each consumer owns an independent ChaCha8 stream
//! derived from the run seed, so that e.g. evaluation never shifts the
//! training trajectory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::plasticity::PlasticityRngs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    DataOrder = 2,
    Encoding = 3,
    Decision = 4,
    DeviceNoise = 5,
    Shuffle = 6,
    Evaluation = 7,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Evaluation stream for one (trained task, evaluated task) cell.
pub fn eval_stream(seed: u64, trained: usize, evaluated: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(Stream::Evaluation as u64 + 64 * (1 + trained as u64 * 16 + evaluated as u64));
    rng
}

pub fn plasticity_rngs(seed: u64) -> PlasticityRngs {
    PlasticityRngs {
        decision: stream(seed, Stream::Decision),
        device: stream(seed, Stream::DeviceNoise),
        shuffle: stream(seed, Stream::Shuffle),
    }
}
