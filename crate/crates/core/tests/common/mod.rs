#![allow(dead_code)]

use memcl_core::{ExperimentConfig, IdxDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `per_class` noisy 28x28 images per digit class: class `c` lights the
/// `c`-th band of rows.
pub fn synthetic(per_class: usize, seed: u64) -> IdxDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for k in 0..per_class * 10 {
        let c = (k % 10) as u8;
        for r in 0..28 {
            for _ in 0..28 {
                let on = r / 3 == c as usize;
                let base = if on { 0.8 } else { 0.05 };
                pixels.push((base + rng.random_range(-0.05f32..0.05)).clamp(0.0, 1.0));
            }
        }
        labels.push(c);
    }
    IdxDataset::new(28, 28, pixels, labels).unwrap()
}

/// A small, quick configuration with the default dynamics.
pub fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.network.hidden = 12;
    cfg.run.t_train = 15;
    cfg.run.t_eval = 10;
    cfg
}
