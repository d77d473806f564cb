#![allow(dead_code)]

pub mod oracle;

use ethnoname_core::encoding::{Mode, VOCAB_SIZE};
use ethnoname_core::{seeded_rng, Model, ModelSpec};
use rand::Rng;

/// A random tiny configuration: embedding width ≤ 4, one or two BiLSTM
/// layers of width ≤ 3, weights drawn from U(-1.5, 1.5) so gates leave the
/// linear regime, and a random index sequence of length ≤ 5.
pub fn random_tiny(seed: u64) -> (Model, Vec<u8>) {
    let mut rng = seeded_rng(seed, 99);
    let mode = if rng.gen_bool(0.5) {
        Mode::LastName
    } else {
        Mode::FullName
    };
    let dim = rng.gen_range(1..=4);
    let depth = rng.gen_range(1..=2);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=3)).collect();
    let mut model = Model::zeros(&ModelSpec::stacked(mode, dim, &hidden)).unwrap();
    for p in model.params_mut() {
        for v in p.iter_mut() {
            *v = rng.gen_range(-1.5..1.5);
        }
    }
    let len = rng.gen_range(1..=5);
    let seq = (0..len).map(|_| rng.gen_range(0..VOCAB_SIZE as u8)).collect();
    (model, seq)
}
