//! Shared fixtures for the criterion benchmarks.

use ethnoname_core::encoding::{encode, Mode};
use ethnoname_core::inference::synthetic_names;
use ethnoname_core::training::INIT_STREAM;
use ethnoname_core::{seeded_rng, EncodedName, Model, ModelSpec};

/// A randomly initialized model of the given architecture.
pub fn model(spec: &ModelSpec) -> Model {
    Model::init(spec, &mut seeded_rng(0, INIT_STREAM)).expect("preset specs are valid")
}

/// `n` encoded synthetic names for `mode`.
pub fn encoded_names(n: usize, mode: Mode) -> Vec<EncodedName> {
    synthetic_names(n, 1)
        .iter()
        .map(|(first, last)| encode(mode, first, last))
        .collect()
}
