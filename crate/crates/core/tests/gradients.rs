mod common;

use common::random_tiny;
use ethnoname_core::encoding::{encode, Mode, VOCAB_SIZE};
use ethnoname_core::training::{
    backward, compare_gradients, grad_check, SoftTarget, Target, GRAD_CHECK_THRESHOLD, INIT_STREAM,
};
use ethnoname_core::{seeded_rng, Model, ModelSpec};
use rand::Rng;

const EPS: f64 = 1e-5;

fn soft(rng: &mut impl Rng, label: usize) -> Target {
    Target {
        label,
        soft: Some(SoftTarget {
            teacher_logits: (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            temperature: rng.gen_range(1.0..4.0),
            alpha: rng.gen_range(0.0..1.0),
        }),
    }
}

#[test]
fn random_tiny_configurations_pass() {
    for seed in 0..30 {
        let (model, seq) = random_tiny(seed);
        let mut rng = seeded_rng(seed, 98);
        let other: Vec<u8> = (0..seq.len()).map(|_| rng.gen_range(0..VOCAB_SIZE as u8)).collect();
        let target = if seed % 2 == 0 {
            Target::hard(rng.gen_range(0..4))
        } else {
            soft(&mut rng, 2)
        };
        let batch = [(&seq[..], target), (&other[..], Target::hard(1))];
        let r = grad_check(&model, &batch, EPS).unwrap();
        assert!(r.max_rel_error <= GRAD_CHECK_THRESHOLD, "seed {seed}: {r:?}");
    }
}

#[test]
fn scaled_down_presets_pass_in_both_modes() {
    for mode in [Mode::LastName, Mode::FullName] {
        for spec in [ModelSpec::stacked(mode, 4, &[3, 3]), ModelSpec::stacked(mode, 3, &[2])] {
            let model = Model::init(&spec, &mut seeded_rng(11, INIT_STREAM)).unwrap();
            let a = encode(mode, "Andrew", "Yang");
            let b = encode(mode, "Ana", "Lopez");
            let batch = [(a.indices(), Target::hard(0)), (b.indices(), Target::hard(2))];
            let r = grad_check(&model, &batch, EPS).unwrap();
            assert!(r.max_rel_error <= GRAD_CHECK_THRESHOLD, "{mode}: {r:?}");
        }
    }
}

#[test]
fn corrupted_gate_bias_gradient_is_detected() {
    let spec = ModelSpec::stacked(Mode::LastName, 3, &[2]);
    let model = Model::init(&spec, &mut seeded_rng(5, INIT_STREAM)).unwrap();
    let name = encode(Mode::LastName, "", "Smith");
    let batch = [(name.indices(), Target::hard(3))];
    let (_, mut grads) = backward(&model, &batch);
    assert!(compare_gradients(&model, &batch, EPS, &grads).unwrap().max_rel_error <= GRAD_CHECK_THRESHOLD);
    // Forward-direction bias of the first BiLSTM; forget gate is block 1.
    let hidden = 2;
    let bias = &mut grads.tensors_mut()[3];
    let k = (hidden..2 * hidden)
        .max_by(|&x, &y| bias[x].abs().total_cmp(&bias[y].abs()))
        .unwrap();
    bias[k] *= 1.1;
    let r = compare_gradients(&model, &batch, EPS, &grads).unwrap();
    assert!(r.max_rel_error > GRAD_CHECK_THRESHOLD, "{r:?}");
    assert_eq!(r.worst, (3, k));
}
