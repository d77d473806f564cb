use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::backward::backward;
use super::loss::{soft_kl, SoftTarget, Target};
use super::optim::Adam;
use super::TrainError;
use crate::dataprep::Example;
use crate::nncore::Model;
use crate::seeded_rng;

const SHUFFLE_STREAM: u64 = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Softmax temperature for distillation targets.
    pub temperature: f64,
    /// Weight of the hard-label loss during distillation.
    pub alpha: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 10,
            seed: 0,
            temperature: 2.0,
            alpha: 0.5,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::Hyperparams(msg.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning rate must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return bad("temperature must be positive");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: Vec<EpochLoss>,
}

/// Mini-batch Adam over shuffled epochs. Single-threaded and fully
/// determined by the initial model, the data order and `hp.seed`.
fn fit(
    mut model: Model,
    data: &[Example],
    hp: &Hyperparams,
    teacher: Option<&Model>,
    mut on_epoch: impl FnMut(&EpochLoss, &Model),
) -> Result<TrainOutcome, TrainError> {
    hp.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if let Some(ex) = data.iter().find(|ex| ex.input.mode() != model.mode()) {
        return Err(TrainError::ModeMismatch {
            model: model.mode(),
            data: ex.input.mode(),
        });
    }
    let mut rng = seeded_rng(hp.seed, SHUFFLE_STREAM);
    let mut adam = Adam::new(&model, hp.learning_rate);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(hp.epochs);
    for epoch in 1..=hp.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (bi, chunk) in order.chunks(hp.batch_size).enumerate() {
            let batch: Vec<(&[u8], Target)> = chunk
                .iter()
                .map(|&i| {
                    let ex = &data[i];
                    let soft = teacher.map(|t| SoftTarget {
                        teacher_logits: t
                            .logits_for_indices(ex.input.indices())
                            .expect("encoded names are non-empty"),
                        temperature: hp.temperature,
                        alpha: hp.alpha,
                    });
                    (ex.input.indices(), Target { label: ex.label, soft })
                })
                .collect();
            let (loss, grads) = backward(&model, &batch);
            if !loss.is_finite() || !grads.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: bi,
                    learning_rate: hp.learning_rate,
                });
            }
            total += loss * chunk.len() as f64;
            adam.step(&mut model, &grads);
        }
        let record = EpochLoss {
            epoch,
            mean_loss: total / data.len() as f64,
        };
        on_epoch(&record, &model);
        history.push(record);
    }
    Ok(TrainOutcome { model, history })
}

/// Trains on hard labels with cross-entropy.
pub fn train(model: Model, data: &[Example], hp: &Hyperparams) -> Result<TrainOutcome, TrainError> {
    fit(model, data, hp, None, |_, _| {})
}

/// Like [`train`], calling `on_epoch` after every epoch.
pub fn train_with(
    model: Model,
    data: &[Example],
    hp: &Hyperparams,
    on_epoch: impl FnMut(&EpochLoss, &Model),
) -> Result<TrainOutcome, TrainError> {
    fit(model, data, hp, None, on_epoch)
}

/// Trains `student` against the frozen `teacher`'s softened outputs mixed
/// with the hard labels (`hp.temperature`, `hp.alpha`).
pub fn distill(
    teacher: &Model,
    student: Model,
    data: &[Example],
    hp: &Hyperparams,
) -> Result<TrainOutcome, TrainError> {
    distill_with(teacher, student, data, hp, |_, _| {})
}

pub fn distill_with(
    teacher: &Model,
    student: Model,
    data: &[Example],
    hp: &Hyperparams,
    on_epoch: impl FnMut(&EpochLoss, &Model),
) -> Result<TrainOutcome, TrainError> {
    if teacher.mode() != student.mode() {
        return Err(TrainError::ModeMismatch {
            model: student.mode(),
            data: teacher.mode(),
        });
    }
    fit(student, data, hp, Some(teacher), on_epoch)
}

/// Mean soft-target KL between teacher and student over `data`.
pub fn mean_kl(teacher: &Model, student: &Model, data: &[Example], temperature: f64) -> f64 {
    let total: f64 = data
        .iter()
        .map(|ex| {
            let s = student.logits_for_indices(ex.input.indices()).expect("non-empty");
            let t = teacher.logits_for_indices(ex.input.indices()).expect("non-empty");
            soft_kl(&s, &t, temperature)
        })
        .sum();
    total / data.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode_lastname, Mode};
    use crate::nncore::ModelSpec;

    fn data() -> Vec<Example> {
        ["ab", "ba", "cc", "dd", "abab", "cdcd", "aa", "bb"]
            .iter()
            .enumerate()
            .map(|(i, n)| Example {
                input: encode_lastname(n),
                label: i % 4,
            })
            .collect()
    }

    fn fresh() -> Model {
        Model::init(&ModelSpec::stacked(Mode::LastName, 3, &[3]), &mut seeded_rng(1, 10)).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let hp = Hyperparams {
            learning_rate: 0.0,
            epochs: 2,
            batch_size: 3,
            ..Hyperparams::default()
        };
        let out = train(fresh(), &data(), &hp).unwrap();
        assert_eq!(out.model, fresh());
    }

    #[test]
    fn same_seed_same_history() {
        let hp = Hyperparams {
            learning_rate: 0.01,
            epochs: 3,
            batch_size: 3,
            seed: 4,
            ..Hyperparams::default()
        };
        let a = train(fresh(), &data(), &hp).unwrap();
        let b = train(fresh(), &data(), &hp).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
        let c = train(fresh(), &data(), &Hyperparams { seed: 5, ..hp }).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn alpha_one_distillation_is_plain_training() {
        let hp = Hyperparams {
            learning_rate: 0.01,
            epochs: 3,
            batch_size: 3,
            alpha: 1.0,
            ..Hyperparams::default()
        };
        let teacher = Model::init(&ModelSpec::stacked(Mode::LastName, 4, &[2]), &mut seeded_rng(9, 10)).unwrap();
        let plain = train(fresh(), &data(), &hp).unwrap();
        let distilled = distill(&teacher, fresh(), &data(), &hp).unwrap();
        assert_eq!(plain.history, distilled.history);
        assert_eq!(plain.model, distilled.model);
    }

    #[test]
    fn student_copy_approaches_teacher() {
        let teacher = Model::init(&ModelSpec::stacked(Mode::LastName, 3, &[3]), &mut seeded_rng(77, 10)).unwrap();
        let hp = Hyperparams {
            learning_rate: 0.01,
            epochs: 60,
            batch_size: 4,
            alpha: 0.0,
            temperature: 1.0,
            ..Hyperparams::default()
        };
        let d = data();
        let mut kls = Vec::new();
        distill_with(&teacher, fresh(), &d, &hp, |_, s| {
            kls.push(mean_kl(&teacher, s, &d, 1.0))
        })
        .unwrap();
        let start = mean_kl(&teacher, &fresh(), &d, 1.0);
        assert!(kls[kls.len() - 1] < 0.1 * start, "{start} -> {:?}", kls.last());
    }

    #[test]
    fn errors() {
        let hp = Hyperparams::default();
        assert!(matches!(train(fresh(), &[], &hp), Err(TrainError::EmptyDataset)));
        assert!(matches!(
            train(
                fresh(),
                &data(),
                &Hyperparams {
                    batch_size: 0,
                    ..hp.clone()
                }
            ),
            Err(TrainError::Hyperparams(_))
        ));
        let full = Model::init(&ModelSpec::stacked(Mode::FullName, 3, &[3]), &mut seeded_rng(1, 10)).unwrap();
        assert!(matches!(
            train(full.clone(), &data(), &hp),
            Err(TrainError::ModeMismatch { .. })
        ));
        assert!(matches!(
            distill(&full, fresh(), &data(), &hp),
            Err(TrainError::ModeMismatch { .. })
        ));
        let mut broken = fresh();
        broken.params_mut()[0][1] = f64::NAN;
        match train(broken, &data(), &hp) {
            Err(TrainError::NonFiniteLoss { epoch: 1, batch: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
