use ethnoname_core::dataprep::prepare;
use ethnoname_core::dataprep::toy::{toy_class_of, toy_corpus, ToyConfig};
use ethnoname_core::encoding::Mode;
use ethnoname_core::training::{evaluate, train, Hyperparams, INIT_STREAM};
use ethnoname_core::{seeded_rng, Model, ModelSpec};

#[test]
fn toy_prep_balances_every_cell() {
    let raw = toy_corpus(7, ToyConfig::default());
    let prepared = prepare(raw, Mode::LastName, 0.2, 7).unwrap();
    let m = &prepared.manifest;
    assert_eq!(m.dropped.excluded_race, ToyConfig::default().excluded_rows);
    assert!(m.cells.iter().all(|c| c.after == m.group_size));
    assert_eq!(m.group_size, ToyConfig::default().minority_rows);
    assert_eq!(prepared.train.len() + prepared.test.len(), 8 * m.group_size);
    let again = prepare(toy_corpus(7, ToyConfig::default()), Mode::LastName, 0.2, 7).unwrap();
    assert_eq!(prepared.train, again.train);
    assert_eq!(prepared.test, again.test);
}

#[test]
fn toy_names_are_labelled_by_their_bigrams() {
    for r in toy_corpus(1, ToyConfig::default()) {
        if let Ok(race) = r.race.parse::<ethnoname_core::Race>() {
            assert_eq!(toy_class_of(&r.last.to_lowercase()), Some(race.index()), "{}", r.last);
        }
    }
}

#[test]
fn short_training_run_beats_chance() {
    let prepared = prepare(toy_corpus(2, ToyConfig::default()), Mode::LastName, 0.2, 2).unwrap();
    let model = Model::init(&ModelSpec::toy_student(Mode::LastName), &mut seeded_rng(2, INIT_STREAM)).unwrap();
    let hp = Hyperparams {
        learning_rate: 0.01,
        epochs: 3,
        ..Hyperparams::default()
    };
    let out = train(model, &prepared.train, &hp).unwrap();
    assert!(out.history[2].mean_loss < out.history[0].mean_loss);
    assert!(evaluate(&out.model, &prepared.test).unwrap().accuracy > 0.5);
}
