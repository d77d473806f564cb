use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use ethnoname_core::dataprep::toy::{toy_corpus, toy_last_name, ToyConfig};
use ethnoname_core::dataprep::{prepare, read_examples_csv, write_examples_csv, Example, PrepManifest};
use ethnoname_core::inference::{synthetic_names, throughput_bench, InferenceError};
use ethnoname_core::modelio::{load_model, save_model};
use ethnoname_core::training::{
    distill_with, evaluate, grad_check, train_with, EpochLoss, Hyperparams, Target, TrainOutcome, GRAD_CHECK_THRESHOLD,
    INIT_STREAM,
};
use ethnoname_core::{encode, predict_batch, seeded_rng, BatchRequest, Mode, Model, ModelSpec};

use crate::io;
use crate::{BenchArgs, DistillArgs, FitArgs, GradcheckArgs, PredictArgs, PrepArgs, Preset, TrainArgs};

pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn prep(args: PrepArgs) -> Result<ExitCode> {
    let raw = match &args.input {
        Some(path) => io::read_raw_records(path)?,
        None => toy_corpus(args.seed, ToyConfig::default()),
    };
    let mode = Mode::from(args.method);
    let prepared = prepare(raw, mode, args.test_fraction, args.seed)?;
    fs::create_dir_all(&args.output).with_context(|| format!("cannot create {}", args.output.display()))?;
    write_examples_csv(args.output.join(TRAIN_FILE), &prepared.train, mode)?;
    write_examples_csv(args.output.join(TEST_FILE), &prepared.test, mode)?;
    io::write_json(&args.output.join(MANIFEST_FILE), &prepared.manifest)?;
    let m = &prepared.manifest;
    eprintln!(
        "prep: {} rows in, group size {}, {} train, {} test",
        m.input_rows, m.group_size, m.train_rows, m.test_rows
    );
    Ok(ExitCode::SUCCESS)
}

struct Dataset {
    mode: Mode,
    train: Vec<Example>,
    test: Vec<Example>,
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest: PrepManifest = io::read_json(&dir.join(MANIFEST_FILE))?;
    let mode = manifest.mode;
    Ok(Dataset {
        mode,
        train: read_examples_csv(dir.join(TRAIN_FILE), mode)?,
        test: read_examples_csv(dir.join(TEST_FILE), mode)?,
    })
}

fn hyperparams(fit: &FitArgs, preset: Preset) -> Hyperparams {
    let toy = preset == Preset::Toy;
    Hyperparams {
        learning_rate: fit.lr.unwrap_or(if toy { 0.01 } else { 1e-3 }),
        batch_size: fit.batch_size,
        epochs: fit.epochs.unwrap_or(if toy { 30 } else { 10 }),
        seed: fit.seed,
        ..Hyperparams::default()
    }
}

fn sibling(model: &Path, suffix: &str) -> PathBuf {
    let stem = model
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    model.with_file_name(format!("{stem}{suffix}"))
}

fn log_epoch(e: &EpochLoss, _: &Model) {
    eprintln!("epoch {} mean_loss {}", e.epoch, e.mean_loss);
}

fn finish(out: TrainOutcome, data: &Dataset, model_path: &Path) -> Result<ExitCode> {
    save_model(&out.model, model_path)?;
    io::write_history(&sibling(model_path, ".history.csv"), &out.history)?;
    let report = evaluate(&out.model, &data.test)?;
    io::write_json(&sibling(model_path, ".eval.json"), &report)?;
    eprintln!("held-out accuracy {}", report.accuracy);
    Ok(ExitCode::SUCCESS)
}

pub fn train(args: TrainArgs) -> Result<ExitCode> {
    let data = load_dataset(&args.fit.data)?;
    let spec = match args.preset {
        Preset::Teacher => ModelSpec::teacher(data.mode),
        Preset::Student => ModelSpec::student(data.mode),
        Preset::Toy => ModelSpec::toy_teacher(data.mode),
    };
    let model = Model::init(&spec, &mut seeded_rng(args.fit.seed, INIT_STREAM))?;
    let hp = hyperparams(&args.fit, args.preset);
    let out = train_with(model, &data.train, &hp, log_epoch)?;
    finish(out, &data, &args.fit.model)
}

pub fn distill(args: DistillArgs) -> Result<ExitCode> {
    let data = load_dataset(&args.fit.data)?;
    let teacher = load_model(&args.teacher)?;
    let spec = match args.preset {
        Preset::Teacher => ModelSpec::teacher(data.mode),
        Preset::Student => ModelSpec::student(data.mode),
        Preset::Toy => ModelSpec::toy_student(data.mode),
    };
    let student = Model::init(&spec, &mut seeded_rng(args.fit.seed, INIT_STREAM))?;
    if student.param_count() >= teacher.param_count() {
        eprintln!(
            "warning: student has {} parameters, teacher {}",
            student.param_count(),
            teacher.param_count()
        );
    }
    let hp = Hyperparams {
        temperature: args.temperature,
        alpha: args.alpha,
        ..hyperparams(&args.fit, args.preset)
    };
    let out = distill_with(&teacher, student, &data.train, &hp, log_epoch)?;
    finish(out, &data, &args.fit.model)
}

pub fn predict(args: PredictArgs) -> Result<ExitCode> {
    let model = load_model(&args.model)?;
    let mode = args.method.map_or(model.mode(), Mode::from);
    if mode == Mode::FullName && args.first_col.is_none() {
        crate::usage_error("fullname prediction requires --first-col");
    }
    let first_col = args.first_col.as_deref().filter(|_| mode == Mode::FullName);
    let cols = io::read_name_columns(&args.input, first_col, &args.last_col)?;
    let req = BatchRequest {
        firstnames: cols.firstnames,
        lastnames: cols.lastnames,
        method: mode,
        threads: args.threads as usize,
        na_rm: args.na_rm,
    };
    let preds = match predict_batch(&req, &model) {
        Ok(p) => p,
        Err(InferenceError::MissingValue { row, component }) => bail!(
            "data row {} (line {}) has no {component} name; use --na-rm to drop such rows",
            row + 1,
            row + 2
        ),
        Err(e) => return Err(e.into()),
    };
    io::write_predictions(io::output(args.output.as_deref())?, &preds, mode)?;
    Ok(ExitCode::SUCCESS)
}

pub fn bench(args: BenchArgs) -> Result<ExitCode> {
    let model = match &args.model {
        Some(path) => load_model(path)?,
        None => Model::init(
            &ModelSpec::student(Mode::LastName),
            &mut seeded_rng(args.seed, INIT_STREAM),
        )?,
    };
    let threads: Vec<usize> = args.threads.iter().map(|&t| t as usize).collect();
    let rows = throughput_bench(&model, args.n as usize, &threads, args.repeats as usize);
    io::write_bench(io::output(args.output.as_deref())?, &rows)?;
    Ok(ExitCode::SUCCESS)
}

pub fn gradcheck(args: GradcheckArgs) -> Result<ExitCode> {
    let model = match &args.model {
        Some(path) => load_model(path)?,
        None => {
            let mode = Mode::from(args.method);
            let spec = match args.preset {
                Preset::Teacher => ModelSpec::teacher(mode),
                Preset::Student => ModelSpec::student(mode),
                Preset::Toy => ModelSpec::toy_student(mode),
            };
            Model::init(&spec, &mut seeded_rng(args.seed, INIT_STREAM))?
        }
    };
    let mut rng = seeded_rng(args.seed, 3);
    let firsts = synthetic_names(args.batch as usize, args.seed);
    let names: Vec<_> = (0..args.batch as usize)
        .map(|i| encode(model.mode(), &firsts[i].0, &toy_last_name(&mut rng, i % 4, 0.9)))
        .collect();
    let batch: Vec<(&[u8], Target)> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.indices(), Target::hard(i % 4)))
        .collect();
    let r = grad_check(&model, &batch, args.epsilon)?;
    println!(
        "max_rel_error {:e} tensor {} element {} analytic {:e} numeric {:e} params {}",
        r.max_rel_error, r.worst.0, r.worst.1, r.analytic, r.numeric, r.params_checked
    );
    if r.max_rel_error > GRAD_CHECK_THRESHOLD {
        eprintln!("error: gradient check failed (threshold {GRAD_CHECK_THRESHOLD:e})");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
