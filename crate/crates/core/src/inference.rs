//! Batch prediction over name lists.
//!
//! Work is split into static contiguous chunks, one per worker, and every
//! worker writes into its own pre-assigned slice of the output. The result
//! therefore never depends on the thread count or on scheduling.

use std::ops::Range;
use std::thread;
use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataprep::is_missing;
use crate::encoding::{encode, Mode};
use crate::labels::Race;
use crate::nncore::{argmax, softmax, Model, PreparedModel};
use crate::seeded_rng;

const BENCH_STREAM: u64 = 12;

/// Default number of timed runs per thread count.
pub const DEFAULT_REPEATS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub firstname: Option<String>,
    pub lastname: String,
    pub prob_asian: f64,
    pub prob_black: f64,
    pub prob_hispanic: f64,
    pub prob_white: f64,
    pub race: Race,
}

impl Prediction {
    pub fn probs(&self) -> [f64; 4] {
        [self.prob_asian, self.prob_black, self.prob_hispanic, self.prob_white]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRequest {
    /// Required for [`Mode::FullName`]; ignored otherwise.
    pub firstnames: Option<Vec<Option<String>>>,
    pub lastnames: Vec<Option<String>>,
    pub method: Mode,
    /// Upper bound on worker threads.
    pub threads: usize,
    /// Drop rows with a missing required component instead of failing.
    pub na_rm: bool,
}

impl BatchRequest {
    pub fn lastnames<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Self {
            firstnames: None,
            lastnames: names.into_iter().map(|s| Some(s.into())).collect(),
            method: Mode::LastName,
            threads: 1,
            na_rm: false,
        }
    }

    pub fn fullnames<S: Into<String>>(names: impl IntoIterator<Item = (S, S)>) -> Self {
        let (first, last): (Vec<_>, Vec<_>) = names.into_iter().map(|(f, l)| (Some(f.into()), Some(l.into()))).unzip();
        Self {
            firstnames: Some(first),
            lastnames: last,
            method: Mode::FullName,
            threads: 1,
            na_rm: false,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_na_rm(mut self, na_rm: bool) -> Self {
        self.na_rm = na_rm;
        self
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("row {row}: missing {component} name")]
    MissingValue { row: usize, component: &'static str },
    #[error("{firstnames} first names but {lastnames} last names")]
    LengthMismatch { firstnames: usize, lastnames: usize },
    #[error("fullname method requires first names")]
    MissingFirstnames,
    #[error("model expects {model} input but the request uses {method}")]
    ModeMismatch { model: Mode, method: Mode },
    #[error("threads must be at least 1")]
    ZeroThreads,
}

/// Splits `0..n` into at most `threads` contiguous ranges whose sizes
/// differ by at most one, larger ranges first.
pub fn partition_work(n: usize, threads: usize) -> Vec<Range<usize>> {
    assert!(threads >= 1, "threads must be at least 1");
    let workers = threads.min(n);
    if workers == 0 {
        return Vec::new();
    }
    let (base, extra) = (n / workers, n % workers);
    let mut start = 0;
    (0..workers)
        .map(|w| {
            let len = base + usize::from(w < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

fn component(v: Option<&Option<String>>) -> Option<&str> {
    v.and_then(|s| s.as_deref()).filter(|s| !is_missing(s))
}

struct Row<'a> {
    first: Option<&'a str>,
    last: &'a str,
}

fn retained_rows(req: &BatchRequest) -> Result<Vec<Row<'_>>, InferenceError> {
    let firsts = req.firstnames.as_ref();
    let mut rows = Vec::with_capacity(req.lastnames.len());
    for i in 0..req.lastnames.len() {
        let first = firsts.and_then(|f| component(f.get(i)));
        let last = component(req.lastnames.get(i));
        let missing = match (last, req.method) {
            (None, _) => Some("last"),
            (Some(_), Mode::FullName) if first.is_none() => Some("first"),
            _ => None,
        };
        match (missing, last) {
            (None, Some(last)) => rows.push(Row { first, last }),
            (Some(component), _) if !req.na_rm => return Err(InferenceError::MissingValue { row: i, component }),
            _ => {}
        }
    }
    Ok(rows)
}

fn predict_row(model: &PreparedModel<'_>, row: &Row<'_>) -> Prediction {
    let input = encode(model.model().mode(), row.first.unwrap_or(""), row.last);
    let logits = model
        .logits_for_indices(input.indices())
        .expect("encoded names are non-empty");
    let p = softmax(&logits);
    Prediction {
        firstname: row.first.map(str::to_string),
        lastname: row.last.to_string(),
        prob_asian: p[0],
        prob_black: p[1],
        prob_hispanic: p[2],
        prob_white: p[3],
        race: Race::from_index(argmax(&p)).expect("four classes"),
    }
}

/// One prediction per retained row, in input order.
pub fn predict_batch(req: &BatchRequest, model: &Model) -> Result<Vec<Prediction>, InferenceError> {
    if req.threads == 0 {
        return Err(InferenceError::ZeroThreads);
    }
    if req.method != model.mode() {
        return Err(InferenceError::ModeMismatch {
            model: model.mode(),
            method: req.method,
        });
    }
    match (&req.firstnames, req.method) {
        (None, Mode::FullName) => return Err(InferenceError::MissingFirstnames),
        (Some(f), _) if f.len() != req.lastnames.len() => {
            return Err(InferenceError::LengthMismatch {
                firstnames: f.len(),
                lastnames: req.lastnames.len(),
            })
        }
        _ => {}
    }
    let rows = retained_rows(req)?;
    Ok(run_partitioned(&model.prepare(), &rows, req.threads))
}

fn run_partitioned(model: &PreparedModel<'_>, rows: &[Row<'_>], threads: usize) -> Vec<Prediction> {
    let ranges = partition_work(rows.len(), threads);
    if ranges.len() <= 1 {
        return rows.iter().map(|r| predict_row(model, r)).collect();
    }
    let mut slots: Vec<Option<Prediction>> = vec![None; rows.len()];
    thread::scope(|s| {
        let mut rest = &mut slots[..];
        for range in ranges {
            let (mine, tail) = rest.split_at_mut(range.len());
            rest = tail;
            let chunk = &rows[range];
            s.spawn(move || {
                for (slot, row) in mine.iter_mut().zip(chunk) {
                    *slot = Some(predict_row(model, row));
                }
            });
        }
    });
    slots.into_iter().map(|p| p.expect("every slot filled")).collect()
}

/// Deterministic synthetic names: lowercase letters, length 4 to 8.
pub fn synthetic_names(n: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = seeded_rng(seed, BENCH_STREAM);
    let word = |rng: &mut crate::Rng| {
        let len = rng.gen_range(4..=8);
        (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect::<String>()
    };
    (0..n).map(|_| (word(&mut rng), word(&mut rng))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub threads: usize,
    pub n: usize,
    pub mean_seconds: f64,
}

/// Mean wall time of [`predict_batch`] over `repeats` runs on `n`
/// synthetic names, for each entry of `threads`.
pub fn throughput_bench(model: &Model, n: usize, threads: &[usize], repeats: usize) -> Vec<BenchRow> {
    assert!(n >= 1 && repeats >= 1);
    let names = synthetic_names(n, 0);
    let base = match model.mode() {
        Mode::LastName => BatchRequest::lastnames(names.into_iter().map(|(_, l)| l)),
        Mode::FullName => BatchRequest::fullnames(names),
    };
    threads
        .iter()
        .map(|&t| {
            let req = base.clone().with_threads(t);
            let mut total = 0.0;
            for _ in 0..repeats {
                let start = Instant::now();
                let out = predict_batch(&req, model).expect("synthetic batch is valid");
                total += start.elapsed().as_secs_f64();
                std::hint::black_box(out);
            }
            BenchRow {
                threads: t,
                n,
                mean_seconds: total / repeats as f64,
            }
        })
        .collect()
}
