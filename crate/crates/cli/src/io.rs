//! CSV and JSON file plumbing.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use ethnoname_core::dataprep::{is_missing, RawRecord};
use ethnoname_core::inference::BenchRow;
use ethnoname_core::training::EpochLoss;
use ethnoname_core::{Mode, Prediction};
use serde::Serialize;

/// Marker for a missing value in input CSVs, besides blank cells.
pub const NA: &str = "NA";

pub fn cell(value: &str) -> Option<String> {
    (value != NA && !is_missing(value)).then(|| value.to_string())
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))
}

/// Labelled names with header `first,last,race,gender`. `NA` cells become
/// empty strings.
pub fn read_raw_records(path: &Path) -> Result<Vec<RawRecord>> {
    let mut rdr = reader(path)?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<RawRecord>().enumerate() {
        let mut r = row.with_context(|| format!("{}: data row {}", path.display(), i + 1))?;
        for field in [&mut r.first, &mut r.last, &mut r.race, &mut r.gender] {
            if field.as_str() == NA {
                field.clear();
            }
        }
        out.push(r);
    }
    Ok(out)
}

pub struct NameColumns {
    pub firstnames: Option<Vec<Option<String>>>,
    pub lastnames: Vec<Option<String>>,
}

pub fn read_name_columns(path: &Path, first_col: Option<&str>, last_col: &str) -> Result<NameColumns> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .with_context(|| format!("{}: header", path.display()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{}: no column named `{name}`", path.display()))
    };
    let last_ix = find(last_col)?;
    let first_ix = first_col.map(find).transpose()?;
    let mut cols = NameColumns {
        firstnames: first_ix.map(|_| Vec::new()),
        lastnames: Vec::new(),
    };
    for (i, row) in rdr.records().enumerate() {
        let row = row.with_context(|| format!("{}: data row {}", path.display(), i + 1))?;
        cols.lastnames.push(cell(row.get(last_ix).unwrap_or("")));
        if let (Some(ix), Some(firsts)) = (first_ix, cols.firstnames.as_mut()) {
            firsts.push(cell(row.get(ix).unwrap_or("")));
        }
    }
    Ok(cols)
}

pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

pub const PREDICT_HEADER: [&str; 7] = [
    "firstname",
    "lastname",
    "prob_asian",
    "prob_black",
    "prob_hispanic",
    "prob_white",
    "race",
];

/// Writes predictions; the firstname column is left out in lastname mode.
pub fn write_predictions(out: impl Write, preds: &[Prediction], mode: Mode) -> Result<()> {
    let skip = usize::from(mode == Mode::LastName);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&PREDICT_HEADER[skip..])?;
    for p in preds {
        let [a, b, h, wh] = p.probs();
        let fields = [
            p.firstname.clone().unwrap_or_default(),
            p.lastname.clone(),
            a.to_string(),
            b.to_string(),
            h.to_string(),
            wh.to_string(),
            p.race.to_string(),
        ];
        w.write_record(&fields[skip..])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_history(path: &Path, history: &[EpochLoss]) -> Result<()> {
    write_rows(path, history)
}

pub fn write_bench(out: impl Write, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    match serde_json::from_str(&text) {
        Ok(v) => Ok(v),
        Err(e) => bail!("{}: {e}", path.display()),
    }
}
