//! Training data preparation: label cleaning, race × gender undersampling,
//! stratified train/test splitting and encoding.

pub mod toy;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{encode, EncodedName, Mode};
use crate::labels::{Gender, Race};
use crate::seeded_rng;

const UNDERSAMPLE_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;

/// Default held-out fraction.
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cell ({race}, {gender}) is empty")]
    EmptyCell { race: Race, gender: Gender },
    #[error("test fraction {fraction} leaves an empty side in cell ({race}, {gender}) of size {size}")]
    DegenerateSplit {
        fraction: f64,
        race: Race,
        gender: Gender,
        size: usize,
    },
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("row {row}: missing {component} name")]
    MissingName { row: usize, component: &'static str },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A row as read from disk: labels are still free text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub first: String,
    pub last: String,
    pub race: String,
    pub gender: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NameRecord {
    pub first: String,
    pub last: String,
    pub race: Race,
    pub gender: Gender,
}

/// One encoded training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub input: EncodedName,
    pub label: usize,
}

/// Rows removed by [`drop_excluded`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    /// Race outside the four retained categories (or missing).
    pub excluded_race: usize,
    /// Gender missing or not female/male.
    pub invalid_gender: usize,
}

/// Record counts per (race, gender) cell, indexed `[race][gender]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CellCounts(pub [[usize; 2]; 4]);

impl CellCounts {
    pub fn of(records: &[NameRecord]) -> Self {
        let mut counts = [[0; 2]; 4];
        for r in records {
            counts[r.race.index()][r.gender as usize] += 1;
        }
        Self(counts)
    }

    pub fn get(&self, race: Race, gender: Gender) -> usize {
        self.0[race.index()][gender as usize]
    }

    pub fn cells(&self) -> impl Iterator<Item = (Race, Gender, usize)> + '_ {
        Race::ALL
            .into_iter()
            .flat_map(|r| Gender::ALL.into_iter().map(move |g| (r, g)))
            .map(|(r, g)| (r, g, self.get(r, g)))
    }

    pub fn total(&self) -> usize {
        self.cells().map(|(_, _, n)| n).sum()
    }

    /// Size every cell is cut down to: the smallest cell.
    pub fn balanced_size(&self) -> Result<usize, DataError> {
        if let Some((race, gender, _)) = self.cells().find(|&(_, _, n)| n == 0) {
            return Err(DataError::EmptyCell { race, gender });
        }
        Ok(self.cells().map(|(_, _, n)| n).min().unwrap_or(0))
    }
}

/// Keeps rows whose race is one of the four classes and whose gender is
/// female or male.
pub fn drop_excluded(records: Vec<RawRecord>) -> (Vec<NameRecord>, DropCounts) {
    let mut drops = DropCounts::default();
    let mut kept = Vec::with_capacity(records.len());
    for r in records {
        let Ok(race) = r.race.parse::<Race>() else {
            drops.excluded_race += 1;
            continue;
        };
        let Ok(gender) = r.gender.parse::<Gender>() else {
            drops.invalid_gender += 1;
            continue;
        };
        kept.push(NameRecord {
            first: r.first,
            last: r.last,
            race,
            gender,
        });
    }
    (kept, drops)
}

/// A name component is missing when it is empty after trimming.
pub fn is_missing(component: &str) -> bool {
    component.trim().is_empty()
}

fn missing_component(r: &NameRecord, mode: Mode) -> Option<&'static str> {
    if is_missing(&r.last) {
        Some("last")
    } else if mode == Mode::FullName && is_missing(&r.first) {
        Some("first")
    } else {
        None
    }
}

/// Removes rows lacking a component the model needs, returning how many
/// were removed.
pub fn drop_missing(records: Vec<NameRecord>, mode: Mode) -> (Vec<NameRecord>, usize) {
    let before = records.len();
    let kept: Vec<NameRecord> = records
        .into_iter()
        .filter(|r| missing_component(r, mode).is_none())
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

/// Records with every (race, gender) cell the same size.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedDataset {
    pub records: Vec<NameRecord>,
    pub group_size: usize,
    pub seed: u64,
}

/// Samples every cell without replacement down to the smallest cell's
/// size. Output is grouped by cell (race-major, female before male) and
/// keeps input order inside each cell.
pub fn undersample(records: &[NameRecord], seed: u64) -> Result<BalancedDataset, DataError> {
    let group_size = CellCounts::of(records).balanced_size()?;
    let mut rng = seeded_rng(seed, UNDERSAMPLE_STREAM);
    let mut out = Vec::with_capacity(group_size * 8);
    for race in Race::ALL {
        for gender in Gender::ALL {
            let cell: Vec<&NameRecord> = records
                .iter()
                .filter(|r| r.race == race && r.gender == gender)
                .collect();
            let mut picked = index::sample(&mut rng, cell.len(), group_size).into_vec();
            picked.sort_unstable();
            out.extend(picked.into_iter().map(|i| cell[i].clone()));
        }
    }
    Ok(BalancedDataset {
        records: out,
        group_size,
        seed,
    })
}

/// Per-cell test counts: `round(total * fraction)` apportioned by largest
/// remainder so each cell gets `floor` or `ceil` of its exact share.
fn test_quotas(sizes: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let target = (total as f64 * fraction).round() as usize;
    let ideal: Vec<f64> = sizes.iter().map(|&n| n as f64 * fraction).collect();
    let mut quotas: Vec<usize> = ideal.iter().map(|q| q.floor() as usize).collect();
    let mut remaining = target.saturating_sub(quotas.iter().sum());
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // stable sort keeps lower cell indices first on ties
    order.sort_by(|&a, &b| {
        let fa = ideal[a] - ideal[a].floor();
        let fb = ideal[b] - ideal[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal)
    });
    for i in order {
        if remaining == 0 {
            break;
        }
        if quotas[i] < sizes[i] {
            quotas[i] += 1;
            remaining -= 1;
        }
    }
    quotas
}

/// Stratified split by (race, gender). Both sides keep the input order.
pub fn split(
    records: &[NameRecord],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<NameRecord>, Vec<NameRecord>), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::BadFraction(test_fraction));
    }
    let cells: Vec<(Race, Gender)> = Race::ALL
        .into_iter()
        .flat_map(|r| Gender::ALL.into_iter().map(move |g| (r, g)))
        .collect();
    let members: Vec<Vec<usize>> = cells
        .iter()
        .map(|&(race, gender)| {
            records
                .iter()
                .enumerate()
                .filter(|(_, r)| r.race == race && r.gender == gender)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let quotas = test_quotas(&sizes, test_fraction);

    let mut rng = seeded_rng(seed, SPLIT_STREAM);
    let mut is_test = vec![false; records.len()];
    for (c, mut idx) in members.into_iter().enumerate() {
        let size = idx.len();
        if size == 0 {
            continue;
        }
        if quotas[c] == 0 || quotas[c] == size {
            let (race, gender) = cells[c];
            return Err(DataError::DegenerateSplit {
                fraction: test_fraction,
                race,
                gender,
                size,
            });
        }
        idx.shuffle(&mut rng);
        for &i in &idx[..quotas[c]] {
            is_test[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (r, t) in records.iter().zip(is_test) {
        if t {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NaPolicy {
    Drop,
    Reject,
}

/// Encodes records for `mode`. The label is the race's class index. Rows
/// missing a needed component are dropped or rejected per `na`.
pub fn encode_dataset(records: &[NameRecord], mode: Mode, na: NaPolicy) -> Result<Vec<Example>, DataError> {
    let mut out = Vec::with_capacity(records.len());
    for (row, r) in records.iter().enumerate() {
        if let Some(component) = missing_component(r, mode) {
            match na {
                NaPolicy::Drop => continue,
                NaPolicy::Reject => return Err(DataError::MissingName { row, component }),
            }
        }
        out.push(Example {
            input: encode(mode, &r.first, &r.last),
            label: r.race.index(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCount {
    pub race: Race,
    pub gender: Gender,
    pub before: usize,
    pub after: usize,
}

/// Summary of a preparation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepManifest {
    pub seed: u64,
    pub mode: Mode,
    pub test_fraction: f64,
    pub input_rows: usize,
    pub dropped: DropCounts,
    pub dropped_missing_name: usize,
    pub group_size: usize,
    pub cells: Vec<CellCount>,
    pub train_rows: usize,
    pub test_rows: usize,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    pub manifest: PrepManifest,
}

/// Clean → drop rows missing names → undersample → split → encode.
pub fn prepare(raw: Vec<RawRecord>, mode: Mode, test_fraction: f64, seed: u64) -> Result<Prepared, DataError> {
    let input_rows = raw.len();
    let (clean, dropped) = drop_excluded(raw);
    let (clean, dropped_missing_name) = drop_missing(clean, mode);
    let before = CellCounts::of(&clean);
    let balanced = undersample(&clean, seed)?;
    let after = CellCounts::of(&balanced.records);
    let (train, test) = split(&balanced.records, test_fraction, seed)?;
    let train = encode_dataset(&train, mode, NaPolicy::Reject)?;
    let test = encode_dataset(&test, mode, NaPolicy::Reject)?;
    let cells = before
        .cells()
        .map(|(race, gender, n)| CellCount {
            race,
            gender,
            before: n,
            after: after.get(race, gender),
        })
        .collect();
    let manifest = PrepManifest {
        seed,
        mode,
        test_fraction,
        input_rows,
        dropped,
        dropped_missing_name,
        group_size: balanced.group_size,
        cells,
        train_rows: train.len(),
        test_rows: test.len(),
    };
    Ok(Prepared { train, test, manifest })
}

/// Writes examples as CSV of integers: header `c0,…,c{L-1},label`, one row
/// per example.
pub fn write_examples_csv(path: impl AsRef<Path>, examples: &[Example], mode: Mode) -> Result<(), DataError> {
    let path = path.as_ref();
    let len = mode.input_length();
    let mut text = String::new();
    for i in 0..len {
        let _ = write!(text, "c{i},");
    }
    text.push_str("label\n");
    for ex in examples {
        for &ix in ex.input.indices() {
            let _ = write!(text, "{ix},");
        }
        let _ = writeln!(text, "{}", ex.label);
    }
    fs::write(path, text).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_examples_csv(path: impl AsRef<Path>, mode: Mode) -> Result<Vec<Example>, DataError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: shown.clone(),
        source,
    })?;
    let len = mode.input_length();
    let parse_err = |line: usize, message: String| DataError::Parse {
        path: shown.clone(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.split(',').count() == len + 1 => {}
        _ => return Err(parse_err(1, format!("expected a header with {} columns", len + 1))),
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Result<Vec<usize>, _> = line.split(',').map(str::parse::<usize>).collect();
        let fields = fields.map_err(|e| parse_err(n + 1, e.to_string()))?;
        if fields.len() != len + 1 {
            return Err(parse_err(
                n + 1,
                format!("expected {} fields, found {}", len + 1, fields.len()),
            ));
        }
        let label = fields[len];
        if label >= Race::ALL.len() {
            return Err(parse_err(n + 1, format!("label {label} out of range")));
        }
        let indices: Vec<u8> = fields[..len].iter().map(|&i| i.min(255) as u8).collect();
        let input = EncodedName::from_indices(indices, mode)
            .ok_or_else(|| parse_err(n + 1, "character index out of range".into()))?;
        out.push(Example { input, label });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(last: &str, race: Race, gender: Gender) -> NameRecord {
        NameRecord {
            first: "x".into(),
            last: last.into(),
            race,
            gender,
        }
    }

    fn grid(sizes: [[usize; 2]; 4]) -> Vec<NameRecord> {
        let mut out = Vec::new();
        for race in Race::ALL {
            for gender in Gender::ALL {
                for i in 0..sizes[race.index()][gender as usize] {
                    out.push(rec(&format!("{race}{gender}{i}"), race, gender));
                }
            }
        }
        out
    }

    #[test]
    fn table_one_group_size() {
        let counts = CellCounts([
            [131_602, 104_632],
            [989_142, 717_118],
            [1_137_594, 925_623],
            [4_419_030, 3_963_833],
        ]);
        assert_eq!(counts.balanced_size().unwrap(), 104_632);
    }

    #[test]
    fn empty_cell_is_named() {
        let records = vec![
            rec("a", Race::Asian, Gender::Female),
            rec("b", Race::Asian, Gender::Male),
            rec("c", Race::Black, Gender::Female),
        ];
        let err = undersample(&records, 0).unwrap_err();
        assert_eq!(err.to_string(), "cell (black, male) is empty");
    }

    #[test]
    fn undersample_to_min_and_deterministic() {
        let records = grid([[5, 3], [7, 4], [3, 9], [6, 3]]);
        let a = undersample(&records, 42).unwrap();
        assert_eq!(a.group_size, 3);
        assert!(CellCounts::of(&a.records).cells().all(|(_, _, n)| n == 3));
        assert_eq!(a, undersample(&records, 42).unwrap());
        assert!(a.records.iter().all(|r| records.contains(r)));
    }

    #[test]
    fn drop_rules() {
        let raw = vec![
            RawRecord {
                first: "a".into(),
                last: "b".into(),
                race: "white".into(),
                gender: "male".into(),
            },
            RawRecord {
                first: "c".into(),
                last: "d".into(),
                race: "multi-racial".into(),
                gender: "female".into(),
            },
            RawRecord {
                first: "e".into(),
                last: "f".into(),
                race: "Asian".into(),
                gender: "".into(),
            },
        ];
        let (kept, drops) = drop_excluded(raw.clone());
        assert_eq!(kept.len(), 1);
        assert_eq!(
            drops,
            DropCounts {
                excluded_race: 1,
                invalid_gender: 1
            }
        );
        let (kept, drops) = drop_excluded(raw[..1].to_vec());
        assert_eq!(kept[0].last, "b");
        assert_eq!(drops, DropCounts::default());
        let (kept, _) = drop_excluded(raw[1..2].to_vec());
        assert!(kept.is_empty());
        assert!(undersample(&kept, 0).is_err());
    }

    #[test]
    fn table_two_support_from_quotas() {
        let quotas = test_quotas(&[104_632; 8], 0.2);
        let total: usize = quotas.iter().sum();
        assert_eq!(total, 167_411);
        assert!(quotas.iter().all(|&q| q == 20_926 || q == 20_927));
    }

    #[test]
    fn split_is_stratified_partition() {
        let records = grid([[2; 2]; 4]);
        let (train, test) = split(&records, 0.5, 9).unwrap();
        assert!(CellCounts::of(&train).cells().all(|(_, _, n)| n == 1));
        assert!(CellCounts::of(&test).cells().all(|(_, _, n)| n == 1));
        let mut all: Vec<_> = train.iter().chain(&test).cloned().collect();
        all.sort_by(|a, b| a.last.cmp(&b.last));
        let mut orig = records.clone();
        orig.sort_by(|a, b| a.last.cmp(&b.last));
        assert_eq!(all, orig);
        assert_eq!(split(&records, 0.5, 9).unwrap(), (train, test));
    }

    #[test]
    fn degenerate_split_rejected() {
        let records = grid([[2; 2]; 4]);
        assert!(matches!(
            split(&records, 0.1, 0),
            Err(DataError::DegenerateSplit { .. })
        ));
        assert!(matches!(split(&records, 1.0, 0), Err(DataError::BadFraction(_))));
        assert!(matches!(split(&records, 0.0, 0), Err(DataError::BadFraction(_))));
    }

    #[test]
    fn encode_examples() {
        let r = NameRecord {
            first: "samuel".into(),
            last: "jackson".into(),
            race: Race::Black,
            gender: Gender::Male,
        };
        let ex = encode_dataset(std::slice::from_ref(&r), Mode::FullName, NaPolicy::Reject).unwrap();
        assert_eq!(ex[0].label, 1);
        assert_eq!(ex[0].input, crate::encoding::encode_fullname("samuel", "jackson"));

        let mut no_first = r.clone();
        no_first.first = "  ".into();
        let ex = encode_dataset(std::slice::from_ref(&no_first), Mode::LastName, NaPolicy::Reject).unwrap();
        assert_eq!(ex[0].input, crate::encoding::encode_lastname("jackson"));
        assert!(matches!(
            encode_dataset(&[no_first], Mode::FullName, NaPolicy::Reject),
            Err(DataError::MissingName {
                row: 0,
                component: "first"
            })
        ));

        let mut no_last = r;
        no_last.last = String::new();
        assert!(encode_dataset(&[no_last], Mode::LastName, NaPolicy::Drop)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn examples_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.csv");
        let records = grid([[1; 2]; 4]);
        let ex = encode_dataset(&records, Mode::FullName, NaPolicy::Reject).unwrap();
        write_examples_csv(&path, &ex, Mode::FullName).unwrap();
        assert_eq!(read_examples_csv(&path, Mode::FullName).unwrap(), ex);
        assert!(read_examples_csv(&path, Mode::LastName).is_err());
    }
}
