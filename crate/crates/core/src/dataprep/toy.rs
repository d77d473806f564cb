//! Synthetic labeled names for exercising the pipeline without real data.
//!
//! Each class owns three suffix bigrams and one prefix bigram. A name of
//! class `k` ends with one of its suffixes with probability 0.9; otherwise
//! it starts with the class prefix and ends with a neutral bigram. No
//! designated bigram ever appears in the wrong place, so the class is a
//! deterministic function of the last name. First names carry no signal.
//!
//! Per class, the majority gender (female for even class indices, male for
//! odd) gets three times as many rows as the minority gender, so the raw
//! corpus is imbalanced 3:1 inside every class. A handful of rows with
//! labels outside the four classes are mixed in as well.

use rand::seq::SliceRandom;
use rand::Rng;

use super::RawRecord;
use crate::labels::{Gender, Race};
use crate::seeded_rng;

const TOY_STREAM: u64 = 3;

const SUFFIXES: [[&str; 3]; 4] = [
    ["ko", "mu", "xi"],
    ["ba", "de", "fy"],
    ["ez", "lo", "ra"],
    ["th", "ws", "gh"],
];
const PREFIXES: [&str; 4] = ["zq", "vj", "yx", "wk"];
const EXCLUDED_LABELS: [&str; 2] = ["multi-racial", "native american"];

/// Shape of a generated corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    /// Rows in the smaller gender cell of each class.
    pub minority_rows: usize,
    /// Majority rows per minority row.
    pub imbalance: usize,
    /// Probability that a name carries its class suffix.
    pub suffix_prob: f64,
    /// Extra rows with labels outside the four classes.
    pub excluded_rows: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            minority_rows: 500,
            imbalance: 3,
            suffix_prob: 0.9,
            excluded_rows: 40,
        }
    }
}

fn is_designated_suffix(s: &str) -> bool {
    SUFFIXES.iter().flatten().any(|&b| b == s)
}

fn is_designated_prefix(s: &str) -> bool {
    PREFIXES.contains(&s)
}

fn random_letters<R: Rng>(rng: &mut R, n: usize) -> String {
    (0..n).map(|_| char::from(b'a' + rng.gen_range(0..26u8))).collect()
}

/// A last name whose class is `class`. Length is 4 to 8 characters.
pub fn toy_last_name<R: Rng>(rng: &mut R, class: usize, suffix_prob: f64) -> String {
    let len = rng.gen_range(4..=8);
    loop {
        let name = if rng.gen_bool(suffix_prob) {
            let suffix = SUFFIXES[class][rng.gen_range(0..3)];
            random_letters(rng, len - 2) + suffix
        } else {
            PREFIXES[class].to_string() + &random_letters(rng, len - 2)
        };
        let (head, tail) = (&name[..2], &name[name.len() - 2..]);
        let by_suffix = SUFFIXES[class].contains(&tail);
        let clean = if by_suffix {
            !is_designated_prefix(head)
        } else {
            !is_designated_suffix(tail)
        };
        if clean {
            return name;
        }
    }
}

/// The class implied by a toy last name, if any.
pub fn toy_class_of(last: &str) -> Option<usize> {
    if last.len() < 2 {
        return None;
    }
    let tail = &last[last.len() - 2..];
    let head = &last[..2];
    (0..4)
        .find(|&k| SUFFIXES[k].contains(&tail))
        .or_else(|| (0..4).find(|&k| PREFIXES[k] == head))
}

pub fn toy_corpus(seed: u64, cfg: ToyConfig) -> Vec<RawRecord> {
    let mut rng = seeded_rng(seed, TOY_STREAM);
    let mut out = Vec::new();
    for race in Race::ALL {
        let k = race.index();
        let majority = if k % 2 == 0 { Gender::Female } else { Gender::Male };
        for gender in Gender::ALL {
            let rows = if gender == majority {
                cfg.minority_rows * cfg.imbalance
            } else {
                cfg.minority_rows
            };
            for _ in 0..rows {
                let first_len = rng.gen_range(3..=7);
                out.push(RawRecord {
                    first: capitalize(&random_letters(&mut rng, first_len)),
                    last: capitalize(&toy_last_name(&mut rng, k, cfg.suffix_prob)),
                    race: race.to_string(),
                    gender: gender.to_string(),
                });
            }
        }
    }
    for i in 0..cfg.excluded_rows {
        out.push(RawRecord {
            first: capitalize(&random_letters(&mut rng, 5)),
            last: capitalize(&random_letters(&mut rng, 6)),
            race: EXCLUDED_LABELS[i % EXCLUDED_LABELS.len()].to_string(),
            gender: Gender::ALL[i % 2].to_string(),
        });
    }
    out.shuffle(&mut rng);
    out
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_ascii_uppercase().to_string() + chars.as_str(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataprep::{drop_excluded, CellCounts};

    #[test]
    fn names_are_unambiguous() {
        let mut rng = seeded_rng(5, 0);
        for k in 0..4 {
            for _ in 0..500 {
                let name = toy_last_name(&mut rng, k, 0.9);
                assert!((4..=8).contains(&name.len()));
                assert_eq!(toy_class_of(&name), Some(k), "{name}");
            }
        }
    }

    #[test]
    fn corpus_shape() {
        let raw = toy_corpus(1, ToyConfig::default());
        assert_eq!(raw.len(), 4 * 2000 + 40);
        let (clean, drops) = drop_excluded(raw);
        assert_eq!(drops.excluded_race, 40);
        let counts = CellCounts::of(&clean);
        assert_eq!(counts.get(Race::Asian, Gender::Female), 1500);
        assert_eq!(counts.get(Race::Asian, Gender::Male), 500);
        assert_eq!(counts.get(Race::Black, Gender::Male), 1500);
        assert_eq!(counts.balanced_size().unwrap(), 500);
        for r in &clean {
            assert_eq!(toy_class_of(&r.last.to_lowercase()), Some(r.race.index()));
        }
    }

    #[test]
    fn corpus_is_seeded() {
        let cfg = ToyConfig {
            minority_rows: 10,
            ..ToyConfig::default()
        };
        assert_eq!(toy_corpus(3, cfg), toy_corpus(3, cfg));
        assert_ne!(toy_corpus(3, cfg), toy_corpus(4, cfg));
    }
}
