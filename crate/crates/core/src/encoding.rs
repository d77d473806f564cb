//! Character normalization and fixed-length name encoding.
//!
//! Every name component is mapped onto a closed 29-symbol dictionary:
//!
//! | index | symbol                  |
//! |-------|-------------------------|
//! | 0     | `E` (empty / padding)   |
//! | 1..26 | `a`..`z`                |
//! | 27    | space                   |
//! | 28    | `U` (unknown)           |
//!
//! The ordering is part of the model file format and must not change
//! without bumping [`crate::modelio::FORMAT_VERSION`].

use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of symbols in the dictionary.
pub const VOCAB_SIZE: usize = 29;
/// Index of the padding symbol `E`.
pub const PAD_INDEX: u8 = 0;
/// Index of the space symbol.
pub const SPACE_INDEX: u8 = 27;
/// Index of the unknown symbol `U`.
pub const UNKNOWN_INDEX: u8 = 28;
/// Characters kept per name component.
pub const COMPONENT_LENGTH: usize = 10;

const PAD_SYMBOL: char = 'E';
const UNKNOWN_SYMBOL: char = 'U';

/// The fixed character dictionary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CharDictionary;

impl CharDictionary {
    /// Symbols in index order.
    pub fn symbols(&self) -> [char; VOCAB_SIZE] {
        let mut out = [PAD_SYMBOL; VOCAB_SIZE];
        for (i, c) in ('a'..='z').enumerate() {
            out[i + 1] = c;
        }
        out[SPACE_INDEX as usize] = ' ';
        out[UNKNOWN_INDEX as usize] = UNKNOWN_SYMBOL;
        out
    }

    /// Symbols as one-character strings, the form stored in model files.
    pub fn symbol_strings(&self) -> Vec<String> {
        self.symbols().iter().map(|c| c.to_string()).collect()
    }

    /// Index of a character of normalized text.
    ///
    /// Total over `char`: anything that is not already a dictionary symbol
    /// goes through the single-character normalization rules first. The
    /// marker `U` is read as the unknown symbol, never as an upper-case `u`.
    pub fn index_of(&self, c: char) -> u8 {
        match c {
            'a'..='z' => c as u8 - b'a' + 1,
            ' ' => SPACE_INDEX,
            UNKNOWN_SYMBOL => UNKNOWN_INDEX,
            other => match normalize_char(other) {
                UNKNOWN_SYMBOL => UNKNOWN_INDEX,
                folded => self.index_of(folded),
            },
        }
    }

    pub fn symbol_of(&self, index: u8) -> Option<char> {
        self.symbols().get(index as usize).copied()
    }
}

/// Which model an encoded name feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "lastname")]
    LastName,
    #[serde(rename = "fullname")]
    FullName,
}

impl Mode {
    /// Encoded sequence length for this mode.
    pub fn input_length(self) -> usize {
        match self {
            Mode::LastName => COMPONENT_LENGTH,
            Mode::FullName => 2 * COMPONENT_LENGTH,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::LastName => "lastname",
            Mode::FullName => "fullname",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lastname" => Ok(Mode::LastName),
            "fullname" => Ok(Mode::FullName),
            other => Err(format!("unknown method `{other}` (expected fullname or lastname)")),
        }
    }
}

/// Number of characters kept per name component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentLength(usize);

impl ComponentLength {
    pub fn new(value: usize) -> Option<Self> {
        (value >= 1).then_some(Self(value))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl Default for ComponentLength {
    fn default() -> Self {
        Self(COMPONENT_LENGTH)
    }
}

/// A name encoded as dictionary indices, ready for the network.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedName {
    indices: Vec<u8>,
    mode: Mode,
}

impl EncodedName {
    /// Wraps raw indices, checking length against the mode and the index range.
    pub fn from_indices(indices: Vec<u8>, mode: Mode) -> Option<Self> {
        let ok = indices.len() == mode.input_length() && indices.iter().all(|&i| (i as usize) < VOCAB_SIZE);
        ok.then_some(Self { indices, mode })
    }

    pub fn indices(&self) -> &[u8] {
        &self.indices
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn into_indices(self) -> Vec<u8> {
        self.indices
    }
}

fn normalize_char(c: char) -> char {
    if c.is_ascii_alphabetic() {
        c.to_ascii_lowercase()
    } else if c.is_ascii_digit() || !c.is_ascii() {
        UNKNOWN_SYMBOL
    } else {
        // ASCII punctuation, space and control characters
        ' '
    }
}

/// Folds a raw name onto the dictionary alphabet.
///
/// Outer whitespace is trimmed first; then ASCII letters are lower-cased,
/// every other ASCII character that is not a digit becomes a space, and
/// digits plus all non-ASCII characters become `U`. Runs of spaces are kept.
pub fn normalize(raw: &str) -> String {
    raw.trim().chars().map(normalize_char).collect()
}

/// Encodes an already-normalized component to exactly `len` indices,
/// truncating on the right and padding with [`PAD_INDEX`].
pub fn encode_component(name: &str, len: ComponentLength) -> Vec<u8> {
    let dict = CharDictionary;
    let mut out: Vec<u8> = name.chars().take(len.get()).map(|c| dict.index_of(c)).collect();
    out.resize(len.get(), PAD_INDEX);
    out
}

/// Last-name model input: 10 indices.
pub fn encode_lastname(last: &str) -> EncodedName {
    EncodedName {
        indices: encode_component(&normalize(last), ComponentLength::default()),
        mode: Mode::LastName,
    }
}

/// Full-name model input: the first name padded to 10, then the last name
/// padded to 10, so the last name always starts at offset 10.
pub fn encode_fullname(first: &str, last: &str) -> EncodedName {
    let len = ComponentLength::default();
    let mut indices = encode_component(&normalize(first), len);
    indices.extend(encode_component(&normalize(last), len));
    EncodedName {
        indices,
        mode: Mode::FullName,
    }
}

/// Encodes according to `mode`; `first` is ignored for last-name models.
pub fn encode(mode: Mode, first: &str, last: &str) -> EncodedName {
    match mode {
        Mode::LastName => encode_lastname(last),
        Mode::FullName => encode_fullname(first, last),
    }
}
