use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GcaError, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
const PAD_SYMBOL: &str = "<pad>";
const UNK_SYMBOL: &str = "<unk>";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SequenceKind {
    Drug,
    Protein,
}

/// Character vocabulary. Ids 0 and 1 are padding and unknown; every other
/// symbol gets an id in sorted character order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    kind: SequenceKind,
    symbols: Vec<char>,
    index: HashMap<char, usize>,
}

fn check_symbol(c: char) -> Result<()> {
    if c.is_whitespace() || c.is_control() {
        return Err(GcaError::Data(format!(
            "character {c:?} cannot be a vocabulary symbol"
        )));
    }
    Ok(())
}

impl Vocabulary {
    pub fn build<S: AsRef<str>>(corpus: &[S], kind: SequenceKind) -> Result<Self> {
        if corpus.is_empty() {
            return Err(GcaError::Data("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut set = BTreeSet::new();
        for s in corpus {
            for c in s.as_ref().chars() {
                check_symbol(c)?;
                set.insert(c);
            }
        }
        Ok(Self::from_symbols(kind, set.into_iter().collect()))
    }

    /// Symbols must already be distinct; they receive ids 2.. in the given order.
    pub fn from_symbols(kind: SequenceKind, symbols: Vec<char>) -> Self {
        let index = symbols
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i + 2))
            .collect();
        Vocabulary {
            kind,
            symbols,
            index,
        }
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    /// Number of ids including the two reserved ones.
    pub fn size(&self) -> usize {
        self.symbols.len() + 2
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn id(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }

    pub fn symbol(&self, id: usize) -> Option<char> {
        id.checked_sub(2).and_then(|i| self.symbols.get(i)).copied()
    }

    /// `symbol<TAB>id` per line, reserved ids first.
    pub fn to_text(&self) -> String {
        let mut out = format!("{PAD_SYMBOL}\t{PAD_ID}\n{UNK_SYMBOL}\t{UNK_ID}\n");
        for (i, c) in self.symbols.iter().enumerate() {
            let _ = writeln!(out, "{c}\t{}", i + 2);
        }
        out
    }

    pub fn from_text(text: &str, kind: SequenceKind) -> Result<Self> {
        let mut symbols = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let lineno = n + 1;
            let (sym, id) = line.split_once('\t').ok_or_else(|| {
                GcaError::Data(format!("vocabulary line {lineno}: expected symbol<TAB>id"))
            })?;
            let id: usize = id.trim().parse().map_err(|_| {
                GcaError::Data(format!("vocabulary line {lineno}: bad id {id:?}"))
            })?;
            if id != n {
                return Err(GcaError::Data(format!(
                    "vocabulary line {lineno}: ids must be contiguous from 0, found {id}"
                )));
            }
            match (n, sym) {
                (0, PAD_SYMBOL) | (1, UNK_SYMBOL) => {}
                (0 | 1, _) => {
                    return Err(GcaError::Data(format!(
                        "vocabulary line {lineno}: reserved symbol expected, found {sym:?}"
                    )))
                }
                _ => {
                    let mut chars = sym.chars();
                    let c = match (chars.next(), chars.next()) {
                        (Some(c), None) => c,
                        _ => {
                            return Err(GcaError::Data(format!(
                                "vocabulary line {lineno}: symbol {sym:?} is not one character"
                            )))
                        }
                    };
                    check_symbol(c)?;
                    if symbols.contains(&c) {
                        return Err(GcaError::Data(format!(
                            "vocabulary line {lineno}: duplicate symbol {c:?}"
                        )));
                    }
                    symbols.push(c);
                }
            }
        }
        if text.lines().count() < 2 {
            return Err(GcaError::Data("vocabulary is missing reserved ids".into()));
        }
        Ok(Self::from_symbols(kind, symbols))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_text()).map_err(|e| GcaError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, kind: SequenceKind) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| GcaError::io(&path, e))?;
        Self::from_text(&text, kind)
    }
}

/// Fixed-length, right-padded id sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub valid_len: usize,
    pub kind: SequenceKind,
}

impl TokenSequence {
    pub fn max_len(&self) -> usize {
        self.ids.len()
    }

    pub fn valid_ids(&self) -> &[usize] {
        &self.ids[..self.valid_len]
    }

    /// Same tokens, right-padded (or cut) to `max_len`.
    pub fn repadded(&self, max_len: usize) -> TokenSequence {
        let mut ids = self.ids[..self.valid_len.min(max_len)].to_vec();
        let valid_len = ids.len();
        ids.resize(max_len, PAD_ID);
        TokenSequence {
            ids,
            valid_len,
            kind: self.kind,
        }
    }
}

/// Character-level encoding: unknown characters map to [`UNK_ID`], the
/// string is truncated to `max_len` and right-padded with [`PAD_ID`].
pub fn tokenize(s: &str, vocab: &Vocabulary, max_len: usize) -> Result<TokenSequence> {
    if max_len == 0 {
        return Err(GcaError::Config("max_len must be at least 1".into()));
    }
    if s.is_empty() {
        return Err(GcaError::Data("cannot tokenize an empty string".into()));
    }
    let mut ids: Vec<usize> = s.chars().take(max_len).map(|c| vocab.id(c)).collect();
    let valid_len = ids.len();
    ids.resize(max_len, PAD_ID);
    Ok(TokenSequence {
        ids,
        valid_len,
        kind: vocab.kind(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_examples() {
        let v = Vocabulary::build(&["CC"], SequenceKind::Drug).unwrap();
        assert_eq!(v.size(), 3);
        assert_eq!(v.id('C'), 2);
        assert_eq!(v.to_text(), "<pad>\t0\n<unk>\t1\nC\t2\n");

        let a = Vocabulary::build(&["AB", "BA"], SequenceKind::Drug).unwrap();
        let b = Vocabulary::build(&["BA", "AB"], SequenceKind::Drug).unwrap();
        assert_eq!(a, b);

        let aa = Vocabulary::build(&["ACDEFGHIKLMNPQRSTVWY"], SequenceKind::Protein).unwrap();
        assert_eq!(aa.size(), 22);
    }

    #[test]
    fn empty_corpus_is_data_error() {
        let empty: [&str; 0] = [];
        assert!(matches!(
            Vocabulary::build(&empty, SequenceKind::Drug),
            Err(GcaError::Data(_))
        ));
    }

    #[test]
    fn tokenize_examples() {
        let v = Vocabulary::build(&["CC"], SequenceKind::Drug).unwrap();
        let t = tokenize("CC", &v, 4).unwrap();
        assert_eq!(t.ids, vec![2, 2, 0, 0]);
        assert_eq!(t.valid_len, 2);

        let t = tokenize("CX", &v, 4).unwrap();
        assert_eq!(&t.ids[..2], &[2, 1]);

        let long = "C".repeat(120);
        let t = tokenize(&long, &v, 100).unwrap();
        assert_eq!(t.valid_len, 100);
        assert_eq!(t.ids.len(), 100);

        assert!(matches!(tokenize("", &v, 4), Err(GcaError::Data(_))));
    }

    #[test]
    fn text_round_trip_and_decode() {
        let v = Vocabulary::build(&["CN(=O)c1ccccc1"], SequenceKind::Drug).unwrap();
        let back = Vocabulary::from_text(&v.to_text(), SequenceKind::Drug).unwrap();
        assert_eq!(v, back);
        for &c in v.symbols() {
            assert_eq!(v.symbol(v.id(c)), Some(c));
        }
        assert_eq!(v.symbol(PAD_ID), None);
    }

    #[test]
    fn rejects_malformed_vocab_text() {
        assert!(Vocabulary::from_text("<pad>\t0\nC\t1\n", SequenceKind::Drug).is_err());
        assert!(Vocabulary::from_text("<pad>\t0\n<unk>\t1\nC\t3\n", SequenceKind::Drug).is_err());
        assert!(Vocabulary::from_text("<pad>\t0\n<unk>\t1\nC\t2\nC\t3\n", SequenceKind::Drug).is_err());
    }
}
