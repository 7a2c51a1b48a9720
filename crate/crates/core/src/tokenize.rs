//! Deterministic tokenizer and the shared special-token vocabulary.
//!
//! Text is lower-cased and split on whitespace; punctuation becomes its own
//! token except for '-' and '.' between alphanumeric characters, which keeps
//! shapes like `3.2v` intact. This is a whitespace tokenizer rather than a
//! subword one, so matching downstream is exact at the token level.

use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

pub type TokenId = u32;

pub const PAD_ID: TokenId = 0;
pub const CLS_ID: TokenId = 1;
pub const SEP_ID: TokenId = 2;
pub const SEEN_ID: TokenId = 3;
pub const UNSEEN_ID: TokenId = 4;
pub const UNK_ID: TokenId = 5;

pub const PAD: &str = "[PAD]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const SEEN: &str = "[SEEN]";
pub const UNSEEN: &str = "[UNSEEN]";
pub const UNK: &str = "[UNK]";

/// Reserved surfaces in id order. `[UNK]` follows immediately after.
pub const SPECIALS: [&str; 5] = [PAD, CLS, SEP, SEEN, UNSEEN];

/// Splits cleaned text into lower-cased tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    for chunk in lowered.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut current = String::new();
        for (i, &ch) in chars.iter().enumerate() {
            if ch.is_alphanumeric() {
                current.push(ch);
                continue;
            }
            let joiner = (ch == '-' || ch == '.')
                && i > 0
                && chars[i - 1].is_alphanumeric()
                && i + 1 < chars.len()
                && chars[i + 1].is_alphanumeric();
            if joiner {
                current.push(ch);
            } else {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(ch.to_string());
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

/// Joins tokens with single spaces; the inverse of [`tokenize`] up to
/// whitespace normalization for punctuation-free lower-case text.
pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}

/// A frozen surface-to-id mapping. Ids are dense: the five reserved tokens
/// first, then `[UNK]`, then corpus tokens ordered by descending count with
/// lexicographic tie-breaks. Lookups of unknown surfaces yield `[UNK]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    surfaces: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary from the token sequences of the training split.
    /// Tokens seen fewer than `min_count` times map to `[UNK]`.
    pub fn build<'a, I>(corpus: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for seq in corpus {
            for tok in seq {
                *counts.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count.max(1))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut surfaces: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        surfaces.push(UNK.to_string());
        surfaces.extend(ranked.into_iter().map(|(s, _)| s.to_string()));
        Self::from_surfaces(surfaces)
    }

    fn from_surfaces(surfaces: Vec<String>) -> Self {
        let ids = surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as TokenId))
            .collect();
        Self { surfaces, ids }
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    /// Id for a surface; `[UNK]` when absent.
    pub fn id(&self, surface: &str) -> TokenId {
        self.ids.get(surface).copied().unwrap_or(UNK_ID)
    }

    /// Surface for an id; `[UNK]` for out-of-range ids.
    pub fn surface(&self, id: TokenId) -> &str {
        self.surfaces
            .get(id as usize)
            .map(String::as_str)
            .unwrap_or(UNK)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Serialized form: one `id<TAB>surface` line per token.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.surfaces.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{s}");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)?;
        let mut surfaces = Vec::new();
        for (i, line) in content.lines().enumerate() {
            let parse_err = |msg: String| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg,
            };
            let (id_str, surface) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected id<TAB>surface".to_string()))?;
            let id: usize = id_str
                .parse()
                .map_err(|_| parse_err(format!("bad id {id_str:?}")))?;
            if id != surfaces.len() {
                return Err(parse_err(format!(
                    "ids must be dense; expected {}, found {id}",
                    surfaces.len()
                )));
            }
            surfaces.push(surface.to_string());
        }
        for (i, s) in SPECIALS.iter().enumerate() {
            if surfaces.get(i).map(String::as_str) != Some(*s) {
                return Err(Error::Data(format!(
                    "vocabulary missing reserved token {s} at id {i}"
                )));
            }
        }
        if surfaces.get(UNK_ID as usize).map(String::as_str) != Some(UNK) {
            return Err(Error::Data(format!(
                "vocabulary missing {UNK} at id {UNK_ID}"
            )));
        }
        Ok(Self::from_surfaces(surfaces))
    }

    /// SHA-256 of the serialized form; stored in model files so parameters
    /// can refuse to load against a different vocabulary.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.to_text().as_bytes());
        hasher.finalize().into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn tokenize_worked_example() {
        assert_eq!(
            toks("golf clubs putter pu neutral golf grip"),
            vec!["golf", "clubs", "putter", "pu", "neutral", "golf", "grip"]
        );
    }

    #[test]
    fn tokenize_empty_and_punctuation() {
        assert!(toks("").is_empty());
        assert_eq!(toks("100ah, 200ah"), vec!["100ah", ",", "200ah"]);
        assert_eq!(toks("3.2v"), vec!["3.2v"]);
        assert_eq!(toks("897645 - 402"), vec!["897645", "-", "402"]);
        assert_eq!(toks("men's"), vec!["men", "'", "s"]);
        assert_eq!(toks("a..b"), vec!["a", ".", ".", "b"]);
        assert_eq!(toks("UPPER Case"), vec!["upper", "case"]);
    }

    #[test]
    fn build_vocab_filters_by_count_and_orders_stably() {
        let corpus = vec![
            toks("a a a b"),
            toks("c c a"),
        ];
        let seqs: Vec<&[String]> = corpus.iter().map(|v| v.as_slice()).collect();
        let v = Vocabulary::build(seqs.iter().copied(), 2);
        assert_eq!(v.len(), 8); // 5 specials + UNK + a + c
        assert_eq!(v.surface(6), "a");
        assert_eq!(v.surface(7), "c");
        assert_eq!(v.id("b"), UNK_ID);

        let v1 = Vocabulary::build(seqs.iter().copied(), 1);
        assert_eq!(v1.id("b"), 8); // a(4) c(2) b(1)
    }

    #[test]
    fn build_vocab_on_empty_corpus_keeps_specials_only() {
        let v = Vocabulary::build(std::iter::empty::<&[String]>(), 1);
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("anything"), UNK_ID);
    }

    #[test]
    fn vocab_rebuild_is_identical() {
        let corpus = vec![toks("x y z z y x w"), toks("y x")];
        let seqs: Vec<&[String]> = corpus.iter().map(|v| v.as_slice()).collect();
        let a = Vocabulary::build(seqs.iter().copied(), 1);
        let b = Vocabulary::build(seqs.iter().copied(), 1);
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn vocab_save_load_round_trip() {
        let corpus = vec![toks("red blue blue")];
        let seqs: Vec<&[String]> = corpus.iter().map(|v| v.as_slice()).collect();
        let v = Vocabulary::build(seqs.iter().copied(), 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        v.save(&path).unwrap();
        let loaded = Vocabulary::load(&path).unwrap();
        assert_eq!(v, loaded);
        assert_eq!(v.content_hash(), loaded.content_hash());
    }

    proptest! {
        #[test]
        fn tokenize_is_deterministic_and_total(s in "\\PC{0,60}") {
            prop_assert_eq!(tokenize(&s), tokenize(&s));
        }

        #[test]
        fn detokenize_inverts_tokenize_for_plain_words(
            words in proptest::collection::vec("[a-z0-9]{1,8}", 0..10)
        ) {
            let text = words.join(" ");
            let round = detokenize(&tokenize(&text));
            prop_assert_eq!(round, text);
        }
    }
}
