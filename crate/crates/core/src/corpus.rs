//! Raw tuple parsing, cleaning, normalization, deduplication and splitting.
//!
//! The raw corpus is a list of `(title, attribute, value)` tuples, where a
//! literal `NULL` value marks attributes whose value does not occur in the
//! title. Cleaning decodes HTML entities, normalizes whitespace and attribute
//! spelling, removes exact duplicates and produces a seeded 7:1:2
//! train/dev/test partition.

use crate::error::{Error, Result};
use crate::rng::{self, SplitMix64};
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

/// Literal used in raw and cleaned files for an absent value.
pub const NULL_SENTINEL: &str = "NULL";

/// One input record, exactly as parsed from the raw file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTuple {
    pub title: String,
    pub attribute: String,
    pub value: String,
}

/// A cleaned value: either real text or the NULL sentinel. Serialized as a
/// plain string so cleaned files keep the raw file's `NULL` convention.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum CleanValue {
    Text(String),
    Null,
}

impl CleanValue {
    pub fn is_null(&self) -> bool {
        matches!(self, CleanValue::Null)
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            CleanValue::Text(s) => Some(s),
            CleanValue::Null => None,
        }
    }
}

impl From<String> for CleanValue {
    fn from(s: String) -> Self {
        if s == NULL_SENTINEL {
            CleanValue::Null
        } else {
            CleanValue::Text(s)
        }
    }
}

impl From<CleanValue> for String {
    fn from(v: CleanValue) -> Self {
        match v {
            CleanValue::Text(s) => s,
            CleanValue::Null => NULL_SENTINEL.to_string(),
        }
    }
}

/// A cleaned tuple. Titles and values keep their letter case (they are
/// lower-cased later, at tokenization time); attributes are fully normalized
/// including the case fold.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CleanTuple {
    pub title: String,
    pub attribute: String,
    pub value: CleanValue,
}

/// Decodes HTML entities (named and numeric) and normalizes whitespace:
/// every maximal whitespace run becomes one ASCII space and the ends are
/// trimmed. Malformed entities are left verbatim. Decoding runs to a fixed
/// point so the output never contains a decodable entity, which also makes
/// the function idempotent.
pub fn clean_text(raw: &str) -> String {
    let mut text = Cow::Borrowed(raw);
    loop {
        let decoded = html_escape::decode_html_entities(text.as_ref());
        if decoded == text.as_ref() {
            break;
        }
        text = Cow::Owned(decoded.into_owned());
    }

    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(ch);
        }
    }
    out
}

/// Normalizes an already-cleaned attribute name: inserts a space at every
/// letter/digit boundary, strips trailing ':' characters and folds to lower
/// case.
pub fn normalize_attribute(attr: &str) -> String {
    let mut spaced = String::with_capacity(attr.len() + 4);
    let mut prev: Option<char> = None;
    for ch in attr.chars() {
        if let Some(p) = prev {
            let boundary =
                (p.is_alphabetic() && ch.is_numeric()) || (p.is_numeric() && ch.is_alphabetic());
            if boundary {
                spaced.push(' ');
            }
        }
        spaced.push(ch);
        prev = Some(ch);
    }
    let stripped = spaced.trim_end_matches(':').trim_end();
    stripped.to_lowercase()
}

/// Cleans one tuple. NULL detection looks at the *raw* value, before any
/// text transformation.
pub fn clean_tuple(raw: &RawTuple) -> CleanTuple {
    let value = if raw.value == NULL_SENTINEL {
        CleanValue::Null
    } else {
        CleanValue::Text(clean_text(&raw.value))
    };
    CleanTuple {
        title: clean_text(&raw.title),
        attribute: normalize_attribute(&clean_text(&raw.attribute)),
        value,
    }
}

/// Removes exact duplicate triples, keeping the first occurrence. Returns
/// the surviving tuples and the number removed.
pub fn dedup(tuples: Vec<CleanTuple>) -> (Vec<CleanTuple>, usize) {
    let mut seen: HashSet<CleanTuple> = HashSet::with_capacity(tuples.len());
    let mut kept = Vec::with_capacity(tuples.len());
    let mut removed = 0usize;
    for t in tuples {
        if seen.insert(t.clone()) {
            kept.push(t);
        } else {
            removed += 1;
        }
    }
    (kept, removed)
}

/// Corpus-level statistics reported by the cleaning stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanStats {
    pub input_tuples: usize,
    /// Tuples whose cleaned title or attribute (or non-NULL value) came out
    /// empty; these cannot be used downstream and are dropped.
    pub dropped_empty_field: usize,
    pub duplicates_removed: usize,
    /// Tuples where cleaning changed at least one field.
    pub tuples_changed: usize,
    pub tuples: usize,
    pub null_tuples: usize,
    pub unique_attributes: usize,
    pub unique_values: usize,
    pub unique_attribute_value_pairs: usize,
}

/// Output of the full cleaning pipeline.
#[derive(Debug, Clone)]
pub struct CleanCorpus {
    pub tuples: Vec<CleanTuple>,
    pub stats: CleanStats,
}

/// Runs cleaning, empty-field filtering and deduplication over a raw corpus.
pub fn clean_corpus(raws: &[RawTuple]) -> CleanCorpus {
    let mut cleaned = Vec::with_capacity(raws.len());
    let mut dropped_empty = 0usize;
    let mut changed = 0usize;
    for raw in raws {
        let tuple = clean_tuple(raw);
        let value_ok = match &tuple.value {
            CleanValue::Null => true,
            CleanValue::Text(v) => !v.is_empty(),
        };
        if tuple.title.is_empty() || tuple.attribute.is_empty() || !value_ok {
            dropped_empty += 1;
            continue;
        }
        let unchanged = tuple.title == raw.title
            && tuple.attribute == raw.attribute
            && match &tuple.value {
                CleanValue::Null => raw.value == NULL_SENTINEL,
                CleanValue::Text(v) => *v == raw.value,
            };
        if !unchanged {
            changed += 1;
        }
        cleaned.push(tuple);
    }

    let (tuples, duplicates_removed) = dedup(cleaned);

    let mut attrs: HashSet<&str> = HashSet::new();
    let mut values: HashSet<&str> = HashSet::new();
    let mut pairs: HashSet<(&str, &str)> = HashSet::new();
    let mut null_tuples = 0usize;
    for t in &tuples {
        attrs.insert(&t.attribute);
        match &t.value {
            CleanValue::Null => null_tuples += 1,
            CleanValue::Text(v) => {
                values.insert(v);
                pairs.insert((&t.attribute, v));
            }
        }
    }

    let stats = CleanStats {
        input_tuples: raws.len(),
        dropped_empty_field: dropped_empty,
        duplicates_removed,
        tuples_changed: changed,
        tuples: tuples.len(),
        null_tuples,
        unique_attributes: attrs.len(),
        unique_values: values.len(),
        unique_attribute_value_pairs: pairs.len(),
    };
    CleanCorpus { tuples, stats }
}

/// A seeded train/dev/test partition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<CleanTuple>,
    pub dev: Vec<CleanTuple>,
    pub test: Vec<CleanTuple>,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitDataset {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.dev.len(), self.test.len())
    }
}

/// Splits tuples 7:1:2. The default mode shuffles the whole corpus with a
/// seeded Fisher-Yates pass and cuts at `floor(7n/10)` and `floor(8n/10)`,
/// so boundary rounding moves at most one tuple. The stratified mode applies
/// the same shuffle-and-cycle per attribute group so every attribute is
/// spread across splits in the same 7:1:2 pattern.
pub fn split(tuples: &[CleanTuple], seed: u64, stratified: bool) -> Result<SplitDataset> {
    if tuples.len() < 10 {
        return Err(Error::Data(format!(
            "cannot split {} tuples with a 7:1:2 ratio; need at least 10",
            tuples.len()
        )));
    }

    let mut train = Vec::new();
    let mut dev = Vec::new();
    let mut test = Vec::new();

    if !stratified {
        let n = tuples.len();
        let mut order: Vec<usize> = (0..n).collect();
        rng::shuffle(&mut order, &mut SplitMix64::new(seed));
        let train_end = n * 7 / 10;
        let dev_end = n * 8 / 10;
        for (pos, &ix) in order.iter().enumerate() {
            let t = tuples[ix].clone();
            if pos < train_end {
                train.push(t);
            } else if pos < dev_end {
                dev.push(t);
            } else {
                test.push(t);
            }
        }
    } else {
        // Group by attribute in first-occurrence order; each group gets its
        // own RNG stream derived from the attribute name so the assignment
        // does not depend on group order.
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (ix, t) in tuples.iter().enumerate() {
            groups.entry(&t.attribute).or_default().push(ix);
        }
        for (attr, mut members) in groups {
            let mut group_rng = SplitMix64::derive(seed, rng::fnv1a64(attr.as_bytes()));
            rng::shuffle(&mut members, &mut group_rng);
            for (pos, &ix) in members.iter().enumerate() {
                let t = tuples[ix].clone();
                match pos % 10 {
                    0..=6 => train.push(t),
                    7 => dev.push(t),
                    _ => test.push(t),
                }
            }
        }
    }

    Ok(SplitDataset {
        train,
        dev,
        test,
        seed,
        stratified,
    })
}

/// Raw input format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawFormat {
    Tsv,
    Jsonl,
}

impl RawFormat {
    /// Picks a format from the file extension: `.jsonl`/`.json` mean JSONL,
    /// anything else is tab-separated.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => RawFormat::Jsonl,
            _ => RawFormat::Tsv,
        }
    }
}

/// Reads raw tuples from a TSV (three tab-separated fields) or JSONL file.
/// Every field must be non-empty.
pub fn read_raw_tuples(path: &Path, format: RawFormat) -> Result<Vec<RawTuple>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut tuples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg,
        };
        let tuple = match format {
            RawFormat::Tsv => {
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != 3 {
                    return Err(parse_err(format!(
                        "expected 3 tab-separated fields, found {}",
                        fields.len()
                    )));
                }
                RawTuple {
                    title: fields[0].to_string(),
                    attribute: fields[1].to_string(),
                    value: fields[2].to_string(),
                }
            }
            RawFormat::Jsonl => {
                serde_json::from_str::<RawTuple>(&line).map_err(|e| parse_err(e.to_string()))?
            }
        };
        if tuple.title.is_empty() || tuple.attribute.is_empty() || tuple.value.is_empty() {
            return Err(parse_err("empty field in raw tuple".to_string()));
        }
        tuples.push(tuple);
    }
    Ok(tuples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tup(title: &str, attr: &str, value: &str) -> CleanTuple {
        CleanTuple {
            title: title.to_string(),
            attribute: attr.to_string(),
            value: CleanValue::from(value.to_string()),
        }
    }

    #[test]
    fn clean_text_decodes_entities_and_collapses_whitespace() {
        assert_eq!(clean_text("Nike&amp;  Adidas "), "Nike& Adidas");
        assert_eq!(clean_text("abc"), "abc");
        assert_eq!(clean_text("&#65; b"), "A b");
    }

    #[test]
    fn clean_text_leaves_malformed_entities_verbatim() {
        assert_eq!(clean_text("AT&T"), "AT&T");
        assert_eq!(clean_text("&foobar;"), "&foobar;");
    }

    #[test]
    fn clean_text_decodes_nested_entities_to_fixed_point() {
        assert_eq!(clean_text("&amp;amp;"), "&");
        assert_eq!(clean_text("a&Tab;b"), "a b");
    }

    #[test]
    fn normalize_attribute_examples() {
        assert_eq!(normalize_attribute("feature1:"), "feature 1");
        assert_eq!(normalize_attribute("color"), "color");
        assert_eq!(normalize_attribute("Size2XL"), "size 2 xl");
    }

    #[test]
    fn normalize_attribute_strips_repeated_trailing_colons() {
        assert_eq!(normalize_attribute("a::"), "a");
    }

    #[test]
    fn dedup_keeps_first_occurrence_in_order() {
        let t = tup("t", "a", "v");
        let u = tup("u", "a", "v");
        let (kept, removed) = dedup(vec![t.clone(), t.clone(), u.clone()]);
        assert_eq!(kept, vec![t, u]);
        assert_eq!(removed, 1);

        let (kept, removed) = dedup(Vec::new());
        assert!(kept.is_empty());
        assert_eq!(removed, 0);
    }

    #[test]
    fn split_honors_ratio_and_seed() {
        let tuples: Vec<CleanTuple> = (0..100)
            .map(|i| tup(&format!("title {i}"), "a", "v"))
            .collect();
        let s = split(&tuples, 7, false).unwrap();
        assert_eq!(s.sizes(), (70, 10, 20));

        let s2 = split(&tuples, 7, false).unwrap();
        assert_eq!(s.train, s2.train);
        assert_eq!(s.dev, s2.dev);
        assert_eq!(s.test, s2.test);

        let s3 = split(&tuples, 8, false).unwrap();
        assert_eq!(s3.sizes(), (70, 10, 20));
        assert_ne!(s.train, s3.train);
    }

    #[test]
    fn split_boundaries_match_integer_floor_rule() {
        let tuples: Vec<CleanTuple> = (0..109_748 / 1000)
            .map(|i| tup(&format!("t{i}"), "a", "v"))
            .collect();
        let n = tuples.len();
        let s = split(&tuples, 1, false).unwrap();
        assert_eq!(s.sizes(), (n * 7 / 10, n * 8 / 10 - n * 7 / 10, n - n * 8 / 10));
    }

    #[test]
    fn split_refuses_fewer_than_ten_tuples() {
        let tuples: Vec<CleanTuple> = (0..9).map(|i| tup(&format!("t{i}"), "a", "v")).collect();
        assert!(split(&tuples, 1, false).is_err());
    }

    #[test]
    fn stratified_split_partitions_exactly() {
        let mut tuples = Vec::new();
        for a in 0..20 {
            for i in 0..(a % 7 + 1) {
                tuples.push(tup(&format!("t{a}-{i}"), &format!("attr{a}"), "v"));
            }
        }
        let s = split(&tuples, 3, true).unwrap();
        let total = s.train.len() + s.dev.len() + s.test.len();
        assert_eq!(total, tuples.len());
        let mut all: Vec<CleanTuple> = s
            .train
            .iter()
            .chain(&s.dev)
            .chain(&s.test)
            .cloned()
            .collect();
        all.sort_by(|a, b| a.title.cmp(&b.title));
        let mut input = tuples.clone();
        input.sort_by(|a, b| a.title.cmp(&b.title));
        assert_eq!(all, input);
    }

    #[test]
    fn clean_corpus_counts_changes_and_drops_empty() {
        let raws = vec![
            RawTuple {
                title: "ok title".into(),
                attribute: "color".into(),
                value: "red".into(),
            },
            RawTuple {
                title: "&nbsp;".into(),
                attribute: "color".into(),
                value: "red".into(),
            },
            RawTuple {
                title: "another  title".into(),
                attribute: "size:".into(),
                value: "NULL".into(),
            },
        ];
        let c = clean_corpus(&raws);
        assert_eq!(c.stats.input_tuples, 3);
        assert_eq!(c.stats.dropped_empty_field, 1);
        assert_eq!(c.stats.tuples, 2);
        assert_eq!(c.stats.tuples_changed, 1);
        assert_eq!(c.stats.null_tuples, 1);
        assert_eq!(c.stats.unique_attributes, 2);
        assert_eq!(c.stats.unique_values, 1);
    }

    #[test]
    fn clean_value_round_trips_null_sentinel() {
        let v: CleanValue = serde_json::from_str("\"NULL\"").unwrap();
        assert!(v.is_null());
        assert_eq!(serde_json::to_string(&v).unwrap(), "\"NULL\"");
        let t: CleanValue = serde_json::from_str("\"null\"").unwrap();
        assert_eq!(t.as_text(), Some("null"));
    }

    proptest! {
        #[test]
        fn clean_text_is_idempotent(s in "\\PC{0,80}") {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once);
        }

        #[test]
        fn clean_text_is_idempotent_on_entity_heavy_input(
            s in "(&|&amp;|&#65;|&#x41;|&Tab;|&nbsp;|&amp|a| |\t|;|#|x)*"
        ) {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once);
        }

        #[test]
        fn normalize_attribute_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize_attribute(&clean_text(&s));
            prop_assert_eq!(normalize_attribute(&once), once);
        }

        #[test]
        fn dedup_output_has_no_duplicates_and_counts_balance(
            items in proptest::collection::vec((0u8..5, 0u8..5), 0..50)
        ) {
            let tuples: Vec<CleanTuple> = items
                .iter()
                .map(|(a, v)| tup("t", &format!("a{a}"), &format!("v{v}")))
                .collect();
            let n = tuples.len();
            let (kept, removed) = dedup(tuples);
            prop_assert_eq!(kept.len() + removed, n);
            let set: HashSet<&CleanTuple> = kept.iter().collect();
            prop_assert_eq!(set.len(), kept.len());
        }

        #[test]
        fn split_is_an_exact_partition(n in 10usize..200, seed in 0u64..50) {
            let tuples: Vec<CleanTuple> =
                (0..n).map(|i| tup(&format!("t{i}"), "a", "v")).collect();
            let s = split(&tuples, seed, false).unwrap();
            prop_assert_eq!(s.train.len() + s.dev.len() + s.test.len(), n);
            prop_assert_eq!(s.train.len(), n * 7 / 10);
            prop_assert_eq!(s.train.len() + s.dev.len(), n * 8 / 10);
            let mut all: Vec<String> = s
                .train
                .iter()
                .chain(&s.dev)
                .chain(&s.test)
                .map(|t| t.title.clone())
                .collect();
            all.sort();
            let mut expect: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
            expect.sort();
            prop_assert_eq!(all, expect);
        }
    }
}
