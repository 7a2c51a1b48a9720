//! The attribute-to-values knowledge base and knowledge dropout.
//!
//! For every attribute the KB keeps the values observed in the source split,
//! token-canonicalized (lower-cased, tokenizer-joined) and ordered by
//! descending training count with lexicographic tie-breaks. Query expansion
//! draws the value list from here; knowledge dropout replaces individual
//! values with runs of `[PAD]` to mimic incomplete knowledge at test time.

use crate::corpus::CleanTuple;
use crate::error::{Error, Result};
use crate::files;
use crate::rng::SplitMix64;
use crate::tokenize::{self, tokenize};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// One value entry: canonical tokens plus its occurrence count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbValue {
    pub tokens: Vec<String>,
    pub count: u64,
}

impl KbValue {
    /// Canonical surface: tokens joined by single spaces.
    pub fn surface(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Serialize, Deserialize)]
struct KbValueRepr {
    surface: String,
    count: u64,
}

#[derive(Serialize, Deserialize)]
struct KbEntryRepr {
    attribute: String,
    values: Vec<KbValueRepr>,
}

/// Which splits fed the knowledge base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KbSource {
    Train,
    TrainDev,
}

/// Immutable attribute-to-values store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    entries: BTreeMap<String, Vec<KbValue>>,
    pub source: KbSource,
}

fn sort_values(values: &mut [KbValue]) {
    values.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.surface().cmp(&b.surface()))
    });
}

fn count_values(tuples: &[CleanTuple], into: &mut BTreeMap<String, BTreeMap<String, u64>>) {
    for t in tuples {
        let Some(text) = t.value.as_text() else {
            continue;
        };
        let tokens = tokenize(text);
        if tokens.is_empty() {
            continue;
        }
        *into.entry(t.attribute.clone())
            .or_default()
            .entry(tokens.join(" "))
            .or_insert(0) += 1;
    }
}

fn from_counts(counts: BTreeMap<String, BTreeMap<String, u64>>, source: KbSource) -> KnowledgeBase {
    let entries = counts
        .into_iter()
        .map(|(attr, by_surface)| {
            let mut values: Vec<KbValue> = by_surface
                .into_iter()
                .map(|(surface, count)| KbValue {
                    tokens: surface.split(' ').map(str::to_string).collect(),
                    count,
                })
                .collect();
            sort_values(&mut values);
            (attr, values)
        })
        .collect();
    KnowledgeBase {
        entries,
        source,
    }
}

impl KnowledgeBase {
    /// Collects all non-NULL values per attribute from the training split.
    pub fn build(train: &[CleanTuple]) -> Self {
        let mut counts = BTreeMap::new();
        count_values(train, &mut counts);
        from_counts(counts, KbSource::Train)
    }

    /// Returns a new KB with counts from `extra` tuples added and the value
    /// ordering recomputed.
    pub fn merge(&self, extra: &[CleanTuple]) -> Self {
        let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        for (attr, values) in &self.entries {
            let by_surface = counts.entry(attr.clone()).or_default();
            for v in values {
                *by_surface.entry(v.surface()).or_insert(0) += v.count;
            }
        }
        count_values(extra, &mut counts);
        from_counts(counts, KbSource::TrainDev)
    }

    /// Value list for an attribute, most frequent first; empty for unknown
    /// attributes.
    pub fn values(&self, attribute: &str) -> &[KbValue] {
        self.entries
            .get(attribute)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn has_values(&self, attribute: &str) -> bool {
        !self.values(attribute).is_empty()
    }

    pub fn attributes(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn attribute_count(&self) -> usize {
        self.entries.len()
    }

    /// Total number of distinct (attribute, value) pairs.
    pub fn pair_count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let items: Vec<KbEntryRepr> = self
            .entries
            .iter()
            .map(|(attribute, values)| KbEntryRepr {
                attribute: attribute.clone(),
                values: values
                    .iter()
                    .map(|v| KbValueRepr {
                        surface: v.surface(),
                        count: v.count,
                    })
                    .collect(),
            })
            .collect();
        files::write_jsonl(path, &items)
    }

    pub fn load(path: &Path, source: KbSource) -> Result<Self> {
        let items: Vec<KbEntryRepr> = files::read_jsonl(path)?;
        let mut entries = BTreeMap::new();
        for item in items {
            let values: Vec<KbValue> = item
                .values
                .into_iter()
                .map(|v| KbValue {
                    tokens: v.surface.split(' ').map(str::to_string).collect(),
                    count: v.count,
                })
                .collect();
            if entries.insert(item.attribute.clone(), values).is_some() {
                return Err(Error::Data(format!(
                    "duplicate attribute {:?} in knowledge base file",
                    item.attribute
                )));
            }
        }
        Ok(Self { entries, source })
    }
}

/// Knowledge-dropout configuration: each value with count `n` is replaced by
/// `[PAD]` tokens with probability `rate^n`, so rare values drop often and
/// frequent ones almost never.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutConfig {
    pub rate: f64,
}

impl DropoutConfig {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1], got {rate}"
            )));
        }
        Ok(Self { rate })
    }

    /// Drop probability for a value with training count `n`.
    pub fn drop_probability(&self, count: u64) -> f64 {
        self.rate.powf(count as f64)
    }
}

impl Default for DropoutConfig {
    fn default() -> Self {
        Self { rate: 0.2 }
    }
}

/// Applies knowledge dropout to a value list. Dropped values become runs of
/// `[PAD]` of identical token length; order and total length are preserved.
pub fn apply_dropout(
    values: &[KbValue],
    config: &DropoutConfig,
    rng: &mut SplitMix64,
) -> Vec<KbValue> {
    values
        .iter()
        .map(|v| {
            let p = config.drop_probability(v.count);
            if rng.next_f64() < p {
                KbValue {
                    tokens: vec![tokenize::PAD.to_string(); v.tokens.len()],
                    count: v.count,
                }
            } else {
                v.clone()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CleanValue;
    use proptest::prelude::*;

    fn tup(title: &str, attr: &str, value: &str) -> CleanTuple {
        CleanTuple {
            title: title.to_string(),
            attribute: attr.to_string(),
            value: CleanValue::from(value.to_string()),
        }
    }

    fn surfaces(kb: &KnowledgeBase, attr: &str) -> Vec<(String, u64)> {
        kb.values(attr)
            .iter()
            .map(|v| (v.surface(), v.count))
            .collect()
    }

    #[test]
    fn build_counts_and_orders_by_frequency() {
        let train = vec![
            tup("t1", "color", "red"),
            tup("t2", "color", "red"),
            tup("t3", "color", "blue"),
        ];
        let kb = KnowledgeBase::build(&train);
        assert_eq!(
            surfaces(&kb, "color"),
            vec![("red".to_string(), 2), ("blue".to_string(), 1)]
        );
        assert_eq!(kb.source, KbSource::Train);
    }

    #[test]
    fn build_excludes_null_values() {
        let train = vec![tup("t", "color", "NULL")];
        let kb = KnowledgeBase::build(&train);
        assert!(kb.values("color").is_empty());
        assert!(!kb.has_values("color"));
    }

    #[test]
    fn equal_counts_break_ties_lexicographically() {
        let train = vec![
            tup("t1", "color", "cyan"),
            tup("t2", "color", "amber"),
        ];
        let kb = KnowledgeBase::build(&train);
        assert_eq!(
            surfaces(&kb, "color"),
            vec![("amber".to_string(), 1), ("cyan".to_string(), 1)]
        );
    }

    #[test]
    fn merge_sums_counts_and_reorders() {
        let kb = KnowledgeBase::build(&[tup("t1", "color", "red"), tup("t2", "color", "red")]);
        let extra = vec![
            tup("d1", "color", "blue"),
            tup("d2", "color", "blue"),
            tup("d3", "color", "blue"),
        ];
        let merged = kb.merge(&extra);
        assert_eq!(
            surfaces(&merged, "color"),
            vec![("blue".to_string(), 3), ("red".to_string(), 2)]
        );
        assert_eq!(merged.source, KbSource::TrainDev);
    }

    #[test]
    fn merge_with_empty_extra_is_identity_on_entries() {
        let kb = KnowledgeBase::build(&[tup("t", "color", "red"), tup("u", "size", "xl")]);
        let merged = kb.merge(&[]);
        assert_eq!(kb.entries, merged.entries);
    }

    #[test]
    fn merge_adds_fresh_attribute() {
        let kb = KnowledgeBase::build(&[tup("t", "color", "red")]);
        let merged = kb.merge(&[tup("d", "material", "pu")]);
        assert_eq!(surfaces(&merged, "material"), vec![("pu".to_string(), 1)]);
        assert_eq!(surfaces(&merged, "color"), vec![("red".to_string(), 1)]);
    }

    #[test]
    fn counts_sum_to_non_null_tuple_count_per_attribute() {
        let train = vec![
            tup("t1", "color", "red"),
            tup("t2", "color", "blue"),
            tup("t3", "color", "red"),
            tup("t4", "color", "NULL"),
            tup("t5", "size", "xl"),
        ];
        let kb = KnowledgeBase::build(&train);
        let total: u64 = kb.values("color").iter().map(|v| v.count).sum();
        assert_eq!(total, 3);
    }

    #[test]
    fn dropout_probability_examples() {
        let cfg = DropoutConfig::new(0.2).unwrap();
        assert!((cfg.drop_probability(1) - 0.2).abs() < 1e-12);
        assert!((cfg.drop_probability(3) - 0.008).abs() < 1e-12);
        let zero = DropoutConfig::new(0.0).unwrap();
        assert_eq!(zero.drop_probability(1), 0.0);
    }

    #[test]
    fn dropout_rate_zero_never_drops() {
        let values = vec![
            KbValue { tokens: vec!["red".into()], count: 1 },
            KbValue { tokens: vec!["dark".into(), "blue".into()], count: 1 },
        ];
        let cfg = DropoutConfig::new(0.0).unwrap();
        let mut rng = SplitMix64::new(1);
        for _ in 0..100 {
            assert_eq!(apply_dropout(&values, &cfg, &mut rng), values);
        }
    }

    #[test]
    fn dropped_value_becomes_pad_run_of_same_length() {
        let values = vec![KbValue {
            tokens: vec!["dark".into(), "blue".into()],
            count: 1,
        }];
        let cfg = DropoutConfig::new(1.0).unwrap();
        let mut rng = SplitMix64::new(1);
        let out = apply_dropout(&values, &cfg, &mut rng);
        assert_eq!(out[0].tokens, vec!["[PAD]".to_string(), "[PAD]".to_string()]);
    }

    #[test]
    fn empirical_drop_rate_tracks_probability() {
        let cfg = DropoutConfig::new(0.2).unwrap();
        let values = vec![KbValue { tokens: vec!["v".into()], count: 2 }];
        let p = cfg.drop_probability(2);
        let n = 20_000;
        let mut rng = SplitMix64::new(99);
        let mut dropped = 0usize;
        for _ in 0..n {
            if apply_dropout(&values, &cfg, &mut rng)[0].tokens[0] == "[PAD]" {
                dropped += 1;
            }
        }
        let rate = dropped as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (rate - p).abs() <= 4.0 * sigma,
            "rate {rate} outside 4 sigma of {p}"
        );
    }

    #[test]
    fn kb_file_round_trip_is_bit_exact() {
        let train = vec![
            tup("t1", "color", "red"),
            tup("t2", "color", "Dark Blue"),
            tup("t3", "size", "xl"),
        ];
        let kb = KnowledgeBase::build(&train);
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("kb_a.jsonl");
        let b = dir.path().join("kb_b.jsonl");
        kb.save(&a).unwrap();
        let loaded = KnowledgeBase::load(&a, KbSource::Train).unwrap();
        assert_eq!(kb, loaded);
        loaded.save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    proptest! {
        #[test]
        fn dropout_preserves_count_and_token_lengths(
            lens in proptest::collection::vec(1usize..4, 0..10),
            rate in 0.0f64..=1.0,
            seed in 0u64..1000,
        ) {
            let values: Vec<KbValue> = lens
                .iter()
                .enumerate()
                .map(|(i, &l)| KbValue {
                    tokens: (0..l).map(|k| format!("v{i}k{k}")).collect(),
                    count: (i as u64 % 3) + 1,
                })
                .collect();
            let cfg = DropoutConfig::new(rate).unwrap();
            let mut rng = SplitMix64::new(seed);
            let out = apply_dropout(&values, &cfg, &mut rng);
            prop_assert_eq!(out.len(), values.len());
            for (a, b) in values.iter().zip(&out) {
                prop_assert_eq!(a.tokens.len(), b.tokens.len());
                prop_assert_eq!(a.count, b.count);
            }
        }
    }
}
