//! Synthetic corpus generation for desk-scale experiments.
//!
//! Titles are filler words with the gold value spliced in verbatim, so span
//! conversion never drops a tuple. Every title also carries a few
//! *distractor* values belonging to other attributes; the gold span is not
//! recoverable from the title alone, the extractor has to know which values
//! go with the queried attribute. Attribute frequencies follow a power law
//! over attribute rank (long tail), value frequencies follow a power law
//! within each attribute's pool, and a configurable fraction of attributes
//! get *ambiguous* names: drawn from a character alphabet disjoint from
//! their values, so name and values share no tokens or character n-grams.
//! Unambiguous names are a prefix of every one of their value tokens.
//! Fillers carry a leading marker letter outside the value alphabet and
//! value tokens are globally unique across attributes, so a title never
//! contains a value of its own attribute by accident; in particular NULL
//! titles contain only fillers and other attributes' values.

use crate::corpus::RawTuple;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Uniform title-length range (filler token count, before the value is
/// spliced in).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitleLenRange {
    pub min: usize,
    pub max: usize,
}

impl Default for TitleLenRange {
    fn default() -> Self {
        Self { min: 8, max: 20 }
    }
}

/// Generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub attributes: usize,
    /// Maximum number of distinct values per attribute; pool sizes are
    /// drawn uniformly from `1..=values_per_attribute`.
    pub values_per_attribute: usize,
    pub tuples: usize,
    pub title_len: TitleLenRange,
    /// Power-law exponent over attribute ranks; larger means heavier skew.
    pub skew: f64,
    pub ambiguous_fraction: f64,
    pub null_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            attributes: 200,
            values_per_attribute: 20,
            tuples: 20_000,
            title_len: TitleLenRange::default(),
            skew: 1.1,
            ambiguous_fraction: 0.4,
            null_fraction: 0.15,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.attributes == 0 || self.values_per_attribute == 0 || self.tuples == 0 {
            return Err(Error::Config(
                "attributes, values-per-attribute and tuples must be at least 1".to_string(),
            ));
        }
        if self.title_len.min == 0 || self.title_len.min > self.title_len.max {
            return Err(Error::Config(format!(
                "invalid title length range {}..{}",
                self.title_len.min, self.title_len.max
            )));
        }
        for (name, v) in [
            ("ambiguous_fraction", self.ambiguous_fraction),
            ("null_fraction", self.null_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if !self.skew.is_finite() || self.skew < 0.0 {
            return Err(Error::Config(format!(
                "skew must be finite and non-negative, got {}",
                self.skew
            )));
        }
        Ok(())
    }
}

// Ambiguous attribute names use only these letters...
const NAME_ALPHABET: &[u8] = b"bcdfgjqvz";
// ...values (and unambiguous name stems) only these; the sets are disjoint.
const VALUE_ALPHABET: &[u8] = b"aehiklmnorstuwy";
// Fillers start with a marker letter absent from the value alphabet.
const FILLER_MARKER: char = 'x';
const FILLER_VOCAB: usize = 400;
// Distractor values from other attributes spliced into each title, drawn
// from the head of the other attribute's pool so that rare values occur in
// titles only as their own attribute's gold splices.
const MIN_DISTRACTORS: usize = 2;
const MAX_DISTRACTORS: usize = 4;
const DISTRACTOR_POOL_HEAD: usize = 2;
// Probability of one extra distractor from a pool tail, so a rare-looking
// token is not automatically the answer.
const TAIL_DISTRACTOR_PROB: f64 = 0.8;

fn pseudoword(rng: &mut SplitMix64, alphabet: &[u8], len: usize) -> String {
    (0..len)
        .map(|_| alphabet[rng.gen_range(alphabet.len())] as char)
        .collect()
}

/// Cumulative power-law weights `1/(rank+1)^skew`.
struct PowerLaw {
    cumulative: Vec<f64>,
}

impl PowerLaw {
    fn new(n: usize, skew: f64) -> Self {
        let mut cumulative = Vec::with_capacity(n);
        let mut total = 0.0;
        for rank in 0..n {
            total += 1.0 / ((rank + 1) as f64).powf(skew);
            cumulative.push(total);
        }
        Self { cumulative }
    }

    fn sample(&self, rng: &mut SplitMix64) -> usize {
        let total = *self.cumulative.last().expect("non-empty distribution");
        let target = rng.next_f64() * total;
        self.cumulative.partition_point(|&c| c <= target).min(self.cumulative.len() - 1)
    }
}

struct SynthAttribute {
    name: String,
    values: Vec<Vec<String>>,
    value_dist: PowerLaw,
}

fn build_attributes(spec: &SynthSpec, rng: &mut SplitMix64) -> Vec<SynthAttribute> {
    let mut attrs = Vec::with_capacity(spec.attributes);
    let mut used_names: HashSet<String> = HashSet::new();
    // Value tokens are unique across the whole corpus so one attribute's
    // value can never show up inside another attribute's title splice.
    let mut used_tokens: HashSet<String> = HashSet::new();
    for _ in 0..spec.attributes {
        let ambiguous = rng.next_f64() < spec.ambiguous_fraction;
        let (name, stem) = loop {
            let candidate = if ambiguous {
                let len = 5 + rng.gen_range(3);
                (pseudoword(rng, NAME_ALPHABET, len), None)
            } else {
                let len = 4 + rng.gen_range(3);
                let stem = pseudoword(rng, VALUE_ALPHABET, len);
                (stem.clone(), Some(stem))
            };
            if used_names.insert(candidate.0.clone()) {
                break candidate;
            }
        };

        let pool_size = 1 + rng.gen_range(spec.values_per_attribute);
        let mut values = Vec::with_capacity(pool_size);
        while values.len() < pool_size {
            let mut make_token = |rng: &mut SplitMix64| loop {
                let token = match &stem {
                    Some(s) => {
                        let len = 2 + rng.gen_range(2);
                        format!("{s}{}", pseudoword(rng, VALUE_ALPHABET, len))
                    }
                    None => {
                        let len = 4 + rng.gen_range(4);
                        pseudoword(rng, VALUE_ALPHABET, len)
                    }
                };
                if used_tokens.insert(token.clone()) {
                    break token;
                }
            };
            let tokens = if rng.gen_range(10) < 3 {
                vec![make_token(rng), make_token(rng)]
            } else {
                vec![make_token(rng)]
            };
            values.push(tokens);
        }
        let value_dist = PowerLaw::new(values.len(), 1.2);
        attrs.push(SynthAttribute { name, values, value_dist });
    }
    attrs
}

/// Generates a raw synthetic corpus. Deterministic given the spec.
pub fn generate(spec: &SynthSpec) -> Result<Vec<RawTuple>> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);

    let fillers: Vec<String> = (0..FILLER_VOCAB)
        .map(|_| {
            let len = 3 + rng.gen_range(4);
            format!("{FILLER_MARKER}{}", pseudoword(&mut rng, VALUE_ALPHABET, len))
        })
        .collect();
    let attrs = build_attributes(spec, &mut rng);
    let attr_dist = PowerLaw::new(attrs.len(), spec.skew);

    let mut tuples = Vec::with_capacity(spec.tuples);
    for _ in 0..spec.tuples {
        let attr_ix = attr_dist.sample(&mut rng);
        let attr = &attrs[attr_ix];
        let len = spec.title_len.min + rng.gen_range(spec.title_len.max - spec.title_len.min + 1);
        let mut title: Vec<&str> = (0..len)
            .map(|_| fillers[rng.gen_range(fillers.len())].as_str())
            .collect();

        // Distractors first; the gold splice afterwards keeps it contiguous.
        if attrs.len() > 1 {
            let mut pick_other = |rng: &mut SplitMix64| loop {
                let other_ix = rng.gen_range(attrs.len());
                if other_ix != attr_ix {
                    break other_ix;
                }
            };
            let count = MIN_DISTRACTORS + rng.gen_range(MAX_DISTRACTORS - MIN_DISTRACTORS + 1);
            for _ in 0..count {
                let other = &attrs[pick_other(&mut rng)];
                let head = other.values.len().min(DISTRACTOR_POOL_HEAD);
                let tokens = &other.values[rng.gen_range(head)];
                let at = rng.gen_range(title.len() + 1);
                for (k, tok) in tokens.iter().enumerate() {
                    title.insert(at + k, tok.as_str());
                }
            }
            if rng.next_f64() < TAIL_DISTRACTOR_PROB {
                let other = &attrs[pick_other(&mut rng)];
                let half = other.values.len() / 2;
                let tokens = &other.values[half + rng.gen_range(other.values.len() - half)];
                let at = rng.gen_range(title.len() + 1);
                for (k, tok) in tokens.iter().enumerate() {
                    title.insert(at + k, tok.as_str());
                }
            }
        }

        let value = if rng.next_f64() < spec.null_fraction {
            "NULL".to_string()
        } else {
            let tokens = &attr.values[attr.value_dist.sample(&mut rng)];
            let at = rng.gen_range(title.len() + 1);
            for (k, tok) in tokens.iter().enumerate() {
                title.insert(at + k, tok.as_str());
            }
            tokens.join(" ")
        };

        tuples.push(RawTuple {
            title: title.join(" "),
            attribute: attr.name.clone(),
            value,
        });
    }
    Ok(tuples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{clean_corpus, split};
    use crate::spanlabel::convert_all;
    use std::collections::HashMap;

    fn small_spec(seed: u64) -> SynthSpec {
        SynthSpec {
            seed,
            attributes: 30,
            values_per_attribute: 8,
            tuples: 2_000,
            ..Default::default()
        }
    }

    #[test]
    fn zero_null_fraction_emits_no_nulls() {
        let spec = SynthSpec { null_fraction: 0.0, ..small_spec(1) };
        let tuples = generate(&spec).unwrap();
        assert!(tuples.iter().all(|t| t.value != "NULL"));
    }

    #[test]
    fn every_gold_value_appears_verbatim_so_no_drops() {
        let tuples = generate(&small_spec(2)).unwrap();
        let cleaned = clean_corpus(&tuples);
        let (_, report) = convert_all(&cleaned.tuples, 64);
        assert_eq!(report.dropped(), 0);
    }

    #[test]
    fn skew_produces_a_heavy_tail() {
        let spec = SynthSpec {
            seed: 3,
            attributes: 200,
            tuples: 20_000,
            skew: 1.1,
            ..Default::default()
        };
        let tuples = generate(&spec).unwrap();
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in &tuples {
            *counts.entry(t.attribute.as_str()).or_insert(0) += 1;
        }
        let mut sorted: Vec<usize> = counts.values().copied().collect();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let top = sorted[0];
        let median = sorted[sorted.len() / 2];
        assert!(
            top >= 10 * median.max(1),
            "expected heavy tail, top {top} median {median}"
        );
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let a = generate(&small_spec(7)).unwrap();
        let b = generate(&small_spec(7)).unwrap();
        assert_eq!(a, b);
        let c = generate(&small_spec(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn null_titles_never_contain_a_value_of_their_attribute() {
        let spec = SynthSpec { null_fraction: 0.5, ..small_spec(4) };
        let tuples = generate(&spec).unwrap();
        let cleaned = clean_corpus(&tuples);
        let kb = crate::knowledge::KnowledgeBase::build(&cleaned.tuples);
        for t in cleaned.tuples.iter().filter(|t| t.value.is_null()) {
            let title = crate::tokenize::tokenize(&t.title);
            assert_eq!(
                crate::baseline::dictionary_extract(&title, &t.attribute, &kb),
                None
            );
        }
    }

    #[test]
    fn ambiguous_names_share_no_characters_with_their_values() {
        let spec = SynthSpec { ambiguous_fraction: 1.0, ..small_spec(5) };
        let tuples = generate(&spec).unwrap();
        for t in tuples.iter().filter(|t| t.value != "NULL") {
            let name_chars: HashSet<char> = t.attribute.chars().collect();
            assert!(
                t.value.chars().filter(|c| *c != ' ').all(|c| !name_chars.contains(&c)),
                "attribute {:?} shares characters with value {:?}",
                t.attribute,
                t.value
            );
        }
    }

    #[test]
    fn corpus_splits_and_produces_unseen_values() {
        let tuples = generate(&small_spec(6)).unwrap();
        let cleaned = clean_corpus(&tuples);
        let s = split(&cleaned.tuples, 11, false).unwrap();
        let index = crate::eval::TrainIndex::build(&s.train);
        let examples = crate::eval::to_eval_examples(&s.test);
        let unseen_value = examples
            .iter()
            .filter(|e| {
                matches!(
                    crate::eval::categorize_example(e, &index),
                    crate::eval::Category::SeenAttrUnseenValue
                )
            })
            .count();
        assert!(unseen_value > 0, "need unseen-value test examples");
    }
}
