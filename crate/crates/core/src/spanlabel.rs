//! Conversion of cleaned tuples into begin/end position labels.
//!
//! Positions are 1-indexed into the (truncated) title; position 0 is the
//! classifier slot and `(0, 0)` labels a NULL value. Matching is exact over
//! whole tokens, so a value can never match inside a longer title token.

use crate::corpus::{CleanTuple, CleanValue};
use crate::error::{Error, Result};
use crate::tokenize::tokenize;
use serde::{Deserialize, Serialize};

/// Default title budget in tokens.
pub const MAX_TITLE_TOKENS: usize = 64;

/// A tuple converted to position labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub title_tokens: Vec<String>,
    pub attribute_tokens: Vec<String>,
    pub gold_begin: usize,
    pub gold_end: usize,
    pub is_null: bool,
}

impl LabeledExample {
    /// Title tokens covered by the gold span; empty for NULL.
    pub fn gold_tokens(&self) -> &[String] {
        if self.is_null {
            &[]
        } else {
            &self.title_tokens[self.gold_begin - 1..self.gold_end]
        }
    }
}

/// Finds the earliest exact occurrence of `value` as a contiguous run of
/// whole tokens in `title`. Returns 1-indexed inclusive `(begin, end)`.
pub fn find_span(title: &[String], value: &[String]) -> Result<Option<(usize, usize)>> {
    if value.is_empty() {
        return Err(Error::Data("cannot match an empty value".to_string()));
    }
    if value.len() > title.len() {
        return Ok(None);
    }
    for start in 0..=(title.len() - value.len()) {
        if title[start..start + value.len()] == *value {
            return Ok(Some((start + 1, start + value.len())));
        }
    }
    Ok(None)
}

/// Why a tuple produced no labeled example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// The value tokenized to nothing.
    EmptyValue,
    /// The value does not occur in the title at all.
    NoMatch,
    /// The value occurs, but only past the title truncation boundary.
    MatchBeyondTruncation,
}

/// Outcome of converting a single tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Conversion {
    Labeled(LabeledExample),
    Dropped(DropReason),
}

/// Converts one cleaned tuple. The title is truncated to `max_title` tokens
/// before matching; NULL values label the classifier slot `(0, 0)`.
pub fn to_labeled(tuple: &CleanTuple, max_title: usize) -> Conversion {
    let mut title_tokens = tokenize(&tuple.title);
    let full_len = title_tokens.len();
    title_tokens.truncate(max_title);
    let attribute_tokens = tokenize(&tuple.attribute);

    match &tuple.value {
        CleanValue::Null => Conversion::Labeled(LabeledExample {
            title_tokens,
            attribute_tokens,
            gold_begin: 0,
            gold_end: 0,
            is_null: true,
        }),
        CleanValue::Text(text) => {
            let value_tokens = tokenize(text);
            if value_tokens.is_empty() {
                return Conversion::Dropped(DropReason::EmptyValue);
            }
            match find_span(&title_tokens, &value_tokens).expect("value is non-empty") {
                Some((begin, end)) => Conversion::Labeled(LabeledExample {
                    title_tokens,
                    attribute_tokens,
                    gold_begin: begin,
                    gold_end: end,
                    is_null: false,
                }),
                None => {
                    let full_title = tokenize(&tuple.title);
                    debug_assert_eq!(full_title.len(), full_len);
                    let matched_untruncated =
                        find_span(&full_title, &value_tokens).expect("value is non-empty");
                    if matched_untruncated.is_some() {
                        Conversion::Dropped(DropReason::MatchBeyondTruncation)
                    } else {
                        Conversion::Dropped(DropReason::NoMatch)
                    }
                }
            }
        }
    }
}

/// Extracts the predicted value tokens for a span. Any span starting at the
/// classifier slot means NULL: position 0 is not a title token.
pub fn span_to_value(example: &LabeledExample, span: (usize, usize)) -> Option<Vec<String>> {
    if span.0 == 0 {
        return None;
    }
    debug_assert!(span.1 <= example.title_tokens.len());
    Some(example.title_tokens[span.0 - 1..span.1].to_vec())
}

/// Per-reason counts from a conversion pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionReport {
    pub input: usize,
    pub emitted: usize,
    pub null_examples: usize,
    pub dropped_no_match: usize,
    pub dropped_beyond_truncation: usize,
    pub dropped_empty_value: usize,
}

impl ConversionReport {
    pub fn dropped(&self) -> usize {
        self.dropped_no_match + self.dropped_beyond_truncation + self.dropped_empty_value
    }
}

/// Converts a whole split, collecting the labeled examples and drop counts.
pub fn convert_all(tuples: &[CleanTuple], max_title: usize) -> (Vec<LabeledExample>, ConversionReport) {
    let mut examples = Vec::with_capacity(tuples.len());
    let mut report = ConversionReport {
        input: tuples.len(),
        ..Default::default()
    };
    for tuple in tuples {
        match to_labeled(tuple, max_title) {
            Conversion::Labeled(ex) => {
                if ex.is_null {
                    report.null_examples += 1;
                }
                report.emitted += 1;
                examples.push(ex);
            }
            Conversion::Dropped(DropReason::NoMatch) => report.dropped_no_match += 1,
            Conversion::Dropped(DropReason::MatchBeyondTruncation) => {
                report.dropped_beyond_truncation += 1
            }
            Conversion::Dropped(DropReason::EmptyValue) => report.dropped_empty_value += 1,
        }
    }
    (examples, report)
}
