//! Exact-match scoring with micro/macro aggregation and the stratified
//! analyses: frequency-by-ambiguity buckets, value-type categories and
//! knowledge-base comparison.
//!
//! A prediction is correct only when its full token sequence equals the gold
//! value. Precision counts correct extractions over non-NULL predictions,
//! recall over non-NULL golds; a NULL prediction on a NULL gold enters
//! neither denominator. The strict-precision option also charges NULL
//! predictions on non-NULL golds to the precision denominator.

mod ambiguity;
mod report;

pub use ambiguity::{
    ambiguity_score, bucketize, build_profiles, cosine, AttributeProfile, Bucket,
    BucketThresholds, Embedder, HashedNgramEmbedder,
};
pub use report::{render_buckets_csv, render_report_text};

use crate::corpus::CleanTuple;
use crate::error::{Error, Result};
use crate::tokenize::tokenize;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};

/// A test example for scoring: the gold value as canonical tokens, or NULL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalExample {
    pub id: usize,
    pub attribute: String,
    pub gold: Option<Vec<String>>,
}

/// Converts cleaned test tuples into eval examples; ids are positions.
/// Tuples whose value never matched the title still keep their value as
/// gold, so extractors that cannot produce it lose recall.
pub fn to_eval_examples(tuples: &[CleanTuple]) -> Vec<EvalExample> {
    tuples
        .iter()
        .enumerate()
        .map(|(id, t)| EvalExample {
            id,
            attribute: t.attribute.clone(),
            gold: t.value.as_text().map(tokenize).filter(|v| !v.is_empty()),
        })
        .collect()
}

/// One system output per test example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: usize,
    pub value: Option<Vec<String>>,
}

/// Precision/recall/F1 with the underlying counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Prf {
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(tp: usize, predicted: usize, gold: usize) -> Self {
        let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let recall = if gold == 0 { 0.0 } else { tp as f64 / gold as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { true_positives: tp, predicted, gold, precision, recall, f1 }
    }
}

/// Unweighted means of per-attribute precision/recall/F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Attributes entering the average (at least one non-NULL gold).
    pub attributes: usize,
}

/// Micro and macro scores over one example set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Scores {
    pub examples: usize,
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_: MacroScores,
    /// Attributes skipped by the macro average because every gold is NULL.
    pub excluded_attributes: usize,
}

/// Scoring options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ScoreOptions {
    /// Charge NULL predictions on non-NULL golds to the precision
    /// denominator as failed extraction attempts.
    pub strict_precision: bool,
}

/// A scored evaluation with optional stratified breakdowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub options: ScoreOptions,
    pub overall: Scores,
    pub per_attribute: BTreeMap<String, Prf>,
    pub buckets: Option<BucketReport>,
    pub categories: Option<CategoryReport>,
}

fn pair_predictions<'a>(
    golds: &[EvalExample],
    preds: &'a [Prediction],
) -> Result<HashMap<usize, &'a Option<Vec<String>>>> {
    let mut by_id: HashMap<usize, &Option<Vec<String>>> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.id, &p.value).is_some() {
            return Err(Error::Data(format!("duplicate prediction for example {}", p.id)));
        }
    }
    for g in golds {
        if !by_id.contains_key(&g.id) {
            return Err(Error::Data(format!("missing prediction for example {}", g.id)));
        }
    }
    Ok(by_id)
}

struct Counts {
    tp: usize,
    predicted: usize,
    gold: usize,
}

fn count_example(
    gold: &Option<Vec<String>>,
    pred: &Option<Vec<String>>,
    opts: &ScoreOptions,
    counts: &mut Counts,
) {
    match (gold, pred) {
        (Some(g), Some(p)) => {
            counts.gold += 1;
            counts.predicted += 1;
            if g == p {
                counts.tp += 1;
            }
        }
        (Some(_), None) => {
            counts.gold += 1;
            if opts.strict_precision {
                counts.predicted += 1;
            }
        }
        (None, Some(_)) => {
            counts.predicted += 1;
        }
        (None, None) => {}
    }
}

fn score_subset(
    golds: &[&EvalExample],
    by_id: &HashMap<usize, &Option<Vec<String>>>,
    opts: &ScoreOptions,
) -> (Scores, BTreeMap<String, Prf>) {
    let mut micro = Counts { tp: 0, predicted: 0, gold: 0 };
    let mut per_attr: BTreeMap<&str, Counts> = BTreeMap::new();
    for g in golds {
        let pred = by_id[&g.id];
        count_example(&g.gold, pred, opts, &mut micro);
        let attr = per_attr
            .entry(g.attribute.as_str())
            .or_insert(Counts { tp: 0, predicted: 0, gold: 0 });
        count_example(&g.gold, pred, opts, attr);
    }

    let mut table = BTreeMap::new();
    let mut macro_p = 0.0;
    let mut macro_r = 0.0;
    let mut macro_f1 = 0.0;
    let mut scored = 0usize;
    let mut excluded = 0usize;
    for (attr, c) in per_attr {
        let prf = Prf::from_counts(c.tp, c.predicted, c.gold);
        if c.gold > 0 {
            macro_p += prf.precision;
            macro_r += prf.recall;
            macro_f1 += prf.f1;
            scored += 1;
        } else {
            excluded += 1;
        }
        table.insert(attr.to_string(), prf);
    }
    let denom = scored.max(1) as f64;
    let scores = Scores {
        examples: golds.len(),
        micro: Prf::from_counts(micro.tp, micro.predicted, micro.gold),
        macro_: MacroScores {
            precision: if scored == 0 { 0.0 } else { macro_p / denom },
            recall: if scored == 0 { 0.0 } else { macro_r / denom },
            f1: if scored == 0 { 0.0 } else { macro_f1 / denom },
            attributes: scored,
        },
        excluded_attributes: excluded,
    };
    (scores, table)
}

/// Scores predictions against golds. Requires exactly one prediction per
/// example; ordering does not matter.
pub fn score(
    golds: &[EvalExample],
    preds: &[Prediction],
    opts: &ScoreOptions,
) -> Result<EvalReport> {
    let by_id = pair_predictions(golds, preds)?;
    let refs: Vec<&EvalExample> = golds.iter().collect();
    let (overall, per_attribute) = score_subset(&refs, &by_id, opts);
    Ok(EvalReport {
        options: *opts,
        overall,
        per_attribute,
        buckets: None,
        categories: None,
    })
}

/// Value-type category of a test example relative to the training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SeenAttrSeenValue,
    SeenAttrUnseenValue,
    UnseenAttr,
}

/// Training-split membership index used by [`categorize_example`].
#[derive(Debug, Clone)]
pub struct TrainIndex {
    attributes: HashSet<String>,
    values: HashMap<String, HashSet<String>>,
}

impl TrainIndex {
    pub fn build(train: &[CleanTuple]) -> Self {
        let mut attributes = HashSet::new();
        let mut values: HashMap<String, HashSet<String>> = HashMap::new();
        for t in train {
            attributes.insert(t.attribute.clone());
            if let Some(text) = t.value.as_text() {
                let tokens = tokenize(text);
                if !tokens.is_empty() {
                    values
                        .entry(t.attribute.clone())
                        .or_default()
                        .insert(tokens.join(" "));
                }
            }
        }
        Self { attributes, values }
    }
}

/// Assigns a test example to seen/unseen attribute and value categories.
/// NULL golds under a seen attribute count as seen-value (the membership
/// test is vacuous); the category report records how many took this path.
pub fn categorize_example(example: &EvalExample, index: &TrainIndex) -> Category {
    if !index.attributes.contains(&example.attribute) {
        return Category::UnseenAttr;
    }
    match &example.gold {
        None => Category::SeenAttrSeenValue,
        Some(tokens) => {
            let surface = tokens.join(" ");
            let seen = index
                .values
                .get(&example.attribute)
                .map(|s| s.contains(&surface))
                .unwrap_or(false);
            if seen {
                Category::SeenAttrSeenValue
            } else {
                Category::SeenAttrUnseenValue
            }
        }
    }
}

/// Scores per value-type category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub seen_attr_seen_value: Scores,
    pub seen_attr_unseen_value: Scores,
    pub unseen_attr: Scores,
    /// NULL-gold examples assigned to seen-value by convention.
    pub null_gold_as_seen_value: usize,
}

impl CategoryReport {
    pub fn get(&self, category: Category) -> &Scores {
        match category {
            Category::SeenAttrSeenValue => &self.seen_attr_seen_value,
            Category::SeenAttrUnseenValue => &self.seen_attr_unseen_value,
            Category::UnseenAttr => &self.unseen_attr,
        }
    }
}

/// Computes the category breakdown and attaches it to the report.
pub fn add_categories(
    report: &mut EvalReport,
    golds: &[EvalExample],
    preds: &[Prediction],
    index: &TrainIndex,
) -> Result<()> {
    let by_id = pair_predictions(golds, preds)?;
    let opts = report.options;
    let mut seen_seen = Vec::new();
    let mut seen_unseen = Vec::new();
    let mut unseen = Vec::new();
    let mut null_as_seen = 0usize;
    for g in golds {
        match categorize_example(g, index) {
            Category::SeenAttrSeenValue => {
                if g.gold.is_none() {
                    null_as_seen += 1;
                }
                seen_seen.push(g);
            }
            Category::SeenAttrUnseenValue => seen_unseen.push(g),
            Category::UnseenAttr => unseen.push(g),
        }
    }
    report.categories = Some(CategoryReport {
        seen_attr_seen_value: score_subset(&seen_seen, &by_id, &opts).0,
        seen_attr_unseen_value: score_subset(&seen_unseen, &by_id, &opts).0,
        unseen_attr: score_subset(&unseen, &by_id, &opts).0,
        null_gold_as_seen_value: null_as_seen,
    });
    Ok(())
}

/// Scores per frequency-by-ambiguity bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub thresholds: BucketThresholds,
    /// Cells keyed by (similarity bucket, frequency bucket).
    pub lo_sim_lo_freq: Scores,
    pub lo_sim_hi_freq: Scores,
    pub hi_sim_lo_freq: Scores,
    pub hi_sim_hi_freq: Scores,
    /// Examples whose attribute has no profile (no knowledge-base values).
    pub unprofiled_examples: usize,
}

impl BucketReport {
    pub fn cell(&self, sim: Bucket, freq: Bucket) -> &Scores {
        match (sim, freq) {
            (Bucket::Lo, Bucket::Lo) => &self.lo_sim_lo_freq,
            (Bucket::Lo, Bucket::Hi) => &self.lo_sim_hi_freq,
            (Bucket::Hi, Bucket::Lo) => &self.hi_sim_lo_freq,
            (Bucket::Hi, Bucket::Hi) => &self.hi_sim_hi_freq,
        }
    }
}

/// Computes the bucket breakdown from bucketized profiles and attaches it.
pub fn add_buckets(
    report: &mut EvalReport,
    golds: &[EvalExample],
    preds: &[Prediction],
    profiles: &[AttributeProfile],
    thresholds: BucketThresholds,
) -> Result<()> {
    let by_id = pair_predictions(golds, preds)?;
    let opts = report.options;
    let assignment: HashMap<&str, (Bucket, Bucket)> = profiles
        .iter()
        .filter_map(|p| {
            p.sim_bucket
                .zip(p.freq_bucket)
                .map(|b| (p.attribute.as_str(), b))
        })
        .collect();
    let mut cells: [Vec<&EvalExample>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    let mut unprofiled = 0usize;
    for g in golds {
        match assignment.get(g.attribute.as_str()) {
            Some((Bucket::Lo, Bucket::Lo)) => cells[0].push(g),
            Some((Bucket::Lo, Bucket::Hi)) => cells[1].push(g),
            Some((Bucket::Hi, Bucket::Lo)) => cells[2].push(g),
            Some((Bucket::Hi, Bucket::Hi)) => cells[3].push(g),
            None => unprofiled += 1,
        }
    }
    report.buckets = Some(BucketReport {
        thresholds,
        lo_sim_lo_freq: score_subset(&cells[0], &by_id, &opts).0,
        lo_sim_hi_freq: score_subset(&cells[1], &by_id, &opts).0,
        hi_sim_lo_freq: score_subset(&cells[2], &by_id, &opts).0,
        hi_sim_hi_freq: score_subset(&cells[3], &by_id, &opts).0,
        unprofiled_examples: unprofiled,
    });
    Ok(())
}

/// Difference of two score sets (`b - a`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ScoreDelta {
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

impl ScoreDelta {
    fn between(a: &Scores, b: &Scores) -> Self {
        Self {
            micro_precision: b.micro.precision - a.micro.precision,
            micro_recall: b.micro.recall - a.micro.recall,
            micro_f1: b.micro.f1 - a.micro.f1,
            macro_precision: b.macro_.precision - a.macro_.precision,
            macro_recall: b.macro_.recall - a.macro_.recall,
            macro_f1: b.macro_.f1 - a.macro_.f1,
        }
    }

    pub fn is_zero(&self) -> bool {
        [
            self.micro_precision,
            self.micro_recall,
            self.micro_f1,
            self.macro_precision,
            self.macro_recall,
            self.macro_f1,
        ]
        .iter()
        .all(|d| *d == 0.0)
    }
}

/// Per-category score deltas between a report evaluated with a base
/// knowledge base and one evaluated with a merged knowledge base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbComparison {
    pub overall: ScoreDelta,
    pub seen_attr_seen_value: Option<ScoreDelta>,
    pub seen_attr_unseen_value: Option<ScoreDelta>,
    pub unseen_attr: Option<ScoreDelta>,
}

/// Diffs two evaluation reports (`merged - base`), overall and per category
/// where both reports carry category breakdowns.
pub fn compare_kb(base: &EvalReport, merged: &EvalReport) -> KbComparison {
    let cat = |f: fn(&CategoryReport) -> &Scores| -> Option<ScoreDelta> {
        match (&base.categories, &merged.categories) {
            (Some(a), Some(b)) => Some(ScoreDelta::between(f(a), f(b))),
            _ => None,
        }
    };
    KbComparison {
        overall: ScoreDelta::between(&base.overall, &merged.overall),
        seen_attr_seen_value: cat(|c| &c.seen_attr_seen_value),
        seen_attr_unseen_value: cat(|c| &c.seen_attr_unseen_value),
        unseen_attr: cat(|c| &c.unseen_attr),
    }
}

/// Attributes whose value list differs between two knowledge bases.
pub fn changed_attributes(
    base: &crate::knowledge::KnowledgeBase,
    merged: &crate::knowledge::KnowledgeBase,
) -> std::collections::BTreeSet<String> {
    let mut changed = std::collections::BTreeSet::new();
    for attr in base.attributes().chain(merged.attributes()) {
        if base.values(attr) != merged.values(attr) {
            changed.insert(attr.to_string());
        }
    }
    changed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CleanTuple, CleanValue};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn gold(id: usize, attr: &str, value: Option<&str>) -> EvalExample {
        EvalExample {
            id,
            attribute: attr.to_string(),
            gold: value.map(toks),
        }
    }

    fn pred(id: usize, value: Option<&str>) -> Prediction {
        Prediction {
            id,
            value: value.map(toks),
        }
    }

    fn tup(title: &str, attr: &str, value: &str) -> CleanTuple {
        CleanTuple {
            title: title.to_string(),
            attribute: attr.to_string(),
            value: CleanValue::from(value.to_string()),
        }
    }

    #[test]
    fn exact_match_requires_full_sequence() {
        let golds = vec![gold(0, "color", Some("dark blue"))];
        let preds = vec![pred(0, Some("blue"))];
        let r = score(&golds, &preds, &ScoreOptions::default()).unwrap();
        assert_eq!(r.overall.micro.true_positives, 0);
        assert_eq!(r.overall.micro.precision, 0.0);
    }

    #[test]
    fn micro_worked_example() {
        // 2 non-NULL golds {red, blue}; predictions {red, NULL}.
        let golds = vec![gold(0, "color", Some("red")), gold(1, "color", Some("blue"))];
        let preds = vec![pred(0, Some("red")), pred(1, None)];
        let r = score(&golds, &preds, &ScoreOptions::default()).unwrap();
        assert_eq!(r.overall.micro.precision, 1.0);
        assert_eq!(r.overall.micro.recall, 0.5);
        assert!((r.overall.micro.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn strict_precision_charges_null_predictions_on_non_null_golds() {
        let golds = vec![gold(0, "color", Some("red")), gold(1, "color", Some("blue"))];
        let preds = vec![pred(0, Some("red")), pred(1, None)];
        let strict = ScoreOptions { strict_precision: true };
        let r = score(&golds, &preds, &strict).unwrap();
        assert_eq!(r.overall.micro.precision, 0.5);
        assert_eq!(r.overall.micro.recall, 0.5);
    }

    #[test]
    fn null_gold_null_prediction_enters_no_denominator() {
        let golds = vec![gold(0, "color", None)];
        let preds = vec![pred(0, None)];
        let r = score(&golds, &preds, &ScoreOptions::default()).unwrap();
        assert_eq!(r.overall.micro.predicted, 0);
        assert_eq!(r.overall.micro.gold, 0);
        assert_eq!(r.overall.micro.f1, 0.0);
    }

    #[test]
    fn macro_excludes_null_only_attributes() {
        let golds = vec![
            gold(0, "color", Some("red")),
            gold(1, "nullattr", None),
            gold(2, "nullattr", None),
        ];
        let preds = vec![pred(0, Some("red")), pred(1, None), pred(2, None)];
        let r = score(&golds, &preds, &ScoreOptions::default()).unwrap();
        assert_eq!(r.overall.macro_.attributes, 1);
        assert_eq!(r.overall.excluded_attributes, 1);
        assert_eq!(r.overall.macro_.f1, 1.0);
    }

    #[test]
    fn duplicate_or_missing_predictions_error() {
        let golds = vec![gold(0, "a", Some("x"))];
        assert!(score(&golds, &[], &ScoreOptions::default()).is_err());
        let dup = vec![pred(0, None), pred(0, None)];
        assert!(score(&golds, &dup, &ScoreOptions::default()).is_err());
    }

    #[test]
    fn score_is_order_invariant() {
        let golds = vec![
            gold(0, "a", Some("x")),
            gold(1, "a", Some("y")),
            gold(2, "b", None),
        ];
        let preds = vec![pred(2, Some("z")), pred(0, Some("x")), pred(1, None)];
        let preds_rev: Vec<Prediction> = preds.iter().rev().cloned().collect();
        let r1 = score(&golds, &preds, &ScoreOptions::default()).unwrap();
        let r2 = score(&golds, &preds_rev, &ScoreOptions::default()).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn micro_matches_summed_per_attribute_counts() {
        let golds = vec![
            gold(0, "a", Some("x")),
            gold(1, "a", Some("y")),
            gold(2, "b", Some("z")),
            gold(3, "b", None),
            gold(4, "c", None),
        ];
        let preds = vec![
            pred(0, Some("x")),
            pred(1, Some("z")),
            pred(2, None),
            pred(3, Some("w")),
            pred(4, None),
        ];
        let r = score(&golds, &preds, &ScoreOptions::default()).unwrap();
        let (mut tp, mut p, mut g) = (0, 0, 0);
        for prf in r.per_attribute.values() {
            tp += prf.true_positives;
            p += prf.predicted;
            g += prf.gold;
        }
        assert_eq!(tp, r.overall.micro.true_positives);
        assert_eq!(p, r.overall.micro.predicted);
        assert_eq!(g, r.overall.micro.gold);
        let rebuilt = Prf::from_counts(tp, p, g);
        assert_eq!(rebuilt.f1, r.overall.micro.f1);
    }

    #[test]
    fn categorize_covers_all_cases() {
        let train = vec![
            tup("t", "color", "red"),
            tup("t", "color", "NULL"),
            tup("t", "size", "xl"),
        ];
        let index = TrainIndex::build(&train);
        assert_eq!(
            categorize_example(&gold(0, "color", Some("red")), &index),
            Category::SeenAttrSeenValue
        );
        assert_eq!(
            categorize_example(&gold(1, "color", Some("green")), &index),
            Category::SeenAttrUnseenValue
        );
        assert_eq!(
            categorize_example(&gold(2, "material", Some("pu")), &index),
            Category::UnseenAttr
        );
        assert_eq!(
            categorize_example(&gold(3, "color", None), &index),
            Category::SeenAttrSeenValue
        );
    }

    #[test]
    fn categories_partition_the_test_set() {
        let train = vec![tup("t", "color", "red")];
        let index = TrainIndex::build(&train);
        let golds = vec![
            gold(0, "color", Some("red")),
            gold(1, "color", Some("green")),
            gold(2, "size", Some("xl")),
            gold(3, "color", None),
        ];
        let preds: Vec<Prediction> = golds.iter().map(|g| pred(g.id, None)).collect();
        let mut r = score(&golds, &preds, &ScoreOptions::default()).unwrap();
        add_categories(&mut r, &golds, &preds, &index).unwrap();
        let c = r.categories.unwrap();
        assert_eq!(
            c.seen_attr_seen_value.examples
                + c.seen_attr_unseen_value.examples
                + c.unseen_attr.examples,
            golds.len()
        );
        assert_eq!(c.null_gold_as_seen_value, 1);
    }

    #[test]
    fn compare_kb_of_identical_reports_is_zero() {
        let golds = vec![gold(0, "a", Some("x")), gold(1, "b", None)];
        let preds = vec![pred(0, Some("x")), pred(1, None)];
        let mut r = score(&golds, &preds, &ScoreOptions::default()).unwrap();
        let index = TrainIndex::build(&[tup("t", "a", "x")]);
        add_categories(&mut r, &golds, &preds, &index).unwrap();
        let delta = compare_kb(&r, &r);
        assert!(delta.overall.is_zero());
        assert!(delta.seen_attr_seen_value.unwrap().is_zero());
        assert!(delta.unseen_attr.unwrap().is_zero());
    }

    #[test]
    fn changed_attributes_detects_merges() {
        use crate::knowledge::KnowledgeBase;
        let kb = KnowledgeBase::build(&[tup("t", "color", "red")]);
        let merged = kb.merge(&[tup("d", "color", "blue"), tup("d", "size", "xl")]);
        let changed = changed_attributes(&kb, &merged);
        assert!(changed.contains("color"));
        assert!(changed.contains("size"));
        let unchanged = changed_attributes(&kb, &kb.merge(&[]));
        assert!(unchanged.is_empty());
    }

    #[test]
    fn to_eval_examples_keeps_unmatchable_values_as_gold() {
        let tuples = vec![
            tup("red shirt", "color", "Blue"),
            tup("red shirt", "color", "NULL"),
        ];
        let examples = to_eval_examples(&tuples);
        assert_eq!(examples[0].gold, Some(toks("blue")));
        assert_eq!(examples[1].gold, None);
    }
}
