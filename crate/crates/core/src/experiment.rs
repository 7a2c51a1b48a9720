//! End-to-end experiment orchestration: data preparation, per-trial
//! training and scoring, trial aggregation and the resumable filesystem
//! pipeline behind the `run` command.
//!
//! Everything here is also callable without touching the filesystem, so
//! tests drive the full pipeline in memory.

use crate::corpus::{self, CleanTuple, SplitDataset};
use crate::error::{Error, Result};
use crate::eval::{
    self, add_buckets, add_categories, AttributeProfile, BucketThresholds, EvalExample,
    EvalReport, HashedNgramEmbedder, Prediction, ScoreOptions, TrainIndex,
};
use crate::files;
use crate::knowledge::{DropoutConfig, KnowledgeBase};
use crate::manifest::Manifest;
use crate::model::{self, PointerModel, TrainConfig};
use crate::querybuild::{encode_for_eval, Budgets, Variant};
use crate::scalar::Scalar;
use crate::spanlabel::{convert_all, span_to_value, ConversionReport, LabeledExample};
use crate::tokenize::{tokenize, Vocabulary};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Full experiment configuration for `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub variant: Variant,
    pub dropout: DropoutConfig,
    pub budgets: Budgets,
    pub train: TrainConfig,
    /// Minimum token count for the vocabulary built from the train split.
    pub min_count: usize,
    pub stratified_split: bool,
    pub strict_precision: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 5,
            variant: Variant { vals: true, drop: true, mixing: true },
            dropout: DropoutConfig::default(),
            budgets: Budgets::default(),
            train: TrainConfig::default(),
            min_count: 1,
            stratified_split: false,
            strict_precision: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.variant.validate()?;
        self.train.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".to_string()));
        }
        Ok(())
    }

    /// Seed for one trial; trials vary the model seed, not the split.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }
}

/// Everything derived from a split that is shared across trials.
pub struct PreparedData {
    pub split: SplitDataset,
    pub vocab: Vocabulary,
    pub kb: KnowledgeBase,
    pub train_examples: Vec<LabeledExample>,
    pub conversion: ConversionReport,
    pub test_golds: Vec<EvalExample>,
    pub test_inputs: Vec<LabeledExample>,
    pub train_index: TrainIndex,
    pub profiles: Vec<AttributeProfile>,
    pub thresholds: Option<BucketThresholds>,
}

/// Tokenized inputs for prediction over arbitrary cleaned tuples; gold
/// positions are placeholders, prediction never reads them.
pub fn prediction_inputs(tuples: &[CleanTuple], max_title: usize) -> Vec<LabeledExample> {
    tuples
        .iter()
        .map(|t| {
            let mut title_tokens = tokenize(&t.title);
            title_tokens.truncate(max_title);
            LabeledExample {
                title_tokens,
                attribute_tokens: tokenize(&t.attribute),
                gold_begin: 0,
                gold_end: 0,
                is_null: true,
            }
        })
        .collect()
}

/// Builds vocabulary, knowledge base, labels and analysis profiles from a
/// split.
pub fn prepare(split: SplitDataset, min_count: usize, budgets: &Budgets) -> PreparedData {
    let mut streams: Vec<Vec<String>> = Vec::with_capacity(split.train.len() * 3);
    for t in &split.train {
        streams.push(tokenize(&t.title));
        streams.push(tokenize(&t.attribute));
        if let Some(v) = t.value.as_text() {
            streams.push(tokenize(v));
        }
    }
    let vocab = Vocabulary::build(streams.iter().map(Vec::as_slice), min_count);

    let kb = KnowledgeBase::build(&split.train);
    let (train_examples, conversion) = convert_all(&split.train, budgets.max_title);
    let test_golds = eval::to_eval_examples(&split.test);
    let test_inputs = prediction_inputs(&split.test, budgets.max_title);
    let train_index = TrainIndex::build(&split.train);

    let embedder = HashedNgramEmbedder::default();
    let mut profiles = eval::build_profiles::<f64>(&split.train, &kb, &embedder);
    let thresholds = if profiles.is_empty() {
        None
    } else {
        Some(eval::bucketize(&mut profiles))
    };

    PreparedData {
        split,
        vocab,
        kb,
        train_examples,
        conversion,
        test_golds,
        test_inputs,
        train_index,
        profiles,
        thresholds,
    }
}

/// Predicts every test input with a trained model under the variant's
/// evaluation encoding.
pub fn predict_with_model<F: Scalar>(
    model: &PointerModel<F>,
    test_inputs: &[LabeledExample],
    kb: &KnowledgeBase,
    variant: &Variant,
    budgets: &Budgets,
    vocab: &Vocabulary,
) -> Vec<Prediction> {
    test_inputs
        .iter()
        .enumerate()
        .map(|(id, example)| {
            let encoded = encode_for_eval(example, kb, variant, budgets, vocab);
            let span = model.predict_span(&encoded);
            Prediction {
                id,
                value: span_to_value(example, span),
            }
        })
        .collect()
}

/// Predicts every test input with the dictionary baseline.
pub fn predict_with_dictionary(
    test_inputs: &[LabeledExample],
    kb: &KnowledgeBase,
) -> Vec<Prediction> {
    test_inputs
        .iter()
        .enumerate()
        .map(|(id, example)| Prediction {
            id,
            value: crate::baseline::dictionary_extract(
                &example.title_tokens,
                &example.attribute_tokens.join(" "),
                kb,
            ),
        })
        .collect()
}

/// Scores predictions and attaches the category and bucket breakdowns.
pub fn build_report(
    data: &PreparedData,
    preds: &[Prediction],
    strict_precision: bool,
) -> Result<EvalReport> {
    let opts = ScoreOptions { strict_precision };
    let mut report = eval::score(&data.test_golds, preds, &opts)?;
    add_categories(&mut report, &data.test_golds, preds, &data.train_index)?;
    if let Some(thresholds) = data.thresholds {
        add_buckets(&mut report, &data.test_golds, preds, &data.profiles, thresholds)?;
    }
    Ok(report)
}

/// Output of one training trial.
pub struct TrialResult {
    pub trial: usize,
    pub trial_seed: u64,
    pub loss_trace: Vec<f64>,
    pub report: EvalReport,
}

/// Trains the configured variant once and scores it on the test split.
pub fn run_trial(data: &PreparedData, cfg: &ExperimentConfig, trial: usize) -> Result<TrialResult> {
    cfg.validate()?;
    let trial_seed = cfg.trial_seed(trial);
    let train_cfg = TrainConfig { seed: trial_seed, ..cfg.train };
    let mut model = PointerModel::<f64>::new(
        data.vocab.len(),
        train_cfg.dim,
        train_cfg.learning_rate,
        trial_seed,
    );
    let loss_trace = model::train(
        &mut model,
        &data.train_examples,
        &data.kb,
        &cfg.variant,
        &cfg.dropout,
        &cfg.budgets,
        &data.vocab,
        &train_cfg,
    )?;
    let preds = predict_with_model(
        &model,
        &data.test_inputs,
        &data.kb,
        &cfg.variant,
        &cfg.budgets,
        &data.vocab,
    );
    let report = build_report(data, &preds, cfg.strict_precision)?;
    Ok(TrialResult { trial, trial_seed, loss_trace, report })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd::default();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

/// Aggregated overall scores across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: String,
    pub trials: usize,
    pub micro_precision: MeanStd,
    pub micro_recall: MeanStd,
    pub micro_f1: MeanStd,
    pub macro_precision: MeanStd,
    pub macro_recall: MeanStd,
    pub macro_f1: MeanStd,
}

pub fn summarize(variant: &Variant, reports: &[&EvalReport]) -> RunSummary {
    let pick = |f: fn(&EvalReport) -> f64| -> MeanStd {
        mean_std(&reports.iter().map(|r| f(r)).collect::<Vec<f64>>())
    };
    RunSummary {
        variant: variant.label(),
        trials: reports.len(),
        micro_precision: pick(|r| r.overall.micro.precision),
        micro_recall: pick(|r| r.overall.micro.recall),
        micro_f1: pick(|r| r.overall.micro.f1),
        macro_precision: pick(|r| r.overall.macro_.precision),
        macro_recall: pick(|r| r.overall.macro_.recall),
        macro_f1: pick(|r| r.overall.macro_.f1),
    }
}

/// Renders the summary as an aligned text table (percentages).
pub fn render_summary_text(summary: &RunSummary) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "variant: {} ({} trials)", summary.variant, summary.trials);
    let _ = writeln!(out, "{:<18} {:>10} {:>10}", "metric", "mean", "std");
    for (name, m) in [
        ("macro precision", summary.macro_precision),
        ("macro recall", summary.macro_recall),
        ("macro f1", summary.macro_f1),
        ("micro precision", summary.micro_precision),
        ("micro recall", summary.micro_recall),
        ("micro f1", summary.micro_f1),
    ] {
        let _ = writeln!(
            out,
            "{name:<18} {:>10.2} {:>10.2}",
            m.mean * 100.0,
            m.std * 100.0
        );
    }
    out
}

fn stage_is_fresh(outputs: &[PathBuf], manifest: &Manifest) -> bool {
    if !outputs.iter().all(|p| p.exists()) {
        return false;
    }
    let Some(first) = outputs.first() else {
        return false;
    };
    let mut name = first
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(".manifest.json");
    let manifest_path = first.with_file_name(name);
    match files::read_json::<Manifest>(&manifest_path) {
        Ok(existing) => existing.digest() == manifest.digest(),
        Err(_) => false,
    }
}

/// Filesystem pipeline behind `run`: clean, split, prepare, train each
/// trial, score and aggregate. Every stage writes a manifest next to its
/// outputs and is skipped on rerun when its manifest still matches, which
/// makes interrupted runs resumable at stage granularity.
pub fn run_experiment(
    raw: &Path,
    format: corpus::RawFormat,
    work_dir: &Path,
    cfg: &ExperimentConfig,
) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(work_dir)?;

    // Stage: clean.
    let clean_path = work_dir.join("clean.jsonl");
    let stats_path = work_dir.join("clean_stats.json");
    let clean_manifest = Manifest::new("clean", serde_json::json!({}))
        .with_input(raw)?;
    let tuples: Vec<CleanTuple> =
        if stage_is_fresh(&[clean_path.clone(), stats_path.clone()], &clean_manifest) {
            files::read_jsonl(&clean_path)?
        } else {
            let raws = corpus::read_raw_tuples(raw, format)?;
            let cleaned = corpus::clean_corpus(&raws);
            files::write_jsonl(&clean_path, &cleaned.tuples)?;
            files::write_json_pretty(&stats_path, &cleaned.stats)?;
            clean_manifest.write_for(&clean_path)?;
            cleaned.tuples
        };

    // Stage: split.
    let split_dir = work_dir.join("split");
    std::fs::create_dir_all(&split_dir)?;
    let split_paths = [
        split_dir.join("train.jsonl"),
        split_dir.join("dev.jsonl"),
        split_dir.join("test.jsonl"),
    ];
    let split_manifest = Manifest::new(
        "split",
        serde_json::json!({"seed": cfg.seed, "stratified": cfg.stratified_split}),
    )
    .with_input(&clean_path)?;
    let split = if stage_is_fresh(&split_paths.to_vec(), &split_manifest) {
        SplitDataset {
            train: files::read_jsonl(&split_paths[0])?,
            dev: files::read_jsonl(&split_paths[1])?,
            test: files::read_jsonl(&split_paths[2])?,
            seed: cfg.seed,
            stratified: cfg.stratified_split,
        }
    } else {
        let s = corpus::split(&tuples, cfg.seed, cfg.stratified_split)?;
        files::write_jsonl(&split_paths[0], &s.train)?;
        files::write_jsonl(&split_paths[1], &s.dev)?;
        files::write_jsonl(&split_paths[2], &s.test)?;
        files::write_json_pretty(
            &split_dir.join("split_counts.json"),
            &serde_json::json!({
                "seed": s.seed,
                "stratified": s.stratified,
                "train": s.train.len(),
                "dev": s.dev.len(),
                "test": s.test.len(),
            }),
        )?;
        split_manifest.write_for(&split_paths[0])?;
        s
    };

    // Shared preparation (always in memory; cheap relative to training).
    let data = prepare(split, cfg.min_count, &cfg.budgets);
    data.kb.save(&work_dir.join("kb.jsonl"))?;
    data.vocab.save(&work_dir.join("vocab.tsv"))?;
    files::write_jsonl(&work_dir.join("labeled_train.jsonl"), &data.train_examples)?;
    files::write_json_pretty(&work_dir.join("drop_report.json"), &data.conversion)?;

    // Trials.
    let mut reports = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let trial_dir = work_dir.join(format!("trial_{trial:02}"));
        std::fs::create_dir_all(&trial_dir)?;
        let report_path = trial_dir.join("report.json");
        let trial_manifest = Manifest::new(
            "trial",
            serde_json::json!({
                "config": cfg,
                "trial": trial,
                "trial_seed": cfg.trial_seed(trial),
            }),
        )
        .with_input(&clean_path)?;
        if stage_is_fresh(&[report_path.clone()], &trial_manifest) {
            reports.push(files::read_json::<EvalReport>(&report_path)?);
            continue;
        }
        let result = run_trial(&data, cfg, trial)?;
        files::write_json_pretty(&trial_dir.join("loss_trace.json"), &result.loss_trace)?;
        files::write_json_pretty(&report_path, &result.report)?;
        files::write_string(
            &trial_dir.join("report.txt"),
            &eval::render_report_text(&result.report),
        )?;
        if let Some(csv) = eval::render_buckets_csv(&result.report) {
            files::write_string(&trial_dir.join("buckets.csv"), &csv)?;
        }
        trial_manifest.write_for(&report_path)?;
        reports.push(result.report);
    }

    let refs: Vec<&EvalReport> = reports.iter().collect();
    let summary = summarize(&cfg.variant, &refs);
    files::write_json_pretty(&work_dir.join("summary.json"), &summary)?;
    files::write_string(&work_dir.join("summary.txt"), &render_summary_text(&summary))?;
    Ok(summary)
}

/// Convenience wrapper for tests and the acceptance suite: run several
/// variants over the same prepared data.
pub fn run_variants(
    data: &PreparedData,
    base: &ExperimentConfig,
    variants: &[Variant],
) -> Result<Vec<(Variant, Vec<TrialResult>)>> {
    let mut out = Vec::with_capacity(variants.len());
    for &variant in variants {
        let cfg = ExperimentConfig { variant, ..base.clone() };
        let mut trials = Vec::with_capacity(cfg.trials);
        for t in 0..cfg.trials {
            trials.push(run_trial(data, &cfg, t)?);
        }
        out.push((variant, trials));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{self, SynthSpec};

    fn prepared(seed: u64) -> PreparedData {
        let spec = SynthSpec {
            seed,
            attributes: 12,
            values_per_attribute: 5,
            tuples: 600,
            ..Default::default()
        };
        let raws = synth::generate(&spec).unwrap();
        let cleaned = corpus::clean_corpus(&raws);
        let split = corpus::split(&cleaned.tuples, seed, false).unwrap();
        prepare(split, 1, &Budgets::default())
    }

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            seed: 5,
            trials: 1,
            train: TrainConfig {
                learning_rate: 0.1,
                epochs: 2,
                batch_size: 16,
                seed: 5,
                dim: 16,
            },
            ..Default::default()
        }
    }

    #[test]
    fn trial_is_deterministic() {
        let data = prepared(1);
        let cfg = tiny_config();
        let a = run_trial(&data, &cfg, 0).unwrap();
        let b = run_trial(&data, &cfg, 0).unwrap();
        assert_eq!(a.loss_trace, b.loss_trace);
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn dictionary_predictions_cover_every_example() {
        let data = prepared(2);
        let preds = predict_with_dictionary(&data.test_inputs, &data.kb);
        assert_eq!(preds.len(), data.test_golds.len());
        let report = build_report(&data, &preds, false).unwrap();
        assert!(report.overall.micro.f1 > 0.0);
        assert!(report.categories.is_some());
        assert!(report.buckets.is_some());
    }

    #[test]
    fn mean_std_matches_hand_computation() {
        let m = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.std - (1.25f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn config_validation_rejects_bad_variants() {
        let cfg = ExperimentConfig {
            variant: Variant { vals: false, drop: true, mixing: false },
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { trials: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
