//! Subcommand definitions and dispatch.

use avex_core::corpus::{self, RawFormat};
use avex_core::error::Error;
use avex_core::eval::{self, ScoreOptions};
use avex_core::experiment::{self, ExperimentConfig};
use avex_core::files;
use avex_core::knowledge::{DropoutConfig, KbSource, KnowledgeBase};
use avex_core::manifest::Manifest;
use avex_core::model::TrainConfig;
use avex_core::querybuild::{Budgets, Variant};
use avex_core::spanlabel::convert_all;
use avex_core::synth::{SynthSpec, TitleLenRange};
use avex_core::tokenize::Vocabulary;
use avex_core::{PointerModel64, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        Error::Diverged(_) => 3,
        _ => 2,
    }
}

#[derive(Parser)]
#[command(name = "avex", version, about = "Attribute value extraction experiments")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Auto,
    Tsv,
    Jsonl,
}

impl FormatArg {
    fn resolve(self, path: &Path) -> RawFormat {
        match self {
            FormatArg::Auto => RawFormat::from_path(path),
            FormatArg::Tsv => RawFormat::Tsv,
            FormatArg::Jsonl => RawFormat::Jsonl,
        }
    }
}

#[derive(Args, Clone)]
struct VariantArgs {
    /// Expand queries with the attribute's seen values.
    #[arg(long)]
    vals: bool,
    /// Apply knowledge dropout in training (requires --vals).
    #[arg(long)]
    drop: bool,
    /// Knowledge token mixing: pair [SEEN]/[UNSEEN] inputs (requires --vals).
    #[arg(long)]
    mixing: bool,
    /// Knowledge dropout rate r; a value with count n drops with r^n.
    #[arg(long, default_value_t = 0.2)]
    rate: f64,
}

impl VariantArgs {
    fn variant(&self) -> Variant {
        Variant {
            vals: self.vals,
            drop: self.drop,
            mixing: self.mixing,
        }
    }
}

#[derive(Args, Clone)]
struct BudgetArgs {
    /// Maximum title length in tokens.
    #[arg(long, default_value_t = 64)]
    max_title: usize,
    /// Query budget without value expansion.
    #[arg(long, default_value_t = 32)]
    plain_budget: usize,
    /// Query budget with value expansion.
    #[arg(long, default_value_t = 192)]
    vals_budget: usize,
}

impl BudgetArgs {
    fn budgets(&self) -> Budgets {
        Budgets {
            max_title: self.max_title,
            plain_query: self.plain_budget,
            vals_query: self.vals_budget,
        }
    }
}

#[derive(Args, Clone)]
struct TrainArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Learning rate for the adaptive gradient updates.
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    /// Embedding dimension.
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Minimum token count for the training vocabulary.
    #[arg(long, default_value_t = 1)]
    min_count: usize,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            dim: self.dim,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Clean a raw corpus: decode entities, normalize whitespace and
    /// attributes, drop exact duplicates.
    Clean {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
        format: FormatArg,
        /// Where to write corpus statistics (default: <output>.stats.json).
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Split a cleaned corpus 7:1:2 into train/dev/test.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Split each attribute's tuples 7:1:2 instead of the whole corpus.
        #[arg(long)]
        stratified: bool,
    },
    /// Build the attribute-to-values knowledge base from a cleaned split.
    BuildKb {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Additional cleaned tuples (e.g. the dev split) to merge in.
        #[arg(long)]
        extra: Option<PathBuf>,
    },
    /// Convert cleaned tuples into begin/end position labels.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 64)]
        max_title: usize,
        /// Where to write the drop report (default: <output>.report.json).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train the pointer model on a cleaned train split.
    Train {
        /// Cleaned train split (JSONL tuples).
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        kb: PathBuf,
        /// Output directory for params.bin, vocab.tsv and loss_trace.json.
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        variant: VariantArgs,
        #[command(flatten)]
        budgets: BudgetArgs,
        #[command(flatten)]
        train_args: TrainArgs,
        /// Dump the first N encoded training inputs with role annotations.
        #[arg(long)]
        dump_inputs: Option<usize>,
    },
    /// Predict values for a cleaned test split.
    Predict {
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        kb: PathBuf,
        /// Model directory from `train` (ignored with --dictionary).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Use the dictionary baseline instead of a trained model.
        #[arg(long)]
        dictionary: bool,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score predictions against a cleaned test split.
    Evaluate {
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Cleaned train split; enables the value-type category breakdown.
        #[arg(long)]
        train: Option<PathBuf>,
        /// Knowledge base; with --train, enables the bucket breakdown.
        #[arg(long)]
        kb: Option<PathBuf>,
        /// Charge NULL predictions on non-NULL golds to precision.
        #[arg(long)]
        strict: bool,
        /// Also write an aligned text table here.
        #[arg(long)]
        text: Option<PathBuf>,
        /// Also write the bucket breakdown as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Attribute profiles (frequency, ambiguity, buckets) or report deltas.
    Analyze {
        /// Cleaned train split for profile building.
        #[arg(long, required_unless_present = "compare", conflicts_with = "compare")]
        train: Option<PathBuf>,
        #[arg(long, required_unless_present = "compare", conflicts_with = "compare")]
        kb: Option<PathBuf>,
        /// Two report.json files: compare the second against the first.
        #[arg(long, num_args = 2, value_names = ["BASE", "MERGED"])]
        compare: Option<Vec<PathBuf>>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate a synthetic raw corpus.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        attributes: usize,
        #[arg(long, default_value_t = 20)]
        values_per_attribute: usize,
        #[arg(long, default_value_t = 20000)]
        tuples: usize,
        #[arg(long, default_value_t = 8)]
        title_min: usize,
        #[arg(long, default_value_t = 20)]
        title_max: usize,
        /// Power-law exponent over attribute ranks.
        #[arg(long, default_value_t = 1.1)]
        skew: f64,
        #[arg(long, default_value_t = 0.4)]
        ambiguous_fraction: f64,
        #[arg(long, default_value_t = 0.15)]
        null_fraction: f64,
    },
    /// Full pipeline: clean, split, prepare, train trials, score, summarize.
    Run {
        #[arg(long)]
        raw: PathBuf,
        /// Work directory (or set AVEX_WORK_DIR).
        #[arg(long, env = "AVEX_WORK_DIR")]
        work_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
        format: FormatArg,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long)]
        stratified: bool,
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        variant: VariantArgs,
        #[command(flatten)]
        budgets: BudgetArgs,
        #[command(flatten)]
        train_args: TrainArgs,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Clean { input, output, format, stats } => {
            let format = format.resolve(&input);
            let raws = corpus::read_raw_tuples(&input, format)?;
            let cleaned = corpus::clean_corpus(&raws);
            files::write_jsonl(&output, &cleaned.tuples)?;
            let stats_path =
                stats.unwrap_or_else(|| output.with_extension("stats.json"));
            files::write_json_pretty(&stats_path, &cleaned.stats)?;
            Manifest::new("clean", serde_json::json!({}))
                .with_input(&input)?
                .write_for(&output)?;
            println!(
                "cleaned {} tuples ({} duplicates removed, {} changed, {} dropped); \
                 {} attributes, {} values",
                cleaned.stats.tuples,
                cleaned.stats.duplicates_removed,
                cleaned.stats.tuples_changed,
                cleaned.stats.dropped_empty_field,
                cleaned.stats.unique_attributes,
                cleaned.stats.unique_values,
            );
            Ok(())
        }
        Command::Split { input, out_dir, seed, stratified } => {
            let tuples: Vec<corpus::CleanTuple> = files::read_jsonl(&input)?;
            let split = corpus::split(&tuples, seed, stratified)?;
            std::fs::create_dir_all(&out_dir)?;
            let train = out_dir.join("train.jsonl");
            files::write_jsonl(&train, &split.train)?;
            files::write_jsonl(&out_dir.join("dev.jsonl"), &split.dev)?;
            files::write_jsonl(&out_dir.join("test.jsonl"), &split.test)?;
            files::write_json_pretty(
                &out_dir.join("split_counts.json"),
                &serde_json::json!({
                    "seed": seed,
                    "stratified": stratified,
                    "train": split.train.len(),
                    "dev": split.dev.len(),
                    "test": split.test.len(),
                }),
            )?;
            Manifest::new("split", serde_json::json!({"seed": seed, "stratified": stratified}))
                .with_input(&input)?
                .write_for(&train)?;
            println!(
                "split {} tuples into {}/{}/{}",
                tuples.len(),
                split.train.len(),
                split.dev.len(),
                split.test.len()
            );
            Ok(())
        }
        Command::BuildKb { train, output, extra } => {
            let tuples: Vec<corpus::CleanTuple> = files::read_jsonl(&train)?;
            let mut kb = KnowledgeBase::build(&tuples);
            let mut manifest = Manifest::new(
                "build-kb",
                serde_json::json!({"merged_extra": extra.is_some()}),
            )
            .with_input(&train)?;
            if let Some(extra_path) = &extra {
                let extra_tuples: Vec<corpus::CleanTuple> = files::read_jsonl(extra_path)?;
                kb = kb.merge(&extra_tuples);
                manifest = manifest.with_input(extra_path)?;
            }
            kb.save(&output)?;
            manifest.write_for(&output)?;
            println!(
                "knowledge base: {} attributes, {} attribute-value pairs",
                kb.attribute_count(),
                kb.pair_count()
            );
            Ok(())
        }
        Command::Convert { input, output, max_title, report } => {
            let tuples: Vec<corpus::CleanTuple> = files::read_jsonl(&input)?;
            let (examples, conv) = convert_all(&tuples, max_title);
            files::write_jsonl(&output, &examples)?;
            let report_path =
                report.unwrap_or_else(|| output.with_extension("report.json"));
            files::write_json_pretty(&report_path, &conv)?;
            Manifest::new("convert", serde_json::json!({"max_title": max_title}))
                .with_input(&input)?
                .write_for(&output)?;
            println!(
                "labeled {} of {} tuples ({} dropped: {} no match, {} beyond truncation, {} empty)",
                conv.emitted,
                conv.input,
                conv.dropped(),
                conv.dropped_no_match,
                conv.dropped_beyond_truncation,
                conv.dropped_empty_value,
            );
            Ok(())
        }
        Command::Train { train, kb, out_dir, variant, budgets, train_args, dump_inputs } => {
            cmd_train(&train, &kb, &out_dir, &variant, &budgets, &train_args, dump_inputs)
        }
        Command::Predict { test, kb, model, dictionary, output } => {
            cmd_predict(&test, &kb, model.as_deref(), dictionary, &output)
        }
        Command::Evaluate { test, predictions, output, train, kb, strict, text, csv } => {
            cmd_evaluate(
                &test,
                &predictions,
                &output,
                train.as_deref(),
                kb.as_deref(),
                strict,
                text.as_deref(),
                csv.as_deref(),
            )
        }
        Command::Analyze { train, kb, compare, output } => {
            cmd_analyze(train.as_deref(), kb.as_deref(), compare.as_deref(), &output)
        }
        Command::Synth {
            output,
            seed,
            attributes,
            values_per_attribute,
            tuples,
            title_min,
            title_max,
            skew,
            ambiguous_fraction,
            null_fraction,
        } => {
            let spec = SynthSpec {
                seed,
                attributes,
                values_per_attribute,
                tuples,
                title_len: TitleLenRange { min: title_min, max: title_max },
                skew,
                ambiguous_fraction,
                null_fraction,
            };
            let generated = avex_core::synth::generate(&spec)?;
            let mut out = String::with_capacity(generated.len() * 48);
            for t in &generated {
                out.push_str(&format!("{}\t{}\t{}\n", t.title, t.attribute, t.value));
            }
            files::write_string(&output, &out)?;
            Manifest::new("synth", serde_json::to_value(&spec)?).write_for(&output)?;
            println!("generated {} tuples to {}", generated.len(), output.display());
            Ok(())
        }
        Command::Run {
            raw,
            work_dir,
            format,
            trials,
            stratified,
            strict,
            variant,
            budgets,
            train_args,
        } => {
            let cfg = ExperimentConfig {
                seed: train_args.seed,
                trials,
                variant: variant.variant(),
                dropout: DropoutConfig::new(variant.rate)?,
                budgets: budgets.budgets(),
                train: train_args.config(),
                min_count: train_args.min_count,
                stratified_split: stratified,
                strict_precision: strict,
            };
            let format = format.resolve(&raw);
            let summary = experiment::run_experiment(&raw, format, &work_dir, &cfg)?;
            print!("{}", experiment::render_summary_text(&summary));
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    train: &Path,
    kb_path: &Path,
    out_dir: &Path,
    variant_args: &VariantArgs,
    budget_args: &BudgetArgs,
    train_args: &TrainArgs,
    dump_inputs: Option<usize>,
) -> Result<()> {
    let variant = variant_args.variant();
    variant.validate()?;
    let dropout = DropoutConfig::new(variant_args.rate)?;
    let budgets = budget_args.budgets();
    let config = train_args.config();
    config.validate()?;

    let tuples: Vec<corpus::CleanTuple> = files::read_jsonl(train)?;
    let kb = KnowledgeBase::load(kb_path, KbSource::Train)?;

    let mut streams: Vec<Vec<String>> = Vec::with_capacity(tuples.len() * 3);
    for t in &tuples {
        streams.push(avex_core::tokenize::tokenize(&t.title));
        streams.push(avex_core::tokenize::tokenize(&t.attribute));
        if let Some(v) = t.value.as_text() {
            streams.push(avex_core::tokenize::tokenize(v));
        }
    }
    let vocab = Vocabulary::build(streams.iter().map(Vec::as_slice), train_args.min_count);
    let (examples, conv) = convert_all(&tuples, budgets.max_title);

    std::fs::create_dir_all(out_dir)?;
    if let Some(limit) = dump_inputs {
        let mut rng = avex_core::rng::SplitMix64::new(config.seed);
        let batch = avex_core::querybuild::make_mixed_batch(
            &examples[..examples.len().min(limit)],
            &kb,
            &variant,
            &dropout,
            &budgets,
            &vocab,
            &mut rng,
        );
        let dump: String = batch
            .iter()
            .map(|i| i.render(&vocab))
            .collect::<Vec<_>>()
            .join("\n");
        files::write_string(&out_dir.join("input_dump.txt"), &dump)?;
    }

    let mut model =
        PointerModel64::new(vocab.len(), config.dim, config.learning_rate, config.seed);
    let trace = avex_core::model::train(
        &mut model, &examples, &kb, &variant, &dropout, &budgets, &vocab, &config,
    )?;

    let params_path = out_dir.join("params.bin");
    vocab.save(&out_dir.join("vocab.tsv"))?;
    model.save(&params_path, &vocab.content_hash(), &variant, &budgets)?;
    files::write_json_pretty(&out_dir.join("loss_trace.json"), &trace)?;
    files::write_json_pretty(&out_dir.join("convert_report.json"), &conv)?;
    Manifest::new(
        "train",
        serde_json::json!({
            "variant": variant,
            "rate": variant_args.rate,
            "budgets": budgets,
            "train": config,
            "min_count": train_args.min_count,
        }),
    )
    .with_input(train)?
    .with_input(kb_path)?
    .write_for(&params_path)?;
    println!(
        "trained {} for {} epochs; final loss {:.4}",
        variant.label(),
        config.epochs,
        trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_predict(
    test: &Path,
    kb_path: &Path,
    model_dir: Option<&Path>,
    dictionary: bool,
    output: &Path,
) -> Result<()> {
    let tuples: Vec<corpus::CleanTuple> = files::read_jsonl(test)?;
    let kb = KnowledgeBase::load(kb_path, KbSource::Train)?;

    let mut manifest = Manifest::new(
        "predict",
        serde_json::json!({"dictionary": dictionary}),
    )
    .with_input(test)?
    .with_input(kb_path)?;

    let preds = if dictionary {
        let inputs = experiment::prediction_inputs(&tuples, usize::MAX);
        experiment::predict_with_dictionary(&inputs, &kb)
    } else {
        let dir = model_dir.ok_or_else(|| {
            Error::Config("predict needs --model DIR or --dictionary".to_string())
        })?;
        let vocab = Vocabulary::load(&dir.join("vocab.tsv"))?;
        let (model, variant, budgets) =
            PointerModel64::load(&dir.join("params.bin"), &vocab.content_hash(), 0.0)?;
        manifest = manifest.with_input(&dir.join("params.bin"))?;
        let inputs = experiment::prediction_inputs(&tuples, budgets.max_title);
        experiment::predict_with_model(&model, &inputs, &kb, &variant, &budgets, &vocab)
    };
    files::write_jsonl(output, &preds)?;
    manifest.write_for(output)?;
    let non_null = preds.iter().filter(|p| p.value.is_some()).count();
    println!("{} predictions ({} non-NULL)", preds.len(), non_null);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    test: &Path,
    predictions: &Path,
    output: &Path,
    train: Option<&Path>,
    kb_path: Option<&Path>,
    strict: bool,
    text: Option<&Path>,
    csv: Option<&Path>,
) -> Result<()> {
    let test_tuples: Vec<corpus::CleanTuple> = files::read_jsonl(test)?;
    let golds = eval::to_eval_examples(&test_tuples);
    let preds: Vec<eval::Prediction> = files::read_jsonl(predictions)?;
    let opts = ScoreOptions { strict_precision: strict };
    let mut report = eval::score(&golds, &preds, &opts)?;

    let train_tuples: Option<Vec<corpus::CleanTuple>> = match train {
        Some(path) => Some(files::read_jsonl(path)?),
        None => None,
    };
    if let Some(train_tuples) = &train_tuples {
        let index = eval::TrainIndex::build(train_tuples);
        eval::add_categories(&mut report, &golds, &preds, &index)?;
        if let Some(kb_path) = kb_path {
            let kb = KnowledgeBase::load(kb_path, KbSource::Train)?;
            let embedder = eval::HashedNgramEmbedder::default();
            let mut profiles = eval::build_profiles::<f64>(train_tuples, &kb, &embedder);
            if !profiles.is_empty() {
                let thresholds = eval::bucketize(&mut profiles);
                eval::add_buckets(&mut report, &golds, &preds, &profiles, thresholds)?;
            }
        }
    }

    files::write_json_pretty(output, &report)?;
    let rendered = eval::render_report_text(&report);
    if let Some(path) = text {
        files::write_string(path, &rendered)?;
    }
    if let Some(path) = csv {
        match eval::render_buckets_csv(&report) {
            Some(content) => files::write_string(path, &content)?,
            None => {
                return Err(Error::Config(
                    "--csv needs the bucket breakdown; pass --train and --kb".to_string(),
                ))
            }
        }
    }
    let mut manifest = Manifest::new("evaluate", serde_json::json!({"strict": strict}))
        .with_input(test)?
        .with_input(predictions)?;
    if let Some(path) = train {
        manifest = manifest.with_input(path)?;
    }
    manifest.write_for(output)?;
    print!("{rendered}");
    Ok(())
}

fn cmd_analyze(
    train: Option<&Path>,
    kb_path: Option<&Path>,
    compare: Option<&[PathBuf]>,
    output: &Path,
) -> Result<()> {
    if let Some(pair) = compare {
        let base: eval::EvalReport = files::read_json(&pair[0])?;
        let merged: eval::EvalReport = files::read_json(&pair[1])?;
        let delta = eval::compare_kb(&base, &merged);
        files::write_json_pretty(output, &delta)?;
        Manifest::new("analyze", serde_json::json!({"mode": "compare"}))
            .with_input(&pair[0])?
            .with_input(&pair[1])?
            .write_for(output)?;
        println!(
            "overall micro F1 delta {:+.4}, macro F1 delta {:+.4}",
            delta.overall.micro_f1, delta.overall.macro_f1
        );
        return Ok(());
    }

    let (train, kb_path) = (train.expect("clap enforces"), kb_path.expect("clap enforces"));
    let tuples: Vec<corpus::CleanTuple> = files::read_jsonl(train)?;
    let kb = KnowledgeBase::load(kb_path, KbSource::Train)?;
    let embedder = eval::HashedNgramEmbedder::default();
    let mut profiles = eval::build_profiles::<f64>(&tuples, &kb, &embedder);
    if profiles.is_empty() {
        return Err(Error::Data("no attributes with values to analyze".to_string()));
    }
    let thresholds = eval::bucketize(&mut profiles);
    let mut csv = String::from("attribute,train_count,ambiguity,freq_bucket,sim_bucket\n");
    for p in &profiles {
        csv.push_str(&format!(
            "{},{},{},{:?},{:?}\n",
            p.attribute,
            p.train_count,
            p.ambiguity,
            p.freq_bucket.unwrap(),
            p.sim_bucket.unwrap()
        ));
    }
    files::write_string(output, &csv)?;
    files::write_json_pretty(
        &output.with_extension("json"),
        &serde_json::json!({"thresholds": thresholds, "profiles": profiles}),
    )?;
    Manifest::new("analyze", serde_json::json!({"mode": "profiles"}))
        .with_input(train)?
        .with_input(kb_path)?
        .write_for(output)?;
    println!(
        "{} profiles; frequency median {}, similarity median {:.4}",
        profiles.len(),
        thresholds.frequency_median,
        thresholds.similarity_median
    );
    Ok(())
}
