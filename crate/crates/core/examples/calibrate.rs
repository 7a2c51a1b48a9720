//! Scratch driver for tuning the desk-scale experiment: runs three model
//! variants over several seeds on the standard synthetic corpus and prints
//! the stratified scores the acceptance checks look at.

use avex_core::corpus;
use avex_core::eval::Bucket;
use avex_core::experiment::{self, ExperimentConfig};
use avex_core::knowledge::DropoutConfig;
use avex_core::model::TrainConfig;
use avex_core::querybuild::{Budgets, Variant};
use avex_core::synth::{self, SynthSpec};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let spec = SynthSpec {
        seed: std::env::var("CORPUS").ok().and_then(|e| e.parse().ok()).unwrap_or(11),
        attributes: 200,
        values_per_attribute: 20,
        tuples: 24_000,
        skew: std::env::var("SKEW").ok().and_then(|e| e.parse().ok()).unwrap_or(1.1),
        ambiguous_fraction: 0.4,
        null_fraction: 0.15,
        ..Default::default()
    };
    let raws = synth::generate(&spec).unwrap();
    let cleaned = corpus::clean_corpus(&raws);
    println!("tuples {} attrs {}", cleaned.stats.tuples, cleaned.stats.unique_attributes);
    let split = corpus::split(&cleaned.tuples, spec.seed, false).unwrap();
    let budgets = Budgets::default();
    let data = experiment::prepare(split, std::env::var("MINCOUNT").ok().and_then(|e| e.parse().ok()).unwrap_or(3), &budgets);
    println!(
        "prepared: vocab {} kb attrs {} train examples {} ({:.1?})",
        data.vocab.len(),
        data.kb.attribute_count(),
        data.train_examples.len(),
        t0.elapsed()
    );

    let base = ExperimentConfig {
        seed: 100,
        trials: 5,
        variant: Variant::PLAIN,
        dropout: DropoutConfig::new(0.2).unwrap(),
        budgets,
        train: TrainConfig {
            learning_rate: 0.1,
            epochs: std::env::var("EPOCHS").ok().and_then(|e| e.parse().ok()).unwrap_or(6),
            batch_size: 32,
            seed: 0,
            dim: std::env::var("DIM").ok().and_then(|e| e.parse().ok()).unwrap_or(64),
        },
        min_count: 2,
        stratified_split: false,
        strict_precision: false,
    };

    let variants = [
        Variant::PLAIN,
        Variant { vals: true, drop: false, mixing: false },
        Variant { vals: true, drop: true, mixing: true },
    ];
    for variant in variants {
        let cfg = ExperimentConfig { variant, ..base.clone() };
        for trial in 0..cfg.trials {
            let t = Instant::now();
            let result = experiment::run_trial(&data, &cfg, trial).unwrap();
            let r = &result.report;
            let b = r.buckets.as_ref().unwrap();
            let c = r.categories.as_ref().unwrap();
            println!(
                "{:<18} seed {} | overall maF1 {:.3} miF1 {:.3} | lo/lo maF1 {:.3} (n={}) | \
                 unseen-val maF1 {:.3} miR {:.3} (n={}) | unseen-attr miF1 {:.3} (n={}) | {:.0?}",
                variant.label(),
                cfg.trial_seed(trial),
                r.overall.macro_.f1,
                r.overall.micro.f1,
                b.cell(Bucket::Lo, Bucket::Lo).macro_.f1,
                b.cell(Bucket::Lo, Bucket::Lo).examples,
                c.seen_attr_unseen_value.macro_.f1,
                c.seen_attr_unseen_value.micro.recall,
                c.seen_attr_unseen_value.examples,
                c.unseen_attr.micro.f1,
                c.unseen_attr.examples,
                t.elapsed(),
            );
        }
    }
    println!("total {:.0?}", t0.elapsed());
}
