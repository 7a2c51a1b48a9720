//! Text and CSV rendering of evaluation reports.

use super::{Bucket, EvalReport, Scores};
use std::fmt::Write;

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

fn score_row(out: &mut String, label: &str, s: &Scores) {
    let _ = writeln!(
        out,
        "{label:<26} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        s.examples,
        pct(s.macro_.precision),
        pct(s.macro_.recall),
        pct(s.macro_.f1),
        pct(s.micro.precision),
        pct(s.micro.recall),
        pct(s.micro.f1),
    );
}

fn header(out: &mut String, label: &str) {
    let _ = writeln!(
        out,
        "{label:<26} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "n", "maP", "maR", "maF1", "miP", "miR", "miF1"
    );
}

/// Renders a report as an aligned-column text table (percentages).
pub fn render_report_text(report: &EvalReport) -> String {
    let mut out = String::new();
    header(&mut out, "overall");
    score_row(&mut out, "all", &report.overall);
    let _ = writeln!(
        out,
        "attributes scored: {} (macro), excluded NULL-only: {}",
        report.overall.macro_.attributes, report.overall.excluded_attributes
    );
    if report.options.strict_precision {
        let _ = writeln!(out, "precision mode: strict");
    }

    if let Some(b) = &report.buckets {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "buckets (frequency median {}, similarity median {:.4})",
            b.thresholds.frequency_median, b.thresholds.similarity_median
        );
        header(&mut out, "cos / freq");
        score_row(&mut out, "lo / lo", b.cell(Bucket::Lo, Bucket::Lo));
        score_row(&mut out, "lo / hi", b.cell(Bucket::Lo, Bucket::Hi));
        score_row(&mut out, "hi / lo", b.cell(Bucket::Hi, Bucket::Lo));
        score_row(&mut out, "hi / hi", b.cell(Bucket::Hi, Bucket::Hi));
        let _ = writeln!(out, "examples without a profile: {}", b.unprofiled_examples);
    }

    if let Some(c) = &report.categories {
        let _ = writeln!(out);
        header(&mut out, "value types");
        score_row(&mut out, "seen attr, seen values", &c.seen_attr_seen_value);
        score_row(&mut out, "seen attr, unseen values", &c.seen_attr_unseen_value);
        score_row(&mut out, "unseen attr", &c.unseen_attr);
        let _ = writeln!(
            out,
            "NULL golds assigned to seen-value: {}",
            c.null_gold_as_seen_value
        );
    }
    out
}

/// Renders the bucket breakdown as CSV (fractions, not percentages).
pub fn render_buckets_csv(report: &EvalReport) -> Option<String> {
    let b = report.buckets.as_ref()?;
    let mut out = String::from(
        "sim_bucket,freq_bucket,examples,macro_precision,macro_recall,macro_f1,\
         micro_precision,micro_recall,micro_f1\n",
    );
    for (sim, freq, label) in [
        (Bucket::Lo, Bucket::Lo, ("lo", "lo")),
        (Bucket::Lo, Bucket::Hi, ("lo", "hi")),
        (Bucket::Hi, Bucket::Lo, ("hi", "lo")),
        (Bucket::Hi, Bucket::Hi, ("hi", "hi")),
    ] {
        let s = b.cell(sim, freq);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            label.0,
            label.1,
            s.examples,
            s.macro_.precision,
            s.macro_.recall,
            s.macro_.f1,
            s.micro.precision,
            s.micro.recall,
            s.micro.f1,
        );
    }
    Some(out)
}
