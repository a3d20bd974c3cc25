use std::io;
use std::path::Path;

use super::curves::{average_precision, froc, roc_auc, CurveData, RocResult, ScoredGrid};
use super::metrics::{confusion, f_beta, precision_recall, tanimoto, ConfusionCounts, Rate};
use super::regions::{MatchConfig, TumorMatch};
use super::EvalError;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    pub accuracy: Rate,
    pub precision: Rate,
    pub recall: Rate,
    pub beta: f64,
    pub f_beta: Rate,
    /// Computed from the one-to-one tumor matching.
    pub tanimoto: Rate,
    /// Absent when the evaluated tiles hold a single class.
    pub roc: Option<RocResult>,
    pub average_precision: Option<f64>,
    pub tumors: TumorMatch,
    pub per_image: Vec<TumorMatch>,
    /// Absent when no image contains a tumor.
    pub froc: Option<CurveData>,
}

/// Full metric suite over scored tile grids. A tile is predicted positive when
/// its score is `>= 0`.
pub fn evaluate_grids(images: &[ScoredGrid], beta: f64, config: &MatchConfig) -> Result<MetricsReport, EvalError> {
    let scores: Vec<f64> = images.iter().flat_map(|g| g.scores.iter().copied()).collect();
    let truth: Vec<bool> = images.iter().flat_map(|g| g.truth.cells().iter().copied()).collect();
    let predicted: Vec<bool> = scores.iter().map(|&s| s >= 0.0).collect();
    let counts = confusion(&predicted, &truth)?;
    let (precision, recall) = precision_recall(&counts);
    let f = f_beta(precision.value, recall.value, beta)?;
    let per_image: Vec<TumorMatch> = images.iter().map(|g| g.tumor_counts(0.0, config)).collect();
    let mut tumors = TumorMatch::default();
    per_image.iter().for_each(|t| tumors.add(t));
    let single_class = |e: &EvalError| matches!(e, EvalError::SingleClass { .. });
    let roc = match roc_auc(&scores, &truth) {
        Ok(r) => Some(r),
        Err(e) if single_class(&e) => None,
        Err(e) => return Err(e),
    };
    let ap = match average_precision(&scores, &truth) {
        Ok(a) => Some(a),
        Err(e) if single_class(&e) => None,
        Err(e) => return Err(e),
    };
    let froc = match froc(images, config) {
        Ok(c) => Some(c),
        Err(EvalError::NoTumors) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        counts,
        accuracy: counts.accuracy(),
        precision,
        recall,
        beta,
        f_beta: f,
        tanimoto: tanimoto(tumors.matched, tumors.m, tumors.n)?,
        roc,
        average_precision: ap,
        tumors,
        per_image,
        froc,
    })
}

fn csv_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One header line and one metrics row.
pub fn write_metrics_csv(report: &MetricsReport, dataset: &str, path: &Path) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record([
        "dataset",
        "tp",
        "fp",
        "tn",
        "fn",
        "precision",
        "recall",
        "beta",
        "f_beta",
        "tanimoto",
        "accuracy",
        "auc",
        "auc_ci_low",
        "auc_ci_high",
        "pr_auc",
        "tumors_detected",
        "tumors_true",
        "tumor_tp",
        "tumor_matched",
        "tumor_fp",
        "degenerate",
    ])
    .map_err(csv_io)?;
    let c = &report.counts;
    let mut degenerate = Vec::new();
    for (name, r) in [
        ("precision", report.precision),
        ("recall", report.recall),
        ("f_beta", report.f_beta),
        ("tanimoto", report.tanimoto),
    ] {
        if r.degenerate {
            degenerate.push(name);
        }
    }
    if report.tumors.merged {
        degenerate.push("merged_tumors");
    }
    let roc = report.roc.as_ref();
    w.write_record([
        dataset.to_string(),
        c.true_pos.to_string(),
        c.false_pos.to_string(),
        c.true_neg.to_string(),
        c.false_neg.to_string(),
        report.precision.value.to_string(),
        report.recall.value.to_string(),
        report.beta.to_string(),
        report.f_beta.value.to_string(),
        report.tanimoto.value.to_string(),
        report.accuracy.value.to_string(),
        opt(roc.map(|r| r.auc)),
        opt(roc.map(|r| r.ci.0)),
        opt(roc.map(|r| r.ci.1)),
        opt(report.average_precision),
        report.tumors.m.to_string(),
        report.tumors.n.to_string(),
        report.tumors.tumor_tp.to_string(),
        report.tumors.matched.to_string(),
        report.tumors.false_positives.to_string(),
        degenerate.join(";"),
    ])
    .map_err(csv_io)?;
    w.flush()
}

/// `threshold,x,y` rows; the leading `+∞` threshold is written as `inf`.
pub fn write_curve_csv(curve: &CurveData, path: &Path) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(["threshold", "x", "y"]).map_err(csv_io)?;
    for p in &curve.points {
        w.write_record([p.threshold.to_string(), p.x.to_string(), p.y.to_string()])
            .map_err(csv_io)?;
    }
    w.flush()
}

pub const TABLE_HEADER: &str = "Method | P | R | F_beta | T | Accuracy | AUC";

/// Table row with three decimals; AUC is followed by the 95% half-width
/// (1.96 standard errors).
pub fn format_table_row(method: &str, report: &MetricsReport) -> String {
    let auc = match &report.roc {
        Some(r) => format!("{:.3} ± {:.3}", r.auc, 1.96 * r.std_err),
        None => "n/a".to_string(),
    };
    format!(
        "{method} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} | {auc}",
        report.precision.value, report.recall.value, report.f_beta.value, report.tanimoto.value, report.accuracy.value
    )
}
