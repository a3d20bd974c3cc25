use super::regions::{connected_components, truth_tumors, tumor_match, LabelGrid, MatchConfig, TumorMatch};
use super::EvalError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveKind {
    Roc,
    Froc,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    /// Scores `>= threshold` are called positive; the first point uses `+∞`.
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveData {
    pub kind: CurveKind,
    pub points: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocResult {
    pub curve: CurveData,
    pub auc: f64,
    /// Hanley–McNeil standard error.
    pub std_err: f64,
    /// 95% interval clipped to `[0, 1]`.
    pub ci: (f64, f64),
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize), EvalError> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass {
            positives: pos,
            negatives: neg,
        });
    }
    Ok((pos, neg))
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<(), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predicted: scores.len(),
            truth: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(EvalError::InvalidArgument("NaN score".into()));
    }
    Ok(())
}

/// Indices sorted by descending score, grouped into runs of equal score.
fn descending_groups(scores: &[f64]) -> Vec<(f64, Vec<usize>)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some((s, members)) if *s == scores[i] => members.push(i),
            _ => groups.push((scores[i], vec![i])),
        }
    }
    groups
}

/// TPR against FPR over every distinct score, with trapezoidal area and a
/// Hanley–McNeil confidence interval. `true` labels are positive.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocResult, EvalError> {
    check_scores(scores, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let mut points = vec![CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    for (threshold, members) in descending_groups(scores) {
        let (prev_tp, prev_fp) = (tp, fp);
        for i in members {
            if labels[i] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        // trapezoid in count units, normalized once at the end
        area += (fp - prev_fp) as f64 * (tp + prev_tp) as f64 / 2.0;
        points.push(CurvePoint {
            threshold,
            x: fp as f64 / neg as f64,
            y: tp as f64 / pos as f64,
        });
    }
    let auc = area / (pos as f64 * neg as f64);
    let std_err = hanley_mcneil(auc, pos, neg);
    let ci = ((auc - 1.96 * std_err).max(0.0), (auc + 1.96 * std_err).min(1.0));
    Ok(RocResult {
        curve: CurveData {
            kind: CurveKind::Roc,
            points,
        },
        auc,
        std_err,
        ci,
    })
}

fn hanley_mcneil(auc: f64, pos: usize, neg: usize) -> f64 {
    let q1 = auc / (2.0 - auc);
    let q2 = 2.0 * auc * auc / (1.0 + auc);
    let (np, nn) = (pos as f64, neg as f64);
    let var = (auc * (1.0 - auc) + (np - 1.0) * (q1 - auc * auc) + (nn - 1.0) * (q2 - auc * auc)) / (np * nn);
    var.max(0.0).sqrt()
}

/// Area under the precision-recall curve as step-wise average precision
/// `Σ (R_k − R_{k−1})·P_k` over distinct thresholds.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    check_scores(scores, labels)?;
    let (pos, _) = class_counts(labels)?;
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut ap = 0.0;
    for (_, members) in descending_groups(scores) {
        let prev_tp = tp;
        seen += members.len();
        tp += members.iter().filter(|&&i| labels[i]).count();
        if tp > prev_tp {
            ap += (tp - prev_tp) as f64 / pos as f64 * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

/// Per-tile scores of one image together with its truth tile grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredGrid {
    /// Row-major, same shape as `truth`.
    pub scores: Vec<f64>,
    pub truth: LabelGrid,
}

impl ScoredGrid {
    pub fn new(scores: Vec<f64>, truth: LabelGrid) -> Self {
        assert_eq!(scores.len(), truth.rows() * truth.cols(), "score grid shape mismatch");
        Self { scores, truth }
    }

    pub fn detections(&self, threshold: f64) -> LabelGrid {
        LabelGrid::new(
            self.truth.rows(),
            self.truth.cols(),
            self.scores.iter().map(|&s| s >= threshold).collect(),
        )
    }

    pub fn tumor_counts(&self, threshold: f64, config: &MatchConfig) -> TumorMatch {
        let detected = connected_components(&self.detections(threshold), config.connectivity);
        let truths = truth_tumors(&self.truth, config.connectivity);
        tumor_match(&detected, &truths, config)
    }
}

/// Tumor sensitivity (y) against mean tumor-level false positives per image (x),
/// thresholds descending from `+∞` through every distinct tile score.
pub fn froc(images: &[ScoredGrid], config: &MatchConfig) -> Result<CurveData, EvalError> {
    if images.is_empty() {
        return Err(EvalError::Empty);
    }
    let truths: Vec<_> = images
        .iter()
        .map(|g| truth_tumors(&g.truth, config.connectivity))
        .collect();
    let n_total: usize = truths.iter().map(Vec::len).sum();
    if n_total == 0 {
        return Err(EvalError::NoTumors);
    }
    let mut thresholds: Vec<f64> = images.iter().flat_map(|g| g.scores.iter().copied()).collect();
    if thresholds.iter().any(|s| s.is_nan()) {
        return Err(EvalError::InvalidArgument("NaN score".into()));
    }
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut points = Vec::with_capacity(thresholds.len() + 1);
    points.push(CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 0.0,
    });
    for t in thresholds {
        let mut total = TumorMatch::default();
        for (g, tr) in images.iter().zip(&truths) {
            let detected = connected_components(&g.detections(t), config.connectivity);
            total.add(&tumor_match(&detected, tr, config));
        }
        points.push(CurvePoint {
            threshold: t,
            x: total.false_positives as f64 / images.len() as f64,
            y: total.tumor_tp as f64 / n_total as f64,
        });
    }
    Ok(CurveData {
        kind: CurveKind::Froc,
        points,
    })
}
