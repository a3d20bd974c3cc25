//! Linear L1-loss SVM trained by dual coordinate descent.
//!
//! The bias is learned as the weight of an extra constant feature whose value
//! (`bias_scale`) is the RMS norm of the training features, which keeps the
//! bias nearly unregularized while the solver stays a plain box-constrained
//! dual problem. Examples are visited in input order every epoch.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvmError {
    #[error("training data has a single class ({positives} positives, {negatives} negatives)")]
    SingleClass { positives: usize, negatives: usize },
    #[error("no training examples")]
    Empty,
    #[error("example {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("label {label} at index {index} is not -1 or +1")]
    BadLabel { index: usize, label: i8 },
    #[error("non-finite feature value in example {index}")]
    NonFinite { index: usize },
    #[error("invalid SVM configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClassWeights {
    /// `n / (2 n_y)` per class.
    Balanced,
    /// 1 for both classes.
    Uniform,
    Manual {
        positive: f64,
        negative: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmConfig {
    pub c: f64,
    pub class_weights: ClassWeights,
    pub max_epochs: usize,
    /// Stop when the largest projected-gradient magnitude in an epoch is below this.
    pub tol: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            class_weights: ClassWeights::Balanced,
            max_epochs: 200,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    /// Cost multipliers `(positive, negative)`.
    pub class_weights: (f64, f64),
    /// Value of the constant feature used to learn the bias.
    pub bias_scale: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmReport {
    /// Dual objective `½‖w̄‖² − Σα` after each epoch (non-increasing).
    pub dual_trace: Vec<f64>,
    pub primal_objective: f64,
    /// Dual objective in maximization form, `Σα − ½‖w̄‖²`.
    pub dual_objective: f64,
    pub converged: bool,
}

fn validate<F: AsRef<[f32]>>(features: &[F], labels: &[i8]) -> Result<(usize, usize, usize), SvmError> {
    if features.len() != labels.len() {
        return Err(SvmError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let first = features.first().ok_or(SvmError::Empty)?;
    let dim = first.as_ref().len();
    let (mut pos, mut neg) = (0, 0);
    for (index, (x, &y)) in features.iter().zip(labels).enumerate() {
        let x = x.as_ref();
        if x.len() != dim {
            return Err(SvmError::DimensionMismatch {
                index,
                expected: dim,
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(SvmError::NonFinite { index });
        }
        match y {
            1 => pos += 1,
            -1 => neg += 1,
            label => return Err(SvmError::BadLabel { index, label }),
        }
    }
    if pos == 0 || neg == 0 {
        return Err(SvmError::SingleClass {
            positives: pos,
            negatives: neg,
        });
    }
    Ok((dim, pos, neg))
}

#[inline]
fn dot_f32(w: &[f64], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(a, &b)| a * b as f64).sum()
}

pub fn svm_train<F: AsRef<[f32]>>(features: &[F], labels: &[i8], config: &SvmConfig) -> Result<SvmModel, SvmError> {
    svm_train_with_report(features, labels, config).map(|(m, _)| m)
}

/// Minimizes `½‖w̄‖² + C Σ c_{y_i} max(0, 1 − y_i w̄ᵀx̄_i)` over the augmented
/// `w̄ = (w, b / bias_scale)`, `x̄ = (x, bias_scale)`.
pub fn svm_train_with_report<F: AsRef<[f32]>>(
    features: &[F],
    labels: &[i8],
    config: &SvmConfig,
) -> Result<(SvmModel, SvmReport), SvmError> {
    if !(config.c > 0.0 && config.c.is_finite()) {
        return Err(SvmError::InvalidConfig(format!("C must be positive, got {}", config.c)));
    }
    if config.max_epochs == 0 || !(config.tol > 0.0) {
        return Err(SvmError::InvalidConfig(
            "epoch cap and tolerance must be positive".into(),
        ));
    }
    let (dim, pos, neg) = validate(features, labels)?;
    let n = features.len();
    let (cw_pos, cw_neg) = match config.class_weights {
        ClassWeights::Balanced => (n as f64 / (2.0 * pos as f64), n as f64 / (2.0 * neg as f64)),
        ClassWeights::Uniform => (1.0, 1.0),
        ClassWeights::Manual { positive, negative } => {
            if !(positive > 0.0 && negative > 0.0 && positive.is_finite() && negative.is_finite()) {
                return Err(SvmError::InvalidConfig("class weights must be positive".into()));
            }
            (positive, negative)
        }
    };

    let sq_norms: Vec<f64> = features
        .iter()
        .map(|x| x.as_ref().iter().map(|&v| (v as f64) * (v as f64)).sum())
        .collect();
    let bias_scale = (sq_norms.iter().sum::<f64>() / n as f64).sqrt().max(1.0);
    let b2 = bias_scale * bias_scale;

    let upper: Vec<f64> = labels
        .iter()
        .map(|&y| config.c * if y > 0 { cw_pos } else { cw_neg })
        .collect();
    let mut alpha = vec![0.0f64; n];
    let mut w = vec![0.0f64; dim];
    let mut wb = 0.0f64;
    let mut dual_trace = Vec::new();
    let mut converged = false;
    let mut epochs = 0;
    for _ in 0..config.max_epochs {
        epochs += 1;
        let mut max_pg = 0.0f64;
        for i in 0..n {
            let qii = sq_norms[i] + b2;
            if qii == 0.0 {
                continue;
            }
            let x = features[i].as_ref();
            let y = labels[i] as f64;
            let g = y * (dot_f32(&w, x) + wb * bias_scale) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == upper[i] {
                g.max(0.0)
            } else {
                g
            };
            max_pg = max_pg.max(pg.abs());
            if pg != 0.0 {
                let new = (alpha[i] - g / qii).clamp(0.0, upper[i]);
                let d = (new - alpha[i]) * y;
                alpha[i] = new;
                for (wj, &xj) in w.iter_mut().zip(x) {
                    *wj += d * xj as f64;
                }
                wb += d * bias_scale;
            }
        }
        let half_norm = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + wb * wb);
        dual_trace.push(half_norm - alpha.iter().sum::<f64>());
        if max_pg < config.tol {
            converged = true;
            break;
        }
    }

    let half_norm = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + wb * wb);
    let hinge: f64 = (0..n)
        .map(|i| {
            let m = labels[i] as f64 * (dot_f32(&w, features[i].as_ref()) + wb * bias_scale);
            upper[i] * (1.0 - m).max(0.0)
        })
        .sum();
    let report = SvmReport {
        dual_trace,
        primal_objective: half_norm + hinge,
        dual_objective: alpha.iter().sum::<f64>() - half_norm,
        converged,
    };
    let model = SvmModel {
        weights: w,
        bias: wb * bias_scale,
        c: config.c,
        class_weights: (cw_pos, cw_neg),
        bias_scale,
        iterations: epochs,
    };
    Ok((model, report))
}

/// `wᵀx + b`.
pub fn svm_decision(model: &SvmModel, feature: &[f32]) -> Result<f64, SvmError> {
    if feature.len() != model.weights.len() {
        return Err(SvmError::DimensionMismatch {
            index: 0,
            expected: model.weights.len(),
            got: feature.len(),
        });
    }
    Ok(dot_f32(&model.weights, feature) + model.bias)
}

/// `+1` for scores `>= 0`, else `-1`.
pub fn label_of(score: f64) -> i8 {
    if score >= 0.0 {
        1
    } else {
        -1
    }
}
