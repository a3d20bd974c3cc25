use super::EvalError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    /// `(TP + TN) / (TP + FP + TN + FN)`.
    pub fn accuracy(&self) -> Rate {
        Rate::ratio(self.true_pos + self.true_neg, self.total())
    }

    /// Standard `FP / (FP + TN)`.
    pub fn false_positive_rate(&self) -> Rate {
        Rate::ratio(self.false_pos, self.false_pos + self.true_neg)
    }
}

/// A ratio that is 0 and flagged when its denominator vanishes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rate {
    pub value: f64,
    pub degenerate: bool,
}

impl Rate {
    pub fn ratio(num: usize, den: usize) -> Self {
        if den == 0 {
            Self::degenerate()
        } else {
            Self {
                value: num as f64 / den as f64,
                degenerate: false,
            }
        }
    }

    pub fn degenerate() -> Self {
        Self {
            value: 0.0,
            degenerate: true,
        }
    }
}

/// `true` is the positive class.
pub fn confusion(predicted: &[bool], truth: &[bool]) -> Result<ConfusionCounts, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, false) => c.true_neg += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    Ok(c)
}

/// `P = TP/(TP+FP)`, `R = TP/(TP+FN)`.
pub fn precision_recall(c: &ConfusionCounts) -> (Rate, Rate) {
    (
        Rate::ratio(c.true_pos, c.true_pos + c.false_pos),
        Rate::ratio(c.true_pos, c.true_pos + c.false_neg),
    )
}

/// `(1+β²)·P·R / (β²·P + R)`.
pub fn f_beta(p: f64, r: f64, beta: f64) -> Result<Rate, EvalError> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&r) {
        return Err(EvalError::InvalidArgument(format!(
            "precision {p} and recall {r} must lie in [0, 1]"
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(EvalError::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    let b2 = beta * beta;
    let den = b2 * p + r;
    if den == 0.0 {
        return Ok(Rate::degenerate());
    }
    Ok(Rate {
        value: (1.0 + b2) * p * r / den,
        degenerate: false,
    })
}

/// `T = TP / (M + N − TP)` for `M` detected and `N` true tumors.
pub fn tanimoto(tumor_tp: usize, m: usize, n: usize) -> Result<Rate, EvalError> {
    if tumor_tp > m.min(n) {
        return Err(EvalError::InvalidArgument(format!(
            "tumor TP {tumor_tp} exceeds min(M={m}, N={n})"
        )));
    }
    Ok(Rate::ratio(tumor_tp, m + n - tumor_tp))
}
