use rayon::prelude::*;

use super::EvalError;

#[derive(Clone, Debug, PartialEq)]
pub struct BiasReport {
    pub seeds: Vec<u64>,
    /// Detection accuracy per run, in seed order.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Unbiased (n − 1) standard deviation.
    pub std: f64,
}

/// Sample mean and unbiased standard deviation of a Gaussian fit.
pub fn gaussian_fit(values: &[f64]) -> Result<(f64, f64), EvalError> {
    if values.len() < 2 {
        return Err(EvalError::InvalidArgument(format!(
            "need at least 2 values for a standard deviation, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// Runs `run(seed)` for every seed in parallel and fits a Gaussian to the
/// returned accuracies. Results are ordered by run index.
pub fn selection_bias<E, F>(seeds: &[u64], run: F) -> Result<BiasReport, E>
where
    E: From<EvalError> + Send,
    F: Fn(u64) -> Result<f64, E> + Sync,
{
    if seeds.len() < 2 {
        return Err(
            EvalError::InvalidArgument(format!("selection bias needs at least 2 runs, got {}", seeds.len())).into(),
        );
    }
    let accuracies = seeds.par_iter().map(|&s| run(s)).collect::<Result<Vec<f64>, E>>()?;
    if let Some(bad) = accuracies.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(EvalError::InvalidArgument(format!("accuracy {bad} outside [0, 1]")).into());
    }
    let (mean, std) = gaussian_fit(&accuracies)?;
    Ok(BiasReport {
        seeds: seeds.to_vec(),
        accuracies,
        mean,
        std,
    })
}
