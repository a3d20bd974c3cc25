//! Flat `key = value` run configuration.
//!
//! Precedence: built-in defaults, then a config file, then `--set` pairs and
//! dedicated flags. Unknown keys are rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gspcanet::classifier::ClassWeights;
use gspcanet::eval::{Connectivity, MatchConfig};
use gspcanet::pipeline::{TrainOptions, TUNE_GRID};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainOptions,
    pub tune: bool,
    pub beta: f64,
    pub matching: MatchConfig,
    /// Per-class fraction of images held out in each selection-bias run.
    pub test_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainOptions::default(),
            tune: false,
            beta: 1.0,
            matching: MatchConfig::default(),
            test_fraction: 0.5,
        }
    }
}

/// Every accepted key with a short description.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "master random seed"),
    ("patch", "filter side t (odd)"),
    ("l1", "stage-1 filter count"),
    ("l2", "stage-2 filter count (<= 16)"),
    ("block", "histogram block side"),
    ("stride", "histogram block stride"),
    ("tile", "evaluation tile side"),
    ("theta_pos", "tumor coverage for a positive tile"),
    ("lambda", "ridge weight"),
    ("lambda1", "lasso weight"),
    ("rho", "graph weight (0 disables the graph)"),
    ("max_iter", "outer solver iterations"),
    ("tol", "outer solver tolerance"),
    ("inner_max_iter", "coordinate-descent sweeps"),
    ("inner_tol", "coordinate-descent tolerance"),
    ("graph_k", "nearest neighbors per graph node"),
    ("graph_max_nodes", "graph node cap (k-means centers)"),
    ("graph_pool", "patches sampled before clustering"),
    ("graph_per_class", "one graph per class"),
    ("svm_c", "SVM cost"),
    ("svm_class_weights", "balanced, uniform or POS:NEG"),
    ("svm_max_epochs", "SVM epoch cap"),
    ("svm_tol", "SVM projected-gradient tolerance"),
    ("tune", "choose lambda1 on a validation split"),
    ("validation_fraction", "per-class validation share when tuning"),
    ("beta", "F-beta weight"),
    ("min_coverage", "tumor coverage for a detection"),
    ("connectivity", "region connectivity, 4 or 8"),
    ("test_fraction", "per-class test share in bias runs"),
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value {value:?} for key {key}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let t = &mut self.train;
        let value = value.trim();
        match key {
            "seed" => t.seed = parse(key, value)?,
            "patch" => t.net.patch = parse(key, value)?,
            "l1" => {
                t.net.l1 = parse(key, value)?;
                t.net.stage1.q = t.net.l1;
            }
            "l2" => {
                t.net.l2 = parse(key, value)?;
                t.net.stage2.q = t.net.l2;
            }
            "block" => t.net.block = parse(key, value)?,
            "stride" => t.net.stride = parse(key, value)?,
            "tile" => t.net.tile = parse(key, value)?,
            "theta_pos" => t.net.theta_pos = parse(key, value)?,
            "lambda" => {
                let v = parse(key, value)?;
                t.net.stage1.lambda = v;
                t.net.stage2.lambda = v;
            }
            "lambda1" => {
                let v = parse(key, value)?;
                t.net.stage1.lambda1 = v;
                t.net.stage2.lambda1 = v;
            }
            "rho" => {
                let v = parse(key, value)?;
                t.net.stage1.rho = v;
                t.net.stage2.rho = v;
            }
            "max_iter" => {
                let v = parse(key, value)?;
                t.net.stage1.max_iter = v;
                t.net.stage2.max_iter = v;
            }
            "tol" => {
                let v = parse(key, value)?;
                t.net.stage1.tol = v;
                t.net.stage2.tol = v;
            }
            "inner_max_iter" => {
                let v = parse(key, value)?;
                t.net.stage1.inner_max_iter = v;
                t.net.stage2.inner_max_iter = v;
            }
            "inner_tol" => {
                let v = parse(key, value)?;
                t.net.stage1.inner_tol = v;
                t.net.stage2.inner_tol = v;
            }
            "graph_k" => t.net.graph.k = parse(key, value)?,
            "graph_max_nodes" => t.net.graph.max_nodes = parse(key, value)?,
            "graph_pool" => t.net.graph.pool = parse(key, value)?,
            "graph_per_class" => t.net.graph.per_class = parse(key, value)?,
            "svm_c" => t.svm.c = parse(key, value)?,
            "svm_class_weights" => {
                t.svm.class_weights = match value {
                    "balanced" => ClassWeights::Balanced,
                    "uniform" => ClassWeights::Uniform,
                    other => {
                        let (p, n) = other.split_once(':').ok_or_else(|| {
                            CliError::Usage(format!(
                                "invalid value {other:?} for key {key} (balanced, uniform or POS:NEG)"
                            ))
                        })?;
                        ClassWeights::Manual {
                            positive: parse(key, p)?,
                            negative: parse(key, n)?,
                        }
                    }
                }
            }
            "svm_max_epochs" => t.svm.max_epochs = parse(key, value)?,
            "svm_tol" => t.svm.tol = parse(key, value)?,
            "tune" => self.tune = parse(key, value)?,
            "validation_fraction" => t.validation_fraction = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "min_coverage" => self.matching.min_coverage = parse(key, value)?,
            "connectivity" => {
                self.matching.connectivity = match value {
                    "4" => Connectivity::Four,
                    "8" => Connectivity::Eight,
                    _ => {
                        return Err(CliError::Usage(format!(
                            "invalid value {value:?} for key {key} (4 or 8)"
                        )))
                    }
                }
            }
            "test_fraction" => self.test_fraction = parse(key, value)?,
            _ => return Err(CliError::Usage(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Current value of `key` in config-file syntax.
    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        let s1 = &t.net.stage1;
        Some(match key {
            "seed" => t.seed.to_string(),
            "patch" => t.net.patch.to_string(),
            "l1" => t.net.l1.to_string(),
            "l2" => t.net.l2.to_string(),
            "block" => t.net.block.to_string(),
            "stride" => t.net.stride.to_string(),
            "tile" => t.net.tile.to_string(),
            "theta_pos" => t.net.theta_pos.to_string(),
            "lambda" => s1.lambda.to_string(),
            "lambda1" => s1.lambda1.to_string(),
            "rho" => s1.rho.to_string(),
            "max_iter" => s1.max_iter.to_string(),
            "tol" => s1.tol.to_string(),
            "inner_max_iter" => s1.inner_max_iter.to_string(),
            "inner_tol" => s1.inner_tol.to_string(),
            "graph_k" => t.net.graph.k.to_string(),
            "graph_max_nodes" => t.net.graph.max_nodes.to_string(),
            "graph_pool" => t.net.graph.pool.to_string(),
            "graph_per_class" => t.net.graph.per_class.to_string(),
            "svm_c" => t.svm.c.to_string(),
            "svm_class_weights" => match t.svm.class_weights {
                ClassWeights::Balanced => "balanced".into(),
                ClassWeights::Uniform => "uniform".into(),
                ClassWeights::Manual { positive, negative } => format!("{positive}:{negative}"),
            },
            "svm_max_epochs" => t.svm.max_epochs.to_string(),
            "svm_tol" => t.svm.tol.to_string(),
            "tune" => self.tune.to_string(),
            "validation_fraction" => t.validation_fraction.to_string(),
            "beta" => self.beta.to_string(),
            "min_coverage" => self.matching.min_coverage.to_string(),
            "connectivity" => match self.matching.connectivity {
                Connectivity::Four => "4".into(),
                Connectivity::Eight => "8".into(),
            },
            "test_fraction" => self.test_fraction.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected key = value", n + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| CliError::Usage(format!("{origin}:{}: {}", n + 1, e.message())))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn apply_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {pair:?}")))?;
        self.set(k.trim(), v)
    }

    /// Training options with the tuning grid applied when enabled.
    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            tune_grid: if self.tune { TUNE_GRID.to_vec() } else { Vec::new() },
            ..self.train.clone()
        }
    }

    /// The configuration serialized as a config file.
    #[cfg(test)]
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, _) in KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k).expect("every listed key has a value"));
        }
        out
    }
}

/// Help text listing every key with its default.
pub fn keys_help() -> String {
    let defaults = RunConfig::default();
    let mut out = String::from("Configuration keys (defaults shown; set with --config FILE or --set KEY=VALUE):\n");
    for (k, desc) in KEYS {
        let _ = writeln!(out, "  {k:<20} {:<10} {desc}", defaults.get(k).expect("listed key"));
    }
    out
}
