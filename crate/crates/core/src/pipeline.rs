//! End-to-end training, scoring and evaluation over a dataset manifest.

use std::path::Path;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::classifier::{svm_decision, svm_train, SvmConfig, SvmError};
use crate::eval::{evaluate_grids, roc_auc, EvalError, MatchConfig, MetricsReport, ScoredGrid};
use crate::imagio::{dataset_digest, ClassLabel, DatasetManifest, Image, ImagioError, Mask};
use crate::network::{
    features_with, learn_filters, ChannelFilters, FeatureVector, GsPcaNetModel, NetConfig, NetError, Provenance,
};
use crate::patches::{tile_image, PatchError, TileGrid};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Imagio(#[from] ImagioError),
    #[error(transparent)]
    Network(#[from] NetError),
    #[error(transparent)]
    Classifier(#[from] SvmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error("{0}")]
    Data(String),
}

/// An image with its class and optional tumor mask.
#[derive(Clone, Debug)]
pub struct Sample {
    pub name: String,
    pub image: Image,
    pub mask: Option<Mask>,
    pub label: ClassLabel,
}

pub fn load_samples(manifest: &DatasetManifest) -> Result<Vec<Sample>, PipelineError> {
    manifest
        .entries
        .par_iter()
        .map(|e| {
            Ok(Sample {
                name: e.path.to_string_lossy().into_owned(),
                image: e.load_image()?,
                mask: e.load_mask()?,
                label: e.label,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub net: NetConfig,
    pub svm: SvmConfig,
    pub seed: u64,
    /// λ1 candidates tried on a validation split; empty disables tuning.
    pub tune_grid: Vec<f64>,
    /// Fraction of training images held out per class while tuning.
    pub validation_fraction: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            net: NetConfig::default(),
            svm: SvmConfig::default(),
            seed: 0,
            tune_grid: Vec::new(),
            validation_fraction: 0.25,
        }
    }
}

pub const TUNE_GRID: [f64; 3] = [0.0, 1e-3, 1e-2];

/// Tile grid of one sample; tiles of unmasked images take the image label.
pub fn tile_sample(sample: &Sample, index: usize, net: &NetConfig) -> Result<TileGrid, PipelineError> {
    Ok(tile_image(
        &sample.image,
        sample.mask.as_ref(),
        net.tile,
        net.theta_pos,
        sample.label.is_positive(),
        index,
    )?)
}

/// Features of every tile, in grid order.
pub fn tile_features(
    sample: &Sample,
    grid: &TileGrid,
    net: &NetConfig,
    channels: &[ChannelFilters],
) -> Result<Vec<FeatureVector>, PipelineError> {
    grid.tiles
        .par_iter()
        .map(|t| {
            let crop = sample.image.crop(t.row, t.col, grid.tile, grid.tile)?;
            Ok(features_with(&crop, net, channels)?)
        })
        .collect()
}

fn class_ids(samples: &[Sample]) -> Vec<usize> {
    samples.iter().map(|s| usize::from(s.label.is_positive())).collect()
}

fn check_classes(samples: &[Sample]) -> Result<(), PipelineError> {
    let pos = samples.iter().filter(|s| s.label.is_positive()).count();
    if pos == 0 || pos == samples.len() {
        return Err(PipelineError::Data(format!(
            "training data needs both classes ({pos} cancerous, {} healthy images)",
            samples.len() - pos
        )));
    }
    Ok(())
}

/// Learns filters on `samples` and trains the tile classifier.
fn fit_once(samples: &[Sample], net: &NetConfig, svm: &SvmConfig, seed: u64) -> Result<GsPcaNetModel, PipelineError> {
    let images: Vec<Image> = samples.iter().map(|s| s.image.clone()).collect();
    let started = std::time::Instant::now();
    let channels = learn_filters(&images, &class_ids(samples), net, seed)?;
    info!(
        "learned {} channel(s) x 2 stages ({} + {} filters) in {:.2?}",
        channels.len(),
        net.l1,
        net.l2,
        started.elapsed()
    );

    let started = std::time::Instant::now();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let grid = tile_sample(s, i, net)?;
        features.extend(tile_features(s, &grid, net, &channels)?);
        labels.extend(grid.tiles.iter().map(|t| if t.positive { 1i8 } else { -1 }));
    }
    info!(
        "extracted {} tile features in {:.2?}",
        features.len(),
        started.elapsed()
    );

    let started = std::time::Instant::now();
    let classifier = svm_train(&features, &labels, svm)?;
    info!(
        "trained classifier ({} epochs) in {:.2?}",
        classifier.iterations,
        started.elapsed()
    );
    Ok(GsPcaNetModel {
        config: net.clone(),
        channels,
        classifier: Some(classifier),
        provenance: Provenance {
            seed,
            ..Provenance::default()
        },
    })
}

/// Splits indices per class so each class keeps `round(fraction · n_class)` (at
/// least one, at most `n_class − 1`) images in the second part.
pub fn stratified_split(
    samples: &[Sample],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for label in [ClassLabel::Cancerous, ClassLabel::Healthy] {
        let mut idx: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].label == label).collect();
        if idx.len() < 2 {
            return Err(PipelineError::Data(format!(
                "need at least 2 {label} images to split, found {}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let held = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        second.extend_from_slice(&idx[..held]);
        first.extend_from_slice(&idx[held..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

fn pick(samples: &[Sample], idx: &[usize]) -> Vec<Sample> {
    idx.iter().map(|&i| samples[i].clone()).collect()
}

/// Validation AUC for each λ1 in the grid; failing candidates are skipped.
fn tune_lambda1(samples: &[Sample], opts: &TrainOptions) -> Result<f64, PipelineError> {
    let (fit_idx, val_idx) = stratified_split(samples, opts.validation_fraction, opts.seed)?;
    let (fit, val) = (pick(samples, &fit_idx), pick(samples, &val_idx));
    let mut best: Option<(f64, f64)> = None;
    for &l1 in &opts.tune_grid {
        let mut net = opts.net.clone();
        net.stage1.lambda1 = l1;
        net.stage2.lambda1 = l1;
        let auc = fit_once(&fit, &net, &opts.svm, opts.seed)
            .and_then(|model| score_samples(&model, &val))
            .and_then(|scored| {
                let (scores, truth): (Vec<f64>, Vec<bool>) = scored.iter().flat_map(|s| s.tile_pairs()).unzip();
                Ok(roc_auc(&scores, &truth)?.auc)
            });
        match auc {
            Ok(auc) => {
                info!("tuning: lambda1 = {l1} gives validation AUC {auc:.4}");
                if best.is_none_or(|(_, b)| auc > b) {
                    best = Some((l1, auc));
                }
            }
            Err(e) => warn!("tuning: lambda1 = {l1} failed: {e}"),
        }
    }
    best.map(|(l1, _)| l1)
        .ok_or_else(|| PipelineError::Data("every tuning candidate failed".into()))
}

/// Full training run; with a tuning grid, λ1 is chosen on a validation split
/// first and the final model is refit on all of `samples`.
pub fn train(samples: &[Sample], opts: &TrainOptions) -> Result<GsPcaNetModel, PipelineError> {
    if samples.is_empty() {
        return Err(PipelineError::Data("no training images".into()));
    }
    check_classes(samples)?;
    opts.net.validate()?;
    let mut net = opts.net.clone();
    let tuned = if opts.tune_grid.is_empty() {
        None
    } else {
        let l1 = tune_lambda1(samples, opts)?;
        info!("tuning selected lambda1 = {l1}");
        net.stage1.lambda1 = l1;
        net.stage2.lambda1 = l1;
        Some(l1)
    };
    let mut model = fit_once(samples, &net, &opts.svm, opts.seed)?;
    model.provenance.tuned_lambda1 = tuned;
    Ok(model)
}

/// Training entry point for a manifest; records the dataset digest.
pub fn train_manifest(manifest: &DatasetManifest, opts: &TrainOptions) -> Result<GsPcaNetModel, PipelineError> {
    let samples = load_samples(manifest)?;
    let mut model = train(&samples, opts)?;
    model.provenance.dataset_digest = digest_bytes(&dataset_digest(manifest)?);
    Ok(model)
}

fn digest_bytes(hex: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (o, pair) in out.iter_mut().zip(hex.as_bytes().chunks(2)) {
        *o = std::str::from_utf8(pair)
            .ok()
            .and_then(|s| u8::from_str_radix(s, 16).ok())
            .unwrap_or(0);
    }
    out
}

/// Tile scores of one image plus its tile grid (with truth labels).
#[derive(Clone, Debug)]
pub struct ScoredSample {
    pub name: String,
    pub grid: TileGrid,
    pub scores: Vec<f64>,
    /// Whether tile labels come from a mask or the image label.
    pub has_mask: bool,
}

impl ScoredSample {
    pub fn tile_pairs(&self) -> impl Iterator<Item = (f64, bool)> + '_ {
        self.scores.iter().zip(&self.grid.tiles).map(|(&s, t)| (s, t.positive))
    }

    pub fn to_scored_grid(&self) -> ScoredGrid {
        ScoredGrid::new(self.scores.clone(), self.grid.label_grid())
    }
}

pub fn score_samples(model: &GsPcaNetModel, samples: &[Sample]) -> Result<Vec<ScoredSample>, PipelineError> {
    let svm = model.classifier.as_ref().ok_or(NetError::Untrained)?;
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let grid = tile_sample(s, i, &model.config)?;
            let scores = tile_features(s, &grid, &model.config, &model.channels)?
                .iter()
                .map(|f| svm_decision(svm, &f.values))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| match e {
                    SvmError::DimensionMismatch { expected, got, .. } => PipelineError::Network(NetError::Geometry(
                        format!("feature length {got} does not match the classifier's {expected}"),
                    )),
                    e => e.into(),
                })?;
            Ok(ScoredSample {
                name: s.name.clone(),
                grid,
                scores,
                has_mask: s.mask.is_some(),
            })
        })
        .collect()
}

pub fn evaluate_scored(
    scored: &[ScoredSample],
    beta: f64,
    matching: &MatchConfig,
) -> Result<MetricsReport, PipelineError> {
    let grids: Vec<ScoredGrid> = scored.iter().map(ScoredSample::to_scored_grid).collect();
    Ok(evaluate_grids(&grids, beta, matching)?)
}

/// Tile-level accuracy of a model trained on `train` and scored on `test`.
pub fn tile_accuracy(scored: &[ScoredSample]) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for (s, truth) in scored.iter().flat_map(ScoredSample::tile_pairs) {
        hit += usize::from((s >= 0.0) == truth);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

/// One selection-bias run: reseeded stratified split holding out
/// `test_fraction` of each class, train with `seed`, tile accuracy on the rest.
pub fn bias_run(samples: &[Sample], opts: &TrainOptions, test_fraction: f64, seed: u64) -> Result<f64, PipelineError> {
    let (train_idx, test_idx) = stratified_split(samples, test_fraction, seed)?;
    let run_opts = TrainOptions { seed, ..opts.clone() };
    let model = train(&pick(samples, &train_idx), &run_opts)?;
    Ok(tile_accuracy(&score_samples(&model, &pick(samples, &test_idx))?))
}

/// `n` run seeds expanded from one master seed.
pub fn derive_seeds(master: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(0x5eed);
    (0..n).map(|_| rng.next_u64()).collect()
}

pub fn load_manifest_samples(path: &Path) -> Result<Vec<Sample>, PipelineError> {
    load_samples(&crate::imagio::load_manifest(path)?)
}
