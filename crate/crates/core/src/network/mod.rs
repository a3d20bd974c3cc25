//! Two-stage filter network: filters learned by graph-regularized sparse PCA,
//! zero-padded convolution, binary hashing of stage-2 responses and
//! block-histogram pooling.
//!
//! Filters are learned from whole training images; features are extracted per
//! evaluation tile, each tile convolved on its own with zero padding.

mod model_io;
mod ops;

pub use model_io::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use ops::{binary_hash, block_count, block_histograms, block_starts, correlate_same, HashMap2D};

use std::path::PathBuf;

use log::{debug, info};
use rand::seq::index;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::classifier::SvmModel;
use crate::graph::{build_knn, graph_gram, laplacian, subsample, GraphError};
use crate::imagio::Image;
use crate::numerics::DenseMatrix;
use crate::patches::{split_channels, PatchError, PatchSet, Plane};
use crate::spca::{gs_pca_fit_gram, Basis, GsPcaConfig, SpcaError};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("stage {stage} has {patches} patches but needs at least {needed}")]
    InsufficientPatches { stage: u8, patches: usize, needed: usize },
    #[error("model expects {model} channel(s) but the image has {image}")]
    ChannelMismatch { model: usize, image: usize },
    #[error("model has no trained filters")]
    Untrained,
    #[error("geometry mismatch: {0}")]
    Geometry(String),
    #[error("stage {stage}: {source}")]
    Solver {
        stage: u8,
        #[source]
        source: SpcaError,
    },
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported model format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },
    #[error("model file truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("model file checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
}

/// Graph construction settings for the filter-learning solver.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphConfig {
    /// Neighbors per node.
    pub k: usize,
    /// Node cap; larger patch pools are reduced to this many k-means centers.
    pub max_nodes: usize,
    /// Patches drawn uniformly (seeded) before clustering.
    pub pool: usize,
    /// Build one graph per class instead of one global graph.
    pub per_class: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            k: 5,
            max_nodes: 2000,
            pool: 8000,
            per_class: false,
        }
    }
}

pub const MAX_L2: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    /// Square filter side `t1 = t2` (odd).
    pub patch: usize,
    pub l1: usize,
    pub l2: usize,
    pub block: usize,
    pub stride: usize,
    /// Evaluation tile side.
    pub tile: usize,
    /// Minimum tumor coverage for a positive tile.
    pub theta_pos: f64,
    pub stage1: GsPcaConfig,
    pub stage2: GsPcaConfig,
    pub graph: GraphConfig,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            patch: 5,
            l1: 9,
            l2: 8,
            block: 8,
            stride: 4,
            tile: 20,
            theta_pos: 0.5,
            stage1: GsPcaConfig::new(9),
            stage2: GsPcaConfig::new(8),
            graph: GraphConfig::default(),
        }
    }
}

impl NetConfig {
    /// Sets `L1`/`L2` and keeps the solver component counts in step.
    pub fn with_filters(mut self, l1: usize, l2: usize) -> Self {
        self.l1 = l1;
        self.l2 = l2;
        self.stage1.q = l1;
        self.stage2.q = l2;
        self
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Config(m));
        if self.patch == 0 || self.patch % 2 == 0 {
            return bad(format!("patch size must be odd, got {}", self.patch));
        }
        let p = self.patch * self.patch;
        if self.l1 == 0 || self.l1 > p {
            return bad(format!("L1 must be in 1..={p}, got {}", self.l1));
        }
        if self.l2 == 0 || self.l2 > MAX_L2.min(p) {
            return bad(format!("L2 must be in 1..={}, got {}", MAX_L2.min(p), self.l2));
        }
        if self.stage1.q != self.l1 || self.stage2.q != self.l2 {
            return bad("solver component counts must equal L1 and L2".into());
        }
        if self.block == 0 || self.stride == 0 {
            return bad("block size and stride must be >= 1".into());
        }
        if self.block > self.tile {
            return bad(format!("block {} exceeds tile {}", self.block, self.tile));
        }
        if !(0.0..=1.0).contains(&self.theta_pos) || self.theta_pos == 0.0 {
            return bad(format!("theta_pos must be in (0, 1], got {}", self.theta_pos));
        }
        if self.graph.k == 0 || self.graph.max_nodes < 2 || self.graph.pool < 2 {
            return bad("graph k must be >= 1, max_nodes and pool >= 2".into());
        }
        self.stage1
            .validate()
            .and_then(|_| self.stage2.validate())
            .map_err(|e| NetError::Config(e.to_string()))
    }

    pub fn bins(&self) -> usize {
        1 << self.l2
    }

    /// Feature length for `channels` channels on a `height × width` input.
    pub fn feature_len(&self, channels: usize, height: usize, width: usize) -> usize {
        channels * self.bins() * self.l1 * block_count(height, width, self.block, self.stride)
    }
}

/// One stage's filter bank; each filter is a row-major `t1 × t2` kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct StageFilters {
    pub stage: u8,
    pub t1: usize,
    pub t2: usize,
    pub filters: Vec<Vec<f64>>,
}

impl StageFilters {
    pub fn from_basis(stage: u8, t1: usize, t2: usize, v: &DenseMatrix) -> Self {
        assert_eq!(v.rows(), t1 * t2, "basis rows must equal t1·t2");
        Self {
            stage,
            t1,
            t2,
            filters: (0..v.cols()).map(|j| v.col(j).to_vec()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelFilters {
    pub stage1: StageFilters,
    pub stage2: StageFilters,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Provenance {
    pub seed: u64,
    /// SHA-256 of the training dataset.
    pub dataset_digest: [u8; 32],
    /// λ1 chosen by validation, when tuning ran.
    pub tuned_lambda1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GsPcaNetModel {
    pub config: NetConfig,
    pub channels: Vec<ChannelFilters>,
    pub classifier: Option<SvmModel>,
    pub provenance: Provenance,
}

/// Histogram feature vector of one input (normally one tile).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f32>,
    /// Blocks per stage-1 map.
    pub blocks: usize,
    pub bins: usize,
}

impl AsRef<[f32]> for FeatureVector {
    fn as_ref(&self) -> &[f32] {
        &self.values
    }
}

/// Filters for one stage plus the solver's diagnostics.
#[derive(Clone, Debug)]
pub struct LearnedStage {
    pub filters: StageFilters,
    pub basis: Basis,
    pub graph_nodes: usize,
}

/// Centered-patch matrix of a stage, scaled by `1/√n` so penalties do not
/// depend on how many patches there are: returns `G = X Xᵀ / n`.
fn scaled_gram(set: &PatchSet) -> DenseMatrix {
    set.gram().scaled(1.0 / set.len() as f64)
}

/// `X_g L X_gᵀ / m` over a seeded uniform pool of patches reduced to at most
/// `max_nodes` k-means centers.
fn graph_term(set: &PatchSet, graph: &GraphConfig, rng: &mut ChaCha8Rng) -> Result<(DenseMatrix, usize), NetError> {
    let take = graph.pool.min(set.len());
    let mut picks = index::sample(rng, set.len(), take).into_vec();
    picks.sort_unstable();
    let pool = set.gather(&picks);
    let reduced = subsample(&pool, graph.max_nodes, rng.next_u64())?;
    let m = reduced.points.cols();
    if m <= graph.k {
        return Err(NetError::Graph(GraphError::TooFewPoints { n: m, k: graph.k }));
    }
    let l = laplacian(&build_knn(&reduced.points, graph.k)?);
    Ok((graph_gram(&reduced.points, &l)?.scaled(1.0 / m as f64), m))
}

/// Learns one stage's filters from the overlapping patches of `planes`.
/// `groups` assigns each plane to a class for per-class graphs.
pub fn learn_stage(
    stage: u8,
    planes: &[Plane],
    groups: &[usize],
    solver: &GsPcaConfig,
    graph: &GraphConfig,
    t: usize,
    seed: u64,
) -> Result<LearnedStage, NetError> {
    assert_eq!(planes.len(), groups.len(), "one group per plane");
    let started = std::time::Instant::now();
    let set = PatchSet::new(planes, t, t)?;
    if set.len() < solver.q {
        return Err(NetError::InsufficientPatches {
            stage,
            patches: set.len(),
            needed: solver.q,
        });
    }
    let g = scaled_gram(&set);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64);
    let (h, nodes) = if solver.rho > 0.0 {
        if graph.per_class {
            let mut ids: Vec<usize> = groups.to_vec();
            ids.sort_unstable();
            ids.dedup();
            let mut total: Option<DenseMatrix> = None;
            let mut nodes = 0;
            for id in ids {
                let subset: Vec<Plane> = planes
                    .iter()
                    .zip(groups)
                    .filter(|(_, &g)| g == id)
                    .map(|(p, _)| p.clone())
                    .collect();
                let sub = PatchSet::new(&subset, t, t)?;
                let per = GraphConfig {
                    pool: (graph.pool / 2).max(2),
                    max_nodes: (graph.max_nodes / 2).max(2),
                    ..graph.clone()
                };
                let (h, m) = graph_term(&sub, &per, &mut rng)?;
                nodes += m;
                total = Some(match total {
                    Some(acc) => acc.add(&h),
                    None => h,
                });
            }
            (total, nodes)
        } else {
            let (h, m) = graph_term(&set, graph, &mut rng)?;
            (Some(h), m)
        }
    } else {
        (None, 0)
    };
    let basis = gs_pca_fit_gram(&g, h.as_ref(), solver).map_err(|source| NetError::Solver { stage, source })?;
    let trace = &basis.objective_trace;
    info!(
        "stage {stage}: {} filters from {} patches, {} graph nodes, objective {:.6} -> {:.6} in {} iterations{} ({:.2?})",
        solver.q,
        set.len(),
        nodes,
        trace.first().copied().unwrap_or(f64::NAN),
        trace.last().copied().unwrap_or(f64::NAN),
        basis.iterations,
        if basis.converged { "" } else { " (iteration cap)" },
        started.elapsed()
    );
    debug!("stage {stage} objective trace: {trace:?}");
    Ok(LearnedStage {
        filters: StageFilters::from_basis(stage, t, t, &basis.v),
        basis,
        graph_nodes: nodes,
    })
}

/// Stage-1 filters from the patches of every training image (single channel).
pub fn learn_stage1(planes: &[Plane], config: &NetConfig, seed: u64) -> Result<StageFilters, NetError> {
    config.validate()?;
    let groups = vec![0; planes.len()];
    learn_stage(1, planes, &groups, &config.stage1, &config.graph, config.patch, seed).map(|s| s.filters)
}

/// One output map per filter.
pub fn convolve_bank(plane: &Plane, bank: &StageFilters) -> Vec<Plane> {
    bank.filters
        .iter()
        .map(|f| correlate_same(plane, f, bank.t1, bank.t2))
        .collect()
}

/// `L1·L2` maps ordered `(l1, l2)` with `l2` fastest.
pub fn forward_stage2(stage1_maps: &[Plane], bank: &StageFilters) -> Vec<Plane> {
    stage1_maps.iter().flat_map(|m| convolve_bank(m, bank)).collect()
}

/// Learns both stages for every channel. `classes[i]` is the class id of image `i`
/// (used only for per-class graphs).
pub fn learn_filters(
    images: &[Image],
    classes: &[usize],
    config: &NetConfig,
    seed: u64,
) -> Result<Vec<ChannelFilters>, NetError> {
    config.validate()?;
    let first = images.first().ok_or(NetError::Patch(PatchError::NoImages))?;
    let channels = first.channels();
    if let Some(bad) = images.iter().find(|im| im.channels() != channels) {
        return Err(NetError::ChannelMismatch {
            model: channels,
            image: bad.channels(),
        });
    }
    let split: Vec<Vec<Plane>> = images.iter().map(split_channels).collect();
    let mut out = Vec::with_capacity(channels);
    for ch in 0..channels {
        let planes: Vec<Plane> = split.iter().map(|s| s[ch].clone()).collect();
        let channel_seed = seed ^ ((ch as u64 + 1) << 56);
        let s1 = learn_stage(
            1,
            &planes,
            classes,
            &config.stage1,
            &config.graph,
            config.patch,
            channel_seed,
        )?;
        let maps: Vec<Plane> = planes
            .par_iter()
            .flat_map_iter(|p| convolve_bank(p, &s1.filters))
            .collect();
        let groups: Vec<usize> = classes
            .iter()
            .flat_map(|&c| std::iter::repeat_n(c, config.l1))
            .collect();
        let s2 = learn_stage(
            2,
            &maps,
            &groups,
            &config.stage2,
            &config.graph,
            config.patch,
            channel_seed,
        )?;
        out.push(ChannelFilters {
            stage1: s1.filters,
            stage2: s2.filters,
        });
    }
    Ok(out)
}

fn check_geometry(config: &NetConfig, filters: &ChannelFilters) -> Result<(), NetError> {
    let ok = |s: &StageFilters, n: usize| {
        s.len() == n && s.t1 == config.patch && s.t2 == config.patch && s.filters.iter().all(|f| f.len() == s.t1 * s.t2)
    };
    if !ok(&filters.stage1, config.l1) || !ok(&filters.stage2, config.l2) {
        return Err(NetError::Geometry("filter bank does not match configuration".into()));
    }
    Ok(())
}

/// Histogram features of one image (typically a tile) given per-channel filters.
pub fn features_with(
    image: &Image,
    config: &NetConfig,
    channels: &[ChannelFilters],
) -> Result<FeatureVector, NetError> {
    if channels.is_empty() {
        return Err(NetError::Untrained);
    }
    if image.channels() != channels.len() {
        return Err(NetError::ChannelMismatch {
            model: channels.len(),
            image: image.channels(),
        });
    }
    if config.block > image.width() || config.block > image.height() {
        return Err(NetError::Geometry(format!(
            "image {}x{} is smaller than the {} pixel block",
            image.height(),
            image.width(),
            config.block
        )));
    }
    let blocks = block_count(image.height(), image.width(), config.block, config.stride);
    let bins = config.bins();
    let mut values = Vec::with_capacity(channels.len() * config.l1 * blocks * bins);
    for (plane, bank) in split_channels(image).iter().zip(channels) {
        check_geometry(config, bank)?;
        for map1 in convolve_bank(plane, &bank.stage1) {
            let hashed = binary_hash(&convolve_bank(&map1, &bank.stage2));
            ops::block_histograms_into(&hashed, bins, config.block, config.stride, &mut values);
        }
    }
    Ok(FeatureVector { values, blocks, bins })
}

pub fn extract_features(image: &Image, model: &GsPcaNetModel) -> Result<FeatureVector, NetError> {
    features_with(image, &model.config, &model.channels)
}
