//! Deterministic two-class texture dataset.
//!
//! Healthy tissue is a bright background with smooth, low-frequency Gaussian
//! blobs. Cancerous images carry one or two rectangular tumors, aligned to a
//! `tumor_cell`-pixel grid, filled with a darker high-frequency oriented
//! grating (random frequency, orientation and phase per tumor). Every image
//! gets a mask; healthy masks are empty.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::manifest::{dataset_digest, write_manifest, ClassLabel, DatasetManifest, ManifestEntry, Split};
use super::{quantize, write_mask, write_pnm, Image, ImagioError, Mask};

const HEALTHY_BASE: f64 = 0.68;
const TUMOR_MEAN: f64 = 0.45;
const TUMOR_AMPLITUDE: f64 = 0.25;
const RGB_TINT: [f64; 3] = [0.95, 0.78, 0.88];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub per_class: usize,
    /// Square image side in pixels.
    pub size: usize,
    pub channels: usize,
    /// Grating frequency range in cycles per pixel.
    pub grating_freq: (f64, f64),
    /// Blobs per 1000 square pixels.
    pub blob_density: f64,
    pub noise_std: f64,
    /// Tumors are unions of whole cells of this size.
    pub tumor_cell: usize,
    /// Fraction of each class written to `test.csv`.
    pub test_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            per_class: 20,
            size: 64,
            channels: 1,
            grating_freq: (0.18, 0.33),
            blob_density: 2.0,
            noise_std: 0.05,
            tumor_cell: 20,
            test_fraction: 0.5,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), ImagioError> {
        let bad = |m: String| Err(ImagioError::InvalidImage(format!("synthetic spec: {m}")));
        if self.per_class == 0 {
            return bad("images per class must be >= 1".into());
        }
        if self.size == 0 || self.tumor_cell == 0 {
            return bad("image size and tumor cell must be >= 1".into());
        }
        if self.channels != 1 && self.channels != 3 {
            return bad(format!("channels must be 1 or 3, got {}", self.channels));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise std must be >= 0, got {}", self.noise_std));
        }
        let (lo, hi) = self.grating_freq;
        if !(lo > 0.0 && lo <= hi && hi <= 0.5) {
            return bad(format!(
                "grating frequency range ({lo}, {hi}) must satisfy 0 < lo <= hi <= 0.5"
            ));
        }
        if !(self.blob_density >= 0.0 && self.blob_density.is_finite()) {
            return bad("blob density must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad("test fraction must be in [0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub manifest: DatasetManifest,
    pub train: DatasetManifest,
    pub test: DatasetManifest,
    pub manifest_path: PathBuf,
    pub train_path: PathBuf,
    /// Absent when the test split is empty.
    pub test_path: Option<PathBuf>,
    /// SHA-256 of the generated dataset.
    pub digest: String,
}

#[derive(Clone, Copy)]
struct CellRect {
    row: usize,
    col: usize,
    h: usize,
    w: usize,
}

impl CellRect {
    /// True when the rectangles overlap or touch along an edge or corner.
    fn touches(&self, o: &CellRect) -> bool {
        self.row <= o.row + o.h && o.row <= self.row + self.h && self.col <= o.col + o.w && o.col <= self.col + self.w
    }
}

fn rng_for(seed: u64, label: ClassLabel, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class_code: u64 = if label.is_positive() { 1 } else { 2 };
    rng.set_stream((class_code << 32) | index as u64);
    rng
}

fn place_tumors(rng: &mut ChaCha8Rng, grid: usize) -> Vec<CellRect> {
    let max_side = grid.min(2);
    let random_rect = |rng: &mut ChaCha8Rng| {
        let h = rng.random_range(1..=max_side);
        let w = rng.random_range(1..=max_side);
        CellRect {
            row: rng.random_range(0..=grid - h),
            col: rng.random_range(0..=grid - w),
            h,
            w,
        }
    };
    let first = random_rect(rng);
    let mut tumors = vec![first];
    if rng.random_bool(0.5) {
        for _ in 0..20 {
            let cand = random_rect(rng);
            if !cand.touches(&first) {
                tumors.push(cand);
                break;
            }
        }
    }
    tumors
}

/// Renders image `index` of class `label` exactly as `generate_synthetic` writes it
/// (samples already quantized to multiples of 1/255).
pub fn render_sample(spec: &SynthSpec, label: ClassLabel, index: usize) -> (Image, Mask) {
    let n = spec.size;
    let mut rng = rng_for(spec.seed, label, index);

    let mut gray = vec![HEALTHY_BASE; n * n];
    let blob_count = ((spec.blob_density * (n * n) as f64 / 1000.0).round() as usize).max(1);
    for _ in 0..blob_count {
        let cy = rng.random_range(0.0..n as f64);
        let cx = rng.random_range(0.0..n as f64);
        let sigma: f64 = rng.random_range(4.0..9.0);
        let amp = rng.random_range(-0.28..0.12);
        let inv = 1.0 / (2.0 * sigma * sigma);
        for r in 0..n {
            for c in 0..n {
                let d2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
                gray[r * n + c] += amp * (-d2 * inv).exp();
            }
        }
    }

    let mut mask = Mask::empty(n, n);
    if label.is_positive() {
        let cell = spec.tumor_cell;
        let grid = n / cell;
        let rects: Vec<(usize, usize, usize, usize)> = if grid == 0 {
            vec![(0, 0, n, n)]
        } else {
            place_tumors(&mut rng, grid)
                .into_iter()
                .map(|t| (t.row * cell, t.col * cell, t.h * cell, t.w * cell))
                .collect()
        };
        for (r0, c0, h, w) in rects {
            let freq = rng.random_range(spec.grating_freq.0..=spec.grating_freq.1);
            let theta = rng.random_range(0.0..PI);
            let phase = rng.random_range(0.0..2.0 * PI);
            let (ct, st) = (theta.cos(), theta.sin());
            for r in r0..r0 + h {
                for c in c0..c0 + w {
                    let t = c as f64 * ct + r as f64 * st;
                    gray[r * n + c] = TUMOR_MEAN + TUMOR_AMPLITUDE * (2.0 * PI * freq * t + phase).sin();
                    mask.set(r, c, true);
                }
            }
        }
    }

    let noise = Normal::new(0.0, spec.noise_std).expect("validated noise std");
    let mut samples = Vec::with_capacity(n * n * spec.channels);
    for &v in &gray {
        for ch in 0..spec.channels {
            let base = if spec.channels == 3 {
                v * RGB_TINT[ch] + (1.0 - RGB_TINT[ch]) * 0.85
            } else {
                v
            };
            let noisy = if spec.noise_std > 0.0 {
                base + noise.sample(&mut rng)
            } else {
                base
            };
            samples.push(quantize(noisy.clamp(0.0, 1.0)) as f64 / 255.0);
        }
    }
    let image = Image::new(n, n, spec.channels, samples).expect("synthetic samples are in range");
    (image, mask)
}

/// Writes the dataset under `out_dir`: images, masks, `manifest.csv`, `train.csv`
/// and (if non-empty) `test.csv`.
pub fn generate_synthetic(spec: &SynthSpec, out_dir: &Path) -> Result<SynthOutput, ImagioError> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| ImagioError::io(out_dir, e))?;

    let ext = if spec.channels == 3 { "ppm" } else { "pgm" };
    let jobs: Vec<(ClassLabel, usize)> = [ClassLabel::Cancerous, ClassLabel::Healthy]
        .into_iter()
        .flat_map(|l| (0..spec.per_class).map(move |i| (l, i)))
        .collect();
    let rendered: Vec<(Image, Mask)> = jobs.par_iter().map(|&(l, i)| render_sample(spec, l, i)).collect();

    let n_test = (spec.per_class as f64 * spec.test_fraction).floor() as usize;
    let n_train = spec.per_class - n_test;
    let mut all = Vec::new();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for ((label, index), (image, mask)) in jobs.iter().zip(&rendered) {
        let stem = format!("{}_{index:03}", label.as_str());
        let image_path = out_dir.join(format!("{stem}.{ext}"));
        let mask_path = out_dir.join(format!("{stem}_mask.pgm"));
        write_pnm(image, &image_path)?;
        write_mask(mask, &mask_path)?;
        let entry = ManifestEntry {
            path: image_path,
            label: *label,
            mask: Some(mask_path),
        };
        if *index < n_train {
            train.push(entry.clone());
        } else {
            test.push(entry.clone());
        }
        all.push(entry);
    }

    let manifest = DatasetManifest {
        entries: all,
        split: None,
    };
    let train = DatasetManifest {
        entries: train,
        split: Some(Split::Train),
    };
    let test = DatasetManifest {
        entries: test,
        split: Some(Split::Test),
    };
    let manifest_path = out_dir.join("manifest.csv");
    let train_path = out_dir.join("train.csv");
    write_manifest(&manifest, &manifest_path)?;
    write_manifest(&train, &train_path)?;
    let test_path = if test.is_empty() {
        None
    } else {
        let p = out_dir.join("test.csv");
        write_manifest(&test, &p)?;
        Some(p)
    };
    let digest = dataset_digest(&manifest)?;
    Ok(SynthOutput {
        manifest,
        train,
        test,
        manifest_path,
        train_path,
        test_path,
        digest,
    })
}
