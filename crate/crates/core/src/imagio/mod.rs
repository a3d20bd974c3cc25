//! Image and dataset I/O: binary PNM codec, CSV manifests, and a deterministic
//! synthetic texture dataset generator.

mod manifest;
mod pnm;
mod synth;

pub use manifest::{dataset_digest, load_manifest, write_manifest, ClassLabel, DatasetManifest, ManifestEntry, Split};
pub use pnm::{decode_pnm, encode_pnm, quantize, read_mask, read_pnm, write_mask, write_pnm};
pub use synth::{generate_synthetic, render_sample, SynthOutput, SynthSpec};

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagioError {
    #[error("malformed PNM at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("truncated PNM raster at byte {offset}: expected {expected} bytes, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("unsupported PNM maxval {maxval} at byte {offset} (only 255 is supported)")]
    UnsupportedMaxval { offset: usize, maxval: usize },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<ImagioError>,
    },
    #[error("manifest row {row}: unknown label {token:?} (allowed: cancerous, healthy)")]
    UnknownLabel { row: usize, token: String },
    #[error("manifest row {row}: mask is {mask_w}x{mask_h} but image is {image_w}x{image_h}")]
    MaskMismatch {
        row: usize,
        mask_w: usize,
        mask_h: usize,
        image_w: usize,
        image_h: usize,
    },
    #[error("manifest: {0}")]
    Manifest(String),
}

impl ImagioError {
    pub(crate) fn malformed(offset: usize, reason: impl Into<String>) -> Self {
        Self::Malformed {
            offset,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn with_path(self, path: &Path) -> Self {
        match self {
            e @ (Self::Io { .. } | Self::InFile { .. }) => e,
            e => Self::InFile {
                path: path.to_path_buf(),
                source: Box::new(e),
            },
        }
    }

    /// True for failures of the underlying file system rather than bad content.
    pub fn is_io(&self) -> bool {
        match self {
            Self::Io { .. } => true,
            Self::InFile { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

/// Interleaved row-major image with samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<f64>) -> Result<Self, ImagioError> {
        if width == 0 || height == 0 {
            return Err(ImagioError::InvalidImage(format!("zero dimension {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(ImagioError::InvalidImage(format!(
                "{channels} channels (expected 1 or 3)"
            )));
        }
        if samples.len() != width * height * channels {
            return Err(ImagioError::InvalidImage(format!(
                "{} samples for {width}x{height}x{channels}",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImagioError::InvalidImage(format!("sample {bad} outside [0,1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.samples[(row * self.width + col) * self.channels + channel]
    }

    /// Sub-image of `h × w` pixels with top-left corner `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, h: usize, w: usize) -> Result<Image, ImagioError> {
        if h == 0 || w == 0 || row + h > self.height || col + w > self.width {
            return Err(ImagioError::InvalidImage(format!(
                "crop {h}x{w} at ({row},{col}) outside {}x{}",
                self.height, self.width
            )));
        }
        let c = self.channels;
        let mut samples = Vec::with_capacity(h * w * c);
        for r in row..row + h {
            let start = (r * self.width + col) * c;
            samples.extend_from_slice(&self.samples[start..start + w * c]);
        }
        Ok(Image {
            width: w,
            height: h,
            channels: c,
            samples,
        })
    }
}

/// Binary tumor mask; `true` means inside a tumor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    inside: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, inside: Vec<bool>) -> Self {
        assert_eq!(inside.len(), width * height, "mask buffer has wrong length");
        Self { width, height, inside }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![false; width * height])
    }

    /// Gray image to mask: a pixel is inside when its byte value exceeds 127.
    pub fn from_image(image: &Image) -> Result<Self, ImagioError> {
        if image.channels() != 1 {
            return Err(ImagioError::InvalidImage("mask must be single-channel (P5)".into()));
        }
        let inside = image.samples().iter().map(|&v| quantize(v) > 127).collect();
        Ok(Self::new(image.width(), image.height(), inside))
    }

    pub fn to_image(&self) -> Image {
        let samples = self.inside.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Image::new(self.width, self.height, 1, samples).expect("mask dimensions are valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.inside[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.inside[row * self.width + col] = value;
    }

    /// Number of inside pixels in the `h × w` window at `(row, col)`.
    pub fn count_inside(&self, row: usize, col: usize, h: usize, w: usize) -> usize {
        (row..row + h)
            .map(|r| (col..col + w).filter(|&c| self.get(r, c)).count())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn image_invariants_are_enforced() {
        assert!(Image::new(0, 1, 1, vec![]).is_err());
        assert!(Image::new(1, 1, 2, vec![0.0, 0.0]).is_err());
        assert!(Image::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Image::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(Image::new(2, 1, 1, vec![0.0]).is_err());
    }

    #[test]
    fn crop_takes_window() {
        let img = Image::new(3, 2, 1, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let c = img.crop(1, 1, 1, 2).unwrap();
        assert_eq!(c.samples(), &[0.4, 0.5]);
        assert!(img.crop(1, 1, 2, 2).is_err());
    }

    #[test]
    fn mask_threshold_at_127() {
        let img = Image::new(2, 1, 1, vec![127.0 / 255.0, 128.0 / 255.0]).unwrap();
        let m = Mask::from_image(&img).unwrap();
        assert!(!m.get(0, 0));
        assert!(m.get(0, 1));
    }

    proptest! {
        #[test]
        fn pnm_round_trip_is_identity(
            w in 1usize..9, h in 1usize..9, rgb in any::<bool>(),
            seed in proptest::collection::vec(any::<u8>(), 243)
        ) {
            let c = if rgb { 3 } else { 1 };
            let samples: Vec<f64> = (0..w * h * c).map(|i| seed[i % seed.len()] as f64 / 255.0).collect();
            let img = Image::new(w, h, c, samples).unwrap();
            let back = decode_pnm(&encode_pnm(&img)).unwrap();
            prop_assert_eq!(back, img);
        }

        #[test]
        fn corrupted_headers_never_yield_invalid_images(bytes in proptest::collection::vec(any::<u8>(), 0..64), prefix in 0usize..3) {
            let mut data = match prefix {
                0 => b"P5 ".to_vec(),
                1 => b"P6\n2 ".to_vec(),
                _ => Vec::new(),
            };
            data.extend(bytes);
            if let Ok(img) = decode_pnm(&data) {
                prop_assert!(img.width() >= 1 && img.height() >= 1);
                prop_assert_eq!(img.samples().len(), img.width() * img.height() * img.channels());
                prop_assert!(img.samples().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
