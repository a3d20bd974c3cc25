//! Patch matrices for filter learning and non-overlapping evaluation tiles.
//!
//! Patches are vectorized row-major and scanned row-major over top-left
//! positions. Centering subtracts each patch's own scalar mean.

use rayon::prelude::*;
use thiserror::Error;

use crate::eval::LabelGrid;
use crate::imagio::{Image, Mask};
use crate::numerics::DenseMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatchError {
    #[error("image {height}x{width} is smaller than patch {t1}x{t2}")]
    ImageTooSmall {
        height: usize,
        width: usize,
        t1: usize,
        t2: usize,
    },
    #[error("no training images")]
    NoImages,
    #[error("image {index} is {got_h}x{got_w}, expected {want_h}x{want_w}")]
    MixedDimensions {
        index: usize,
        got_h: usize,
        got_w: usize,
        want_h: usize,
        want_w: usize,
    },
    #[error("mask is {mask_h}x{mask_w} but image is {image_h}x{image_w}")]
    MaskMismatch {
        mask_h: usize,
        mask_w: usize,
        image_h: usize,
        image_w: usize,
    },
    #[error("cannot merge channels: {0}")]
    BadChannels(String),
}

/// Real-valued single-channel map (an image channel or a filter response).
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "plane buffer has wrong length");
        Self { width, height, data }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// Top-left pixel of a patch and the image it came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchOrigin {
    pub image: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchMatrix {
    /// `t1·t2 × n_patches`.
    pub data: DenseMatrix,
    pub t1: usize,
    pub t2: usize,
    pub origins: Vec<PatchOrigin>,
    /// Scalar means removed by [`center`], one per column; `None` before centering.
    pub means: Option<Vec<f64>>,
}

impl PatchMatrix {
    pub fn len(&self) -> usize {
        self.data.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.cols() == 0
    }
}

fn check_fits(plane: &Plane, t1: usize, t2: usize) -> Result<(), PatchError> {
    if t1 == 0 || t2 == 0 || plane.height < t1 || plane.width < t2 {
        return Err(PatchError::ImageTooSmall {
            height: plane.height,
            width: plane.width,
            t1,
            t2,
        });
    }
    Ok(())
}

/// Writes the row-major vectorized `t1 × t2` patch at `(row, col)` into `out`.
#[inline]
pub fn read_patch(plane: &Plane, row: usize, col: usize, t1: usize, t2: usize, out: &mut [f64]) {
    for i in 0..t1 {
        let start = (row + i) * plane.width + col;
        out[i * t2..(i + 1) * t2].copy_from_slice(&plane.data[start..start + t2]);
    }
}

/// Subtracts the scalar mean in place and returns it.
#[inline]
pub fn center_in_place(v: &mut [f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    mean
}

/// All `ũ·ṽ` overlapping `t1 × t2` patches, uncentered, where `ũ = u − (t1 − 1)`
/// and `ṽ = v − (t2 − 1)`.
pub fn extract_overlapping(plane: &Plane, t1: usize, t2: usize, image_index: usize) -> Result<PatchMatrix, PatchError> {
    check_fits(plane, t1, t2)?;
    let rows_out = plane.height - (t1 - 1);
    let cols_out = plane.width - (t2 - 1);
    let p = t1 * t2;
    let mut data = vec![0.0; p * rows_out * cols_out];
    let mut origins = Vec::with_capacity(rows_out * cols_out);
    for (k, chunk) in data.chunks_exact_mut(p).enumerate() {
        let (row, col) = (k / cols_out, k % cols_out);
        read_patch(plane, row, col, t1, t2, chunk);
        origins.push(PatchOrigin {
            image: image_index,
            row,
            col,
        });
    }
    Ok(PatchMatrix {
        data: DenseMatrix::from_col_major(p, rows_out * cols_out, data),
        t1,
        t2,
        origins,
        means: None,
    })
}

/// Removes each column's scalar mean.
pub fn center(patches: &PatchMatrix) -> PatchMatrix {
    let mut out = patches.clone();
    let means = (0..out.data.cols())
        .map(|j| center_in_place(out.data.col_mut(j)))
        .collect();
    out.means = Some(means);
    out
}

/// `X = [X̄_1, …, X̄_N]`: centered patches of every image, in image order.
pub fn concat_training(planes: &[Plane], t1: usize, t2: usize) -> Result<PatchMatrix, PatchError> {
    let first = planes.first().ok_or(PatchError::NoImages)?;
    check_same_dims(planes)?;
    check_fits(first, t1, t2)?;
    let parts: Vec<PatchMatrix> = planes
        .iter()
        .enumerate()
        .map(|(i, p)| extract_overlapping(p, t1, t2, i).map(|m| center(&m)))
        .collect::<Result<_, _>>()?;
    let p = t1 * t2;
    let mut data = Vec::with_capacity(parts.iter().map(|m| m.len() * p).sum());
    let mut origins = Vec::new();
    let mut means = Vec::new();
    for m in parts {
        origins.extend(m.origins);
        means.extend(m.means.unwrap_or_default());
        data.extend(m.data.into_vec());
    }
    let n = origins.len();
    Ok(PatchMatrix {
        data: DenseMatrix::from_col_major(p, n, data),
        t1,
        t2,
        origins,
        means: Some(means),
    })
}

fn check_same_dims(planes: &[Plane]) -> Result<(), PatchError> {
    let Some(first) = planes.first() else {
        return Err(PatchError::NoImages);
    };
    for (index, p) in planes.iter().enumerate() {
        if (p.height, p.width) != (first.height, first.width) {
            return Err(PatchError::MixedDimensions {
                index,
                got_h: p.height,
                got_w: p.width,
                want_h: first.height,
                want_w: first.width,
            });
        }
    }
    Ok(())
}

/// Centered overlapping patches of many planes, without materializing the
/// full patch matrix. Column `j` enumerates planes in order, then positions
/// in row-major order, exactly like [`concat_training`].
pub struct PatchSet<'a> {
    planes: &'a [Plane],
    t1: usize,
    t2: usize,
    per_plane: usize,
    cols_out: usize,
}

impl<'a> PatchSet<'a> {
    pub fn new(planes: &'a [Plane], t1: usize, t2: usize) -> Result<Self, PatchError> {
        let first = planes.first().ok_or(PatchError::NoImages)?;
        check_same_dims(planes)?;
        check_fits(first, t1, t2)?;
        let rows_out = first.height - (t1 - 1);
        let cols_out = first.width - (t2 - 1);
        Ok(Self {
            planes,
            t1,
            t2,
            per_plane: rows_out * cols_out,
            cols_out,
        })
    }

    pub fn len(&self) -> usize {
        self.per_plane * self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.t1 * self.t2
    }

    pub fn origin(&self, j: usize) -> PatchOrigin {
        let k = j % self.per_plane;
        PatchOrigin {
            image: j / self.per_plane,
            row: k / self.cols_out,
            col: k % self.cols_out,
        }
    }

    /// Centered column `j` written into `out`.
    pub fn column(&self, j: usize, out: &mut [f64]) {
        let o = self.origin(j);
        read_patch(&self.planes[o.image], o.row, o.col, self.t1, self.t2, out);
        center_in_place(out);
    }

    /// Selected columns as a dense matrix.
    pub fn gather(&self, indices: &[usize]) -> DenseMatrix {
        let p = self.dim();
        let mut data = vec![0.0; p * indices.len()];
        for (chunk, &j) in data.chunks_exact_mut(p).zip(indices) {
            self.column(j, chunk);
        }
        DenseMatrix::from_col_major(p, indices.len(), data)
    }

    /// `X Xᵀ` of the centered patch matrix. Per-plane partial sums are computed
    /// in parallel and added in plane order, so the result does not depend on
    /// the thread count.
    pub fn gram(&self) -> DenseMatrix {
        let p = self.dim();
        let partials: Vec<Vec<f64>> = (0..self.planes.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = vec![0.0; p * p];
                let mut buf = vec![0.0; p];
                for k in 0..self.per_plane {
                    self.column(i * self.per_plane + k, &mut buf);
                    for b in 0..p {
                        let xb = buf[b];
                        if xb == 0.0 {
                            continue;
                        }
                        let col = &mut acc[b * p..(b + 1) * p];
                        for a in b..p {
                            col[a] += buf[a] * xb;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut total = vec![0.0; p * p];
        for part in partials {
            total.iter_mut().zip(part).for_each(|(t, v)| *t += v);
        }
        let mut g = DenseMatrix::from_col_major(p, p, total);
        g.mirror_lower();
        g
    }
}

pub fn split_channels(image: &Image) -> Vec<Plane> {
    let c = image.channels();
    (0..c)
        .map(|ch| {
            let data = image.samples().iter().skip(ch).step_by(c).copied().collect();
            Plane::new(image.width(), image.height(), data)
        })
        .collect()
}

/// Inverse of [`split_channels`].
pub fn merge_channels(planes: &[Plane]) -> Result<Image, PatchError> {
    if planes.len() != 1 && planes.len() != 3 {
        return Err(PatchError::BadChannels(format!("{} planes", planes.len())));
    }
    check_same_dims(planes)?;
    let (w, h) = (planes[0].width, planes[0].height);
    let mut samples = Vec::with_capacity(w * h * planes.len());
    for k in 0..w * h {
        samples.extend(planes.iter().map(|p| p.data[k]));
    }
    Image::new(w, h, planes.len(), samples).map_err(|e| PatchError::BadChannels(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tile {
    pub image: usize,
    pub grid_row: usize,
    pub grid_col: usize,
    /// Top-left pixel.
    pub row: usize,
    pub col: usize,
    pub positive: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TileGrid {
    pub tile: usize,
    pub rows: usize,
    pub cols: usize,
    pub theta_pos: f64,
    /// Row-major over the grid.
    pub tiles: Vec<Tile>,
}

impl TileGrid {
    pub fn label_grid(&self) -> LabelGrid {
        LabelGrid::new(self.rows, self.cols, self.tiles.iter().map(|t| t.positive).collect())
    }
}

pub const DEFAULT_TILE: usize = 20;
pub const DEFAULT_THETA_POS: f64 = 0.5;

/// Non-overlapping `tile × tile` grid; edge remainders are dropped. With a mask, a
/// tile is positive when at least `theta_pos` of its pixels are inside; without
/// one, every tile gets `default_label`.
pub fn tile_image(
    image: &Image,
    mask: Option<&Mask>,
    tile: usize,
    theta_pos: f64,
    default_label: bool,
    image_index: usize,
) -> Result<TileGrid, PatchError> {
    if tile == 0 || tile > image.width() || tile > image.height() {
        return Err(PatchError::ImageTooSmall {
            height: image.height(),
            width: image.width(),
            t1: tile,
            t2: tile,
        });
    }
    if let Some(m) = mask {
        if (m.width(), m.height()) != (image.width(), image.height()) {
            return Err(PatchError::MaskMismatch {
                mask_h: m.height(),
                mask_w: m.width(),
                image_h: image.height(),
                image_w: image.width(),
            });
        }
    }
    let rows = image.height() / tile;
    let cols = image.width() / tile;
    let area = (tile * tile) as f64;
    let mut tiles = Vec::with_capacity(rows * cols);
    for gr in 0..rows {
        for gc in 0..cols {
            let (row, col) = (gr * tile, gc * tile);
            let positive = match mask {
                Some(m) => m.count_inside(row, col, tile, tile) as f64 / area >= theta_pos,
                None => default_label,
            };
            tiles.push(Tile {
                image: image_index,
                grid_row: gr,
                grid_col: gc,
                row,
                col,
                positive,
            });
        }
    }
    Ok(TileGrid {
        tile,
        rows,
        cols,
        theta_pos,
        tiles,
    })
}
