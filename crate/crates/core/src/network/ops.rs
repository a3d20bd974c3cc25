//! Per-image feature operators: zero-padded convolution, binary hashing and
//! block histograms.

use crate::patches::Plane;

/// "Same"-size cross-correlation of `plane` with a `t1 × t2` row-major kernel
/// (both odd), zero padding `(t − 1)/2` on each side.
pub fn correlate_same(plane: &Plane, kernel: &[f64], t1: usize, t2: usize) -> Plane {
    debug_assert_eq!(kernel.len(), t1 * t2);
    let (w, h) = (plane.width(), plane.height());
    let (h1, h2) = ((t1 / 2) as isize, (t2 / 2) as isize);
    let src = plane.data();
    let mut out = vec![0.0; w * h];
    for r in 0..h as isize {
        let i_lo = (h1 - r).max(0) as usize;
        let i_hi = (t1 as isize).min(h as isize - r + h1) as usize;
        for c in 0..w as isize {
            let j_lo = (h2 - c).max(0) as usize;
            let j_hi = (t2 as isize).min(w as isize - c + h2) as usize;
            let mut acc = 0.0;
            for i in i_lo..i_hi {
                let row = (r + i as isize - h1) as usize * w;
                let krow = &kernel[i * t2..(i + 1) * t2];
                for j in j_lo..j_hi {
                    acc += krow[j] * src[row + (c + j as isize - h2) as usize];
                }
            }
            out[r as usize * w + c as usize] = acc;
        }
    }
    Plane::new(w, h, out)
}

/// Per-pixel integer map with values in `[0, 2^bits − 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashMap2D {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u32>,
}

/// `T = Σ_k 2^k · H(map_k)` with `H(v) = 1` iff `v > 0`.
pub fn binary_hash(maps: &[Plane]) -> HashMap2D {
    assert!(!maps.is_empty() && maps.len() <= 32, "hash needs 1..=32 maps");
    let (w, h) = (maps[0].width(), maps[0].height());
    let mut values = vec![0u32; w * h];
    for (k, m) in maps.iter().enumerate() {
        assert_eq!((m.width(), m.height()), (w, h), "hash maps must share a size");
        for (v, &x) in values.iter_mut().zip(m.data()) {
            if x > 0.0 {
                *v |= 1 << k;
            }
        }
    }
    HashMap2D {
        width: w,
        height: h,
        values,
    }
}

/// Block start offsets along one axis: multiples of `stride`, plus a final block
/// aligned to the far edge when the stride grid does not reach it.
pub fn block_starts(dim: usize, block: usize, stride: usize) -> Vec<usize> {
    assert!(block >= 1 && block <= dim && stride >= 1, "invalid block geometry");
    let mut starts: Vec<usize> = (0..).map(|k| k * stride).take_while(|&s| s + block <= dim).collect();
    if *starts.last().unwrap() + block < dim {
        starts.push(dim - block);
    }
    starts
}

pub fn block_count(height: usize, width: usize, block: usize, stride: usize) -> usize {
    block_starts(height, block, stride).len() * block_starts(width, block, stride).len()
}

/// Histograms with `bins` bins of every block, row-major block order, appended to `out`.
pub fn block_histograms_into(map: &HashMap2D, bins: usize, block: usize, stride: usize, out: &mut Vec<f32>) {
    let rows = block_starts(map.height, block, stride);
    let cols = block_starts(map.width, block, stride);
    for &r0 in &rows {
        for &c0 in &cols {
            let base = out.len();
            out.resize(base + bins, 0.0);
            let hist = &mut out[base..];
            for r in r0..r0 + block {
                for &v in &map.values[r * map.width + c0..r * map.width + c0 + block] {
                    hist[v as usize] += 1.0;
                }
            }
        }
    }
}

pub fn block_histograms(map: &HashMap2D, bins: usize, block: usize, stride: usize) -> Vec<f32> {
    let mut out = Vec::new();
    block_histograms_into(map, bins, block, stride, &mut out);
    out
}
