//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use super::matrix::{fix_sign, DenseMatrix};
use super::NumericsError;

const MAX_SWEEPS: usize = 100;

/// Leading eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// `n × k`, orthonormal columns, largest-magnitude entry of each column positive.
    pub vectors: DenseMatrix,
}

/// Top-`k` eigenpairs of the symmetric matrix `s`.
///
/// The input must be symmetric to `1e-10` relative to its largest entry; it is
/// symmetrized (averaged) before rotating.
pub fn sym_eigen(s: &DenseMatrix, k: usize) -> Result<SymEigen, NumericsError> {
    let n = s.rows();
    if s.cols() != n {
        return Err(NumericsError::NotSquare {
            rows: n,
            cols: s.cols(),
        });
    }
    if k > n {
        return Err(NumericsError::TooManyComponents {
            requested: k,
            available: n,
        });
    }
    if !s.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let scale = s.max_abs();
    let mut asym = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            asym = asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if asym > 1e-10 * scale {
        return Err(NumericsError::Asymmetric { deviation: asym });
    }

    let mut a = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let mut v = DenseMatrix::identity(n);
    let total = a.frobenius_norm();

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for j in 0..n {
            for i in (j + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their rotation order
    order.sort_by(|&x, &y| a[(y, y)].total_cmp(&a[(x, x)]));

    let values = order.iter().take(k).map(|&i| a[(i, i)]).collect();
    let mut vectors = DenseMatrix::zeros(n, k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        let col = vectors.col_mut(dst);
        col.copy_from_slice(v.col(src));
        fix_sign(col);
    }
    Ok(SymEigen { values, vectors })
}

fn rotate(a: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_infinite() {
        0.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    if t == 0.0 {
        return;
    }
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.rows();

    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a[(r, p)];
        let arq = a[(r, q)];
        let new_rp = c * arp - s * arq;
        let new_rq = s * arp + c * arq;
        a[(r, p)] = new_rp;
        a[(p, r)] = new_rp;
        a[(r, q)] = new_rq;
        a[(q, r)] = new_rq;
    }
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    let (vp, vq) = v.col_pair_mut(p, q);
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}
