//! One-sided (Hestenes) Jacobi thin SVD.

use super::matrix::{dot, fix_sign, norm2, DenseMatrix};

const MAX_SWEEPS: usize = 80;

/// `X = U · diag(S) · Vᵀ` with `r = min(rows, cols)` columns in `U` and `V`.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl ThinSvd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            us.col_mut(j).iter_mut().for_each(|x| *x *= sj);
        }
        us.matmul(&self.v.transpose())
    }

    /// Number of singular values above `tol · s[0]`.
    pub fn rank(&self, tol: f64) -> usize {
        let top = self.s.first().copied().unwrap_or(0.0);
        self.s.iter().filter(|&&s| s > tol * top && s > 0.0).count()
    }
}

/// Thin SVD of any `p × n` matrix.
///
/// Singular values are descending; each column of `U` has its largest-magnitude
/// entry positive (with `V` flipped to match). Columns of `U` belonging to zero
/// singular values are completed to an orthonormal set.
pub fn thin_svd(x: &DenseMatrix) -> ThinSvd {
    if x.rows() >= x.cols() {
        tall_svd(x)
    } else {
        let t = tall_svd(&x.transpose());
        // Xᵀ = U S Vᵀ  =>  X = V S Uᵀ
        let mut out = ThinSvd { u: t.v, s: t.s, v: t.u };
        normalize_signs(&mut out);
        out
    }
}

fn tall_svd(x: &DenseMatrix) -> ThinSvd {
    let (m, n) = (x.rows(), x.cols());
    let mut a = x.clone();
    let mut v = DenseMatrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(a.col(p), a.col(p));
                let beta = dot(a.col(q), a.col(q));
                let gamma = dot(a.col(p), a.col(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotated = true;
                apply_rotation(&mut a, p, q, c, s);
                apply_rotation(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| norm2(a.col(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let top = norms.iter().cloned().fold(0.0, f64::max);
    let cutoff = top * f64::EPSILON * (m.max(n) as f64);
    let mut u = DenseMatrix::zeros(m, n);
    let mut s = Vec::with_capacity(n);
    let mut vv = DenseMatrix::zeros(n, n);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        vv.col_mut(dst).copy_from_slice(v.col(src));
        if sigma > cutoff && sigma > 0.0 {
            s.push(sigma);
            for (o, a) in u.col_mut(dst).iter_mut().zip(a.col(src)) {
                *o = a / sigma;
            }
        } else {
            s.push(0.0);
            missing.push(dst);
        }
    }
    complete_orthonormal(&mut u, &missing);

    let mut out = ThinSvd { u, s, v: vv };
    normalize_signs(&mut out);
    out
}

fn apply_rotation(m: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let (cp, cq) = m.col_pair_mut(p, q);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the listed columns with unit vectors orthogonal to every other column.
fn complete_orthonormal(u: &mut DenseMatrix, missing: &[usize]) {
    let m = u.rows();
    let mut filled: Vec<usize> = (0..u.cols()).filter(|j| !missing.contains(j)).collect();
    let mut candidate = 0usize;
    for &target in missing {
        loop {
            assert!(candidate < m, "cannot complete orthonormal basis");
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            // two passes of Gram-Schmidt for stability
            for _ in 0..2 {
                for &j in &filled {
                    let proj = dot(&e, u.col(j));
                    for (x, b) in e.iter_mut().zip(u.col(j)) {
                        *x -= proj * b;
                    }
                }
            }
            let nrm = norm2(&e);
            if nrm > 0.5 {
                for (o, x) in u.col_mut(target).iter_mut().zip(&e) {
                    *o = x / nrm;
                }
                filled.push(target);
                break;
            }
        }
    }
}

fn normalize_signs(svd: &mut ThinSvd) {
    for j in 0..svd.u.cols() {
        if fix_sign(svd.u.col_mut(j)) {
            svd.v.col_mut(j).iter_mut().for_each(|x| *x = -*x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_has_single_singular_value() {
        let u = [1.0, 2.0, 2.0];
        let v = [3.0, 4.0];
        let x = DenseMatrix::from_fn(3, 2, |i, j| u[i] * v[j]);
        let svd = thin_svd(&x);
        assert!((svd.s[0] - 15.0).abs() < 1e-12);
        assert!(svd.s[1].abs() < 1e-12);
        assert_eq!(svd.rank(1e-10), 1);
        let utu = svd.u.tr_matmul(&svd.u);
        assert!(utu.sub(&DenseMatrix::identity(2)).max_abs() < 1e-12);
    }

    #[test]
    fn orthogonal_matrix_has_unit_singular_values() {
        let (c, s) = (0.6, 0.8);
        let q = DenseMatrix::from_row_major(2, 2, &[c, -s, s, c]);
        let svd = thin_svd(&q);
        for sv in &svd.s {
            assert!((sv - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn wide_input_is_handled_through_transpose() {
        let x = DenseMatrix::from_row_major(2, 4, &[1.0, 0.0, 2.0, -1.0, 0.5, 3.0, 0.0, 1.0]);
        let svd = thin_svd(&x);
        assert_eq!((svd.u.rows(), svd.u.cols()), (2, 2));
        assert_eq!((svd.v.rows(), svd.v.cols()), (4, 2));
        assert!(svd.reconstruct().sub(&x).max_abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_gets_orthonormal_u() {
        let svd = thin_svd(&DenseMatrix::zeros(3, 2));
        assert_eq!(svd.s, vec![0.0, 0.0]);
        assert!(svd.u.tr_matmul(&svd.u).sub(&DenseMatrix::identity(2)).max_abs() < 1e-14);
    }
}
