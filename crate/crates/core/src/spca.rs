//! Graph-regularized sparse PCA.
//!
//! For centered data `X` (`p × n`, one sample per column) with Gram matrix
//! `G = X Xᵀ` and graph matrix `H = X_g L X_gᵀ`, the solver minimizes
//!
//! ```text
//! F(A, B) = tr(G) − 2 tr(AᵀGB) + tr(BᵀGB)
//!         + λ Σ‖β_j‖² + Σ λ1_j ‖β_j‖₁ + ρ tr(BᵀHB)      subject to AᵀA = I
//! ```
//!
//! by alternating an elastic-net step in `B` (cyclic coordinate descent) with
//! a Procrustes step in `A`, starting from ordinary PCA. The loadings are the
//! columns of `B` scaled to unit length.

use log::debug;
use thiserror::Error;

use crate::graph::{graph_gram, GraphError, Laplacian};
use crate::numerics::{dot, fix_sign, norm2, sym_eigen, thin_svd, DenseMatrix, NumericsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpcaError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("requested {q} components but data supports at most {available}")]
    TooManyComponents { q: usize, available: usize },
    #[error("data is constant (zero variance); no basis exists")]
    ConstantData,
    #[error("A is not orthonormal (max |AᵀA − I| = {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("B is all zeros")]
    ZeroB,
    #[error("solver diverged (non-finite values) at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("component {component} shrank to zero at λ1 = {lambda1}; use a smaller λ1")]
    ZeroColumn { component: usize, lambda1: f64 },
    #[error("graph weight ρ > 0 but no graph was supplied")]
    MissingGraph,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GsPcaConfig {
    pub q: usize,
    /// Ridge weight λ.
    pub lambda: f64,
    /// Lasso weight λ1 shared by all components.
    pub lambda1: f64,
    /// Optional per-component λ1 overriding `lambda1`.
    pub lambda1_per_component: Option<Vec<f64>>,
    /// Graph weight ρ.
    pub rho: f64,
    pub max_iter: usize,
    /// Stop when `‖B_new − B‖_F / ‖B‖_F` falls below this.
    pub tol: f64,
    pub inner_max_iter: usize,
    pub inner_tol: f64,
}

impl GsPcaConfig {
    pub fn new(q: usize) -> Self {
        Self {
            q,
            lambda: 1e-4,
            lambda1: 1e-3,
            lambda1_per_component: None,
            rho: 1e-2,
            max_iter: 100,
            tol: 1e-6,
            inner_max_iter: 1000,
            inner_tol: 1e-8,
        }
    }

    /// All penalties zero: the fit reduces to ordinary PCA.
    pub fn unpenalized(q: usize) -> Self {
        Self {
            lambda: 0.0,
            lambda1: 0.0,
            rho: 0.0,
            ..Self::new(q)
        }
    }

    pub fn lambda1_for(&self, component: usize) -> f64 {
        match &self.lambda1_per_component {
            Some(v) => v[component],
            None => self.lambda1,
        }
    }

    pub fn validate(&self) -> Result<(), SpcaError> {
        let bad = |m: String| Err(SpcaError::InvalidConfig(m));
        if self.q == 0 {
            return bad("q must be >= 1".into());
        }
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !nonneg(self.lambda) || !nonneg(self.lambda1) || !nonneg(self.rho) {
            return bad(format!(
                "weights must be finite and >= 0 (λ = {}, λ1 = {}, ρ = {})",
                self.lambda, self.lambda1, self.rho
            ));
        }
        if let Some(v) = &self.lambda1_per_component {
            if v.len() != self.q {
                return bad(format!("{} per-component λ1 values for q = {}", v.len(), self.q));
            }
            if !v.iter().all(|&x| nonneg(x)) {
                return bad("per-component λ1 values must be finite and >= 0".into());
            }
        }
        if !(self.tol > 0.0 && self.inner_tol > 0.0) {
            return bad("tolerances must be > 0".into());
        }
        if self.max_iter == 0 || self.inner_max_iter == 0 {
            return bad("iteration caps must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    /// `p × q`, unit-norm columns.
    pub v: DenseMatrix,
    /// Nonzero entries per column.
    pub nonzeros: Vec<usize>,
    /// Final objective value `F(A, B)`.
    pub objective: f64,
    /// Objective after each outer iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Fewer than the requested components were available.
    pub rank_deficient: bool,
}

impl Basis {
    fn from_columns(v: DenseMatrix) -> Self {
        let nonzeros = (0..v.cols())
            .map(|j| v.col(j).iter().filter(|&&x| x != 0.0).count())
            .collect();
        Self {
            v,
            nonzeros,
            objective: 0.0,
            objective_trace: Vec::new(),
            iterations: 0,
            converged: true,
            rank_deficient: false,
        }
    }
}

/// Scalar elastic-net solution `sign(z)·max(|z| − t, 0)`.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Ordinary PCA loadings from the thin SVD of `X`: the top-`q` left singular
/// vectors, i.e. eigenvectors of `X Xᵀ`, ordered by decreasing singular value.
pub fn pca_svd(x: &DenseMatrix, q: usize) -> Result<Basis, SpcaError> {
    let available = x.rows().min(x.cols());
    if q == 0 || q > available {
        return Err(SpcaError::TooManyComponents { q, available });
    }
    if !x.is_finite() {
        return Err(NumericsError::NonFinite.into());
    }
    let svd = thin_svd(x);
    let rank = svd.rank(1e-12).min(q);
    let mut v = svd.u.leading_cols(rank);
    for j in 0..rank {
        fix_sign(v.col_mut(j));
    }
    let mut basis = Basis::from_columns(v);
    basis.rank_deficient = rank < q;
    Ok(basis)
}

/// Penalized objective `F(A, B)` from Gram matrices.
pub fn objective(
    g: &DenseMatrix,
    h: Option<&DenseMatrix>,
    a: &DenseMatrix,
    b: &DenseMatrix,
    config: &GsPcaConfig,
) -> f64 {
    let gb = g.matmul(b);
    let mut f = g.trace();
    for j in 0..b.cols() {
        let (aj, bj, gbj) = (a.col(j), b.col(j), gb.col(j));
        f += -2.0 * dot(aj, gbj) + dot(bj, gbj);
        f += config.lambda * dot(bj, bj);
        f += config.lambda1_for(j) * bj.iter().map(|x| x.abs()).sum::<f64>();
        if let (Some(h), true) = (h, config.rho > 0.0) {
            f += config.rho * dot(bj, &h.mat_vec(bj));
        }
    }
    f
}

fn orthonormality_deviation(a: &DenseMatrix) -> f64 {
    a.tr_matmul(a).sub(&DenseMatrix::identity(a.cols())).max_abs()
}

/// `Q = G + λI + ρH`.
fn quadratic(g: &DenseMatrix, h: Option<&DenseMatrix>, lambda: f64, rho: f64) -> DenseMatrix {
    let mut q = match (h, rho > 0.0) {
        (Some(h), true) => g.add(&h.scaled(rho)),
        _ => g.clone(),
    };
    for i in 0..q.rows() {
        q[(i, i)] += lambda;
    }
    q
}

/// Coordinate descent for one component, warm-started from `beta`. Each
/// coordinate is minimized exactly, so the objective never increases.
fn cd_component(q: &DenseMatrix, c: &[f64], lambda1: f64, beta: &mut [f64], max_sweeps: usize, tol: f64) -> usize {
    let p = beta.len();
    // all-zero solution is optimal iff |2 c_i| <= λ1 for every i
    if c.iter().all(|&ci| 2.0 * ci.abs() <= lambda1) {
        beta.iter_mut().for_each(|b| *b = 0.0);
        return 0;
    }
    let half = lambda1 / 2.0;
    for sweep in 1..=max_sweeps {
        let mut max_delta = 0.0f64;
        let mut max_beta = 0.0f64;
        for i in 0..p {
            let qi = q.col(i);
            let qii = qi[i];
            let mut z = c[i];
            for (k, (&qk, &bk)) in qi.iter().zip(beta.iter()).enumerate() {
                if k != i {
                    z -= qk * bk;
                }
            }
            let new = if qii > 0.0 { soft_threshold(z, half) / qii } else { 0.0 };
            max_delta = max_delta.max((new - beta[i]).abs());
            max_beta = max_beta.max(new.abs());
            beta[i] = new;
        }
        if max_delta <= tol * max_beta.max(1e-300) || max_delta == 0.0 {
            return sweep;
        }
    }
    max_sweeps
}

fn bstep_gram(g: &DenseMatrix, h: Option<&DenseMatrix>, a: &DenseMatrix, b: &mut DenseMatrix, config: &GsPcaConfig) {
    let q = quadratic(g, h, config.lambda, config.rho);
    let c = g.matmul(a);
    for j in 0..a.cols() {
        cd_component(
            &q,
            c.col(j),
            config.lambda1_for(j),
            b.col_mut(j),
            config.inner_max_iter,
            config.inner_tol,
        );
    }
}

/// Elastic-net step: for each column `α_j` of `A`, minimizes
/// `‖Xᵀα_j − Xᵀβ‖² + λ‖β‖² + λ1‖β‖₁ + ρ βᵀ X_g L X_gᵀ β` by cyclic coordinate
/// descent starting from `β = α_j`.
pub fn elastic_net_bstep(
    x: &DenseMatrix,
    a: &DenseMatrix,
    lambda: f64,
    lambda1: f64,
    rho: f64,
    graph: Option<(&DenseMatrix, &Laplacian)>,
) -> Result<DenseMatrix, SpcaError> {
    if a.rows() != x.rows() {
        return Err(SpcaError::DimensionMismatch(format!(
            "A has {} rows, X has {}",
            a.rows(),
            x.rows()
        )));
    }
    let deviation = orthonormality_deviation(a);
    if deviation > 1e-8 {
        return Err(SpcaError::NotOrthonormal { deviation });
    }
    let config = GsPcaConfig {
        lambda,
        lambda1,
        rho,
        ..GsPcaConfig::new(a.cols())
    };
    config.validate()?;
    let h = graph_matrix(x.rows(), rho, graph)?;
    let mut b = a.clone();
    bstep_gram(&x.gram(), h.as_ref(), a, &mut b, &config);
    Ok(b)
}

/// Procrustes step from Gram matrix: `A = U Vᵀ` where `G B = U S Vᵀ`.
pub fn a_step_gram(g: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, SpcaError> {
    if b.max_abs() == 0.0 {
        return Err(SpcaError::ZeroB);
    }
    let m = g.matmul(b);
    let svd = thin_svd(&m);
    Ok(svd.u.matmul(&svd.v.transpose()))
}

pub fn a_step(x: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, SpcaError> {
    if b.rows() != x.rows() {
        return Err(SpcaError::DimensionMismatch(format!(
            "B has {} rows, X has {}",
            b.rows(),
            x.rows()
        )));
    }
    a_step_gram(&x.gram(), b)
}

fn graph_matrix(
    p: usize,
    rho: f64,
    graph: Option<(&DenseMatrix, &Laplacian)>,
) -> Result<Option<DenseMatrix>, SpcaError> {
    match (graph, rho > 0.0) {
        (Some((xg, l)), true) => {
            if xg.rows() != p {
                return Err(SpcaError::DimensionMismatch(format!(
                    "graph points have {} rows, X has {p}",
                    xg.rows()
                )));
            }
            Ok(Some(graph_gram(xg, l)?))
        }
        (None, true) => Err(SpcaError::MissingGraph),
        _ => Ok(None),
    }
}

/// Alternating solver on raw centered data. `graph` holds the (possibly
/// subsampled) graph points and their Laplacian and is required when `ρ > 0`.
pub fn gs_pca_fit(
    x: &DenseMatrix,
    config: &GsPcaConfig,
    graph: Option<(&DenseMatrix, &Laplacian)>,
) -> Result<Basis, SpcaError> {
    config.validate()?;
    if !x.is_finite() {
        return Err(NumericsError::NonFinite.into());
    }
    let h = graph_matrix(x.rows(), config.rho, graph)?;
    gs_pca_fit_gram(&x.gram(), h.as_ref(), config)
}

/// Alternating solver on `G = X Xᵀ` and `H = X_g L X_gᵀ`.
pub fn gs_pca_fit_gram(g: &DenseMatrix, h: Option<&DenseMatrix>, config: &GsPcaConfig) -> Result<Basis, SpcaError> {
    config.validate()?;
    let p = g.rows();
    if config.q > p {
        return Err(SpcaError::TooManyComponents {
            q: config.q,
            available: p,
        });
    }
    if config.rho > 0.0 && h.is_none() {
        return Err(SpcaError::MissingGraph);
    }
    if let Some(h) = h {
        if h.rows() != p || h.cols() != p {
            return Err(SpcaError::DimensionMismatch(format!(
                "H is {}x{}, G is {p}x{p}",
                h.rows(),
                h.cols()
            )));
        }
    }
    if !g.is_finite() {
        return Err(NumericsError::NonFinite.into());
    }
    if g.trace() <= 0.0 {
        return Err(SpcaError::ConstantData);
    }

    let init = sym_eigen(g, config.q)?;
    let mut a = init.vectors;
    let mut b = a.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=config.max_iter {
        iterations = it;
        let prev = b.clone();
        bstep_gram(g, h, &a, &mut b, config);
        if !b.is_finite() {
            return Err(SpcaError::Diverged { iteration: it });
        }
        if b.max_abs() == 0.0 {
            return Err(SpcaError::ZeroColumn {
                component: 0,
                lambda1: config.lambda1_for(0),
            });
        }
        a = a_step_gram(g, &b)?;
        let f = objective(g, h, &a, &b, config);
        if !f.is_finite() {
            return Err(SpcaError::Diverged { iteration: it });
        }
        trace.push(f);
        let change = b.sub(&prev).frobenius_norm() / prev.frobenius_norm().max(f64::MIN_POSITIVE);
        debug!("gs-pca iteration {it}: objective {f:.6e}, relative change {change:.3e}");
        if change < config.tol {
            converged = true;
            break;
        }
    }

    let mut v = b;
    for j in 0..v.cols() {
        let norm = norm2(v.col(j));
        if norm == 0.0 {
            return Err(SpcaError::ZeroColumn {
                component: j,
                lambda1: config.lambda1_for(j),
            });
        }
        v.col_mut(j).iter_mut().for_each(|x| *x /= norm);
        fix_sign(v.col_mut(j));
    }
    let mut basis = Basis::from_columns(v);
    basis.objective = trace.last().copied().unwrap_or(f64::NAN);
    basis.objective_trace = trace;
    basis.iterations = iterations;
    basis.converged = converged;
    Ok(basis)
}
