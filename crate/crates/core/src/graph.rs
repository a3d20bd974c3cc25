//! kNN similarity graphs over patch vectors, their Laplacians, and k-means
//! subsampling for large patch sets.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::DenseMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("kNN graph needs more than k points (n = {n}, k = {k})")]
    TooFewPoints { n: usize, k: usize },
    #[error("neighbor count k must be >= 1")]
    ZeroK,
    #[error("data has {got} columns but the graph has {expected} nodes")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("edge ({0}, {1}) is out of range or a self-loop")]
    BadEdge(usize, usize),
    #[error("max_nodes must be >= 2, got {0}")]
    MaxNodes(usize),
}

/// Undirected unweighted graph stored as sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnnGraph {
    k: usize,
    adjacency: Vec<Vec<usize>>,
}

impl KnnGraph {
    /// Arbitrary undirected graph (`k` is reported as 0). Duplicate edges collapse.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(GraphError::BadEdge(a, b));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        Ok(Self { k: 0, adjacency })
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Dense 0/1 weight matrix `E`.
    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.n();
        let mut e = DenseMatrix::zeros(n, n);
        for (l, adj) in self.adjacency.iter().enumerate() {
            for &m in adj {
                e[(l, m)] = 1.0;
            }
        }
        e
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Symmetrized kNN graph over the columns of `points`: `l–m` is an edge when
/// either is among the other's `k` nearest (squared Euclidean distance, ties
/// to the lower index).
pub fn build_knn(points: &DenseMatrix, k: usize) -> Result<KnnGraph, GraphError> {
    let n = points.cols();
    if k == 0 {
        return Err(GraphError::ZeroK);
    }
    if n <= k {
        return Err(GraphError::TooFewPoints { n, k });
    }
    let nearest: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|l| {
            let xl = points.col(l);
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&m| m != l)
                .map(|m| (sq_dist(xl, points.col(m)), m))
                .collect();
            let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            cand.select_nth_unstable_by(k - 1, by_dist);
            cand.truncate(k);
            cand.into_iter().map(|(_, m)| m).collect()
        })
        .collect();
    let mut adjacency = vec![Vec::new(); n];
    for (l, near) in nearest.iter().enumerate() {
        for &m in near {
            adjacency[l].push(m);
            adjacency[m].push(l);
        }
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
        adj.dedup();
    }
    Ok(KnnGraph { k, adjacency })
}

/// `L = C − E`, kept sparse as degrees plus adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct Laplacian {
    degree: Vec<f64>,
    adjacency: Vec<Vec<usize>>,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.degree.len()
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.n();
        let mut l = DenseMatrix::zeros(n, n);
        for (i, adj) in self.adjacency.iter().enumerate() {
            l[(i, i)] = self.degree[i];
            for &m in adj {
                l[(i, m)] = -1.0;
            }
        }
        l
    }

    /// `vᵀLv`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.n(), "vector length must equal node count");
        self.adjacency
            .iter()
            .enumerate()
            .map(|(l, adj)| self.degree[l] * v[l] * v[l] - adj.iter().map(|&m| v[l] * v[m]).sum::<f64>())
            .sum()
    }
}

pub fn laplacian(graph: &KnnGraph) -> Laplacian {
    Laplacian {
        degree: graph.adjacency.iter().map(|a| a.len() as f64).collect(),
        adjacency: graph.adjacency.clone(),
    }
}

fn check_cols(x: &DenseMatrix, l: &Laplacian) -> Result<(), GraphError> {
    if x.cols() != l.n() {
        return Err(GraphError::DimensionMismatch {
            expected: l.n(),
            got: x.cols(),
        });
    }
    Ok(())
}

/// `Tr(X L Xᵀ)` for `X` with one column per node.
pub fn graph_energy(x: &DenseMatrix, l: &Laplacian) -> Result<f64, GraphError> {
    check_cols(x, l)?;
    let mut total = 0.0;
    for (i, adj) in l.adjacency.iter().enumerate() {
        let xi = x.col(i);
        total += l.degree[i] * xi.iter().map(|v| v * v).sum::<f64>();
        for &m in adj {
            total -= xi.iter().zip(x.col(m)).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok(total)
}

/// `X L Xᵀ` (`p × p`, symmetric positive semidefinite).
pub fn graph_gram(x: &DenseMatrix, l: &Laplacian) -> Result<DenseMatrix, GraphError> {
    check_cols(x, l)?;
    let p = x.rows();
    let mut h = DenseMatrix::zeros(p, p);
    let mut y = vec![0.0; p];
    for (i, adj) in l.adjacency.iter().enumerate() {
        // y = (X L)_i = deg_i x_i − Σ_{m ~ i} x_m
        let xi = x.col(i);
        for (yv, &xv) in y.iter_mut().zip(xi) {
            *yv = l.degree[i] * xv;
        }
        for &m in adj {
            for (yv, &xv) in y.iter_mut().zip(x.col(m)) {
                *yv -= xv;
            }
        }
        for b in 0..p {
            let xb = xi[b];
            for a in b..p {
                h[(a, b)] += y[a] * xb;
            }
        }
    }
    h.mirror_lower();
    Ok(h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subsample {
    /// Retained points or cluster centers, one per column.
    pub points: DenseMatrix,
    /// Node assigned to each input column.
    pub assignment: Vec<usize>,
    /// Lloyd iterations run (0 for the identity map).
    pub iterations: usize,
}

pub const KMEANS_MAX_ITER: usize = 50;

/// Identity when `n <= max_nodes`; otherwise `max_nodes` k-means centers
/// (Lloyd, initialized from a seeded uniform sample without replacement).
/// Empty clusters keep their previous center.
pub fn subsample(points: &DenseMatrix, max_nodes: usize, seed: u64) -> Result<Subsample, GraphError> {
    if max_nodes < 2 {
        return Err(GraphError::MaxNodes(max_nodes));
    }
    let (p, n) = (points.rows(), points.cols());
    if n <= max_nodes {
        return Ok(Subsample {
            points: points.clone(),
            assignment: (0..n).collect(),
            iterations: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = index::sample(&mut rng, n, max_nodes).into_vec();
    init.sort_unstable();
    let mut centers = DenseMatrix::from_columns(p, &init.iter().map(|&i| points.col(i).to_vec()).collect::<Vec<_>>());
    let mut assignment = vec![usize::MAX; n];
    let mut iterations = 0;
    for _ in 0..KMEANS_MAX_ITER {
        iterations += 1;
        let next: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|i| {
                let xi = points.col(i);
                let mut best = (f64::INFINITY, 0);
                for c in 0..max_nodes {
                    let d = sq_dist(xi, centers.col(c));
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                best.1
            })
            .collect();
        let changed = next != assignment;
        assignment = next;
        if !changed {
            break;
        }
        let mut sums = DenseMatrix::zeros(p, max_nodes);
        let mut counts = vec![0usize; max_nodes];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, &v) in sums.col_mut(c).iter_mut().zip(points.col(i)) {
                *s += v;
            }
        }
        for c in 0..max_nodes {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, &s) in centers.col_mut(c).iter_mut().zip(sums.col(c)) {
                    *dst = s * inv;
                }
            }
        }
    }
    Ok(Subsample {
        points: centers,
        assignment,
        iterations,
    })
}
