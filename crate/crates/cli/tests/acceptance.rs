//! Acceptance suite: one pass/fail line per criterion, exit status 1 if any fail.
//!
//! Criteria 1–7 and 10 drive the library against independent oracles written
//! here; 8, 9 and 11 drive the `gspcanet` binary on synthetic data.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use gspcanet::eval::{f_beta, roc_auc};
use gspcanet::graph::{build_knn, graph_energy, laplacian, KnnGraph};
use gspcanet::imagio::load_manifest;
use gspcanet::imagio::Image;
use gspcanet::network::{binary_hash, features_with, ChannelFilters, NetConfig, StageFilters};
use gspcanet::numerics::{thin_svd, DenseMatrix};
use gspcanet::patches::Plane;
use gspcanet::pipeline::{load_samples, tile_sample, Sample};
use gspcanet::spca::{elastic_net_bstep, gs_pca_fit, GsPcaConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed < limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:.2?}, limit {limit:?}"))
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0) * scale)
}

fn center_rows(x: &DenseMatrix) -> DenseMatrix {
    let means: Vec<f64> = (0..x.rows())
        .map(|i| (0..x.cols()).map(|j| x[(i, j)]).sum::<f64>() / x.cols() as f64)
        .collect();
    DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] - means[i])
}

/// `X Xᵀ` by explicit triple loop.
fn gram_oracle(x: &DenseMatrix) -> Vec<Vec<f64>> {
    let p = x.rows();
    (0..p)
        .map(|a| {
            (0..p)
                .map(|b| (0..x.cols()).map(|j| x[(a, j)] * x[(b, j)]).sum())
                .collect()
        })
        .collect()
}

fn criterion_1() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let p = rng.random_range(2..=25);
        let n = rng.random_range(p.max(40)..=500);
        let q = rng.random_range(1..=p.min(6));
        let mix = random_matrix(&mut rng, p, p, 1.0);
        let z = random_matrix(&mut rng, p, n, 1.0);
        let x = center_rows(&mix.matmul(&z));
        let fit = gs_pca_fit(&x, &GsPcaConfig::unpenalized(q), None).map_err(|e| e.to_string())?;
        let svd = thin_svd(&x);
        for j in 0..q {
            let (v, u) = (fit.v.col(j), svd.u.col(j));
            let same = v.iter().zip(u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let flip = v.iter().zip(u).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
            worst = worst.max(same.min(flip));
        }
    }
    within(started.elapsed(), Duration::from_secs(5))?;
    if worst <= 1e-6 {
        Ok(format!(
            "max |dV| = {worst:.2e} over 20 matrices in {:.2?}",
            started.elapsed()
        ))
    } else {
        Err(format!("max |dV| = {worst:.2e} > 1e-6"))
    }
}

fn criterion_2() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for inst in 0..50 {
        let p = rng.random_range(1..=6);
        let n = rng.random_range(6..=60);
        let x = random_matrix(&mut rng, p, n, 3.0);
        let graph = if inst % 2 == 0 {
            build_knn(&x, rng.random_range(1..=4)).map_err(|e| e.to_string())?
        } else {
            let edges: Vec<(usize, usize)> = (0..2 * n)
                .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
                .filter(|(a, b)| a != b)
                .collect();
            KnnGraph::from_edges(n, &edges).map_err(|e| e.to_string())?
        };
        let energy = graph_energy(&x, &laplacian(&graph)).map_err(|e| e.to_string())?;
        // ½ Σ_i Σ_j W_ij ‖x_i − x_j‖²
        let mut double_sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                if graph.has_edge(i, j) {
                    double_sum += (0..p).map(|r| (x[(r, i)] - x[(r, j)]).powi(2)).sum::<f64>();
                }
            }
        }
        double_sum *= 0.5;
        worst = worst.max((energy - double_sum).abs() / double_sum.abs().max(1e-300));
    }
    within(started.elapsed(), Duration::from_secs(1))?;
    if worst <= 1e-10 {
        Ok(format!("max relative error {worst:.2e} over 50 instances"))
    } else {
        Err(format!("max relative error {worst:.2e} > 1e-10"))
    }
}

/// Accelerated projected gradient on `β = u − v`, `u, v ≥ 0`, for
/// `βᵀQβ − 2cᵀβ + λ1‖β‖₁`. Returns the objective at the solution.
fn projected_gradient(q: &[Vec<f64>], c: &[f64], lambda1: f64) -> f64 {
    let p = c.len();
    let qv = |b: &[f64]| -> Vec<f64> { (0..p).map(|i| (0..p).map(|k| q[i][k] * b[k]).sum()).collect() };
    let f = |u: &[f64], v: &[f64]| {
        let b: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
        let qb = qv(&b);
        (0..p)
            .map(|i| b[i] * qb[i] - 2.0 * c[i] * b[i] + lambda1 * (u[i] + v[i]))
            .sum::<f64>()
    };
    // largest eigenvalue of Q by power iteration
    let mut e = vec![1.0; p];
    let mut lmax = 1.0;
    for _ in 0..500 {
        let w = qv(&e);
        lmax = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        e = w.iter().map(|x| x / lmax).collect();
    }
    let step = 1.0 / (4.0 * lmax * 1.01);
    let (mut u, mut v) = (vec![0.0; p], vec![0.0; p]);
    let (mut yu, mut yv) = (u.clone(), v.clone());
    let mut t = 1.0f64;
    let mut last = f(&u, &v);
    for _ in 0..50_000 {
        let b: Vec<f64> = yu.iter().zip(&yv).map(|(a, b)| a - b).collect();
        let g: Vec<f64> = qv(&b).iter().zip(c).map(|(qb, ci)| 2.0 * qb - 2.0 * ci).collect();
        let nu: Vec<f64> = (0..p).map(|i| (yu[i] - step * (g[i] + lambda1)).max(0.0)).collect();
        let nv: Vec<f64> = (0..p).map(|i| (yv[i] - step * (-g[i] + lambda1)).max(0.0)).collect();
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let cur = f(&nu, &nv);
        let momentum = if cur > last { 0.0 } else { (t - 1.0) / t_next };
        yu = (0..p).map(|i| nu[i] + momentum * (nu[i] - u[i])).collect();
        yv = (0..p).map(|i| nv[i] + momentum * (nv[i] - v[i])).collect();
        t = if cur > last { 1.0 } else { t_next };
        u = nu;
        v = nv;
        last = cur;
    }
    f(&u, &v)
}

fn orthonormal_columns(rng: &mut ChaCha8Rng, p: usize, q: usize) -> DenseMatrix {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < q {
        let mut v: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        for c in &cols {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= d * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-3 {
            cols.push(v.iter().map(|a| a / n).collect());
        }
    }
    DenseMatrix::from_columns(p, &cols)
}

fn criterion_3() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (p, n, q, lambda) = (5, 30, 2, 1e-2);
    let mut worst = 0.0f64;
    for inst in 0..20 {
        let x = random_matrix(&mut rng, p, n, 1.0);
        let a = orthonormal_columns(&mut rng, p, q);
        let rho = if inst % 2 == 0 { 0.0 } else { 0.1 };
        let xg = random_matrix(&mut rng, p, 12, 1.0);
        let graph = build_knn(&xg, 3).map_err(|e| e.to_string())?;
        let lap = laplacian(&graph);
        let g = gram_oracle(&x);
        // H = Σ over undirected edges (x_i − x_j)(x_i − x_j)ᵀ
        let mut h = vec![vec![0.0; p]; p];
        for i in 0..12 {
            for j in i + 1..12 {
                if graph.has_edge(i, j) {
                    let d: Vec<f64> = (0..p).map(|r| xg[(r, i)] - xg[(r, j)]).collect();
                    for r in 0..p {
                        for s in 0..p {
                            h[r][s] += d[r] * d[s];
                        }
                    }
                }
            }
        }
        let qm: Vec<Vec<f64>> = (0..p)
            .map(|r| {
                (0..p)
                    .map(|s| g[r][s] + rho * h[r][s] + if r == s { lambda } else { 0.0 })
                    .collect()
            })
            .collect();
        for lambda1 in [0.0, 0.01, 0.1, 1.0] {
            let graph_arg = (rho > 0.0).then_some((&xg, &lap));
            let b = elastic_net_bstep(&x, &a, lambda, lambda1, rho, graph_arg).map_err(|e| e.to_string())?;
            for j in 0..q {
                let c: Vec<f64> = (0..p).map(|r| (0..p).map(|s| g[r][s] * a[(s, j)]).sum()).collect();
                let beta = b.col(j);
                let qb: Vec<f64> = (0..p).map(|r| (0..p).map(|s| qm[r][s] * beta[s]).sum()).collect();
                let f_cd: f64 = (0..p)
                    .map(|r| beta[r] * qb[r] - 2.0 * c[r] * beta[r] + lambda1 * beta[r].abs())
                    .sum();
                let f_pg = projected_gradient(&qm, &c, lambda1);
                worst = worst.max((f_cd - f_pg).abs());
            }
        }
    }
    within(started.elapsed(), Duration::from_secs(10))?;
    if worst <= 1e-6 {
        Ok(format!("max |F_cd - F_pg| = {worst:.2e} over 20 instances x 4 lambda1"))
    } else {
        Err(format!("max |F_cd - F_pg| = {worst:.2e} > 1e-6"))
    }
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let x = center_rows(&random_matrix(&mut rng, 10, 200, 0.05));
    let mut counts = Vec::new();
    for lambda1 in [0.0, 1e-3, 1e-2, 1e-1] {
        let cfg = GsPcaConfig {
            lambda1,
            rho: 0.0,
            ..GsPcaConfig::new(3)
        };
        let fit = gs_pca_fit(&x, &cfg, None).map_err(|e| format!("lambda1 = {lambda1}: {e}"))?;
        counts.push(fit.v.as_slice().iter().filter(|v| v.abs() < 1e-8).count());
    }
    if counts.windows(2).any(|w| w[1] < w[0]) {
        return Err(format!("zero counts {counts:?} decrease"));
    }

    let a = orthonormal_columns(&mut rng, 10, 3);
    let g = gram_oracle(&x);
    let mut lambda1_max = 0.0f64;
    for j in 0..3 {
        for r in 0..10 {
            let c: f64 = (0..10).map(|s| g[r][s] * a[(s, j)]).sum();
            lambda1_max = lambda1_max.max(2.0 * c.abs());
        }
    }
    let at_max = elastic_net_bstep(&x, &a, 1e-4, lambda1_max, 0.0, None).map_err(|e| e.to_string())?;
    if at_max.as_slice().iter().any(|&v| v != 0.0) {
        return Err(format!("B is not exactly zero at lambda1_max = {lambda1_max:.4e}"));
    }
    let below = elastic_net_bstep(&x, &a, 1e-4, 0.99 * lambda1_max, 0.0, None).map_err(|e| e.to_string())?;
    if below.as_slice().iter().all(|&v| v == 0.0) {
        return Err("B is already zero below lambda1_max".into());
    }
    Ok(format!(
        "zero counts {counts:?}; B = 0 exactly at lambda1_max = {lambda1_max:.4e}"
    ))
}

fn starts_oracle(dim: usize, block: usize, stride: usize) -> usize {
    let mut count = 0;
    let mut last = 0;
    let mut s = 0;
    while s + block <= dim {
        count += 1;
        last = s;
        s += stride;
    }
    if last + block < dim {
        count += 1;
    }
    count
}

fn random_bank(rng: &mut ChaCha8Rng, stage: u8, n: usize, t: usize) -> StageFilters {
    StageFilters {
        stage,
        t1: t,
        t2: t,
        filters: (0..n)
            .map(|_| (0..t * t).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
    }
}

fn criterion_5() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for inst in 0..100 {
        let t = [3, 5, 7][rng.random_range(0..3)];
        let l1 = rng.random_range(1..=10);
        let l2 = rng.random_range(1..=10);
        let channels = [1, 3][rng.random_range(0..2)];
        let (h, w) = (rng.random_range(8..=32), rng.random_range(8..=32));
        let block = rng.random_range(1..=h.min(w).min(12));
        let stride = rng.random_range(2..=8);
        let config = NetConfig {
            patch: t,
            block,
            stride,
            tile: h.max(w),
            ..NetConfig::default()
        }
        .with_filters(l1, l2);
        let banks: Vec<ChannelFilters> = (0..channels)
            .map(|_| ChannelFilters {
                stage1: random_bank(&mut rng, 1, l1, t),
                stage2: random_bank(&mut rng, 2, l2, t),
            })
            .collect();
        let samples: Vec<f64> = (0..h * w * channels).map(|_| rng.random_range(0.0..1.0)).collect();
        let image = Image::new(w, h, channels, samples).map_err(|e| e.to_string())?;
        let f = features_with(&image, &config, &banks).map_err(|e| e.to_string())?;
        let g = starts_oracle(h, block, stride) * starts_oracle(w, block, stride);
        let expected = channels * (1 << l2) * l1 * g;
        if f.values.len() != expected {
            return Err(format!(
                "config {inst}: length {} != {expected} (c={channels}, L1={l1}, L2={l2}, G={g})",
                f.values.len()
            ));
        }
        if let Some(bad) = f
            .values
            .chunks(1 << l2)
            .position(|hist| hist.iter().sum::<f32>() != (block * block) as f32)
        {
            return Err(format!(
                "config {inst}: histogram {bad} does not sum to {}",
                block * block
            ));
        }
    }
    within(started.elapsed(), Duration::from_secs(30))?;
    Ok(format!("100 configs in {:.2?}", started.elapsed()))
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..200 {
        let l2 = rng.random_range(1..=16);
        let (w, h) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let maps: Vec<Plane> = (0..l2)
            .map(|_| {
                Plane::from_fn(w, h, |_, _| match rng.random_range(0..4) {
                    0 => 0.0,
                    _ => rng.random_range(-1.0..1.0),
                })
            })
            .collect();
        let t = binary_hash(&maps);
        if let Some(v) = t.values.iter().find(|&&v| v >= 1 << l2) {
            return Err(format!("hash value {v} outside [0, {}]", (1u32 << l2) - 1));
        }
        let nonpositive: Vec<Plane> = maps
            .iter()
            .map(|m| Plane::new(w, h, m.data().iter().map(|v| -v.abs()).collect()))
            .collect();
        if binary_hash(&nonpositive).values.iter().any(|&v| v != 0) {
            return Err("all-nonpositive maps hashed to a nonzero value".into());
        }
    }
    Ok("200 random map stacks, L2 up to 16".into())
}

fn criterion_7() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = 0.0f64;
    for inst in 0..100 {
        let n = rng.random_range(2..=200);
        let levels = if inst % 2 == 0 { 5 } else { 1_000_000 };
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        labels[0] = true;
        labels[n - 1] = false;
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
            .collect();
        let auc = roc_auc(&scores, &labels).map_err(|e| e.to_string())?.auc;
        let (mut wins, mut pairs) = (0.0, 0.0);
        for i in (0..n).filter(|&i| labels[i]) {
            for j in (0..n).filter(|&j| !labels[j]) {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        worst = worst.max((auc - wins / pairs).abs());
    }
    within(started.elapsed(), Duration::from_secs(2))?;
    if worst <= 1e-12 {
        Ok(format!("max |AUC - Mann-Whitney| = {worst:.2e} over 100 sets"))
    } else {
        Err(format!("max |AUC - Mann-Whitney| = {worst:.2e} > 1e-12"))
    }
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gspcanet"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Single-row metrics CSV as `column -> value`.
fn metric(path: &Path, column: &str) -> Result<f64, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty metrics")?.split(',').collect();
    let row: Vec<&str> = lines.next().ok_or("no metrics row")?.split(',').collect();
    let i = header
        .iter()
        .position(|h| *h == column)
        .ok_or(format!("no {column} column"))?;
    row[i].parse().map_err(|_| format!("bad {column} value {:?}", row[i]))
}

fn pixel_tiles(samples: &[Sample]) -> Result<(Vec<Vec<f64>>, Vec<f64>), String> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    let net = NetConfig::default();
    for (i, s) in samples.iter().enumerate() {
        let grid = tile_sample(s, i, &net).map_err(|e| e.to_string())?;
        for t in &grid.tiles {
            x.push(
                s.image
                    .crop(t.row, t.col, grid.tile, grid.tile)
                    .map_err(|e| e.to_string())?
                    .samples()
                    .to_vec(),
            );
            y.push(if t.positive { 1.0 } else { -1.0 });
        }
    }
    Ok((x, y))
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .expect("nonempty");
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        x[k] = (b[k] - (k + 1..n).map(|j| a[k][j] * x[j]).sum::<f64>()) / a[k][k];
    }
    x
}

/// Best test accuracy of a least-squares (ridge) classifier on raw tile pixels
/// over a grid of ridge weights.
fn ridge_baseline(train: &[Sample], test: &[Sample]) -> Result<(f64, f64), String> {
    let (xtr, ytr) = pixel_tiles(train)?;
    let (xte, yte) = pixel_tiles(test)?;
    let (n, d) = (xtr.len(), xtr[0].len());
    let mean: Vec<f64> = (0..d)
        .map(|j| xtr.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let ymean = ytr.iter().sum::<f64>() / n as f64;
    let xc: Vec<Vec<f64>> = xtr
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    let kernel: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| xc[i].iter().zip(&xc[j]).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    let mut best = (0.0, f64::NAN);
    for alpha in [1e-6, 1e-4, 1e-2, 1.0, 10.0, 100.0, 1e3, 1e4] {
        let mut k = kernel.clone();
        (0..n).for_each(|i| k[i][i] += alpha);
        let c = solve(k, ytr.iter().map(|v| v - ymean).collect());
        let w: Vec<f64> = (0..d).map(|j| (0..n).map(|i| c[i] * xc[i][j]).sum()).collect();
        let hits = xte
            .iter()
            .zip(&yte)
            .filter(|(row, &y)| {
                let s: f64 = row
                    .iter()
                    .zip(&mean)
                    .zip(&w)
                    .map(|((a, m), w)| (a - m) * w)
                    .sum::<f64>()
                    + ymean;
                (s >= 0.0) == (y > 0.0)
            })
            .count();
        let acc = hits as f64 / yte.len() as f64;
        if acc > best.0 {
            best = (acc, alpha);
        }
    }
    Ok(best)
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn data(&self) -> std::path::PathBuf {
        self.dir.path().join("data")
    }
    fn path(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join(name)
    }
}

fn criterion_8(ws: &Workspace) -> Verdict {
    let started = Instant::now();
    let data = ws.data();
    run_cli(&[
        "synth",
        "--seed",
        "7",
        "--per-class",
        "20",
        "--size",
        "64",
        "--out",
        p(&data),
    ])?;
    let model = ws.path("model.gspn");
    run_cli(&["train", "--manifest", p(&data.join("train.csv")), "--out", p(&model)])?;
    let scores = ws.path("scores.csv");
    run_cli(&[
        "predict",
        "--model",
        p(&model),
        "--manifest",
        p(&data.join("test.csv")),
        "--out",
        p(&scores),
    ])?;
    let eval_dir = ws.path("eval");
    let printed = run_cli(&[
        "evaluate",
        "--scores",
        p(&scores),
        "--manifest",
        p(&data.join("test.csv")),
        "--out-dir",
        p(&eval_dir),
    ])?;
    let elapsed = started.elapsed();
    let accuracy = metric(&eval_dir.join("metrics.csv"), "accuracy")?;
    let auc = metric(&eval_dir.join("metrics.csv"), "auc")?;

    let train =
        load_samples(&load_manifest(&data.join("train.csv")).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let test =
        load_samples(&load_manifest(&data.join("test.csv")).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let (baseline, alpha) = ridge_baseline(&train, &test)?;

    let detail = format!(
        "accuracy {accuracy:.4}, AUC {auc:.4}, ridge pixel baseline {baseline:.4} (alpha {alpha}), {elapsed:.2?}; {}",
        printed.lines().nth(1).unwrap_or("")
    );
    within(elapsed, Duration::from_secs(120)).map_err(|e| format!("{e}; {detail}"))?;
    if accuracy >= 0.95 && auc >= 0.98 && accuracy > baseline {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_9(ws: &Workspace) -> Verdict {
    let data = ws.data();
    let train = data.join("train.csv");
    let (m1, m2) = (ws.path("det1.gspn"), ws.path("det2.gspn"));
    run_cli(&["train", "--manifest", p(&train), "--out", p(&m1)])?;
    run_cli(&["train", "--manifest", p(&train), "--out", p(&m2)])?;
    let (b1, b2) = (
        fs::read(&m1).map_err(|e| e.to_string())?,
        fs::read(&m2).map_err(|e| e.to_string())?,
    );
    if b1 != b2 {
        return Err("two train runs wrote different model files".into());
    }
    let test = data.join("test.csv");
    let (s1, s8) = (ws.path("t1.csv"), ws.path("t8.csv"));
    run_cli(&[
        "--threads",
        "1",
        "predict",
        "--model",
        p(&m1),
        "--manifest",
        p(&test),
        "--out",
        p(&s1),
    ])?;
    run_cli(&[
        "--threads",
        "8",
        "predict",
        "--model",
        p(&m1),
        "--manifest",
        p(&test),
        "--out",
        p(&s8),
    ])?;
    if fs::read(&s1).map_err(|e| e.to_string())? != fs::read(&s8).map_err(|e| e.to_string())? {
        return Err("predict output differs between --threads 1 and --threads 8".into());
    }
    Ok(format!(
        "model files identical ({} bytes); score CSVs identical across 1 and 8 threads",
        b1.len()
    ))
}

fn criterion_10() -> Verdict {
    let f1 = f_beta(0.872, 0.955, 1.0).map_err(|e| e.to_string())?.value;
    if (f1 - 0.912).abs() <= 5e-4 {
        Ok(format!("F1(0.872, 0.955) = {f1:.5}"))
    } else {
        Err(format!("F1(0.872, 0.955) = {f1:.5}, expected 0.912 +- 5e-4"))
    }
}

/// `(accuracies, std)` from an experiment-bias report.
fn bias_report(path: &Path) -> Result<(Vec<f64>, f64), String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut acc = Vec::new();
    let mut std = None;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[0] == "summary" {
            std = Some(f[4].parse::<f64>().map_err(|e| e.to_string())?);
        } else {
            acc.push(f[2].parse::<f64>().map_err(|e| e.to_string())?);
        }
    }
    Ok((acc, std.ok_or("no summary row")?))
}

fn criterion_11(ws: &Workspace) -> Verdict {
    let manifest = ws.data().join("manifest.csv");
    let distinct = ws.path("bias.csv");
    run_cli(&[
        "experiment-bias",
        "--manifest",
        p(&manifest),
        "--runs",
        "10",
        "--out",
        p(&distinct),
    ])?;
    let (acc, std) = bias_report(&distinct)?;
    if acc.len() != 10 || acc.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(format!("expected 10 accuracies in [0, 1], got {acc:?}"));
    }
    if std <= 0.0 {
        return Err(format!("std {std} with distinct seeds"));
    }
    let repeated = ws.path("bias_repeat.csv");
    run_cli(&[
        "experiment-bias",
        "--manifest",
        p(&manifest),
        "--seeds",
        "11,11",
        "--out",
        p(&repeated),
    ])?;
    let (racc, rstd) = bias_report(&repeated)?;
    if rstd != 0.0 || racc[0] != racc[1] {
        return Err(format!("repeated seeds gave {racc:?}, std {rstd}"));
    }
    let mean = acc.iter().sum::<f64>() / 10.0;
    Ok(format!("10 runs: mean {mean:.4}, std {std:.4}; repeated seeds: std 0"))
}

fn main() -> ExitCode {
    let ws = Workspace {
        dir: tempfile::tempdir().expect("temp dir"),
    };
    let criteria: Vec<(u8, &str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        (1, "PCA-oracle equivalence", Box::new(criterion_1)),
        (2, "graph trace identity", Box::new(criterion_2)),
        (3, "elastic-net oracle", Box::new(criterion_3)),
        (4, "sparsity monotonicity", Box::new(criterion_4)),
        (5, "feature geometry", Box::new(criterion_5)),
        (6, "hash range", Box::new(criterion_6)),
        (7, "AUC oracle", Box::new(criterion_7)),
        (8, "end-to-end desk-scale run", Box::new(|| criterion_8(&ws))),
        (9, "determinism", Box::new(|| criterion_9(&ws))),
        (10, "F-measure spot check", Box::new(criterion_10)),
        (11, "selection-bias harness", Box::new(|| criterion_11(&ws))),
    ];
    let mut failed = 0;
    for (id, name, run) in &criteria {
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(detail) => println!("acceptance {id:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("acceptance {id:>2} FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
