use std::collections::HashMap;
use std::fs;
use std::path::Path;

use gspcanet::eval::{
    format_table_row, selection_bias, write_curve_csv, write_metrics_csv, LabelGrid, ScoredGrid, TABLE_HEADER,
};
use gspcanet::imagio::{generate_synthetic, load_manifest, SynthSpec};
use gspcanet::network::{load_model, save_model};
use gspcanet::pipeline::{bias_run, derive_seeds, load_samples, score_samples, tile_sample, train_manifest};
use log::{info, warn};

use crate::error::CliError;
use crate::{BiasArgs, EvaluateArgs, PredictArgs, SynthArgs, TrainArgs};

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let spec = SynthSpec {
        seed: a.seed,
        per_class: a.per_class,
        size: a.size,
        channels: a.channels,
        noise_std: a.noise_std,
        test_fraction: a.test_fraction,
        ..SynthSpec::default()
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let out = generate_synthetic(&spec, &a.out)?;
    info!(
        "wrote {} images ({} train, {} test)",
        out.manifest.len(),
        out.train.len(),
        out.test.len()
    );
    println!("manifest: {}", out.manifest_path.display());
    println!("train: {}", out.train_path.display());
    if let Some(p) = &out.test_path {
        println!("test: {}", p.display());
    }
    println!("digest: {}", out.digest);
    Ok(())
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let mut cfg = a.config.resolve()?;
    if let Some(seed) = a.seed {
        cfg.train.seed = seed;
    }
    cfg.tune |= a.tune;
    cfg.train.net.validate()?;
    let manifest = load_manifest(&a.manifest)?;
    let started = std::time::Instant::now();
    let model = train_manifest(&manifest, &cfg.train_options())?;
    info!("training finished in {:.2?}", started.elapsed());
    if let Some(l1) = model.provenance.tuned_lambda1 {
        println!("tuned lambda1: {l1}");
    }
    save_model(&model, &a.out)?;
    println!("model: {}", a.out.display());
    Ok(())
}

pub fn predict(a: &PredictArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let manifest = load_manifest(&a.manifest)?;
    let samples = load_samples(&manifest)?;
    let scored = score_samples(&model, &samples)?;
    let mut w = csv::Writer::from_path(&a.out).map_err(|e| io_err(&a.out, e))?;
    w.write_record(["image", "row", "col", "score", "label"])?;
    let mut rows = 0;
    for s in &scored {
        for (tile, score) in s.grid.tiles.iter().zip(&s.scores) {
            w.write_record([
                s.name.clone(),
                tile.grid_row.to_string(),
                tile.grid_col.to_string(),
                score.to_string(),
                u8::from(tile.positive).to_string(),
            ])?;
            rows += 1;
        }
    }
    w.flush().map_err(|e| io_err(&a.out, e))?;
    info!("scored {rows} tiles from {} images", scored.len());
    println!("scores: {}", a.out.display());
    Ok(())
}

/// Score rows of one image, keyed by grid cell.
struct ImageScores {
    name: String,
    cells: HashMap<(usize, usize), (f64, Option<bool>)>,
}

fn read_scores(path: &Path) -> Result<Vec<ImageScores>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ci), Some(cr), Some(cc), Some(cs)) = (col("image"), col("row"), col("col"), col("score")) else {
        return Err(CliError::Data(format!(
            "{}: score CSV needs image,row,col,score columns",
            path.display()
        )));
    };
    let cl = col("label");
    let mut images: Vec<ImageScores> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| CliError::Data(format!("{}: row {}: invalid {what}", path.display(), n + 2));
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let name = field(ci).to_string();
        let row: usize = field(cr).parse().map_err(|_| bad("row"))?;
        let c: usize = field(cc).parse().map_err(|_| bad("col"))?;
        let score: f64 = field(cs).parse().map_err(|_| bad("score"))?;
        if !score.is_finite() {
            return Err(bad("score"));
        }
        let label = match cl.map(field) {
            None | Some("") => None,
            Some("1") => Some(true),
            Some("0") => Some(false),
            Some(_) => return Err(bad("label")),
        };
        let slot = *index.entry(name.clone()).or_insert_with(|| {
            images.push(ImageScores {
                name,
                cells: HashMap::new(),
            });
            images.len() - 1
        });
        if images[slot].cells.insert((row, c), (score, label)).is_some() {
            return Err(bad("duplicate tile"));
        }
    }
    if images.is_empty() {
        return Err(CliError::Data(format!("{}: no score rows", path.display())));
    }
    Ok(images)
}

fn grid_shape(img: &ImageScores) -> (usize, usize) {
    let rows = img.cells.keys().map(|k| k.0).max().map_or(0, |m| m + 1);
    let cols = img.cells.keys().map(|k| k.1).max().map_or(0, |m| m + 1);
    (rows, cols)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let cfg = a.config.resolve()?;
    let images = read_scores(&a.scores)?;

    let truth_from_manifest: Option<HashMap<String, LabelGrid>> = match &a.manifest {
        Some(path) => {
            let samples = load_samples(&load_manifest(path)?)?;
            let mut map = HashMap::new();
            for (i, s) in samples.iter().enumerate() {
                map.insert(s.name.clone(), tile_sample(s, i, &cfg.train.net)?.label_grid());
            }
            Some(map)
        }
        None => None,
    };

    let mut grids = Vec::with_capacity(images.len());
    for img in &images {
        let (rows, cols) = grid_shape(img);
        let mut scores = Vec::with_capacity(rows * cols);
        let mut labels = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let &(s, l) = img
                    .cells
                    .get(&(r, c))
                    .ok_or_else(|| CliError::Data(format!("{}: tile ({r}, {c}) has no score", img.name)))?;
                scores.push(s);
                labels.push(l);
            }
        }
        let truth = match &truth_from_manifest {
            Some(map) => {
                let g = map
                    .get(&img.name)
                    .ok_or_else(|| CliError::Data(format!("{}: image not in the manifest", img.name)))?;
                if (g.rows(), g.cols()) != (rows, cols) {
                    return Err(CliError::Data(format!(
                        "{}: score grid is {rows}x{cols} but the manifest tiling is {}x{}",
                        img.name,
                        g.rows(),
                        g.cols()
                    )));
                }
                g.clone()
            }
            None => {
                let cells = labels.into_iter().collect::<Option<Vec<bool>>>().ok_or_else(|| {
                    CliError::Data(
                        "missing labels: the score CSV has no label column values and no --manifest was given".into(),
                    )
                })?;
                LabelGrid::new(rows, cols, cells)
            }
        };
        grids.push(ScoredGrid::new(scores, truth));
    }

    let report = gspcanet::eval::evaluate_grids(&grids, cfg.beta, &cfg.matching)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| io_err(&a.out_dir, e))?;
    let dataset = a
        .scores
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let metrics = a.out_dir.join("metrics.csv");
    write_metrics_csv(&report, &dataset, &metrics).map_err(|e| io_err(&metrics, e))?;
    match &report.roc {
        Some(roc) => {
            let p = a.out_dir.join("roc.csv");
            write_curve_csv(&roc.curve, &p).map_err(|e| io_err(&p, e))?;
        }
        None => warn!("all tiles share one class; roc.csv not written"),
    }
    match &report.froc {
        Some(curve) => {
            let p = a.out_dir.join("froc.csv");
            write_curve_csv(curve, &p).map_err(|e| io_err(&p, e))?;
        }
        None => warn!("no true tumors; froc.csv not written"),
    }
    println!("{TABLE_HEADER}");
    println!("{}", format_table_row(&a.method, &report));
    Ok(())
}

pub fn experiment_bias(a: &BiasArgs) -> Result<(), CliError> {
    let mut cfg = a.config.resolve()?;
    if let Some(seed) = a.seed {
        cfg.train.seed = seed;
    }
    let seeds = match (&a.seeds, a.runs) {
        (Some(s), Some(n)) if s.len() != n => {
            return Err(CliError::Usage(format!(
                "--runs {n} disagrees with {} --seeds",
                s.len()
            )));
        }
        (Some(s), _) => s.clone(),
        (None, n) => derive_seeds(cfg.train.seed, n.unwrap_or(10)),
    };
    if seeds.len() < 2 {
        return Err(CliError::Usage(format!(
            "experiment-bias needs at least 2 runs for a standard deviation, got {}",
            seeds.len()
        )));
    }
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(CliError::Usage(format!(
            "test_fraction must be in (0, 1), got {}",
            cfg.test_fraction
        )));
    }
    cfg.train.net.validate()?;
    let samples = load_samples(&load_manifest(&a.manifest)?)?;
    let opts = cfg.train_options();
    let report = selection_bias(&seeds, |seed| {
        let acc = bias_run(&samples, &opts, cfg.test_fraction, seed).map_err(CliError::from)?;
        info!("run with seed {seed}: accuracy {acc:.4}");
        Ok::<f64, CliError>(acc)
    })?;

    let mut w = csv::Writer::from_path(&a.out).map_err(|e| io_err(&a.out, e))?;
    w.write_record(["run", "seed", "accuracy", "mean", "std"])?;
    for (i, (seed, acc)) in report.seeds.iter().zip(&report.accuracies).enumerate() {
        w.write_record([
            (i + 1).to_string(),
            seed.to_string(),
            acc.to_string(),
            String::new(),
            String::new(),
        ])?;
    }
    w.write_record([
        "summary".to_string(),
        String::new(),
        String::new(),
        report.mean.to_string(),
        report.std.to_string(),
    ])?;
    w.flush().map_err(|e| io_err(&a.out, e))?;
    println!("runs: {}", report.accuracies.len());
    println!("mean accuracy: {:.4}", report.mean);
    println!("std: {:.4}", report.std);
    println!("report: {}", a.out.display());
    Ok(())
}
