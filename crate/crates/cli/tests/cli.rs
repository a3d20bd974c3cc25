use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FAST: &[&str] = &[
    "--set",
    "l1=4",
    "--set",
    "l2=3",
    "--set",
    "graph_max_nodes=100",
    "--set",
    "graph_pool=400",
];

fn gspcanet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gspcanet"))
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gspcanet(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    gspcanet(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let data = dir.join("data");
    let mut args = vec!["synth", "--per-class", "4", "--out", s(&data)];
    args.extend_from_slice(extra);
    if !extra.contains(&"--size") {
        args.extend_from_slice(&["--size", "40"]);
    }
    ok(&args);
    data
}

fn train_fast(data: &Path, model: &Path) -> Output {
    let manifest = data.join("train.csv");
    let mut args = vec!["train", "--manifest", s(&manifest), "--out", s(model)];
    args.extend_from_slice(FAST);
    gspcanet(&args)
}

#[test]
fn synth_writes_images_masks_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    let first = ok(&[
        "synth",
        "--seed",
        "7",
        "--per-class",
        "20",
        "--size",
        "64",
        "--out",
        s(&data),
    ]);
    let images = fs::read_dir(&data)
        .unwrap()
        .filter(|e| {
            let name = e.as_ref().unwrap().file_name().into_string().unwrap();
            name.ends_with(".pgm") && !name.ends_with("_mask.pgm")
        })
        .count();
    let masks = fs::read_dir(&data)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with("_mask.pgm"))
        .count();
    assert_eq!((images, masks), (40, 40));
    assert!(data.join("manifest.csv").exists());
    assert!(first.contains("manifest: "));
    let again = ok(&[
        "synth",
        "--seed",
        "7",
        "--per-class",
        "20",
        "--size",
        "64",
        "--out",
        s(&data),
    ]);
    let digest = |t: &str| t.lines().find(|l| l.starts_with("digest:")).unwrap().to_string();
    assert_eq!(digest(&first), digest(&again));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(code(&["synth", "--per-class", "0", "--out", s(&out)]), 2);
    assert_eq!(code(&["synth", "--bogus"]), 2);
    let data = synth(dir.path(), &[]);
    let model = dir.path().join("m.gspn");
    let train = s(&data.join("train.csv")).to_owned();
    assert_eq!(
        code(&["train", "--manifest", &train, "--out", s(&model), "--set", "colour=red"]),
        2
    );
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# comment\nl2 = 99\n").unwrap();
    assert_eq!(
        code(&["train", "--manifest", &train, "--out", s(&model), "--config", s(&cfg)]),
        2
    );
    let manifest = s(&data.join("manifest.csv")).to_owned();
    let report = dir.path().join("bias.csv");
    assert_eq!(
        code(&[
            "experiment-bias",
            "--manifest",
            &manifest,
            "--runs",
            "1",
            "--out",
            s(&report)
        ]),
        2
    );
}

#[test]
fn help_lists_keys_with_defaults() {
    for cmd in ["train", "evaluate", "experiment-bias"] {
        let help = ok(&[cmd, "--help"]);
        for key in ["lambda1", "graph_max_nodes", "svm_c", "min_coverage", "test_fraction"] {
            assert!(help.contains(key), "{cmd} --help lacks {key}");
        }
        assert!(help.contains("lambda1              0.001"), "{help}");
    }
}

#[test]
fn train_predict_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &["--size", "60"]);
    let model = dir.path().join("m.gspn");
    let out = train_fast(&data, &model);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(
        log.contains("stage 1: 4 filters") && log.contains("stage 2: 3 filters"),
        "{log}"
    );
    assert!(model.exists());

    let scores = dir.path().join("scores.csv");
    ok(&[
        "predict",
        "--model",
        s(&model),
        "--manifest",
        s(&data.join("test.csv")),
        "--out",
        s(&scores),
    ]);
    let text = fs::read_to_string(&scores).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("image,row,col,score,label"));
    let rows: Vec<&str> = lines.collect();
    // 4 test images of 60×60 → 9 tiles each
    assert_eq!(rows.len(), 36);
    assert!(rows
        .iter()
        .all(|r| r.split(',').nth(3).unwrap().parse::<f64>().unwrap().is_finite()));

    let ev = dir.path().join("ev");
    let printed = ok(&["evaluate", "--scores", s(&scores), "--out-dir", s(&ev)]);
    assert!(printed.starts_with("Method | P | R | F_beta | T | Accuracy | AUC\nGS-PCANet | "));
    for f in ["metrics.csv", "roc.csv", "froc.csv"] {
        assert!(ev.join(f).exists(), "{f}");
    }
    let with_manifest = ok(&[
        "evaluate",
        "--scores",
        s(&scores),
        "--manifest",
        s(&data.join("test.csv")),
        "--out-dir",
        s(&ev),
    ]);
    assert_eq!(printed, with_manifest);
}

fn write_scores(path: &Path, rows: &[(usize, usize, f64, &str)]) {
    let mut text = String::from("image,row,col,score,label\n");
    for (r, c, score, label) in rows {
        text.push_str(&format!("img,{r},{c},{score},{label}\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn evaluate_perfect_inverted_and_unlabeled() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("perfect.csv");
    write_scores(
        &p,
        &[
            (0, 0, 2.0, "1"),
            (0, 1, -1.0, "0"),
            (1, 0, -0.5, "0"),
            (1, 1, -2.0, "0"),
        ],
    );
    let row = ok(&["evaluate", "--scores", s(&p), "--out-dir", s(dir.path())]);
    assert!(
        row.contains("GS-PCANet | 1.000 | 1.000 | 1.000 | 1.000 | 1.000 | 1.000 ± "),
        "{row}"
    );

    let inv = dir.path().join("inverted.csv");
    write_scores(
        &inv,
        &[(0, 0, -2.0, "1"), (0, 1, 1.0, "0"), (1, 0, 0.5, "0"), (1, 1, 2.0, "0")],
    );
    let row = ok(&["evaluate", "--scores", s(&inv), "--out-dir", s(dir.path())]);
    let auc: f64 = row
        .lines()
        .nth(1)
        .unwrap()
        .rsplit(" | ")
        .next()
        .unwrap()
        .split(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(auc < 0.5, "{row}");

    let bare = dir.path().join("bare.csv");
    write_scores(&bare, &[(0, 0, 1.0, ""), (0, 1, -1.0, "")]);
    let out = gspcanet(&["evaluate", "--scores", s(&bare), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing labels"));
}

#[test]
fn data_io_and_model_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let model = dir.path().join("m.gspn");

    // single-class manifest
    let text = fs::read_to_string(data.join("train.csv")).unwrap();
    let healthy: String = text
        .lines()
        .filter(|l| !l.contains(",cancerous,"))
        .map(|l| format!("{l}\n"))
        .collect();
    let single = data.join("healthy_only.csv");
    fs::write(&single, healthy).unwrap();
    assert_eq!(code(&["train", "--manifest", s(&single), "--out", s(&model)]), 3);

    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&["train", "--manifest", s(&missing), "--out", s(&model)]), 4);

    assert!(train_fast(&data, &model).status.success());
    let rgb = synth(&dir.path().join("rgb"), &["--channels", "3"]);
    let scores = dir.path().join("s.csv");
    let out = gspcanet(&[
        "predict",
        "--model",
        s(&model),
        "--manifest",
        s(&rgb.join("test.csv")),
        "--out",
        s(&scores),
    ]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("channel"));

    let mut bytes = fs::read(&model).unwrap();
    bytes[4] = 9;
    let bumped = dir.path().join("bumped.gspn");
    fs::write(&bumped, bytes).unwrap();
    let test = s(&data.join("test.csv")).to_owned();
    assert_eq!(
        code(&[
            "predict",
            "--model",
            s(&bumped),
            "--manifest",
            &test,
            "--out",
            s(&scores)
        ]),
        5
    );
}

#[test]
fn tuning_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let model = dir.path().join("m.gspn");
    let manifest = data.join("train.csv");
    let mut args = vec!["train", "--manifest", s(&manifest), "--out", s(&model), "--tune"];
    args.extend_from_slice(FAST);
    let printed = ok(&args);
    let l1: f64 = printed
        .lines()
        .find_map(|l| l.strip_prefix("tuned lambda1: "))
        .expect("tuned value printed")
        .parse()
        .unwrap();
    assert!([0.0, 1e-3, 1e-2].contains(&l1));
}

#[test]
fn bias_with_repeated_seeds_has_zero_std() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let manifest = s(&data.join("manifest.csv")).to_owned();
    let report = dir.path().join("bias.csv");
    let mut args = vec![
        "experiment-bias",
        "--manifest",
        &manifest,
        "--seeds",
        "5,5,5",
        "--out",
        s(&report),
    ];
    args.extend_from_slice(FAST);
    ok(&args);
    let text = fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "run,seed,accuracy,mean,std");
    assert!(lines[4].starts_with("summary,,,") && lines[4].ends_with(",0"), "{text}");
    ok(&args);
    assert_eq!(fs::read_to_string(&report).unwrap(), text);
}
