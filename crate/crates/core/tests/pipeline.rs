use gspcanet::eval::MatchConfig;
use gspcanet::imagio::{generate_synthetic, SynthSpec};
use gspcanet::network::{extract_features, load_model, save_model, NetConfig};
use gspcanet::pipeline::{
    evaluate_scored, load_manifest_samples, score_samples, tile_accuracy, tile_features, train, TrainOptions,
};

fn small_options() -> TrainOptions {
    let mut net = NetConfig::default().with_filters(4, 3);
    net.graph.max_nodes = 150;
    net.graph.pool = 600;
    TrainOptions {
        net,
        ..TrainOptions::default()
    }
}

#[test]
fn synth_train_save_load_score() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        per_class: 6,
        size: 40,
        ..SynthSpec::default()
    };
    let out = generate_synthetic(&spec, dir.path()).unwrap();
    let train_set = load_manifest_samples(&out.train_path).unwrap();
    let test_set = load_manifest_samples(out.test_path.as_ref().unwrap()).unwrap();

    let model = train(&train_set, &small_options()).unwrap();
    assert_eq!(model.channels.len(), 1);
    assert_eq!(model.channels[0].stage1.len(), 4);
    assert_eq!(model.channels[0].stage2.len(), 3);

    let path = dir.path().join("model.gspn");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded, model);

    let scored = score_samples(&model, &test_set).unwrap();
    let rescored = score_samples(&loaded, &test_set).unwrap();
    for (a, b) in scored.iter().zip(&rescored) {
        assert_eq!(a.scores, b.scores);
    }
    // 40×40 images with 20-pixel tiles
    assert!(scored.iter().all(|s| s.scores.len() == 4 && s.has_mask));

    let acc = tile_accuracy(&scored);
    assert!((0.0..=1.0).contains(&acc));
    let report = evaluate_scored(&scored, 1.0, &MatchConfig::default()).unwrap();
    assert!((report.accuracy.value - acc).abs() < 1e-12);
}

#[test]
fn tile_features_match_whole_tile_extraction() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        per_class: 3,
        size: 40,
        test_fraction: 0.0,
        ..SynthSpec::default()
    };
    let out = generate_synthetic(&spec, dir.path()).unwrap();
    let samples = load_manifest_samples(&out.manifest_path).unwrap();
    let model = train(&samples, &small_options()).unwrap();
    let s = &samples[0];
    let grid = gspcanet::pipeline::tile_sample(s, 0, &model.config).unwrap();
    let features = tile_features(s, &grid, &model.config, &model.channels).unwrap();
    for (tile, f) in grid.tiles.iter().zip(&features) {
        let crop = s.image.crop(tile.row, tile.col, grid.tile, grid.tile).unwrap();
        assert_eq!(extract_features(&crop, &model).unwrap().values, f.values);
    }
}
