use std::fs;
use std::path::Path;
use std::process::Command;

use crossview::commands::{
    checkpoint_file, cmd_ablate, cmd_embed_export, cmd_synth, cmd_train, loss_file, AblationGrid, ABLATION_COLUMNS,
    ABLATION_FILE, METRICS_FILE,
};
use crossview::config::{parse_run_config, render_run_config};
use crossview_core::encoder::EncoderKind;
use crossview_core::gnn::GnnKind;
use crossview_core::pipeline::{SynthConfig, TrainConfig};

const RUN: &str = "\
# quick run for tests
epochs = 15
knn_k = 4
seed = 3
pretrain_epochs = 10
";

fn config(extra: &str) -> TrainConfig {
    parse_run_config(&format!("{RUN}{extra}"), Path::new("test.cfg")).unwrap()
}

fn dataset(dir: &Path, seed: u64) {
    cmd_synth(
        &SynthConfig {
            n: 40,
            image_size: 8,
            seed,
            ..Default::default()
        },
        dir,
    )
    .unwrap();
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn metrics_are_byte_identical_across_runs_and_thread_counts() {
    let data = tempfile::tempdir().unwrap();
    dataset(data.path(), 1);
    let cfg = config("");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_train(data.path(), &cfg, a.path(), 1).unwrap();
    cmd_train(data.path(), &cfg, b.path(), 3).unwrap();
    let names = [METRICS_FILE.to_string(), loss_file(2), checkpoint_file(4), "predictions.csv".into()];
    for name in names {
        let (x, y) = (fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn beta_zero_keeps_contrastive_columns_with_no_weight() {
    let data = tempfile::tempdir().unwrap();
    dataset(data.path(), 2);
    let out = tempfile::tempdir().unwrap();
    cmd_train(data.path(), &config("beta = 0\nencoder = identity\n"), out.path(), 2).unwrap();
    let rows = csv_rows(&out.path().join(loss_file(0)));
    assert_eq!(rows[0], ["epoch", "l_m", "l_f", "l_pos", "l_neg", "l_diag", "total"]);
    assert_eq!(rows.len(), 16);
    for r in &rows[1..] {
        let v: Vec<f64> = r.iter().map(|s| s.parse().unwrap()).collect();
        assert!(v[3] != 0.0 && v[4] != 0.0, "contrastive terms still computed");
        let rest = v[1] + v[2] + v[5];
        assert!((v[6] - rest).abs() <= 1e-9 * rest.abs().max(1.0), "{r:?}");
    }
}

#[test]
fn export_matches_recomputed_similarity() {
    let data = tempfile::tempdir().unwrap();
    dataset(data.path(), 3);
    let out = tempfile::tempdir().unwrap();
    for (extra, cosine) in [("", true), ("normalize_similarity = false\n", false)] {
        cmd_train(data.path(), &config(extra), out.path(), 2).unwrap();
        let p = cmd_embed_export(&out.path().join(checkpoint_file(1)), data.path(), out.path()).unwrap();
        let z_rows = csv_rows(&p.embeddings);
        let s_rows = csv_rows(&p.similarity);
        assert_eq!((z_rows.len(), s_rows.len()), (41, 41));
        assert_eq!(z_rows[0][..3], ["id", "label", "z0"]);
        let z: Vec<Vec<f64>> = z_rows[1..].iter().map(|r| r[2..].iter().map(|s| s.parse().unwrap()).collect()).collect();
        let unit: Vec<Vec<f64>> = z
            .iter()
            .map(|r| {
                let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                if cosine {
                    r.iter().map(|v| v / norm).collect()
                } else {
                    r.clone()
                }
            })
            .collect();
        for i in 0..40 {
            assert_eq!(s_rows[i + 1][0], z_rows[i + 1][0]);
            for j in 0..40 {
                let want: f64 = unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum();
                let got: f64 = s_rows[i + 1][j + 1].parse().unwrap();
                assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "S[{i}][{j}] {got} vs {want}");
            }
        }
    }
}

#[test]
fn export_rejects_mismatched_dataset() {
    let (data, other, out) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    dataset(data.path(), 4);
    cmd_synth(
        &SynthConfig {
            n: 40,
            image_size: 8,
            n_clinical: 5,
            seed: 4,
            ..Default::default()
        },
        other.path(),
    )
    .unwrap();
    cmd_train(data.path(), &config("encoder = identity\n"), out.path(), 2).unwrap();
    assert!(cmd_embed_export(&out.path().join(checkpoint_file(0)), other.path(), out.path()).is_err());
}

#[test]
fn single_cell_ablation_equals_train() {
    let data = tempfile::tempdir().unwrap();
    dataset(data.path(), 5);
    let cfg = config("");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let trained = cmd_train(data.path(), &cfg, a.path(), 2).unwrap().metrics;
    let grid = AblationGrid {
        gnn: vec![cfg.gnn],
        backbone: vec![cfg.encoder.kind],
        beta: vec![cfg.beta],
        delta: vec![cfg.delta],
    };
    let cells = cmd_ablate(data.path(), &cfg, &grid, b.path(), 2).unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].outcome.as_ref().unwrap(), &trained);
    let rows = csv_rows(&b.path().join(ABLATION_FILE));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][4], trained.pooled.accuracy.to_string());
}

#[test]
fn gat_and_gcn_rows_differ_only_in_gnn_and_metrics() {
    let data = tempfile::tempdir().unwrap();
    dataset(data.path(), 6);
    let out = tempfile::tempdir().unwrap();
    let grid = AblationGrid {
        gnn: vec![GnnKind::Gat, GnnKind::Gcn],
        backbone: vec![EncoderKind::Identity],
        beta: vec![0.5],
        delta: vec![0.2],
    };
    cmd_ablate(data.path(), &config(""), &grid, out.path(), 2).unwrap();
    let rows = csv_rows(&out.path().join(ABLATION_FILE));
    assert_eq!(rows[0], ABLATION_COLUMNS);
    assert_eq!(rows.len(), 3);
    assert_eq!((rows[1][0].as_str(), rows[2][0].as_str()), ("gat", "gcn"));
    assert_eq!(rows[1][1..4], rows[2][1..4]);
    assert!(rows[1][11].is_empty() && rows[2][11].is_empty());
    assert_ne!(rows[1][4..11], rows[2][4..11]);
}

#[test]
fn failed_cells_are_marked_and_the_sweep_continues() {
    let data = tempfile::tempdir().unwrap();
    dataset(data.path(), 7);
    let out = tempfile::tempdir().unwrap();
    let grid = AblationGrid {
        gnn: vec![GnnKind::Gcn],
        backbone: vec![EncoderKind::Identity],
        beta: vec![0.5, 1.5],
        delta: vec![0.2],
    };
    let cells = cmd_ablate(data.path(), &config(""), &grid, out.path(), 2).unwrap();
    assert!(cells[0].outcome.is_ok());
    assert!(cells[1].outcome.is_err());
    let rows = csv_rows(&out.path().join(ABLATION_FILE));
    assert!(rows[2][11].contains("beta"), "{:?}", rows[2]);
    assert!(rows[2][4].is_empty());
}

#[test]
fn resolved_config_is_written_and_reparses() {
    let data = tempfile::tempdir().unwrap();
    dataset(data.path(), 8);
    let out = tempfile::tempdir().unwrap();
    let cfg = config("gnn = gcn\nencoder = identity\n");
    cmd_train(data.path(), &cfg, out.path(), 2).unwrap();
    let text = fs::read_to_string(out.path().join("run_config.txt")).unwrap();
    assert_eq!(text, render_run_config(&cfg));
    assert_eq!(parse_run_config(&text, Path::new("x")).unwrap(), cfg);
}

fn binary(args: &[&str], cwd: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_crossview")).args(args).current_dir(cwd).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn exit_codes_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (code, _) = binary(&["synth", "--n", "40", "--image-size", "8", "--seed", "4", "--out", "data"], d);
    assert_eq!(code, 0);

    fs::write(d.join("unknown.cfg"), "epochs = 5\nlearning_rate = 0.1\n").unwrap();
    let (code, err) = binary(&["train", "--data", "data", "--config", "unknown.cfg", "--out", "r"], d);
    assert_eq!(code, 1);
    assert!(err.contains("unknown.cfg:2") && err.contains("learning_rate"), "{err}");
    assert!(!d.join("r").exists(), "nothing computed before config validation");

    fs::write(d.join("range.cfg"), "# bad\n\nfolds = 1\n").unwrap();
    let (code, err) = binary(&["train", "--data", "data", "--config", "range.cfg", "--out", "r"], d);
    assert_eq!(code, 1);
    assert!(err.contains("range.cfg:3") && err.contains("folds"), "{err}");

    let (code, err) = binary(&["train", "--data", "missing", "--out", "r"], d);
    assert_eq!(code, 1);
    assert!(err.contains("missing"), "{err}");

    fs::write(d.join("blowup.cfg"), format!("{RUN}lr = 1e200\nnormalize_similarity = false\nencoder = identity\n")).unwrap();
    let (code, err) = binary(&["train", "--data", "data", "--config", "blowup.cfg", "--out", "r"], d);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("fold"), "{err}");
}
