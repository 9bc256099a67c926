use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::thread;

use crossview_core::encoder::{EncoderKind, Pretrained};
use crossview_core::gnn::GnnKind;
use crossview_core::pipeline::{
    aggregate, embed, make_folds, prepare_encoder, synth_generate, train_one_fold, CvRun, FoldReport, ImageData,
    ModelState, MultimodalDataset, SynthConfig, TrainConfig,
};
use crossview_core::Error as ModelError;

use crate::atomic::{write_atomic, write_csv};
use crate::bundle::{read_bundle, write_bundle, DatasetBundle, GeneratorInfo};
use crate::config::{encoder_name, gnn_name, render_run_config};
use crate::error::{CliError, Result};
use crate::report::{class_name, fmt, write_loss_csv, write_roc_csv, write_series_csv, MetricsFile};

pub const METRICS_FILE: &str = "metrics.json";
pub const RUN_CONFIG_FILE: &str = "run_config.txt";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const POOLED_ROC_FILE: &str = "roc_pooled.csv";
pub const ENCODER_LOSS_FILE: &str = "encoder_loss.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const FUSED_FILE: &str = "fused_embeddings.csv";
pub const SIMILARITY_FILE: &str = "similarity.csv";

pub fn loss_file(fold: usize) -> String {
    format!("loss_fold{fold}.csv")
}

pub fn roc_file(fold: usize) -> String {
    format!("roc_fold{fold}.csv")
}

pub fn checkpoint_file(fold: usize) -> String {
    format!("checkpoint_fold{fold}.json")
}

pub fn default_threads() -> usize {
    thread::available_parallelism().map_or(1, NonZeroUsize::get)
}

pub fn cmd_synth(cfg: &SynthConfig, out: &Path) -> Result<DatasetBundle> {
    let bundle = DatasetBundle::new(synth_generate(cfg)?, Some(GeneratorInfo::from(cfg)));
    write_bundle(out, &bundle)?;
    Ok(bundle)
}

/// Trains every fold on up to `threads` workers. Results do not depend on
/// the thread count.
pub fn run_folds(
    data: &MultimodalDataset,
    cfg: &TrainConfig,
    pretrained: Option<&Pretrained>,
    threads: usize,
) -> Result<CvRun> {
    cfg.validate()?;
    data.validate()?;
    let folds = make_folds(data, cfg)?;
    let encoder = pretrained.map(|p| &p.params);
    let k = folds.folds.len();
    let workers = threads.clamp(1, k);

    let mut results: Vec<Option<std::result::Result<(ModelState, FoldReport), ModelError>>> = vec![None; k];
    thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let folds = &folds;
                s.spawn(move || {
                    (w..k)
                        .step_by(workers)
                        .map(|f| (f, train_one_fold(data, encoder, cfg, &folds.folds[f], f)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (f, r) in h.join().expect("fold worker panicked") {
                results[f] = Some(r);
            }
        }
    });

    let mut models = Vec::with_capacity(k);
    let mut reports = Vec::with_capacity(k);
    for (fold, r) in results.into_iter().enumerate() {
        let (state, report) = r
            .expect("every fold assigned")
            .map_err(|source| CliError::Fold { fold, source })?;
        models.push(state);
        reports.push(report);
    }
    let history = pretrained.map(|p| p.loss_history.clone()).unwrap_or_default();
    let report = aggregate(reports, &data.class_indices(), folds.stratified, history)?;
    Ok(CvRun { report, models })
}

pub struct TrainOutput {
    pub run: CvRun,
    pub metrics: MetricsFile,
}

pub fn cmd_train(data_dir: &Path, cfg: &TrainConfig, out: &Path, threads: usize) -> Result<TrainOutput> {
    cfg.validate()?;
    let bundle = read_bundle(data_dir)?;
    let data = &bundle.data;
    let pretrained = prepare_encoder(data, cfg)?;
    let run = run_folds(data, cfg, pretrained.as_ref(), threads)?;
    let metrics = MetricsFile::new(&run.report, cfg.seed, data.n());
    write_train_outputs(out, data, cfg, &run, &metrics)?;
    Ok(TrainOutput { run, metrics })
}

fn write_train_outputs(
    out: &Path,
    data: &MultimodalDataset,
    cfg: &TrainConfig,
    run: &CvRun,
    metrics: &MetricsFile,
) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_atomic(&out.join(RUN_CONFIG_FILE), render_run_config(cfg).as_bytes())?;
    let report = &run.report;
    for (f, model) in report.folds.iter().zip(&run.models) {
        write_loss_csv(&out.join(loss_file(f.fold)), &f.metrics.loss_history)?;
        write_roc_csv(&out.join(roc_file(f.fold)), &f.metrics.roc_points)?;
        let path = out.join(checkpoint_file(f.fold));
        let json = serde_json::to_vec(model).map_err(|e| CliError::format(&path, e.to_string()))?;
        write_atomic(&path, &json)?;
    }
    write_roc_csv(&out.join(POOLED_ROC_FILE), &report.pooled.roc_points)?;
    if !report.encoder_loss_history.is_empty() {
        write_series_csv(&out.join(ENCODER_LOSS_FILE), "reconstruction_mse", &report.encoder_loss_history)?;
    }
    write_predictions(&out.join(PREDICTIONS_FILE), data, &report.folds)?;
    metrics.write(&out.join(METRICS_FILE))
}

fn write_predictions(path: &Path, data: &MultimodalDataset, folds: &[FoldReport]) -> Result<()> {
    let c = data.n_classes();
    let mut header = vec!["id".to_string(), "fold".into(), "label".into()];
    header.extend((0..c).map(|k| format!("p_{}", class_name(k))));
    header.push("predicted".into());
    let classes = data.class_indices();
    let mut rows: Vec<(usize, Vec<String>)> = Vec::with_capacity(data.n());
    for f in folds {
        for (r, &i) in f.test_indices.iter().enumerate() {
            let p = f.probabilities.row(r);
            let mut row = vec![data.ids[i].clone(), f.fold.to_string(), class_name(classes[i])];
            row.extend(p.iter().map(|v| fmt(*v)));
            row.push(class_name(crossview_core::pipeline::argmax(p)));
            rows.push((i, row));
        }
    }
    rows.sort_by_key(|(i, _)| *i);
    write_csv(path, &header, rows.into_iter().map(|(_, r)| r))
}

/// Axes of an ablation sweep. Cells run in the order gnn, backbone, β, δ.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationGrid {
    pub gnn: Vec<GnnKind>,
    pub backbone: Vec<EncoderKind>,
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub gnn: GnnKind,
    pub backbone: EncoderKind,
    pub beta: f64,
    pub delta: f64,
    pub outcome: std::result::Result<MetricsFile, String>,
}

pub fn cmd_ablate(
    data_dir: &Path,
    base: &TrainConfig,
    grid: &AblationGrid,
    out: &Path,
    threads: usize,
) -> Result<Vec<AblationCell>> {
    if grid.gnn.is_empty() || grid.backbone.is_empty() || grid.beta.is_empty() || grid.delta.is_empty() {
        return Err(CliError::Usage("every ablation axis needs at least one value".into()));
    }
    let bundle = read_bundle(data_dir)?;
    let data = &bundle.data;
    let embedded = matches!(data.images, ImageData::Embeddings(_));

    let encoders: Vec<std::result::Result<Option<Pretrained>, String>> = grid
        .backbone
        .iter()
        .map(|&kind| {
            if embedded && kind != EncoderKind::Identity {
                return Err("dataset carries embeddings; only the identity backbone applies".to_string());
            }
            let mut cfg = base.clone();
            cfg.encoder.kind = kind;
            prepare_encoder(data, &cfg).map_err(|e| e.to_string())
        })
        .collect();

    let mut cells = Vec::new();
    for &gnn in &grid.gnn {
        for (&backbone, encoder) in grid.backbone.iter().zip(&encoders) {
            for &beta in &grid.beta {
                for &delta in &grid.delta {
                    let mut cfg = base.clone();
                    cfg.gnn = gnn;
                    cfg.encoder.kind = backbone;
                    cfg.beta = beta;
                    cfg.delta = delta;
                    let outcome = match encoder {
                        Err(msg) => Err(msg.clone()),
                        Ok(pre) => run_folds(data, &cfg, pre.as_ref(), threads)
                            .map(|run| MetricsFile::new(&run.report, cfg.seed, data.n()))
                            .map_err(|e| e.to_string()),
                    };
                    cells.push(AblationCell {
                        gnn,
                        backbone,
                        beta,
                        delta,
                        outcome,
                    });
                }
            }
        }
    }
    write_ablation(&out.join(ABLATION_FILE), &cells)?;
    Ok(cells)
}

pub const ABLATION_COLUMNS: [&str; 12] = [
    "gnn",
    "backbone",
    "beta",
    "delta",
    "accuracy",
    "macro_f1",
    "macro_sensitivity",
    "macro_precision",
    "auc",
    "fold_auc_mean",
    "fold_accuracy_mean",
    "error",
];

fn write_ablation(path: &Path, cells: &[AblationCell]) -> Result<()> {
    let header = ABLATION_COLUMNS.map(String::from);
    let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
    let rows = cells.iter().map(|c| {
        let mut row = vec![
            gnn_name(c.gnn).to_string(),
            encoder_name(c.backbone).to_string(),
            fmt(c.beta),
            fmt(c.delta),
        ];
        match &c.outcome {
            Ok(m) => row.extend([
                fmt(m.pooled.accuracy),
                fmt(m.pooled.macro_f1),
                fmt(m.pooled.macro_sensitivity),
                fmt(m.pooled.macro_precision),
                opt(m.pooled.auc),
                opt(m.fold_auc_mean),
                fmt(m.fold_accuracy_mean),
                String::new(),
            ]),
            Err(msg) => {
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(msg.clone());
            }
        }
        row
    });
    write_csv(path, &header, rows)
}

pub struct ExportPaths {
    pub embeddings: PathBuf,
    pub similarity: PathBuf,
}

pub fn cmd_embed_export(checkpoint: &Path, data_dir: &Path, out: &Path) -> Result<ExportPaths> {
    let bytes = fs::read(checkpoint).map_err(|e| CliError::io(checkpoint, e))?;
    let state: ModelState =
        serde_json::from_slice(&bytes).map_err(|e| CliError::format(checkpoint, e.to_string()))?;
    let bundle = read_bundle(data_dir)?;
    let data = &bundle.data;
    let emb = embed(&state, data)?;

    let paths = ExportPaths {
        embeddings: out.join(FUSED_FILE),
        similarity: out.join(SIMILARITY_FILE),
    };
    let classes = data.class_indices();
    let d = emb.zhat.cols();
    let mut header = vec!["id".to_string(), "label".into()];
    header.extend((0..d).map(|j| format!("z{j}")));
    let rows = (0..data.n()).map(|i| {
        let mut r = vec![data.ids[i].clone(), class_name(classes[i])];
        r.extend(emb.zhat.row(i).iter().map(|v| fmt(*v)));
        r
    });
    write_csv(&paths.embeddings, &header, rows)?;

    let mut header = vec!["id".to_string()];
    header.extend(data.ids.iter().cloned());
    let rows = (0..data.n()).map(|i| {
        let mut r = vec![data.ids[i].clone()];
        r.extend(emb.s.row(i).iter().map(|v| fmt(*v)));
        r
    });
    write_csv(&paths.similarity, &header, rows)?;
    Ok(paths)
}
