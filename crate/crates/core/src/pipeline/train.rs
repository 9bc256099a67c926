//! Model assembly, per-fold training and cross-validation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{ImageData, MultimodalDataset};
use super::metrics::{evaluate, mean_std, LossRecord, MetricsReport};
use super::split::{holdout_split, kfold_split, FoldMasks, Folds};
use crate::autodiff::{adam_step, AdamState, Tape, Var};
use crate::encoder::{encode, fit_encoder, EncoderConfig, EncoderParams, Pretrained};
use crate::error::{Error, Result};
use crate::fusion::{
    average_head_probabilities, classification_loss, concat_views, contrastive_loss, diag_loss, diag_reference,
    fuse_sum, fuse_view, similarity_matrix, total_loss, DiagReference,
};
use crate::gnn::{gnn_encode, GnnKind, GnnStack, StackConfig};
use crate::graph::{add_self_loops, knn_graph, Graph, Metric, Standardizer};
use crate::nn::{bind_all, collect_grads, xavier_uniform, Activation};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SplitMode {
    #[default]
    CrossValidation,
    /// One stratified split with this many test patients.
    Holdout { test_size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub knn_k: usize,
    pub metric: Metric,
    pub gnn: GnnKind,
    pub heads: usize,
    /// Width of every GNN layer but the last.
    pub hidden: usize,
    /// GNN output width `F'`.
    pub out_dim: usize,
    pub gnn_layers: usize,
    /// Fused embedding width.
    pub fuse_dim: usize,
    pub delta: f64,
    pub beta: f64,
    pub seed: u64,
    pub folds: usize,
    pub split: SplitMode,
    pub normalize_similarity: bool,
    pub diag_reference: DiagReference,
    pub leaky_slope: f64,
    pub activation: Activation,
    pub encoder: EncoderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr: 0.001,
            knn_k: 10,
            metric: Metric::Euclidean,
            gnn: GnnKind::Gat,
            heads: 2,
            hidden: 16,
            out_dim: 16,
            gnn_layers: 2,
            fuse_dim: 16,
            delta: 0.2,
            beta: 0.5,
            seed: 0,
            folds: 5,
            split: SplitMode::CrossValidation,
            normalize_similarity: true,
            diag_reference: DiagReference::Average,
            leaky_slope: 0.2,
            activation: Activation::Elu,
            encoder: EncoderConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Parameter(msg.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and non-negative");
        }
        if self.knn_k == 0 {
            return bad("knn_k must be at least 1");
        }
        if self.heads == 0 || self.hidden == 0 || self.out_dim == 0 || self.gnn_layers == 0 || self.fuse_dim == 0 {
            return bad("heads, hidden, out_dim, gnn_layers and fuse_dim must be positive");
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad("delta must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta must lie in [0, 1]");
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return bad("leaky_slope must lie in (0, 1)");
        }
        self.encoder.validate()
    }

    pub fn stack_config(&self) -> StackConfig {
        let mut widths = vec![self.hidden; self.gnn_layers - 1];
        widths.push(self.out_dim);
        StackConfig {
            kind: self.gnn,
            heads: self.heads,
            widths,
            leaky_slope: self.leaky_slope,
            activation: self.activation,
        }
    }
}

/// Every trainable tensor outside the image encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gnn_m: GnnStack,
    pub gnn_f: GnnStack,
    /// `(d_m + F') × D_fuse`.
    pub w_m: Tensor,
    /// `(d_f + F') × D_fuse`.
    pub w_f: Tensor,
    /// `D_fuse × C`.
    pub head_m: Tensor,
    pub head_f: Tensor,
}

impl ModelParams {
    pub fn init(cfg: &TrainConfig, d_m: usize, d_f: usize, n_classes: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stack = cfg.stack_config();
        let gnn_m = GnnStack::init(&stack, d_m, rng.next_u64())?;
        let gnn_f = GnnStack::init(&stack, d_f, rng.next_u64())?;
        let fp = cfg.out_dim;
        let d = cfg.fuse_dim;
        Ok(Self {
            gnn_m,
            gnn_f,
            w_m: xavier_uniform(&mut rng, &[d_m + fp, d], d_m + fp, d),
            w_f: xavier_uniform(&mut rng, &[d_f + fp, d], d_f + fp, d),
            head_m: xavier_uniform(&mut rng, &[d, n_classes], d, n_classes),
            head_f: xavier_uniform(&mut rng, &[d, n_classes], d, n_classes),
        })
    }

    /// Order: image GNN, clinical GNN, `w_m`, `w_f`, `head_m`, `head_f`.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut t = self.gnn_m.tensors();
        t.extend(self.gnn_f.tensors());
        t.extend([&self.w_m, &self.w_f, &self.head_m, &self.head_f]);
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut t = self.gnn_m.tensors_mut();
        t.extend(self.gnn_f.tensors_mut());
        t.extend([&mut self.w_m, &mut self.w_f, &mut self.head_m, &mut self.head_f]);
        t
    }
}

/// Standardised node features and their self-looped KNN graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewInputs {
    pub image: Tensor,
    pub clinical: Tensor,
    pub image_graph: Graph,
    pub clinical_graph: Graph,
}

pub fn build_views(
    image: &Tensor,
    clinical: &Tensor,
    image_scaler: &Standardizer,
    clinical_scaler: &Standardizer,
    cfg: &TrainConfig,
) -> Result<ViewInputs> {
    let image = image_scaler.apply(image)?;
    let clinical = clinical_scaler.apply(clinical)?;
    let image_graph = add_self_loops(&knn_graph(&image, cfg.knn_k, cfg.metric)?)?;
    let clinical_graph = add_self_loops(&knn_graph(&clinical, cfg.knn_k, cfg.metric)?)?;
    Ok(ViewInputs {
        image,
        clinical,
        image_graph,
        clinical_graph,
    })
}

/// Labels as training sees them. Rows outside the training mask are
/// overwritten with class 0 and excluded from every loss, so the true
/// labels of held-out patients never reach the optimiser.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLabels {
    y: Tensor,
    mask: Vec<bool>,
}

impl TrainingLabels {
    pub fn new(labels: &Tensor, train: &[bool]) -> Result<Self> {
        let (n, c) = labels.dims2()?;
        if train.len() != n {
            return Err(Error::Shape {
                op: "training labels",
                lhs: vec![n, c],
                rhs: vec![train.len()],
            });
        }
        if !train.iter().any(|&t| t) {
            return Err(Error::Dataset("training mask selects no patients".into()));
        }
        let mut y = Tensor::zeros(&[n, c]);
        for (i, &t) in train.iter().enumerate() {
            if t {
                y.data_mut()[i * c..(i + 1) * c].copy_from_slice(labels.row(i));
            } else {
                y.set(i, 0, 1.0);
            }
        }
        Ok(Self { y, mask: train.to_vec() })
    }

    pub fn y(&self) -> &Tensor {
        &self.y
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
}

/// Tape handles produced by one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub z_m: Var,
    pub z_f: Var,
    pub zhat_m: Var,
    pub zhat_f: Var,
    pub zhat: Var,
    pub s: Var,
    pub logits_m: Var,
    pub logits_f: Var,
}

/// `vars` binds [`ModelParams::tensors`] in order.
pub fn forward(
    tape: &mut Tape,
    params: &ModelParams,
    vars: &[Var],
    views: &ViewInputs,
    cfg: &TrainConfig,
) -> Result<ForwardVars> {
    let nm = params.gnn_m.tensors().len();
    let nf = params.gnn_f.tensors().len();
    if vars.len() != nm + nf + 4 {
        return Err(Error::Contract(format!("forward got {} vars, expected {}", vars.len(), nm + nf + 4)));
    }
    let (vm, rest) = vars.split_at(nm);
    let (vf, fusion) = rest.split_at(nf);

    let xm = tape.constant(views.image.clone());
    let xf = tape.constant(views.clinical.clone());
    let z_m = gnn_encode(tape, &views.image_graph, xm, &params.gnn_m, vm)?;
    let z_f = gnn_encode(tape, &views.clinical_graph, xf, &params.gnn_f, vf)?;
    let cm = concat_views(tape, xm, z_m)?;
    let cf = concat_views(tape, xf, z_f)?;
    let zhat_m = fuse_view(tape, cm, fusion[0], cfg.activation)?;
    let zhat_f = fuse_view(tape, cf, fusion[1], cfg.activation)?;
    let zhat = fuse_sum(tape, zhat_m, zhat_f)?;
    let s = similarity_matrix(tape, zhat, cfg.normalize_similarity)?;
    let logits_m = tape.matmul(zhat_m, fusion[2])?;
    let logits_f = tape.matmul(zhat_f, fusion[3])?;
    Ok(ForwardVars {
        z_m,
        z_f,
        zhat_m,
        zhat_f,
        zhat,
        s,
        logits_m,
        logits_f,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ObjectiveVars {
    pub l_m: Var,
    pub l_f: Var,
    pub l_pos: Var,
    pub l_neg: Var,
    pub l_contrastive: Var,
    pub l_diag: Var,
    pub total: Var,
}

pub fn objective(
    tape: &mut Tape,
    params: &ModelParams,
    vars: &[Var],
    fwd: &ForwardVars,
    views: &ViewInputs,
    labels: &TrainingLabels,
    cfg: &TrainConfig,
) -> Result<ObjectiveVars> {
    let n_gnn = params.gnn_m.tensors().len() + params.gnn_f.tensors().len();
    let (head_m, head_f) = (vars[n_gnn + 2], vars[n_gnn + 3]);
    let y = labels.y();
    let mask = labels.mask();
    let l_m = classification_loss(tape, fwd.zhat_m, head_m, y, mask)?;
    let l_f = classification_loss(tape, fwd.zhat_f, head_f, y, mask)?;
    let terms = contrastive_loss(
        tape,
        fwd.s,
        &views.image_graph,
        &views.clinical_graph,
        y,
        Some(mask),
        cfg.delta,
    )?;
    let reference = diag_reference(&views.image_graph, &views.clinical_graph, cfg.diag_reference)?;
    let l_diag = diag_loss(tape, fwd.s, &reference)?;
    let total = total_loss(tape, l_m, l_f, terms.l_contrastive, l_diag, cfg.beta)?;
    Ok(ObjectiveVars {
        l_m,
        l_f,
        l_pos: terms.l_pos,
        l_neg: terms.l_neg,
        l_contrastive: terms.l_contrastive,
        l_diag,
        total,
    })
}

fn record(tape: &Tape, obj: &ObjectiveVars, epoch: usize) -> Result<LossRecord> {
    let v = |x: Var| tape.value(x).data()[0];
    let components = [
        ("l_m", obj.l_m),
        ("l_f", obj.l_f),
        ("l_pos", obj.l_pos),
        ("l_neg", obj.l_neg),
        ("l_diag", obj.l_diag),
        ("total", obj.total),
    ];
    for (component, var) in components {
        if !v(var).is_finite() {
            return Err(Error::Divergence { epoch, component });
        }
    }
    Ok(LossRecord {
        epoch,
        l_m: v(obj.l_m),
        l_f: v(obj.l_f),
        l_pos: v(obj.l_pos),
        l_neg: v(obj.l_neg),
        l_diag: v(obj.l_diag),
        total: v(obj.total),
    })
}

/// Result of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct Fitted {
    pub params: ModelParams,
    pub adam: AdamState,
    /// Losses evaluated before each epoch's update.
    pub loss_history: Vec<LossRecord>,
}

/// Full-batch Adam on the composite objective, starting from `params`.
pub fn fit(
    mut params: ModelParams,
    views: &ViewInputs,
    labels: &TrainingLabels,
    cfg: &TrainConfig,
) -> Result<Fitted> {
    cfg.validate()?;
    let mut adam = AdamState::new(&params.tensors());
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let vars = bind_all(&mut tape, &params.tensors());
        let fwd = forward(&mut tape, &params, &vars, views, cfg)?;
        let obj = objective(&mut tape, &params, &vars, &fwd, views, labels, cfg)?;
        loss_history.push(record(&tape, &obj, epoch)?);
        tape.backward(obj.total)?;
        let grads = collect_grads(&tape, &vars);
        let grad_refs: Vec<&Tensor> = grads.iter().collect();
        adam_step(&mut params.tensors_mut(), &grad_refs, &mut adam, cfg.lr)?;
    }
    Ok(Fitted {
        params,
        adam,
        loss_history,
    })
}

fn frozen_forward(params: &ModelParams, views: &ViewInputs, cfg: &TrainConfig) -> Result<(Tape, ForwardVars)> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.tensors().into_iter().map(|t| tape.constant(t.clone())).collect();
    let fwd = forward(&mut tape, params, &vars, views, cfg)?;
    Ok((tape, fwd))
}

/// Class probabilities for every node: the mean of both heads' softmax.
pub fn predict_probabilities(params: &ModelParams, views: &ViewInputs, cfg: &TrainConfig) -> Result<Tensor> {
    let (tape, fwd) = frozen_forward(params, views, cfg)?;
    average_head_probabilities(tape.value(fwd.logits_m), tape.value(fwd.logits_f))
}

/// Everything needed to rerun the model on a compatible dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub config: TrainConfig,
    pub n_classes: usize,
    /// `None` when the dataset carries precomputed image embeddings.
    pub encoder: Option<EncoderParams>,
    pub image_scaler: Standardizer,
    pub clinical_scaler: Standardizer,
    pub params: ModelParams,
    pub adam: AdamState,
}

/// Pretrains the image encoder on every image (no labels involved).
/// Returns `None` for datasets with precomputed embeddings.
pub fn prepare_encoder(data: &MultimodalDataset, cfg: &TrainConfig) -> Result<Option<Pretrained>> {
    match &data.images {
        ImageData::Images(images) => Ok(Some(fit_encoder(images, &cfg.encoder, cfg.seed)?)),
        ImageData::Embeddings(_) => Ok(None),
    }
}

/// Image feature matrix `Q^m`.
pub fn image_features(data: &MultimodalDataset, encoder: Option<&EncoderParams>) -> Result<Tensor> {
    match (&data.images, encoder) {
        (ImageData::Images(images), Some(e)) => encode(images, e),
        (ImageData::Embeddings(q), None) => Ok(q.clone()),
        (ImageData::Images(_), None) => Err(Error::Config("raw images need an encoder".into())),
        (ImageData::Embeddings(_), Some(_)) => {
            Err(Error::Config("dataset carries embeddings; an image encoder does not apply".into()))
        }
    }
}

/// Held-out predictions and metrics of one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_indices: Vec<usize>,
    /// One row per entry of `test_indices`.
    pub probabilities: Tensor,
    pub metrics: MetricsReport,
}

/// Trains on `masks.train` and evaluates on `masks.test`. Parameters are
/// initialised from `cfg.seed + fold`.
pub fn train_one_fold(
    data: &MultimodalDataset,
    encoder: Option<&EncoderParams>,
    cfg: &TrainConfig,
    masks: &FoldMasks,
    fold: usize,
) -> Result<(ModelState, FoldReport)> {
    cfg.validate()?;
    data.validate()?;
    let n = data.n();
    if masks.train.len() != n || masks.test.len() != n {
        return Err(Error::Dataset(format!("fold masks cover {} patients, dataset has {n}", masks.train.len())));
    }
    let train_idx = masks.train_indices();
    let test_idx = masks.test_indices();
    if test_idx.is_empty() {
        return Err(Error::Dataset(format!("fold {fold} has no test patients")));
    }
    let q = image_features(data, encoder)?;
    let image_scaler = Standardizer::fit(&q, &train_idx)?;
    let clinical_scaler = Standardizer::fit(&data.clinical, &train_idx)?;
    let views = build_views(&q, &data.clinical, &image_scaler, &clinical_scaler, cfg)?;

    let labels = TrainingLabels::new(&data.labels, &masks.train)?;
    let n_classes = data.n_classes();
    let init = ModelParams::init(cfg, q.cols(), data.clinical.cols(), n_classes, cfg.seed.wrapping_add(fold as u64))?;
    let fitted = fit(init, &views, &labels, cfg)?;

    let probabilities = predict_probabilities(&fitted.params, &views, cfg)?.select_rows(&test_idx)?;
    let classes = data.class_indices();
    let test_labels: Vec<usize> = test_idx.iter().map(|&i| classes[i]).collect();
    let mut metrics = evaluate(&probabilities, &test_labels)?;
    metrics.loss_history = fitted.loss_history;

    let state = ModelState {
        config: cfg.clone(),
        n_classes,
        encoder: encoder.cloned(),
        image_scaler,
        clinical_scaler,
        params: fitted.params,
        adam: fitted.adam,
    };
    let report = FoldReport {
        fold,
        test_indices: test_idx,
        probabilities,
        metrics,
    };
    Ok((state, report))
}

/// Splits for the configured protocol, seeded by `cfg.seed`.
pub fn make_folds(data: &MultimodalDataset, cfg: &TrainConfig) -> Result<Folds> {
    let classes = data.class_indices();
    match cfg.split {
        SplitMode::CrossValidation => kfold_split(&classes, cfg.folds, cfg.seed),
        SplitMode::Holdout { test_size } => Ok(Folds {
            folds: vec![holdout_split(&classes, test_size, cfg.seed)?],
            stratified: true,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    /// Metrics over the union of all test predictions.
    pub pooled: MetricsReport,
    /// Mean and population std of per-fold AUCs, over folds where it is defined.
    pub fold_auc_mean: Option<f64>,
    pub fold_auc_std: Option<f64>,
    pub fold_accuracy_mean: f64,
    pub fold_accuracy_std: f64,
    pub stratified: bool,
    /// Encoder reconstruction error per pretraining epoch.
    pub encoder_loss_history: Vec<f64>,
}

/// Pools fold predictions (in patient order) and summarises per-fold scores.
pub fn aggregate(
    folds: Vec<FoldReport>,
    labels: &[usize],
    stratified: bool,
    encoder_loss_history: Vec<f64>,
) -> Result<CvReport> {
    let n_classes = folds
        .first()
        .map(|f| f.probabilities.cols())
        .ok_or_else(|| Error::Contract("no folds to aggregate".into()))?;
    let mut slot: Vec<Option<(usize, usize)>> = vec![None; labels.len()];
    for (k, f) in folds.iter().enumerate() {
        for (r, &i) in f.test_indices.iter().enumerate() {
            if i >= labels.len() || slot[i].is_some() {
                return Err(Error::Contract(format!("patient {i} is tested twice or out of range")));
            }
            slot[i] = Some((k, r));
        }
    }
    let mut rows = Vec::new();
    let mut pooled_labels = Vec::new();
    for (i, s) in slot.iter().enumerate() {
        if let Some((k, r)) = *s {
            rows.extend_from_slice(folds[k].probabilities.row(r));
            pooled_labels.push(labels[i]);
        }
    }
    let pooled_probs = Tensor::new(vec![pooled_labels.len(), n_classes], rows)?;
    let pooled = evaluate(&pooled_probs, &pooled_labels)?;

    let aucs: Vec<f64> = folds.iter().filter_map(|f| f.metrics.auc).collect();
    let (fold_auc_mean, fold_auc_std) = if aucs.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&aucs);
        (Some(m), Some(s))
    };
    let accs: Vec<f64> = folds.iter().map(|f| f.metrics.accuracy).collect();
    let (fold_accuracy_mean, fold_accuracy_std) = mean_std(&accs);
    Ok(CvReport {
        folds,
        pooled,
        fold_auc_mean,
        fold_auc_std,
        fold_accuracy_mean,
        fold_accuracy_std,
        stratified,
        encoder_loss_history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRun {
    pub report: CvReport,
    pub models: Vec<ModelState>,
}

/// Pretrains the encoder once, then trains and evaluates every fold in turn.
pub fn run_cv(data: &MultimodalDataset, cfg: &TrainConfig) -> Result<CvRun> {
    cfg.validate()?;
    data.validate()?;
    let folds = make_folds(data, cfg)?;
    let pretrained = prepare_encoder(data, cfg)?;
    let encoder = pretrained.as_ref().map(|p| &p.params);
    let mut models = Vec::with_capacity(folds.folds.len());
    let mut reports = Vec::with_capacity(folds.folds.len());
    for (k, masks) in folds.folds.iter().enumerate() {
        let (state, report) = train_one_fold(data, encoder, cfg, masks, k)?;
        models.push(state);
        reports.push(report);
    }
    let history = pretrained.map(|p| p.loss_history).unwrap_or_default();
    let report = aggregate(reports, &data.class_indices(), folds.stratified, history)?;
    Ok(CvRun { report, models })
}

/// Fused embeddings `Ẑ` and similarity matrix `S` of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub zhat: Tensor,
    pub s: Tensor,
}

pub fn embed(state: &ModelState, data: &MultimodalDataset) -> Result<Embedding> {
    data.validate()?;
    if data.n_classes() != state.n_classes {
        return Err(Error::Config(format!(
            "model has {} classes, dataset has {}",
            state.n_classes,
            data.n_classes()
        )));
    }
    let q = image_features(data, state.encoder.as_ref())?;
    let views = build_views(&q, &data.clinical, &state.image_scaler, &state.clinical_scaler, &state.config)?;
    let (tape, fwd) = frozen_forward(&state.params, &views, &state.config)?;
    Ok(Embedding {
        zhat: tape.value(fwd.zhat).clone(),
        s: tape.value(fwd.s).clone(),
    })
}

/// Mean of `s` over distinct same-class pairs and over cross-class pairs.
pub fn class_similarity_gap(s: &Tensor, classes: &[usize]) -> Result<(f64, f64)> {
    let (n, m) = s.dims2()?;
    if n != m || n != classes.len() {
        return Err(Error::Shape {
            op: "class_similarity_gap",
            lhs: vec![n, m],
            rhs: vec![classes.len()],
        });
    }
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if classes[i] == classes[j] {
                intra += s.at(i, j);
                ni += 1;
            } else {
                inter += s.at(i, j);
                nx += 1;
            }
        }
    }
    if ni == 0 || nx == 0 {
        return Err(Error::Dataset("need at least two classes and a same-class pair".into()));
    }
    Ok((intra / ni as f64, inter / nx as f64))
}
