//! Flat `key = value` run configuration. `#` starts a comment; blank lines
//! are ignored. Every error names the offending line and key.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crossview_core::encoder::EncoderKind;
use crossview_core::fusion::DiagReference;
use crossview_core::gnn::GnnKind;
use crossview_core::graph::Metric;
use crossview_core::nn::Activation;
use crossview_core::pipeline::{SplitMode, TrainConfig};

use crate::error::{CliError, Result};

const KEYS: &[&str] = &[
    "epochs",
    "lr",
    "knn_k",
    "metric",
    "gnn",
    "heads",
    "hidden",
    "out_dim",
    "gnn_layers",
    "fuse_dim",
    "delta",
    "beta",
    "seed",
    "folds",
    "split",
    "test_size",
    "normalize_similarity",
    "diag_reference",
    "leaky_slope",
    "activation",
    "encoder",
    "latent_dim",
    "conv_channels",
    "conv_kernel",
    "conv_stride",
    "pretrain_epochs",
    "pretrain_lr",
];

pub fn load_run_config(path: &Path) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_run_config(&text, path)
}

/// Parses `text` on top of the defaults. `origin` only labels errors.
pub fn parse_run_config(text: &str, origin: &Path) -> Result<TrainConfig> {
    let err = |line: usize, key: &str, msg: String| CliError::Config {
        path: origin.to_path_buf(),
        line,
        key: key.to_string(),
        msg,
    };
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut cfg = TrainConfig::default();
    let mut split: Option<(usize, String)> = None;
    let mut test_size: Option<(usize, usize)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(err(line, content, "expected `key = value`".into()));
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(err(line, key, "unknown key".into()));
        }
        if let Some(first) = seen.insert(key.to_string(), line) {
            return Err(err(line, key, format!("duplicate key, first set on line {first}")));
        }
        let bad = |msg: String| err(line, key, msg);
        match key {
            "epochs" => cfg.epochs = num(value).map_err(bad)?,
            "lr" => cfg.lr = num(value).map_err(bad)?,
            "knn_k" => cfg.knn_k = num(value).map_err(bad)?,
            "metric" => cfg.metric = parse_metric(value).map_err(bad)?,
            "gnn" => cfg.gnn = parse_gnn(value).map_err(bad)?,
            "heads" => cfg.heads = num(value).map_err(bad)?,
            "hidden" => cfg.hidden = num(value).map_err(bad)?,
            "out_dim" => cfg.out_dim = num(value).map_err(bad)?,
            "gnn_layers" => cfg.gnn_layers = num(value).map_err(bad)?,
            "fuse_dim" => cfg.fuse_dim = num(value).map_err(bad)?,
            "delta" => cfg.delta = num(value).map_err(bad)?,
            "beta" => cfg.beta = num(value).map_err(bad)?,
            "seed" => cfg.seed = num(value).map_err(bad)?,
            "folds" => cfg.folds = num(value).map_err(bad)?,
            "split" => split = Some((line, value.to_string())),
            "test_size" => test_size = Some((line, num(value).map_err(bad)?)),
            "normalize_similarity" => cfg.normalize_similarity = num(value).map_err(bad)?,
            "diag_reference" => cfg.diag_reference = parse_diag_reference(value).map_err(bad)?,
            "leaky_slope" => cfg.leaky_slope = num(value).map_err(bad)?,
            "activation" => cfg.activation = parse_activation(value).map_err(bad)?,
            "encoder" => cfg.encoder.kind = parse_encoder(value).map_err(bad)?,
            "latent_dim" => cfg.encoder.latent_dim = num(value).map_err(bad)?,
            "conv_channels" => cfg.encoder.conv_channels = channels(value).map_err(bad)?,
            "conv_kernel" => cfg.encoder.conv_kernel = num(value).map_err(bad)?,
            "conv_stride" => cfg.encoder.conv_stride = num(value).map_err(bad)?,
            "pretrain_epochs" => cfg.encoder.pretrain_epochs = num(value).map_err(bad)?,
            "pretrain_lr" => cfg.encoder.pretrain_lr = num(value).map_err(bad)?,
            _ => unreachable!("key list and match arms agree"),
        }
        if let Some(msg) = out_of_range(key, &cfg, test_size.map(|t| t.1)) {
            return Err(err(line, key, msg.into()));
        }
    }

    cfg.split = match (split, test_size) {
        (None, None) => SplitMode::CrossValidation,
        (None, Some((line, _))) => return Err(err(line, "test_size", "only valid with `split = holdout`".into())),
        (Some((line, s)), t) => match (s.as_str(), t) {
            ("cv", None) => SplitMode::CrossValidation,
            ("cv", Some((tl, _))) => return Err(err(tl, "test_size", "only valid with `split = holdout`".into())),
            ("holdout", Some((_, test_size))) => SplitMode::Holdout { test_size },
            ("holdout", None) => return Err(err(line, "split", "holdout needs `test_size`".into())),
            (other, _) => return Err(err(line, "split", format!("`{other}` is not cv or holdout"))),
        },
    };
    cfg.validate().map_err(|e| CliError::Config {
        path: origin.to_path_buf(),
        line: 0,
        key: "config".into(),
        msg: e.to_string(),
    })?;
    Ok(cfg)
}

/// Renders every key in a form [`parse_run_config`] accepts.
pub fn render_run_config(cfg: &TrainConfig) -> String {
    let (split, test_size) = match cfg.split {
        SplitMode::CrossValidation => ("cv", None),
        SplitMode::Holdout { test_size } => ("holdout", Some(test_size)),
    };
    let e = &cfg.encoder;
    let mut lines = vec![
        format!("epochs = {}", cfg.epochs),
        format!("lr = {:?}", cfg.lr),
        format!("knn_k = {}", cfg.knn_k),
        format!("metric = {}", metric_name(cfg.metric)),
        format!("gnn = {}", gnn_name(cfg.gnn)),
        format!("heads = {}", cfg.heads),
        format!("hidden = {}", cfg.hidden),
        format!("out_dim = {}", cfg.out_dim),
        format!("gnn_layers = {}", cfg.gnn_layers),
        format!("fuse_dim = {}", cfg.fuse_dim),
        format!("delta = {:?}", cfg.delta),
        format!("beta = {:?}", cfg.beta),
        format!("seed = {}", cfg.seed),
        format!("folds = {}", cfg.folds),
        format!("split = {split}"),
    ];
    if let Some(t) = test_size {
        lines.push(format!("test_size = {t}"));
    }
    lines.extend([
        format!("normalize_similarity = {}", cfg.normalize_similarity),
        format!("diag_reference = {}", diag_reference_name(cfg.diag_reference)),
        format!("leaky_slope = {:?}", cfg.leaky_slope),
        format!("activation = {}", activation_name(cfg.activation)),
        format!("encoder = {}", encoder_name(e.kind)),
        format!("latent_dim = {}", e.latent_dim),
        format!("conv_channels = {},{}", e.conv_channels[0], e.conv_channels[1]),
        format!("conv_kernel = {}", e.conv_kernel),
        format!("conv_stride = {}", e.conv_stride),
        format!("pretrain_epochs = {}", e.pretrain_epochs),
        format!("pretrain_lr = {:?}", e.pretrain_lr),
    ]);
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

fn out_of_range(key: &str, cfg: &TrainConfig, test_size: Option<usize>) -> Option<&'static str> {
    let e = &cfg.encoder;
    let ok = match key {
        "epochs" => cfg.epochs >= 1,
        "lr" => cfg.lr >= 0.0 && cfg.lr.is_finite(),
        "knn_k" => cfg.knn_k >= 1,
        "heads" => cfg.heads >= 1,
        "hidden" => cfg.hidden >= 1,
        "out_dim" => cfg.out_dim >= 1,
        "gnn_layers" => cfg.gnn_layers >= 1,
        "fuse_dim" => cfg.fuse_dim >= 1,
        "delta" => cfg.delta >= 0.0 && cfg.delta.is_finite(),
        "beta" => (0.0..=1.0).contains(&cfg.beta),
        "folds" => cfg.folds >= 2,
        "test_size" => test_size.is_some_and(|t| t >= 1),
        "leaky_slope" => cfg.leaky_slope > 0.0 && cfg.leaky_slope < 1.0,
        "latent_dim" => e.latent_dim >= 1,
        "conv_channels" => !e.conv_channels.contains(&0),
        "conv_kernel" => e.conv_kernel >= 1,
        "conv_stride" => e.conv_stride >= 1,
        "pretrain_lr" => e.pretrain_lr >= 0.0 && e.pretrain_lr.is_finite(),
        _ => true,
    };
    (!ok).then_some(match key {
        "beta" => "must lie in [0, 1]",
        "leaky_slope" => "must lie in (0, 1)",
        "folds" => "must be at least 2",
        "lr" | "delta" | "pretrain_lr" => "must be finite and non-negative",
        _ => "must be at least 1",
    })
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

fn channels(v: &str) -> std::result::Result<[usize; 2], String> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok([num(a)?, num(b)?]),
        _ => Err(format!("`{v}` must be two comma-separated channel counts")),
    }
}

macro_rules! named_enum {
    ($parse:ident, $name:ident, $ty:ty, $what:literal, [$($s:literal => $v:expr),+ $(,)?]) => {
        pub fn $parse(v: &str) -> std::result::Result<$ty, String> {
            match v {
                $($s => Ok($v),)+
                other => Err(format!("`{other}` is not a known {} ({})", $what, [$($s),+].join(", "))),
            }
        }

        pub fn $name(v: $ty) -> &'static str {
            $(if v == $v { return $s; })+
            unreachable!()
        }
    };
}

named_enum!(parse_metric, metric_name, Metric, "metric", ["euclidean" => Metric::Euclidean, "cosine" => Metric::Cosine]);
named_enum!(parse_gnn, gnn_name, GnnKind, "gnn", ["gat" => GnnKind::Gat, "gcn" => GnnKind::Gcn]);
named_enum!(parse_activation, activation_name, Activation, "activation", [
    "elu" => Activation::Elu,
    "identity" => Activation::Identity,
]);
named_enum!(parse_encoder, encoder_name, EncoderKind, "encoder", [
    "identity" => EncoderKind::Identity,
    "dense" => EncoderKind::DenseAutoencoder,
    "conv" => EncoderKind::ConvAutoencoder,
]);
named_enum!(parse_diag_reference, diag_reference_name, DiagReference, "diag reference", [
    "image" => DiagReference::Image,
    "clinical" => DiagReference::Clinical,
    "average" => DiagReference::Average,
]);
