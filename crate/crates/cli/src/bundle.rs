//! On-disk dataset bundle: a manifest, a clinical CSV and either a raw
//! image tensor or an embedding CSV.
//!
//! `images.bin` layout, all little-endian: the magic `MMGF`, a `u16`
//! version (1), `u32` N, H, W, then N·H·W `f32` pixels in row-major order.

use std::fs;
use std::path::Path;

use crossview_core::pipeline::synth::clinical_feature_name;
use crossview_core::pipeline::{ImageData, MultimodalDataset, SynthConfig, CLASS_NAMES};
use crossview_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::atomic::{write_atomic, write_csv};
use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.toml";
pub const CLINICAL: &str = "clinical.csv";
pub const IMAGES: &str = "images.bin";
pub const EMBEDDINGS: &str = "embeddings.csv";

const MAGIC: &[u8; 4] = b"MMGF";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 3 * 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub n: usize,
    pub clinical: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorInfo>,
}

/// Settings of the synthetic generator that produced a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub seed: u64,
    pub n: usize,
    pub image_size: usize,
    pub n_clinical: usize,
    pub separation: f64,
    pub label_noise: f64,
}

impl From<&SynthConfig> for GeneratorInfo {
    fn from(c: &SynthConfig) -> Self {
        Self {
            seed: c.seed,
            n: c.n,
            image_size: c.image_size,
            n_clinical: c.n_clinical,
            separation: c.separation,
            label_noise: c.label_noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub data: MultimodalDataset,
    pub feature_names: Vec<String>,
    pub generator: Option<GeneratorInfo>,
}

impl DatasetBundle {
    pub fn new(data: MultimodalDataset, generator: Option<GeneratorInfo>) -> Self {
        let feature_names = (0..data.clinical.cols()).map(clinical_feature_name).collect();
        Self {
            data,
            feature_names,
            generator,
        }
    }
}

/// Writes every file of the bundle into `dir`. Pixels are narrowed to f32.
pub fn write_bundle(dir: &Path, bundle: &DatasetBundle) -> Result<()> {
    let data = &bundle.data;
    data.validate()?;
    if data.n_classes() != CLASS_NAMES.len() {
        return Err(CliError::Usage(format!(
            "bundles hold {} classes, dataset has {}",
            CLASS_NAMES.len(),
            data.n_classes()
        )));
    }
    if bundle.feature_names.len() != data.clinical.cols() {
        return Err(CliError::Usage("one feature name per clinical column required".into()));
    }
    let mut manifest = Manifest {
        format_version: 1,
        n: data.n(),
        clinical: CLINICAL.into(),
        images: None,
        embeddings: None,
        generator: bundle.generator.clone(),
    };
    match &data.images {
        ImageData::Images(t) => {
            write_atomic(&dir.join(IMAGES), &encode_images(t)?)?;
            manifest.images = Some(IMAGES.into());
        }
        ImageData::Embeddings(t) => {
            write_embeddings(&dir.join(EMBEDDINGS), &data.ids, t)?;
            manifest.embeddings = Some(EMBEDDINGS.into());
        }
    }
    write_clinical(&dir.join(CLINICAL), bundle)?;
    let text = toml::to_string(&manifest).map_err(|e| CliError::format(dir.join(MANIFEST), e.to_string()))?;
    write_atomic(&dir.join(MANIFEST), text.as_bytes())
}

pub fn read_bundle(dir: &Path) -> Result<DatasetBundle> {
    let manifest_path = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest_path).map_err(|e| CliError::io(&manifest_path, e))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| CliError::format(&manifest_path, e.to_string()))?;
    if manifest.format_version != 1 {
        return Err(CliError::format(
            &manifest_path,
            format!("unsupported format_version {}", manifest.format_version),
        ));
    }

    let (ids, feature_names, clinical, labels) = read_clinical(&dir.join(&manifest.clinical))?;
    let images = match (&manifest.images, &manifest.embeddings) {
        (Some(f), None) => {
            let path = dir.join(f);
            let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            ImageData::Images(decode_images(&path, &bytes)?)
        }
        (None, Some(f)) => ImageData::Embeddings(read_embeddings(&dir.join(f), &ids)?),
        _ => {
            return Err(CliError::format(
                &manifest_path,
                "exactly one of `images` and `embeddings` must be set",
            ))
        }
    };
    let data = MultimodalDataset {
        images,
        clinical,
        labels,
        ids,
    };
    if data.n() != manifest.n || data.images.n() != manifest.n {
        return Err(CliError::format(
            &manifest_path,
            format!(
                "manifest declares {} patients, clinical has {}, image data has {}",
                manifest.n,
                data.n(),
                data.images.n()
            ),
        ));
    }
    data.validate()?;
    Ok(DatasetBundle {
        data,
        feature_names,
        generator: manifest.generator,
    })
}

pub fn encode_images(t: &Tensor) -> Result<Vec<u8>> {
    let [n, 1, h, w] = *t.shape() else {
        return Err(CliError::Usage(format!("images must be N×1×H×W, got {:?}", t.shape())));
    };
    let dims: Vec<u32> = [n, h, w]
        .iter()
        .map(|&d| u32::try_from(d).map_err(|_| CliError::Usage(format!("image dimension {d} exceeds u32"))))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_images(path: &Path, bytes: &[u8]) -> Result<Tensor> {
    let bad = |msg: String| CliError::format(path, msg);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic, expected MMGF".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let dim = |k: usize| {
        let o = 6 + 4 * k;
        u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
    };
    let (n, h, w) = (dim(0), dim(1), dim(2));
    let count = n
        .checked_mul(h)
        .and_then(|x| x.checked_mul(w))
        .ok_or_else(|| bad("dimensions overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * count {
        return Err(bad(format!(
            "header declares {n}×{h}×{w} pixels ({} bytes), body has {} bytes",
            4 * count,
            body.len()
        )));
    }
    let data: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite pixel".into()));
    }
    Tensor::new(vec![n, 1, h, w], data).map_err(CliError::from)
}

fn write_clinical(path: &Path, bundle: &DatasetBundle) -> Result<()> {
    let data = &bundle.data;
    let mut header = vec!["id".to_string()];
    header.extend(bundle.feature_names.iter().cloned());
    header.push("label".into());
    let classes = data.class_indices();
    let rows = (0..data.n()).map(|i| {
        let mut r = vec![data.ids[i].clone()];
        r.extend(data.clinical.row(i).iter().map(|v| v.to_string()));
        r.push(CLASS_NAMES[classes[i]].to_string());
        r
    });
    write_csv(path, &header, rows)
}

type Clinical = (Vec<String>, Vec<String>, Tensor, Tensor);

fn read_clinical(path: &Path) -> Result<Clinical> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 3 || header[0] != "id" || header[header.len() - 1] != "label" {
        return Err(CliError::format(
            path,
            "header must be `id`, feature columns, `label`",
        ));
    }
    let features = header[1..header.len() - 1].to_vec();
    let f = features.len();
    let (mut ids, mut values, mut classes) = (Vec::new(), Vec::new(), Vec::new());
    for (r, rec) in rdr.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != f + 2 {
            return Err(CliError::format(path, format!("line {line}: {} fields, expected {}", rec.len(), f + 2)));
        }
        ids.push(rec[0].to_string());
        for (j, name) in features.iter().enumerate() {
            values.push(parse_finite(&rec[j + 1]).map_err(|m| CliError::format(path, format!("line {line}: {name}: {m}")))?);
        }
        let label = &rec[f + 1];
        let class = CLASS_NAMES
            .iter()
            .position(|c| *c == label)
            .ok_or_else(|| CliError::format(path, format!("line {line}: label `{label}` is not normal or abnormal")))?;
        classes.push(class);
    }
    let n = ids.len();
    let clinical = Tensor::new(vec![n, f], values)?;
    let labels = crossview_core::pipeline::one_hot(&classes, CLASS_NAMES.len())?;
    Ok((ids, features, clinical, labels))
}

pub fn write_embeddings(path: &Path, ids: &[String], z: &Tensor) -> Result<()> {
    let (n, d) = z.dims2()?;
    if n != ids.len() {
        return Err(CliError::Usage(format!("{} ids for {n} embedding rows", ids.len())));
    }
    let mut header = vec!["id".to_string()];
    header.extend((0..d).map(|j| format!("z{j}")));
    let rows = (0..n).map(|i| {
        let mut r = vec![ids[i].clone()];
        r.extend(z.row(i).iter().map(|v| v.to_string()));
        r
    });
    write_csv(path, &header, rows)
}

fn read_embeddings(path: &Path, ids: &[String]) -> Result<Tensor> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let width = rdr.headers().map_err(|e| csv_err(path, e))?.len();
    if width < 2 {
        return Err(CliError::format(path, "need an id column and at least one latent column"));
    }
    let d = width - 1;
    let mut values = Vec::new();
    let mut n = 0;
    for (r, rec) in rdr.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != width {
            return Err(CliError::format(path, format!("line {line}: {} fields, expected {width}", rec.len())));
        }
        if ids.get(r).map(String::as_str) != Some(&rec[0]) {
            return Err(CliError::format(
                path,
                format!("line {line}: id `{}` does not match the clinical table", &rec[0]),
            ));
        }
        for j in 1..width {
            values.push(parse_finite(&rec[j]).map_err(|m| CliError::format(path, format!("line {line}: {m}")))?);
        }
        n += 1;
    }
    if n != ids.len() {
        return Err(CliError::format(path, format!("{n} rows, clinical table has {}", ids.len())));
    }
    Ok(Tensor::new(vec![n, d], values)?)
}

fn parse_finite(s: &str) -> std::result::Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(format!("`{s}` is not finite")),
        Err(_) => Err(format!("`{s}` is not a number")),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::format(path, format!("{other:?}")),
    }
}

