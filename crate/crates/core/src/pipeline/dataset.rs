use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fusion::validate_labels;
use crate::tensor::Tensor;

/// Class names in one-hot column order.
pub const CLASS_NAMES: [&str; 2] = ["normal", "abnormal"];

/// Index of the class treated as positive for ROC analysis.
pub const POSITIVE_CLASS: usize = 1;

/// Image modality: raw images for an autoencoder, or embeddings computed
/// elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageData {
    /// `N×1×H×W`.
    Images(Tensor),
    /// `N×latent_dim`.
    Embeddings(Tensor),
}

impl ImageData {
    pub fn n(&self) -> usize {
        match self {
            ImageData::Images(t) | ImageData::Embeddings(t) => t.shape().first().copied().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalDataset {
    pub images: ImageData,
    /// `N×F` clinical measurements.
    pub clinical: Tensor,
    /// `N×C` one-hot.
    pub labels: Tensor,
    pub ids: Vec<String>,
}

impl MultimodalDataset {
    pub fn validate(&self) -> Result<()> {
        let n = self.ids.len();
        let (cn, _) = self.clinical.dims2()?;
        let (ln, _) = self.labels.dims2()?;
        if cn != n || ln != n || self.images.n() != n {
            return Err(Error::Dataset(format!(
                "inconsistent patient counts: ids {n}, clinical {cn}, labels {ln}, images {}",
                self.images.n()
            )));
        }
        match &self.images {
            ImageData::Images(t) if !matches!(t.shape(), [_, 1, _, _]) => {
                return Err(Error::Dataset(format!("images must be N×1×H×W, got {:?}", t.shape())))
            }
            ImageData::Embeddings(t) if t.shape().len() != 2 => {
                return Err(Error::Dataset(format!("embeddings must be N×D, got {:?}", t.shape())))
            }
            _ => {}
        }
        if !self.clinical.all_finite() {
            return Err(Error::Dataset("clinical features contain non-finite values".into()));
        }
        validate_labels(&self.labels)?;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.cols()
    }

    /// Argmax class index per patient.
    pub fn class_indices(&self) -> Vec<usize> {
        (0..self.labels.rows()).map(|i| argmax(self.labels.row(i))).collect()
    }
}

/// First index of the maximum (ties go to the lower index).
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn one_hot(classes: &[usize], n_classes: usize) -> Result<Tensor> {
    let mut y = Tensor::zeros(&[classes.len(), n_classes]);
    for (i, &c) in classes.iter().enumerate() {
        if c >= n_classes {
            return Err(Error::Label(format!("class {c} out of range for {n_classes} classes")));
        }
        y.set(i, c, 1.0);
    }
    Ok(y)
}
