//! Synthetic two-class cohort shaped like a striatal-uptake study: twelve
//! clinical measurements (eight left/right binding ratios, two
//! putamen/caudate ratios, two asymmetry indices) plus a small image with a
//! left and a right uptake blob.
//!
//! `separation` is the distance between the class means, in noise standard
//! deviations, for both modalities: the clinical class means sit
//! `separation` apart in Euclidean distance (unit-variance noise), and the
//! latent uptake level that scales the image blobs also has unit noise and
//! class means `separation` apart. Abnormal patients have reduced uptake.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dataset::{one_hot, ImageData, MultimodalDataset};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Column names for the twelve clinical features.
pub const CLINICAL_FEATURES: [&str; 12] = [
    "sbr_striatum_r",
    "sbr_striatum_l",
    "sbr_ant_putamen_r",
    "sbr_ant_putamen_l",
    "sbr_post_putamen_r",
    "sbr_post_putamen_l",
    "sbr_caudate_r",
    "sbr_caudate_l",
    "putamen_caudate_ratio_r",
    "putamen_caudate_ratio_l",
    "putamen_asymmetry",
    "caudate_asymmetry",
];

/// Correlation between the left and right member of each paired feature.
const PAIR_CORRELATION: f64 = 0.5;
/// Number of leading feature pairs that are left/right correlated.
const CORRELATED_PAIRS: usize = 5;
/// Blob amplitude change per unit of latent uptake.
const UPTAKE_GAIN: f64 = 0.12;
const SIDE_JITTER: f64 = 0.04;
const PIXEL_NOISE: f64 = 0.03;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub image_size: usize,
    pub n_clinical: usize,
    pub separation: f64,
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 200,
            image_size: 16,
            n_clinical: 12,
            separation: 3.0,
            label_noise: 0.05,
            seed: 7,
        }
    }
}

/// Feature name for column `j` of an `n_clinical`-wide matrix.
pub fn clinical_feature_name(j: usize) -> String {
    match CLINICAL_FEATURES.get(j) {
        Some(name) => String::from(*name),
        None => format!("feature_{j}"),
    }
}

/// Direction of the abnormal-class shift for feature `j`: binding ratios
/// and putamen/caudate ratios drop, asymmetries rise.
fn shift_sign(j: usize, f: usize) -> f64 {
    if f == CLINICAL_FEATURES.len() && j >= 10 {
        1.0
    } else {
        -1.0
    }
}

fn baseline(j: usize) -> f64 {
    match j {
        0..=7 => 2.5,
        8 | 9 => 1.2,
        _ => 0.0,
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Class-conditional clinical mean. `class_sign` is −1 for normal, +1 for
/// abnormal.
pub fn clinical_class_mean(n_clinical: usize, separation: f64, class_sign: f64) -> Vec<f64> {
    let scale = separation / 2.0 / libm::sqrt(n_clinical as f64);
    (0..n_clinical)
        .map(|j| baseline(j) + class_sign * scale * shift_sign(j, n_clinical))
        .collect()
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<MultimodalDataset> {
    if cfg.n < 4 || cfg.n % 2 != 0 {
        return Err(Error::Dataset(format!("n must be even and at least 4, got {}", cfg.n)));
    }
    if cfg.image_size < 4 || cfg.n_clinical == 0 {
        return Err(Error::Dataset("image_size must be ≥ 4 and n_clinical ≥ 1".into()));
    }
    if !(cfg.separation >= 0.0 && cfg.separation.is_finite()) {
        return Err(Error::Dataset(format!("separation {} must be ≥ 0", cfg.separation)));
    }
    if !(0.0..=1.0).contains(&cfg.label_noise) {
        return Err(Error::Dataset(format!("label_noise {} outside [0, 1]", cfg.label_noise)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;
    let f = cfg.n_clinical;
    let size = cfg.image_size;

    let mut truth: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    truth.shuffle(&mut rng);

    let means = [
        clinical_class_mean(f, cfg.separation, -1.0),
        clinical_class_mean(f, cfg.separation, 1.0),
    ];
    let pairs = CORRELATED_PAIRS.min(f / 2);
    let (shared_w, own_w) = (libm::sqrt(PAIR_CORRELATION), libm::sqrt(1.0 - PAIR_CORRELATION));
    let mut clinical = Tensor::zeros(&[n, f]);
    for (i, &c) in truth.iter().enumerate() {
        let mut noise = vec![0.0; f];
        for p in 0..pairs {
            let shared = normal(&mut rng);
            noise[2 * p] = shared_w * shared + own_w * normal(&mut rng);
            noise[2 * p + 1] = shared_w * shared + own_w * normal(&mut rng);
        }
        for v in noise.iter_mut().skip(2 * pairs) {
            *v = normal(&mut rng);
        }
        for j in 0..f {
            clinical.set(i, j, means[c][j] + noise[j]);
        }
    }

    let mut images = Tensor::zeros(&[n, 1, size, size]);
    let sigma = size as f64 / 9.0;
    let mid = (size as f64 - 1.0) / 2.0;
    let offset = mid - 0.3 * size as f64;
    let centres = [(mid, mid - offset), (mid, mid + offset)];
    let plane = size * size;
    for (i, &c) in truth.iter().enumerate() {
        let class_sign = if c == 1 { 1.0 } else { -1.0 };
        let uptake = class_sign * cfg.separation / 2.0 + normal(&mut rng);
        let amp = [
            1.0 - UPTAKE_GAIN * uptake + SIDE_JITTER * normal(&mut rng),
            1.0 - UPTAKE_GAIN * uptake + SIDE_JITTER * normal(&mut rng),
        ];
        let img = &mut images.data_mut()[i * plane..(i + 1) * plane];
        for r in 0..size {
            for col in 0..size {
                let mut v = 0.0;
                for (a, (cy, cx)) in amp.iter().zip(centres) {
                    let d2 = (r as f64 - cy) * (r as f64 - cy) + (col as f64 - cx) * (col as f64 - cx);
                    v += a * libm::exp(-d2 / (2.0 * sigma * sigma));
                }
                v += PIXEL_NOISE * normal(&mut rng);
                // stored on disk as f32; keep the in-memory copy identical
                img[r * size + col] = f64::from(v as f32);
            }
        }
    }

    let flips = libm::round(cfg.label_noise * n as f64) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut observed = truth.clone();
    for &i in &order[..flips] {
        observed[i] = 1 - observed[i];
    }

    let ids = (0..n).map(|i| format!("P{:04}", i + 1)).collect();
    Ok(MultimodalDataset {
        images: ImageData::Images(images),
        clinical,
        labels: one_hot(&observed, 2)?,
        ids,
    })
}
