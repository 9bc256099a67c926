//! Image feature extraction: an unsupervised autoencoder whose encoder half
//! produces the image feature matrix `Q^m`, or an identity pass-through.
//!
//! Pretraining only ever sees images. Labels are not part of this API.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{adam_step, AdamState, Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{bind_all, collect_grads, xavier_uniform, Activation};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EncoderKind {
    /// Flattened pixels (or externally computed embeddings) used as-is.
    Identity,
    DenseAutoencoder,
    #[default]
    ConvAutoencoder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub latent_dim: usize,
    /// Hidden activation. The conv path always uses its own ELU stages and
    /// applies this only to the dense bottleneck of the decoder.
    pub activation: Activation,
    pub conv_channels: [usize; 2],
    pub conv_kernel: usize,
    pub conv_stride: usize,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            kind: EncoderKind::ConvAutoencoder,
            latent_dim: 8,
            activation: Activation::Elu,
            conv_channels: [4, 8],
            conv_kernel: 3,
            conv_stride: 2,
            pretrain_epochs: 200,
            pretrain_lr: 0.01,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Parameter("latent_dim must be at least 1".into()));
        }
        if self.conv_kernel == 0 || self.conv_stride == 0 || self.conv_channels.contains(&0) {
            return Err(Error::Parameter("conv kernel, stride and channels must be positive".into()));
        }
        if !(self.pretrain_lr >= 0.0 && self.pretrain_lr.is_finite()) {
            return Err(Error::Parameter(format!("pretrain_lr {} invalid", self.pretrain_lr)));
        }
        Ok(())
    }
}

/// One-hidden-layer dense autoencoder over flattened pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseAutoencoder {
    pub enc_w: Tensor,
    pub enc_b: Tensor,
    pub dec_w: Tensor,
    pub dec_b: Tensor,
    pub activation: Activation,
}

/// Two strided conv stages and a dense bottleneck, mirrored by a decoder
/// built from transposed convolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvAutoencoder {
    pub conv1: Tensor,
    pub bias1: Tensor,
    pub conv2: Tensor,
    pub bias2: Tensor,
    pub enc_w: Tensor,
    pub enc_b: Tensor,
    pub dec_w: Tensor,
    pub dec_b: Tensor,
    pub deconv2: Tensor,
    pub debias2: Tensor,
    pub deconv1: Tensor,
    pub debias1: Tensor,
    pub stride: usize,
    pub activation: Activation,
    /// Spatial sizes: input, after stage 1, after stage 2.
    pub sizes: [(usize, usize); 3],
}

/// Frozen encoder state, tied to the image size it was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EncoderParams {
    Identity { height: usize, width: usize },
    Dense { height: usize, width: usize, net: DenseAutoencoder },
    Conv(ConvAutoencoder),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pretrained {
    pub params: EncoderParams,
    /// Mean squared reconstruction error before each epoch's update.
    pub loss_history: Vec<f64>,
}

fn image_dims(images: &Tensor) -> Result<(usize, usize, usize)> {
    match images.shape() {
        [n, 1, h, w] => Ok((*n, *h, *w)),
        s => Err(Error::Dataset(format!("images must be N×1×H×W, got {s:?}"))),
    }
}

impl DenseAutoencoder {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.enc_w, &self.enc_b, &self.dec_w, &self.dec_b]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.enc_w, &mut self.enc_b, &mut self.dec_w, &mut self.dec_b]
    }

    fn encode(&self, tape: &mut Tape, v: &[Var], flat: Var) -> Result<Var> {
        let h = tape.matmul(flat, v[0])?;
        let h = tape.add_row_bias(h, v[1])?;
        self.activation.apply(tape, h)
    }

    fn decode(&self, tape: &mut Tape, v: &[Var], latent: Var) -> Result<Var> {
        let r = tape.matmul(latent, v[2])?;
        tape.add_row_bias(r, v[3])
    }
}

impl ConvAutoencoder {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![
            &self.conv1, &self.bias1, &self.conv2, &self.bias2, &self.enc_w, &self.enc_b,
            &self.dec_w, &self.dec_b, &self.deconv2, &self.debias2, &self.deconv1, &self.debias1,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.conv1, &mut self.bias1, &mut self.conv2, &mut self.bias2,
            &mut self.enc_w, &mut self.enc_b, &mut self.dec_w, &mut self.dec_b,
            &mut self.deconv2, &mut self.debias2, &mut self.deconv1, &mut self.debias1,
        ]
    }

    fn flat_dim(&self) -> usize {
        let (h2, w2) = self.sizes[2];
        self.conv2.shape()[0] * h2 * w2
    }

    fn encode(&self, tape: &mut Tape, v: &[Var], images: Var) -> Result<Var> {
        let n = tape.value(images).shape()[0];
        let x = tape.conv2d(images, v[0], self.stride)?;
        let x = tape.add_channel_bias(x, v[1])?;
        let x = tape.elu(x, 1.0)?;
        let x = tape.conv2d(x, v[2], self.stride)?;
        let x = tape.add_channel_bias(x, v[3])?;
        let x = tape.elu(x, 1.0)?;
        let flat = tape.reshape(x, &[n, self.flat_dim()])?;
        let z = tape.matmul(flat, v[4])?;
        tape.add_row_bias(z, v[5])
    }

    fn decode(&self, tape: &mut Tape, v: &[Var], latent: Var) -> Result<Var> {
        let n = tape.value(latent).shape()[0];
        let c2 = self.conv2.shape()[0];
        let [(h, w), (h1, w1), (h2, w2)] = self.sizes;
        let d = tape.matmul(latent, v[6])?;
        let d = tape.add_row_bias(d, v[7])?;
        let d = self.activation.apply(tape, d)?;
        let d = tape.reshape(d, &[n, c2, h2, w2])?;
        let d = tape.conv_transpose2d(d, v[8], self.stride, h1, w1)?;
        let d = tape.add_channel_bias(d, v[9])?;
        let d = tape.elu(d, 1.0)?;
        let d = tape.conv_transpose2d(d, v[10], self.stride, h, w)?;
        tape.add_channel_bias(d, v[11])
    }
}

fn conv_out(size: usize, k: usize, stride: usize) -> Result<usize> {
    if size < k {
        return Err(Error::Config(format!("image side {size} smaller than kernel {k}")));
    }
    Ok((size - k) / stride + 1)
}

impl EncoderParams {
    pub fn identity(height: usize, width: usize) -> Self {
        EncoderParams::Identity { height, width }
    }

    /// Freshly initialised (untrained) parameters for `height×width` images.
    /// Biases start at zero.
    pub fn init(cfg: &EncoderConfig, height: usize, width: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d_in = height * width;
        let l = cfg.latent_dim;
        Ok(match cfg.kind {
            EncoderKind::Identity => EncoderParams::identity(height, width),
            EncoderKind::DenseAutoencoder => EncoderParams::Dense {
                height,
                width,
                net: DenseAutoencoder {
                    enc_w: xavier_uniform(&mut rng, &[d_in, l], d_in, l),
                    enc_b: Tensor::zeros(&[1, l]),
                    dec_w: xavier_uniform(&mut rng, &[l, d_in], l, d_in),
                    dec_b: Tensor::zeros(&[1, d_in]),
                    activation: cfg.activation,
                },
            },
            EncoderKind::ConvAutoencoder => {
                let (k, s) = (cfg.conv_kernel, cfg.conv_stride);
                let [c1, c2] = cfg.conv_channels;
                let h1 = conv_out(height, k, s)?;
                let w1 = conv_out(width, k, s)?;
                let h2 = conv_out(h1, k, s)?;
                let w2 = conv_out(w1, k, s)?;
                let flat = c2 * h2 * w2;
                EncoderParams::Conv(ConvAutoencoder {
                    conv1: xavier_uniform(&mut rng, &[c1, 1, k, k], k * k, c1 * k * k),
                    bias1: Tensor::zeros(&[c1]),
                    conv2: xavier_uniform(&mut rng, &[c2, c1, k, k], c1 * k * k, c2 * k * k),
                    bias2: Tensor::zeros(&[c2]),
                    enc_w: xavier_uniform(&mut rng, &[flat, l], flat, l),
                    enc_b: Tensor::zeros(&[1, l]),
                    dec_w: xavier_uniform(&mut rng, &[l, flat], l, flat),
                    dec_b: Tensor::zeros(&[1, flat]),
                    deconv2: xavier_uniform(&mut rng, &[c2, c1, k, k], c2 * k * k, c1 * k * k),
                    debias2: Tensor::zeros(&[c1]),
                    deconv1: xavier_uniform(&mut rng, &[c1, 1, k, k], c1 * k * k, k * k),
                    debias1: Tensor::zeros(&[1]),
                    stride: s,
                    activation: cfg.activation,
                    sizes: [(height, width), (h1, w1), (h2, w2)],
                })
            }
        })
    }

    pub fn input_size(&self) -> (usize, usize) {
        match self {
            EncoderParams::Identity { height, width } | EncoderParams::Dense { height, width, .. } => {
                (*height, *width)
            }
            EncoderParams::Conv(c) => c.sizes[0],
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            EncoderParams::Identity { height, width } => height * width,
            EncoderParams::Dense { net, .. } => net.enc_w.shape()[1],
            EncoderParams::Conv(c) => c.enc_w.shape()[1],
        }
    }

    fn tensors(&self) -> Vec<&Tensor> {
        match self {
            EncoderParams::Identity { .. } => Vec::new(),
            EncoderParams::Dense { net, .. } => net.tensors(),
            EncoderParams::Conv(c) => c.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            EncoderParams::Identity { .. } => Vec::new(),
            EncoderParams::Dense { net, .. } => net.tensors_mut(),
            EncoderParams::Conv(c) => c.tensors_mut(),
        }
    }

    fn check_input(&self, images: &Tensor) -> Result<(usize, usize, usize)> {
        let (n, h, w) = image_dims(images)?;
        if (h, w) != self.input_size() {
            return Err(Error::Config(format!(
                "encoder built for {:?} images, got {h}×{w}",
                self.input_size()
            )));
        }
        Ok((n, h, w))
    }

    fn encode_on(&self, tape: &mut Tape, v: &[Var], images: Var) -> Result<Var> {
        let shape = tape.value(images).shape().to_vec();
        let n = shape[0];
        let d_in = shape[2] * shape[3];
        match self {
            EncoderParams::Identity { .. } => tape.reshape(images, &[n, d_in]),
            EncoderParams::Dense { net, .. } => {
                let flat = tape.reshape(images, &[n, d_in])?;
                net.encode(tape, v, flat)
            }
            EncoderParams::Conv(c) => c.encode(tape, v, images),
        }
    }

    fn reconstruct_on(&self, tape: &mut Tape, v: &[Var], images: Var) -> Result<Var> {
        let shape = tape.value(images).shape().to_vec();
        let latent = self.encode_on(tape, v, images)?;
        match self {
            EncoderParams::Identity { .. } => Ok(images),
            EncoderParams::Dense { net, .. } => {
                let r = net.decode(tape, v, latent)?;
                tape.reshape(r, &shape)
            }
            EncoderParams::Conv(c) => c.decode(tape, v, latent),
        }
    }

    /// Mean squared reconstruction error of `images`.
    pub fn reconstruction_loss(&self, images: &Tensor) -> Result<f64> {
        self.check_input(images)?;
        let mut tape = Tape::new();
        let vars = bind_all(&mut tape, &self.tensors());
        let x = tape.constant(images.clone());
        let loss = mse_on(&mut tape, self, &vars, x)?;
        Ok(tape.value(loss).data()[0])
    }
}

fn mse_on(tape: &mut Tape, params: &EncoderParams, vars: &[Var], x: Var) -> Result<Var> {
    let r = params.reconstruct_on(tape, vars, x)?;
    let diff = tape.sub(r, x)?;
    let sq = tape.square(diff)?;
    tape.mean(sq)
}

/// Fits an autoencoder to `images` by full-batch Adam on mean squared
/// reconstruction error. `cfg.kind` must not be `Identity`.
pub fn pretrain_autoencoder(images: &Tensor, cfg: &EncoderConfig, seed: u64) -> Result<Pretrained> {
    if cfg.kind == EncoderKind::Identity {
        return Err(Error::Contract("identity encoder has nothing to pretrain".into()));
    }
    let (_, h, w) = image_dims(images)?;
    if !images.all_finite() {
        return Err(Error::Dataset("images contain non-finite values".into()));
    }
    let mut params = EncoderParams::init(cfg, h, w, seed)?;
    let mut state = AdamState::new(&params.tensors());
    let mut loss_history = Vec::with_capacity(cfg.pretrain_epochs);
    for epoch in 0..cfg.pretrain_epochs {
        let mut tape = Tape::new();
        let vars = bind_all(&mut tape, &params.tensors());
        let x = tape.constant(images.clone());
        let loss = mse_on(&mut tape, &params, &vars, x)?;
        let value = tape.value(loss).data()[0];
        if !value.is_finite() {
            return Err(Error::Divergence {
                epoch,
                component: "reconstruction",
            });
        }
        loss_history.push(value);
        tape.backward(loss)?;
        let grads = collect_grads(&tape, &vars);
        let grad_refs: Vec<&Tensor> = grads.iter().collect();
        adam_step(&mut params.tensors_mut(), &grad_refs, &mut state, cfg.pretrain_lr)?;
    }
    Ok(Pretrained { params, loss_history })
}

/// Builds the encoder for `cfg`: pretrained when it is an autoencoder,
/// a pass-through otherwise.
pub fn fit_encoder(images: &Tensor, cfg: &EncoderConfig, seed: u64) -> Result<Pretrained> {
    match cfg.kind {
        EncoderKind::Identity => {
            let (_, h, w) = image_dims(images)?;
            Ok(Pretrained {
                params: EncoderParams::identity(h, w),
                loss_history: Vec::new(),
            })
        }
        _ => pretrain_autoencoder(images, cfg, seed),
    }
}

/// Encoder-half forward pass: one `latent_dim` row per image.
pub fn encode(images: &Tensor, params: &EncoderParams) -> Result<Tensor> {
    params.check_input(images)?;
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.tensors().into_iter().map(|t| tape.constant(t.clone())).collect();
    let x = tape.constant(images.clone());
    let z = params.encode_on(&mut tape, &vars, x)?;
    Ok(tape.value(z).clone())
}
