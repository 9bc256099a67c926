//! Graph attention and graph convolution layers over dense, self-looped
//! adjacency matrices.
//!
//! GAT heads share one attention vector per head; head outputs are averaged,
//! not concatenated.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{xavier_uniform, Activation};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GnnKind {
    #[default]
    Gat,
    Gcn,
}

/// One GAT layer: per head a `D_in×D_out` projection and a `2·D_out`
/// attention vector (stored as a column).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatLayerParams {
    pub w: Vec<Tensor>,
    pub a: Vec<Tensor>,
    pub leaky_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnLayerParams {
    pub w: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GnnLayerParams {
    Gat(GatLayerParams),
    Gcn(GcnLayerParams),
}

/// Layers applied in sequence, each followed by `activation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnStack {
    pub layers: Vec<GnnLayerParams>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    pub kind: GnnKind,
    pub heads: usize,
    /// Output width of every layer; the last entry is `F'`.
    pub widths: Vec<usize>,
    pub leaky_slope: f64,
    pub activation: Activation,
}

impl Default for StackConfig {
    fn default() -> Self {
        Self {
            kind: GnnKind::Gat,
            heads: 2,
            widths: vec![16, 16],
            leaky_slope: 0.2,
            activation: Activation::Elu,
        }
    }
}

impl GatLayerParams {
    pub fn heads(&self) -> usize {
        self.w.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        let s = self.w[0].shape();
        (s[0], s[1])
    }

    fn validate(&self) -> Result<()> {
        if self.w.is_empty() || self.w.len() != self.a.len() {
            return Err(Error::Config(format!(
                "GAT layer needs ≥1 head and one attention vector per head ({} W, {} a)",
                self.w.len(),
                self.a.len()
            )));
        }
        let (d_in, d_out) = self.dims();
        for (w, a) in self.w.iter().zip(&self.a) {
            if w.shape() != [d_in, d_out] || a.len() != 2 * d_out {
                return Err(Error::Config("GAT heads must share D_in and D_out".into()));
            }
        }
        Ok(())
    }
}

impl GnnLayerParams {
    fn tensors(&self) -> Vec<&Tensor> {
        match self {
            GnnLayerParams::Gat(p) => p.w.iter().chain(&p.a).collect(),
            GnnLayerParams::Gcn(p) => vec![&p.w],
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            GnnLayerParams::Gat(p) => p.w.iter_mut().chain(p.a.iter_mut()).collect(),
            GnnLayerParams::Gcn(p) => vec![&mut p.w],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            GnnLayerParams::Gat(p) => p.dims(),
            GnnLayerParams::Gcn(p) => (p.w.shape()[0], p.w.shape()[1]),
        }
    }
}

impl GnnStack {
    /// Xavier-uniform initialisation for an input of width `d_in`.
    pub fn init(cfg: &StackConfig, d_in: usize, seed: u64) -> Result<Self> {
        if cfg.widths.is_empty() || cfg.widths.contains(&0) {
            return Err(Error::Parameter("GNN stack needs at least one nonzero layer width".into()));
        }
        if cfg.kind == GnnKind::Gat && cfg.heads == 0 {
            return Err(Error::Parameter("GAT needs at least one head".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(cfg.widths.len());
        let mut width = d_in;
        for &out in &cfg.widths {
            layers.push(match cfg.kind {
                GnnKind::Gat => GnnLayerParams::Gat(GatLayerParams {
                    w: (0..cfg.heads)
                        .map(|_| xavier_uniform(&mut rng, &[width, out], width, out))
                        .collect(),
                    a: (0..cfg.heads)
                        .map(|_| xavier_uniform(&mut rng, &[2 * out, 1], 2 * out, 1))
                        .collect(),
                    leaky_slope: cfg.leaky_slope,
                }),
                GnnKind::Gcn => GnnLayerParams::Gcn(GcnLayerParams {
                    w: xavier_uniform(&mut rng, &[width, out], width, out),
                }),
            });
            width = out;
        }
        Ok(Self {
            layers,
            activation: cfg.activation,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.dims().1)
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.tensors()
            .into_iter()
            .map(|t| {
                if trainable {
                    tape.param(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect()
    }
}

/// Tape handles for one GAT layer.
#[derive(Debug, Clone)]
pub struct GatVars {
    pub w: Vec<Var>,
    pub a: Vec<Var>,
    pub leaky_slope: f64,
}

fn require_self_loops(g: &Graph) -> Result<()> {
    if g.self_looped {
        Ok(())
    } else {
        Err(Error::Contract("attention needs a self-looped adjacency".into()))
    }
}

/// Attention coefficients of one head:
/// `α_ij = softmax_{j ∈ N(i)} LeakyReLU(aᵀ [W h_i ‖ W h_j])`.
pub fn gat_attention(tape: &mut Tape, h: Var, adj: &Graph, p: &GatVars, head: usize) -> Result<Var> {
    require_self_loops(adj)?;
    let hw = tape.matmul(h, p.w[head])?;
    gat_attention_from_projection(tape, hw, adj, p.a[head], p.leaky_slope)
}

fn gat_attention_from_projection(
    tape: &mut Tape,
    hw: Var,
    adj: &Graph,
    a: Var,
    slope: f64,
) -> Result<Var> {
    let (n, d) = tape.value(hw).dims2()?;
    if adj.n_nodes != n {
        return Err(Error::Shape {
            op: "gat_attention",
            lhs: vec![n, d],
            rhs: adj.adjacency.shape().to_vec(),
        });
    }
    // aᵀ[Wh_i ‖ Wh_j] = (Wh·a_src)_i + (Wh·a_dst)_j
    let a_src = tape.slice_rows(a, 0, d)?;
    let a_dst = tape.slice_rows(a, d, 2 * d)?;
    let src = tape.matmul(hw, a_src)?;
    let dst = tape.matmul(hw, a_dst)?;
    let ones_row = tape.constant(Tensor::full(&[1, n], 1.0));
    let ones_col = tape.constant(Tensor::full(&[n, 1], 1.0));
    let src_b = tape.matmul(src, ones_row)?;
    let dst_t = tape.transpose(dst)?;
    let dst_b = tape.matmul(ones_col, dst_t)?;
    let e = tape.add(src_b, dst_b)?;
    let logits = tape.leaky_relu(e, slope)?;
    tape.masked_softmax_rows(logits, &adj.adjacency)
}

/// `σ( mean_k Σ_j α^k_ij W^k h_j )`.
pub fn gat_layer(tape: &mut Tape, h: Var, adj: &Graph, p: &GatVars, act: Activation) -> Result<Var> {
    require_self_loops(adj)?;
    if p.w.is_empty() || p.w.len() != p.a.len() {
        return Err(Error::Config("GAT layer needs matching W and a per head".into()));
    }
    let mut acc: Option<Var> = None;
    for k in 0..p.w.len() {
        let hw = tape.matmul(h, p.w[k])?;
        let alpha = gat_attention_from_projection(tape, hw, adj, p.a[k], p.leaky_slope)?;
        let m = tape.matmul(alpha, hw)?;
        acc = Some(match acc {
            None => m,
            Some(prev) => tape.add(prev, m)?,
        });
    }
    let summed = acc.expect("at least one head");
    let mean = tape.mul_scalar(summed, 1.0 / p.w.len() as f64)?;
    act.apply(tape, mean)
}

/// `D^{-1/2} Â D^{-1/2}` for a self-looped graph.
pub fn normalized_adjacency(adj: &Graph) -> Result<Tensor> {
    require_self_loops(adj)?;
    let inv_sqrt: Vec<f64> = adj.degrees().iter().map(|d| 1.0 / libm::sqrt(*d)).collect();
    let n = adj.n_nodes;
    let mut out = adj.adjacency.clone();
    for i in 0..n {
        for j in 0..n {
            let v = out.at(i, j);
            if v != 0.0 {
                out.set(i, j, v * inv_sqrt[i] * inv_sqrt[j]);
            }
        }
    }
    Ok(out)
}

/// `σ(D^{-1/2} Â D^{-1/2} H W)`; `norm_adj` is a tape constant from
/// [`normalized_adjacency`].
pub fn gcn_layer(tape: &mut Tape, h: Var, norm_adj: Var, w: Var, act: Activation) -> Result<Var> {
    let hw = tape.matmul(h, w)?;
    let agg = tape.matmul(norm_adj, hw)?;
    act.apply(tape, agg)
}

/// Runs every layer of `stack` over `(adj, x)`; `vars` come from
/// [`GnnStack::bind`].
pub fn gnn_encode(tape: &mut Tape, adj: &Graph, x: Var, stack: &GnnStack, vars: &[Var]) -> Result<Var> {
    require_self_loops(adj)?;
    if stack.layers.is_empty() {
        return Err(Error::Config("empty GNN stack".into()));
    }
    let mut width = tape.value(x).cols();
    let mut h = x;
    let mut offset = 0;
    let mut norm_adj: Option<Var> = None;
    for layer in &stack.layers {
        let (d_in, _) = layer.dims();
        if d_in != width {
            return Err(Error::Config(format!("GNN layer expects width {d_in}, got {width}")));
        }
        h = match layer {
            GnnLayerParams::Gat(p) => {
                p.validate()?;
                let k = p.heads();
                let gv = GatVars {
                    w: vars[offset..offset + k].to_vec(),
                    a: vars[offset + k..offset + 2 * k].to_vec(),
                    leaky_slope: p.leaky_slope,
                };
                offset += 2 * k;
                gat_layer(tape, h, adj, &gv, stack.activation)?
            }
            GnnLayerParams::Gcn(_) => {
                let na = match norm_adj {
                    Some(v) => v,
                    None => {
                        let v = tape.constant(normalized_adjacency(adj)?);
                        norm_adj = Some(v);
                        v
                    }
                };
                offset += 1;
                gcn_layer(tape, h, na, vars[offset - 1], stack.activation)?
            }
        };
        width = layer.dims().1;
    }
    Ok(h)
}
