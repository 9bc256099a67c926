//! Raw 2-D convolution kernels shared by the forward and backward rules.
//!
//! Layouts: activations `B×C×H×W`, conv kernels `C_out×C_in×k×k`,
//! transposed-conv kernels `C_in×C_out×k×k`. With those layouts the
//! transposed convolution is exactly the adjoint of the convolution, so each
//! one's input gradient is the other one's forward pass.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    /// Spatial size of the wide side (conv input / transposed-conv output).
    pub h: usize,
    pub w: usize,
    /// Spatial size of the narrow side (conv output / transposed-conv input).
    pub ho: usize,
    pub wo: usize,
}

fn dims4(t: &Tensor, op: &'static str) -> Result<[usize; 4]> {
    match t.shape() {
        [a, b, c, d] => Ok([*a, *b, *c, *d]),
        s => shape_err(op, s, &[0, 0, 0, 0]),
    }
}

pub(crate) fn conv_geom(input: &Tensor, kernel: &Tensor, stride: usize) -> Result<ConvGeom> {
    let [b, c_in, h, w] = dims4(input, "conv2d")?;
    let [c_out, kc, kh, kw] = dims4(kernel, "conv2d")?;
    if kc != c_in || kh != kw || kh == 0 || stride == 0 || h < kh || w < kw {
        return shape_err("conv2d", input.shape(), kernel.shape());
    }
    Ok(ConvGeom {
        batch: b,
        c_in,
        c_out,
        k: kh,
        stride,
        h,
        w,
        ho: (h - kh) / stride + 1,
        wo: (w - kw) / stride + 1,
    })
}

/// Geometry of a transposed convolution producing an `out_h×out_w` map.
/// The requested size must be one that a forward conv with the same kernel
/// and stride would shrink back to the input size.
pub(crate) fn conv_t_geom(
    input: &Tensor,
    kernel: &Tensor,
    stride: usize,
    out_h: usize,
    out_w: usize,
) -> Result<ConvGeom> {
    let [b, c_in, hi, wi] = dims4(input, "conv_transpose2d")?;
    let [kc, c_out, kh, kw] = dims4(kernel, "conv_transpose2d")?;
    let ok = kc == c_in
        && kh == kw
        && kh > 0
        && stride > 0
        && out_h >= kh
        && out_w >= kw
        && (out_h - kh) / stride + 1 == hi
        && (out_w - kw) / stride + 1 == wi;
    if !ok {
        return shape_err("conv_transpose2d", input.shape(), kernel.shape());
    }
    // In the "conv" orientation: c_in is the wide side's channels.
    Ok(ConvGeom {
        batch: b,
        c_in: c_out,
        c_out: c_in,
        k: kh,
        stride,
        h: out_h,
        w: out_w,
        ho: hi,
        wo: wi,
    })
}

/// Valid cross-correlation, wide → narrow. `kernel` is `c_out×c_in×k×k`.
pub(crate) fn conv_forward(g: &ConvGeom, input: &[f64], kernel: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.batch * g.c_out * g.ho * g.wo];
    for b in 0..g.batch {
        for o in 0..g.c_out {
            for y in 0..g.ho {
                for x in 0..g.wo {
                    let mut acc = 0.0;
                    for c in 0..g.c_in {
                        for u in 0..g.k {
                            let row = ((b * g.c_in + c) * g.h + y * g.stride + u) * g.w;
                            let krow = ((o * g.c_in + c) * g.k + u) * g.k;
                            for v in 0..g.k {
                                acc += input[row + x * g.stride + v] * kernel[krow + v];
                            }
                        }
                    }
                    out[((b * g.c_out + o) * g.ho + y) * g.wo + x] = acc;
                }
            }
        }
    }
    out
}

/// Adjoint of [`conv_forward`] in its input, narrow → wide. `kernel` is read
/// with the same `c_out×c_in×k×k` indexing as the forward conv.
pub(crate) fn conv_adjoint(g: &ConvGeom, narrow: &[f64], kernel: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.batch * g.c_in * g.h * g.w];
    for b in 0..g.batch {
        for o in 0..g.c_out {
            for y in 0..g.ho {
                for x in 0..g.wo {
                    let gv = narrow[((b * g.c_out + o) * g.ho + y) * g.wo + x];
                    if gv == 0.0 {
                        continue;
                    }
                    for c in 0..g.c_in {
                        for u in 0..g.k {
                            let row = ((b * g.c_in + c) * g.h + y * g.stride + u) * g.w;
                            let krow = ((o * g.c_in + c) * g.k + u) * g.k;
                            for v in 0..g.k {
                                out[row + x * g.stride + v] += gv * kernel[krow + v];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradient of `<narrow, conv(wide, K)>` with respect to `K`, laid out as
/// `c_out×c_in×k×k`.
pub(crate) fn conv_kernel_grad(g: &ConvGeom, wide: &[f64], narrow: &[f64]) -> Vec<f64> {
    let mut dk = vec![0.0; g.c_out * g.c_in * g.k * g.k];
    for b in 0..g.batch {
        for o in 0..g.c_out {
            for y in 0..g.ho {
                for x in 0..g.wo {
                    let gv = narrow[((b * g.c_out + o) * g.ho + y) * g.wo + x];
                    if gv == 0.0 {
                        continue;
                    }
                    for c in 0..g.c_in {
                        for u in 0..g.k {
                            let row = ((b * g.c_in + c) * g.h + y * g.stride + u) * g.w;
                            let krow = ((o * g.c_in + c) * g.k + u) * g.k;
                            for v in 0..g.k {
                                dk[krow + v] += gv * wide[row + x * g.stride + v];
                            }
                        }
                    }
                }
            }
        }
    }
    dk
}
