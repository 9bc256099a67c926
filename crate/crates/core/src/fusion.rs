//! Cross-view fusion and the training objective.
//!
//! `Ẑ_view = σ([inputs ‖ Z_view] W_view)`, `Ẑ = Ẑ^m + Ẑ^f`, `S = Ẑ Ẑᵀ`
//! (row-normalised by default), then
//!
//! * positive pairs `D_pos = S ⊙ (Â^m ⊙ Â^f)`, `L_pos = −‖D_pos Y‖²_F`
//! * negative pairs `D_neg = (1 − S) ⊙ (1 − Â^m) ⊙ (1 − Â^f)`,
//!   `L_neg = −‖max(D_neg − δ, 0)(1 − Y)‖²_F`
//! * `L_diag = (1/N) Σ_ij (S_ij − deg_i)²`
//! * `L = (1 − β)(L_m + L_f) + β (L_pos + L_neg) + L_diag`
//!
//! Label matrices are masked to training rows: a masked-out row contributes
//! to neither `Y` nor `1 − Y`.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::Activation;
use crate::tensor::Tensor;

/// Which self-looped adjacency supplies the degree targets of `L_diag`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DiagReference {
    Image,
    Clinical,
    #[default]
    Average,
}

/// Tape handles for the four contrastive quantities.
#[derive(Debug, Clone, Copy)]
pub struct ContrastiveTerms {
    pub d_pos: Var,
    pub d_neg: Var,
    pub l_pos: Var,
    pub l_neg: Var,
    pub l_contrastive: Var,
}

/// `[inputs ‖ Z]`.
pub fn concat_views(tape: &mut Tape, inputs: Var, z: Var) -> Result<Var> {
    tape.concat_cols(inputs, z)
}

/// `σ(C W)`.
pub fn fuse_view(tape: &mut Tape, c: Var, w: Var, act: Activation) -> Result<Var> {
    let cw = tape.matmul(c, w)?;
    act.apply(tape, cw)
}

/// `Ẑ^m + Ẑ^f`.
pub fn fuse_sum(tape: &mut Tape, zm: Var, zf: Var) -> Result<Var> {
    let (a, b) = (tape.value(zm).shape(), tape.value(zf).shape());
    if a != b {
        return Err(Error::Shape {
            op: "fuse_sum",
            lhs: a.to_vec(),
            rhs: b.to_vec(),
        });
    }
    tape.add(zm, zf)
}

/// `S = Ẑ Ẑᵀ`, optionally after L2-normalising rows (cosine similarity).
/// Zero rows stay zero, so their similarities are zero.
pub fn similarity_matrix(tape: &mut Tape, zhat: Var, normalize: bool) -> Result<Var> {
    let z = if normalize { tape.normalize_rows(zhat)? } else { zhat };
    let zt = tape.transpose(z)?;
    tape.matmul(z, zt)
}

/// Number of all-zero rows, which [`similarity_matrix`] cannot normalise.
pub fn zero_rows(z: &Tensor) -> usize {
    (0..z.rows()).filter(|&i| z.row(i).iter().all(|&v| v == 0.0)).count()
}

/// Checks that every row of `y` is one-hot, and that masked-in rows exist
/// when a mask is given.
pub fn validate_labels(y: &Tensor) -> Result<usize> {
    let (_, c) = y.dims2()?;
    for i in 0..y.rows() {
        let row = y.row(i);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || zeros != c - 1 {
            return Err(Error::Label(format!("row {i} is not one-hot: {row:?}")));
        }
    }
    Ok(c)
}

fn masked_labels(y: &Tensor, rows: Option<&[bool]>, complement: bool) -> Result<Tensor> {
    let (n, c) = y.dims2()?;
    if let Some(m) = rows {
        if m.len() != n {
            return Err(Error::Shape {
                op: "label mask",
                lhs: alloc::vec![n, c],
                rhs: alloc::vec![m.len()],
            });
        }
    }
    let mut out = Tensor::zeros(&[n, c]);
    for i in 0..n {
        if rows.is_none_or(|m| m[i]) {
            for k in 0..c {
                let v = y.at(i, k);
                out.set(i, k, if complement { 1.0 - v } else { v });
            }
        }
    }
    Ok(out)
}

fn check_pair(am: &Graph, af: &Graph, n: usize) -> Result<()> {
    if !am.self_looped || !af.self_looped {
        return Err(Error::Contract("contrastive loss needs self-looped graphs".into()));
    }
    if am.n_nodes != n || af.n_nodes != n {
        return Err(Error::Shape {
            op: "contrastive_loss",
            lhs: alloc::vec![n, n],
            rhs: alloc::vec![am.n_nodes, af.n_nodes],
        });
    }
    Ok(())
}

/// Positive/negative pair losses over the similarity matrix `s`.
///
/// `label_rows` restricts which rows of `y` take part; `None` uses all rows.
pub fn contrastive_loss(
    tape: &mut Tape,
    s: Var,
    am: &Graph,
    af: &Graph,
    y: &Tensor,
    label_rows: Option<&[bool]>,
    delta: f64,
) -> Result<ContrastiveTerms> {
    let (n, n2) = tape.value(s).dims2()?;
    if n != n2 {
        return Err(Error::Shape {
            op: "contrastive_loss",
            lhs: alloc::vec![n, n2],
            rhs: alloc::vec![n, n],
        });
    }
    check_pair(am, af, n)?;
    if !(delta >= 0.0) {
        return Err(Error::Parameter(format!("margin delta {delta} must be ≥ 0")));
    }
    validate_labels(y)?;
    if y.rows() != n {
        return Err(Error::Shape {
            op: "contrastive_loss",
            lhs: alloc::vec![n, n],
            rhs: y.shape().to_vec(),
        });
    }

    let mut pos_mask = Tensor::zeros(&[n, n]);
    let mut neg_mask = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            let (m, f) = (am.adjacency.at(i, j), af.adjacency.at(i, j));
            pos_mask.set(i, j, m * f);
            neg_mask.set(i, j, (1.0 - m) * (1.0 - f));
        }
    }
    let pos_mask = tape.constant(pos_mask);
    let neg_mask = tape.constant(neg_mask);
    let y_pos = tape.constant(masked_labels(y, label_rows, false)?);
    let y_neg = tape.constant(masked_labels(y, label_rows, true)?);

    let d_pos = tape.mul(s, pos_mask)?;
    let neg_s = tape.mul_scalar(s, -1.0)?;
    let one_minus_s = tape.add_scalar(neg_s, 1.0)?;
    let d_neg = tape.mul(one_minus_s, neg_mask)?;

    let pos_proj = tape.matmul(d_pos, y_pos)?;
    let pos_norm = tape.frobenius_norm_sq(pos_proj)?;
    let l_pos = tape.mul_scalar(pos_norm, -1.0)?;

    let hinge = tape.hinge_max0(d_neg, delta)?;
    let neg_proj = tape.matmul(hinge, y_neg)?;
    let neg_norm = tape.frobenius_norm_sq(neg_proj)?;
    let l_neg = tape.mul_scalar(neg_norm, -1.0)?;

    let l_contrastive = tape.add(l_pos, l_neg)?;
    Ok(ContrastiveTerms {
        d_pos,
        d_neg,
        l_pos,
        l_neg,
        l_contrastive,
    })
}

/// Summed cross-entropy `−Σ_{i∈mask} y_iᵀ ln softmax(Ẑ_i · head)`.
pub fn classification_loss(tape: &mut Tape, zview: Var, head: Var, y: &Tensor, mask: &[bool]) -> Result<Var> {
    let logits = tape.matmul(zview, head)?;
    classification_loss_from_logits(tape, logits, y, mask)
}

pub fn classification_loss_from_logits(tape: &mut Tape, logits: Var, y: &Tensor, mask: &[bool]) -> Result<Var> {
    if !mask.iter().any(|&m| m) {
        return Err(Error::Contract("classification loss over an empty mask".into()));
    }
    validate_labels(y)?;
    if tape.value(logits).shape() != y.shape() {
        return Err(Error::Shape {
            op: "classification_loss",
            lhs: tape.value(logits).shape().to_vec(),
            rhs: y.shape().to_vec(),
        });
    }
    let ym = tape.constant(masked_labels(y, Some(mask), false)?);
    let ls = tape.log_softmax_rows(logits)?;
    let picked = tape.mul(ls, ym)?;
    let total = tape.sum(picked)?;
    tape.mul_scalar(total, -1.0)
}

/// Degree targets for [`diag_loss`].
pub fn diag_reference(am: &Graph, af: &Graph, which: DiagReference) -> Result<Graph> {
    if !am.self_looped || !af.self_looped {
        return Err(Error::Contract("diagonal loss needs self-looped graphs".into()));
    }
    Ok(match which {
        DiagReference::Image => am.clone(),
        DiagReference::Clinical => af.clone(),
        DiagReference::Average => {
            let mut adjacency = am.adjacency.clone();
            for (a, b) in adjacency.data_mut().iter_mut().zip(af.adjacency.data()) {
                *a = 0.5 * (*a + b);
            }
            Graph {
                n_nodes: am.n_nodes,
                adjacency,
                self_looped: true,
            }
        }
    })
}

/// `(1/N) Σ_ij (S_ij − deg_i)²` where `deg_i` is row `i`'s degree in `reference`.
pub fn diag_loss(tape: &mut Tape, s: Var, reference: &Graph) -> Result<Var> {
    if !reference.self_looped {
        return Err(Error::Contract("diagonal loss needs a self-looped graph".into()));
    }
    let (n, m) = tape.value(s).dims2()?;
    if n != reference.n_nodes || m != n {
        return Err(Error::Shape {
            op: "diag_loss",
            lhs: alloc::vec![n, m],
            rhs: alloc::vec![reference.n_nodes, reference.n_nodes],
        });
    }
    let deg = reference.degrees();
    let mut target = Tensor::zeros(&[n, n]);
    for (i, d) in deg.iter().enumerate() {
        target.data_mut()[i * n..(i + 1) * n].fill(*d);
    }
    let target = tape.constant(target);
    let diff = tape.sub(s, target)?;
    let sq = tape.square(diff)?;
    let total = tape.sum(sq)?;
    tape.mul_scalar(total, 1.0 / n as f64)
}

pub fn check_beta(beta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("beta {beta} outside [0, 1]")))
    }
}

/// `(1 − β)(L_m + L_f) + β L_contrastive + L_diag`.
pub fn total_loss(tape: &mut Tape, l_m: Var, l_f: Var, l_contrastive: Var, l_diag: Var, beta: f64) -> Result<Var> {
    check_beta(beta)?;
    let ce = tape.add(l_m, l_f)?;
    let ce = tape.mul_scalar(ce, 1.0 - beta)?;
    let con = tape.mul_scalar(l_contrastive, beta)?;
    let sum = tape.add(ce, con)?;
    tape.add(sum, l_diag)
}

/// Plain-number form of [`total_loss`].
pub fn combine_losses(l_m: f64, l_f: f64, l_contrastive: f64, l_diag: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok((1.0 - beta) * (l_m + l_f) + beta * l_contrastive + l_diag)
}

/// Row-wise softmax without a tape.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    let (n, c) = logits.dims2()?;
    let mut out = logits.clone();
    for i in 0..n {
        let row = &mut out.data_mut()[i * c..(i + 1) * c];
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - mx);
            z += *v;
        }
        row.iter_mut().for_each(|v| *v /= z);
    }
    Ok(out)
}

/// Class probabilities as the mean of the two heads' softmax outputs.
pub fn average_head_probabilities(logits_m: &Tensor, logits_f: &Tensor) -> Result<Tensor> {
    let pm = softmax_rows(logits_m)?;
    let pf = softmax_rows(logits_f)?;
    if pm.shape() != pf.shape() {
        return Err(Error::Shape {
            op: "average_head_probabilities",
            lhs: pm.shape().to_vec(),
            rhs: pf.shape().to_vec(),
        });
    }
    let data: Vec<f64> = pm.data().iter().zip(pf.data()).map(|(a, b)| 0.5 * (a + b)).collect();
    Tensor::new(pm.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::add_self_loops;

    fn graph(adj: Tensor) -> Graph {
        add_self_loops(&Graph {
            n_nodes: adj.rows(),
            adjacency: adj,
            self_looped: false,
        })
        .unwrap()
    }

    fn onehot(labels: &[usize], c: usize) -> Tensor {
        let mut y = Tensor::zeros(&[labels.len(), c]);
        for (i, &l) in labels.iter().enumerate() {
            y.set(i, l, 1.0);
        }
        y
    }

    #[test]
    fn concat_examples() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::from_rows(&[[1.0]]));
        let b = tape.constant(Tensor::from_rows(&[[2.0]]));
        let c = concat_views(&mut tape, a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 2.0]);

        let x = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let xv = tape.constant(x.clone());
        let empty = tape.constant(Tensor::zeros(&[2, 0]));
        let c = concat_views(&mut tape, xv, empty).unwrap();
        assert_eq!(tape.value(c), &x);

        let q = tape.constant(Tensor::zeros(&[5, 8]));
        let z = tape.constant(Tensor::zeros(&[5, 16]));
        let c = concat_views(&mut tape, q, z).unwrap();
        assert_eq!(tape.value(c).shape(), &[5, 24]);
        let bad = tape.constant(Tensor::zeros(&[4, 16]));
        assert!(concat_views(&mut tape, q, bad).is_err());
    }

    #[test]
    fn fuse_view_examples() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::from_rows(&[[0.3, -1.0], [2.0, 0.5]]));
        let w0 = tape.constant(Tensor::zeros(&[2, 3]));
        let z = fuse_view(&mut tape, c, w0, Activation::Elu).unwrap();
        assert_eq!(tape.value(z), &Tensor::zeros(&[2, 3]));

        let w = Tensor::from_rows(&[[1.0, -2.0], [0.5, 4.0]]);
        let eye = tape.constant(Tensor::identity(2));
        let wv = tape.constant(w.clone());
        let z = fuse_view(&mut tape, eye, wv, Activation::Identity).unwrap();
        assert_eq!(tape.value(z), &w);
        let bad = tape.constant(Tensor::zeros(&[3, 3]));
        assert!(fuse_view(&mut tape, c, bad, Activation::Elu).is_err());
    }

    #[test]
    fn fuse_sum_examples() {
        let mut tape = Tape::new();
        let x = Tensor::from_rows(&[[1.0, -2.5], [0.125, 3.0]]);
        let xv = tape.constant(x.clone());
        let zero = tape.constant(Tensor::zeros(&[2, 2]));
        let s = fuse_sum(&mut tape, xv, zero).unwrap();
        assert_eq!(tape.value(s), &x);
        let neg = tape.constant(x.map(|v| -v));
        let s = fuse_sum(&mut tape, xv, neg).unwrap();
        assert_eq!(tape.value(s), &Tensor::zeros(&[2, 2]));
        let y = tape.constant(Tensor::from_rows(&[[0.1, 0.2], [0.3, 0.4]]));
        let ab = fuse_sum(&mut tape, xv, y).unwrap();
        let ba = fuse_sum(&mut tape, y, xv).unwrap();
        assert_eq!(tape.value(ab), tape.value(ba));
        let wrong = tape.constant(Tensor::zeros(&[2, 3]));
        assert!(fuse_sum(&mut tape, xv, wrong).is_err());
    }

    #[test]
    fn similarity_examples() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::from_rows(&[[0.0, 2.0, 0.0], [3.0, 0.0, 0.0], [0.0, 0.0, -1.0]]));
        let s = similarity_matrix(&mut tape, z, true).unwrap();
        assert_eq!(tape.value(s), &Tensor::identity(3));

        let z = tape.constant(Tensor::from_rows(&[[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]]));
        let s = similarity_matrix(&mut tape, z, true).unwrap();
        assert!((tape.value(s).at(0, 1) - 1.0).abs() < 1e-15);
        assert_eq!(tape.value(s).row(2), &[0.0, 0.0, 0.0]);
        assert_eq!(zero_rows(tape.value(z)), 1);
    }

    fn contrastive_values(s: Tensor, am: &Graph, af: &Graph, y: &Tensor, delta: f64) -> (f64, f64, f64) {
        let mut tape = Tape::new();
        let sv = tape.constant(s);
        let t = contrastive_loss(&mut tape, sv, am, af, y, None, delta).unwrap();
        (
            tape.value(t.l_pos).data()[0],
            tape.value(t.l_neg).data()[0],
            tape.value(t.l_contrastive).data()[0],
        )
    }

    #[test]
    fn contrastive_zero_similarity_has_no_positive_loss() {
        let am = graph(Tensor::from_rows(&[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]));
        let af = graph(Tensor::zeros(&[3, 3]));
        let y = onehot(&[0, 1, 0], 2);
        let (lp, _, _) = contrastive_values(Tensor::zeros(&[3, 3]), &am, &af, &y, 0.2);
        assert_eq!(lp, 0.0);
    }

    #[test]
    fn contrastive_margin_clamps_negatives() {
        let am = graph(Tensor::zeros(&[3, 3]));
        let af = graph(Tensor::zeros(&[3, 3]));
        let y = onehot(&[0, 1, 1], 2);
        // D_neg = 1 − S = 0.3 off-diagonal, below δ = 0.5
        let s = Tensor::full(&[3, 3], 0.7);
        let (_, ln, _) = contrastive_values(s, &am, &af, &y, 0.5);
        assert_eq!(ln, 0.0);
    }

    #[test]
    fn contrastive_two_node_complete_graphs() {
        let complete = graph(Tensor::from_rows(&[[0.0, 1.0], [1.0, 0.0]]));
        let y = onehot(&[0, 1], 2);
        // normalised rows (1,0) and (0.6,0.8): S = [[1,0.6],[0.6,1]]
        let s = Tensor::from_rows(&[[1.0, 0.6], [0.6, 1.0]]);
        let (lp, ln, lc) = contrastive_values(s, &complete, &complete, &y, 0.2);
        // D_pos = S; D_pos·Y = S (Y = I); ‖S‖² = 1 + 0.36 + 0.36 + 1
        assert!((lp - -2.72).abs() < 1e-12);
        assert_eq!(ln, 0.0);
        assert_eq!(lc, lp + ln);
    }

    #[test]
    fn contrastive_rejects_bad_inputs() {
        let g = graph(Tensor::zeros(&[2, 2]));
        let raw = Graph {
            n_nodes: 2,
            adjacency: Tensor::zeros(&[2, 2]),
            self_looped: false,
        };
        let mut tape = Tape::new();
        let s = tape.constant(Tensor::zeros(&[2, 2]));
        let y = onehot(&[0, 1], 2);
        assert!(matches!(
            contrastive_loss(&mut tape, s, &raw, &g, &y, None, 0.2),
            Err(Error::Contract(_))
        ));
        let soft = Tensor::from_rows(&[[0.5, 0.5], [0.0, 1.0]]);
        assert!(matches!(
            contrastive_loss(&mut tape, s, &g, &g, &soft, None, 0.2),
            Err(Error::Label(_))
        ));
        assert!(contrastive_loss(&mut tape, s, &g, &g, &y, None, -0.1).is_err());
    }

    #[test]
    fn masked_rows_drop_out_of_both_label_terms() {
        let y = onehot(&[0, 1, 1], 2);
        let mask = [true, false, true];
        assert_eq!(
            masked_labels(&y, Some(&mask), false).unwrap(),
            Tensor::from_rows(&[[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
        );
        assert_eq!(
            masked_labels(&y, Some(&mask), true).unwrap(),
            Tensor::from_rows(&[[0.0, 1.0], [0.0, 0.0], [1.0, 0.0]])
        );
    }

    #[test]
    fn classification_examples() {
        let y = onehot(&[0, 1, 1], 2);
        let mut tape = Tape::new();
        let logits = tape.constant(Tensor::from_rows(&[[20.0, 0.0], [0.0, 20.0], [-10.0, 10.0]]));
        let l = classification_loss_from_logits(&mut tape, logits, &y, &[true, true, true]).unwrap();
        assert!(tape.value(l).data()[0] < 3e-8);

        let flat = tape.constant(Tensor::zeros(&[3, 2]));
        let l = classification_loss_from_logits(&mut tape, flat, &y, &[true, false, true]).unwrap();
        assert!((tape.value(l).data()[0] - 2.0 * 2f64.ln()).abs() < 1e-15);

        assert!(matches!(
            classification_loss_from_logits(&mut tape, flat, &y, &[false; 3]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn diag_examples() {
        let one = graph(Tensor::zeros(&[1, 1]));
        let mut tape = Tape::new();
        let s = tape.constant(Tensor::full(&[1, 1], 1.0));
        let l = diag_loss(&mut tape, s, &one).unwrap();
        assert_eq!(tape.value(l).data()[0], 0.0);

        let eye = graph(Tensor::zeros(&[2, 2]));
        let s = tape.constant(Tensor::zeros(&[2, 2]));
        let l = diag_loss(&mut tape, s, &eye).unwrap();
        assert_eq!(tape.value(l).data()[0], 2.0);
    }

    #[test]
    fn diag_reference_average_has_fractional_degrees() {
        let am = graph(Tensor::from_rows(&[[0.0, 1.0], [1.0, 0.0]]));
        let af = graph(Tensor::zeros(&[2, 2]));
        let avg = diag_reference(&am, &af, DiagReference::Average).unwrap();
        assert_eq!(avg.degrees(), alloc::vec![1.5, 1.5]);
        assert_eq!(diag_reference(&am, &af, DiagReference::Image).unwrap(), am);
        assert_eq!(diag_reference(&am, &af, DiagReference::Clinical).unwrap(), af);
    }

    #[test]
    fn total_loss_examples() {
        assert_eq!(combine_losses(1.0, 2.0, 3.0, 4.0, 0.0).unwrap(), 7.0);
        assert_eq!(combine_losses(1.0, 2.0, 3.0, 4.0, 1.0).unwrap(), 7.0);
        assert_eq!(combine_losses(1.0, 2.0, 3.0, 4.0, 0.5).unwrap(), 7.0);
        assert_eq!(combine_losses(1.0, 2.0, 10.0, 4.0, 1.0).unwrap(), 14.0);
        assert_eq!(combine_losses(5.0, 2.0, 10.0, 4.0, 0.0).unwrap(), 11.0);
        assert!(combine_losses(1.0, 1.0, 1.0, 1.0, 1.5).is_err());

        let mut tape = Tape::new();
        let v: Vec<Var> = [1.0, 2.0, 3.0, 4.0].iter().map(|&x| tape.constant(Tensor::scalar(x))).collect();
        let t = total_loss(&mut tape, v[0], v[1], v[2], v[3], 0.5).unwrap();
        assert_eq!(tape.value(t).data()[0], 7.0);
        assert!(total_loss(&mut tape, v[0], v[1], v[2], v[3], -0.1).is_err());
    }

    #[test]
    fn head_average_is_a_distribution() {
        let a = Tensor::from_rows(&[[1.0, 3.0], [0.0, 0.0]]);
        let b = Tensor::from_rows(&[[-2.0, 0.5], [5.0, 1.0]]);
        let p = average_head_probabilities(&a, &b).unwrap();
        for i in 0..2 {
            assert!((p.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        assert_eq!(average_head_probabilities(&a, &b.select_rows(&[0]).unwrap()).is_err(), true);
    }
}
