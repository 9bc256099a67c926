//! Library results against slow, literal reference implementations.

use crossview_core::autodiff::{Tape, Var};
use crossview_core::fusion::{classification_loss, contrastive_loss, similarity_matrix};
use crossview_core::gnn::{gat_attention, gat_layer, GatVars};
use crossview_core::graph::{add_self_loops, knn_graph, Graph, Metric};
use crossview_core::nn::Activation;
use crossview_core::pipeline::roc_auc;
use crossview_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::new(vec![r, c], (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn grid(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::new(vec![r, c], (0..r * c).map(|_| rng.random_range(0..4) as f64).collect()).unwrap()
}

// ---- KNN -------------------------------------------------------------------

fn oracle_distance(metric: Metric, a: &[f64], b: &[f64]) -> f64 {
    match metric {
        Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
        Metric::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                1.0 - dot / (na * nb)
            }
        }
    }
}

/// `j` is among `i`'s k nearest when fewer than k other rows beat it, where
/// a row beats `j` by being strictly closer, or equally close with a lower index.
fn knn_oracle(x: &Tensor, k: usize, metric: Metric) -> Vec<Vec<bool>> {
    let n = x.rows();
    let d = |i: usize, j: usize| oracle_distance(metric, x.row(i), x.row(j));
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let beaten_by = (0..n)
                .filter(|&m| m != i && m != j)
                .filter(|&m| d(i, m) < d(i, j) || (d(i, m) == d(i, j) && m < j))
                .count();
            if beaten_by < k {
                adj[i][j] = true;
                adj[j][i] = true;
            }
        }
    }
    adj
}

#[test]
fn knn_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..40 {
        let n = rng.random_range(2..=64);
        let d = rng.random_range(1..5);
        let k = rng.random_range(1..n);
        let x = if trial % 2 == 0 { random(&mut rng, n, d) } else { grid(&mut rng, n, d) };
        for metric in [Metric::Euclidean, Metric::Cosine] {
            let g = knn_graph(&x, k, metric).unwrap();
            let oracle = knn_oracle(&x, k, metric);
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(g.has_edge(i, j), oracle[i][j], "trial {trial} {metric:?} n={n} k={k} ({i},{j})");
                }
            }
        }
    }
}

// ---- GAT ---------------------------------------------------------------------

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Attention of one head computed entry by entry.
fn attention_oracle(h: &Tensor, w: &Tensor, a: &Tensor, adj: &Graph, slope: f64) -> Vec<Vec<f64>> {
    let n = h.rows();
    let wh = h.matmul(w).unwrap();
    let d = wh.cols();
    let score = |i: usize, j: usize| {
        let mut s = 0.0;
        for t in 0..d {
            s += a.data()[t] * wh.at(i, t);
            s += a.data()[d + t] * wh.at(j, t);
        }
        leaky(s, slope)
    };
    let mut alpha = vec![vec![0.0; n]; n];
    for i in 0..n {
        let neigh: Vec<usize> = (0..n).filter(|&j| adj.has_edge(i, j)).collect();
        let denom: f64 = neigh.iter().map(|&m| score(i, m).exp()).sum();
        for &j in &neigh {
            alpha[i][j] = score(i, j).exp() / denom;
        }
    }
    alpha
}

fn layer_oracle(h: &Tensor, ws: &[Tensor], as_: &[Tensor], adj: &Graph, slope: f64) -> Vec<Vec<f64>> {
    let n = h.rows();
    let d = ws[0].cols();
    let mut out = vec![vec![0.0; d]; n];
    for (w, a) in ws.iter().zip(as_) {
        let alpha = attention_oracle(h, w, a, adj, slope);
        let wh = h.matmul(w).unwrap();
        for i in 0..n {
            for j in 0..n {
                for t in 0..d {
                    out[i][t] += alpha[i][j] * wh.at(j, t) / ws.len() as f64;
                }
            }
        }
    }
    out.iter().map(|r| r.iter().map(|&v| elu(v)).collect()).collect()
}

#[test]
fn gat_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let n = rng.random_range(2..12);
        let (d_in, d_out, heads) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..4));
        let h = random(&mut rng, n, d_in);
        let adj = add_self_loops(&knn_graph(&h, rng.random_range(1..n), Metric::Euclidean).unwrap()).unwrap();
        let ws: Vec<Tensor> = (0..heads).map(|_| random(&mut rng, d_in, d_out)).collect();
        let as_: Vec<Tensor> = (0..heads).map(|_| random(&mut rng, 2 * d_out, 1)).collect();

        let mut tape = Tape::new();
        let hv = tape.constant(h.clone());
        let vars = GatVars {
            w: ws.iter().map(|w| tape.constant(w.clone())).collect(),
            a: as_.iter().map(|a| tape.constant(a.clone())).collect(),
            leaky_slope: 0.2,
        };
        for head in 0..heads {
            let alpha = gat_attention(&mut tape, hv, &adj, &vars, head).unwrap();
            let oracle = attention_oracle(&h, &ws[head], &as_[head], &adj, 0.2);
            for i in 0..n {
                for j in 0..n {
                    assert!((tape.value(alpha).at(i, j) - oracle[i][j]).abs() < 1e-12);
                }
            }
        }
        let out = gat_layer(&mut tape, hv, &adj, &vars, Activation::Elu).unwrap();
        let oracle = layer_oracle(&h, &ws, &as_, &adj, 0.2);
        for i in 0..n {
            for t in 0..d_out {
                assert!((tape.value(out).at(i, t) - oracle[i][t]).abs() < 1e-12);
            }
        }
    }
}

// ---- masked softmax ----------------------------------------------------------

#[test]
fn masked_softmax_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let (r, c) = (rng.random_range(1..8), rng.random_range(1..8));
        let logits = random(&mut rng, r, c).map(|v| 30.0 * v);
        let mut mask = Tensor::zeros(&[r, c]);
        for i in 0..r {
            let keep = rng.random_range(0..c);
            mask.set(i, keep, 1.0);
            for j in 0..c {
                if rng.random_bool(0.5) {
                    mask.set(i, j, 1.0);
                }
            }
        }
        let mut tape = Tape::new();
        let x = tape.constant(logits.clone());
        let y = tape.masked_softmax_rows(x, &mask).unwrap();
        for i in 0..r {
            // dense oracle: softmax over logits with -inf at masked-out entries
            let row: Vec<f64> =
                (0..c).map(|j| if mask.at(i, j) > 0.0 { logits.at(i, j) } else { f64::NEG_INFINITY }).collect();
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - mx).exp()).sum();
            for j in 0..c {
                let expect = (row[j] - mx).exp() / z;
                assert!((tape.value(y).at(i, j) - expect).abs() < 1e-12);
            }
        }
    }
}

// ---- ROC ---------------------------------------------------------------------

fn mann_whitney(scores: &[f64], positive: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &pi) in positive.iter().enumerate() {
        for (j, &pj) in positive.iter().enumerate() {
            if pi && !pj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

#[test]
fn auc_equals_mann_whitney() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..200 {
        let n = 50;
        let positive: Vec<bool> = (0..n).map(|i| i < 2 || (i >= 4 && rng.random_bool(0.5))).collect();
        let mut positive = positive;
        positive[2] = false;
        positive[3] = false;
        let scores: Vec<f64> = (0..n)
            .map(|i| {
                let s: f64 = rng.random_range(0.0..1.0) + if positive[i] { 0.3 } else { 0.0 };
                // coarse rounding on half the trials produces many ties
                if trial % 2 == 0 {
                    (s * 5.0).round() / 5.0
                } else {
                    s
                }
            })
            .collect();
        let (auc, _) = roc_auc(&scores, &positive).unwrap();
        assert!((auc - mann_whitney(&scores, &positive)).abs() < 1e-12, "trial {trial}");
    }
}

// ---- fusion ------------------------------------------------------------------

#[test]
fn similarity_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for normalize in [true, false] {
        let z = random(&mut rng, 5, 3);
        let mut tape = Tape::new();
        let zv = tape.constant(z.clone());
        let s = similarity_matrix(&mut tape, zv, normalize).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 = (0..3).map(|t| z.at(i, t) * z.at(j, t)).sum();
                let ni: f64 = (0..3).map(|t| z.at(i, t).powi(2)).sum::<f64>().sqrt();
                let nj: f64 = (0..3).map(|t| z.at(j, t).powi(2)).sum::<f64>().sqrt();
                let expect = if normalize { dot / (ni * nj) } else { dot };
                assert!((tape.value(s).at(i, j) - expect).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn classification_loss_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let (n, d, c) = (7, 4, 3);
        let z = random(&mut rng, n, d);
        let head = random(&mut rng, d, c);
        let classes: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let mut y = Tensor::zeros(&[n, c]);
        for (i, &k) in classes.iter().enumerate() {
            y.set(i, k, 1.0);
        }
        let mask: Vec<bool> = (0..n).map(|i| i == 0 || rng.random_bool(0.6)).collect();
        let mut tape = Tape::new();
        let (zv, hv) = (tape.constant(z.clone()), tape.constant(head.clone()));
        let loss = classification_loss(&mut tape, zv, hv, &y, &mask).unwrap();

        let logits = z.matmul(&head).unwrap();
        let mut expect = 0.0;
        for i in (0..n).filter(|&i| mask[i]) {
            let z: f64 = (0..c).map(|k| logits.at(i, k).exp()).sum();
            expect -= (logits.at(i, classes[i]).exp() / z).ln();
        }
        assert!((tape.value(loss).data()[0] - expect).abs() < 1e-10);
    }
}

#[test]
fn contrastive_loss_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let n = 8;
        let s = random(&mut rng, n, n);
        let gm = add_self_loops(&knn_graph(&random(&mut rng, n, 2), 2, Metric::Euclidean).unwrap()).unwrap();
        let gf = add_self_loops(&knn_graph(&random(&mut rng, n, 2), 3, Metric::Euclidean).unwrap()).unwrap();
        let classes: Vec<usize> = (0..n).map(|i| usize::from(i % 3 == 0)).collect();
        let mut y = Tensor::zeros(&[n, 2]);
        for (i, &k) in classes.iter().enumerate() {
            y.set(i, k, 1.0);
        }
        let rows: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
        let delta = 0.2;
        let mut tape = Tape::new();
        let sv: Var = tape.constant(s.clone());
        let terms = contrastive_loss(&mut tape, sv, &gm, &gf, &y, Some(&rows), delta).unwrap();

        let (mut l_pos, mut l_neg) = (0.0, 0.0);
        for i in 0..n {
            for c in 0..2 {
                let (mut p, mut q) = (0.0, 0.0);
                for j in (0..n).filter(|&j| rows[j]) {
                    let (m, f) = (gm.adjacency.at(i, j), gf.adjacency.at(i, j));
                    let yjc = if classes[j] == c { 1.0 } else { 0.0 };
                    p += s.at(i, j) * m * f * yjc;
                    let dneg = (1.0 - s.at(i, j)) * (1.0 - m) * (1.0 - f);
                    q += (dneg - delta).max(0.0) * (1.0 - yjc);
                }
                l_pos -= p * p;
                l_neg -= q * q;
            }
        }
        assert!((tape.value(terms.l_pos).data()[0] - l_pos).abs() < 1e-10);
        assert!((tape.value(terms.l_neg).data()[0] - l_neg).abs() < 1e-10);
    }
}
