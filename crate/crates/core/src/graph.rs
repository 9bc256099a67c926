//! KNN patient graphs and feature standardisation.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

/// Symmetric {0,1} adjacency over `n_nodes` patients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub n_nodes: usize,
    pub adjacency: Tensor,
    pub self_looped: bool,
}

impl Graph {
    /// Row sums of the adjacency.
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|i| self.adjacency.row(i).iter().sum()).collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency.at(i, j) != 0.0
    }

    /// Undirected off-diagonal edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_nodes;
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

fn distance(metric: Metric, a: &[f64], b: &[f64]) -> f64 {
    match metric {
        Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
        Metric::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na = libm::sqrt(a.iter().map(|x| x * x).sum::<f64>());
            let nb = libm::sqrt(b.iter().map(|x| x * x).sum::<f64>());
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                1.0 - dot / (na * nb)
            }
        }
    }
}

/// Union-symmetrised KNN graph: `i–j` is an edge when either endpoint is among
/// the other's `k` nearest rows. Self is never a candidate; distance ties go
/// to the lower index.
pub fn knn_graph(features: &Tensor, k: usize, metric: Metric) -> Result<Graph> {
    let (n, _) = features.dims2()?;
    if n < 2 {
        return Err(Error::Dataset(format!("knn_graph needs at least 2 nodes, got {n}")));
    }
    if k == 0 || k > n - 1 {
        return Err(Error::Parameter(format!("knn k={k} outside 1..={}", n - 1)));
    }
    let mut adjacency = Tensor::zeros(&[n, n]);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        cand.clear();
        let xi = features.row(i);
        cand.extend((0..n).filter(|&j| j != i).map(|j| (distance(metric, xi, features.row(j)), j)));
        // Candidates are generated in index order, so a stable sort on
        // distance alone breaks ties by lower index.
        cand.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(_, j) in &cand[..k] {
            adjacency.set(i, j, 1.0);
            adjacency.set(j, i, 1.0);
        }
    }
    Ok(Graph {
        n_nodes: n,
        adjacency,
        self_looped: false,
    })
}

/// `Â = A + I`.
pub fn add_self_loops(g: &Graph) -> Result<Graph> {
    if g.self_looped {
        return Err(Error::Contract("graph already has self-loops".into()));
    }
    let mut adjacency = g.adjacency.clone();
    for i in 0..g.n_nodes {
        adjacency.set(i, i, 1.0);
    }
    Ok(Graph {
        n_nodes: g.n_nodes,
        adjacency,
        self_looped: true,
    })
}

/// Per-column z-score parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on the selected rows only. Constant columns get unit scale.
    pub fn fit(x: &Tensor, rows: &[usize]) -> Result<Self> {
        let (_, d) = x.dims2()?;
        if rows.is_empty() {
            return Err(Error::Dataset("cannot standardise on zero rows".into()));
        }
        let m = rows.len() as f64;
        let mut mean = alloc::vec![0.0; d];
        for &r in rows {
            for (acc, v) in mean.iter_mut().zip(x.row(r)) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        let mut var = alloc::vec![0.0; d];
        for &r in rows {
            for ((acc, v), mu) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = libm::sqrt(v / m);
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let (n, d) = x.dims2()?;
        if d != self.mean.len() {
            return Err(Error::Config(format!(
                "standardiser fitted on {} columns, got {d}",
                self.mean.len()
            )));
        }
        let mut out = x.clone();
        for i in 0..n {
            for j in 0..d {
                out.set(i, j, (x.at(i, j) - self.mean[j]) / self.std[j]);
            }
        }
        Ok(out)
    }
}
