// SPDX-License-Identifier: Apache-2.0

//! Weighted undirected similarity graphs over agents.
//!
//! A [`Graph`] stores `W` sparsely as sorted per-agent neighbor lists. All
//! builders validate symmetry, positivity of degrees and connectivity, so a
//! `Graph` value always satisfies those invariants.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    neighbors: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
    degrees: Vec<f64>,
    /// `reverse_slot[i][s]` is the position of `i` in the neighbor list of
    /// `neighbors[i][s]`.
    reverse_slot: Vec<Vec<usize>>,
    num_edges: usize,
}

impl Graph {
    /// Build a graph from undirected weighted edges `(i, j, w)`.
    ///
    /// Edges are symmetrized; listing both orientations is allowed when the
    /// weights agree. Zero weights are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInstance(format!("a graph needs at least 2 agents, got {n}")));
        }
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidInstance(format!("edge ({i}, {j}) out of range for {n} agents")));
            }
            if i == j {
                return Err(Error::InvalidInstance(format!("self-loop on agent {i}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Parameter(format!("edge ({i}, {j}) has invalid weight {w}")));
            }
            if w == 0.0 {
                continue;
            }
            adj[i].push((j, w));
            adj[j].push((i, w));
        }

        let mut neighbors = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (i, mut list) in adj.into_iter().enumerate() {
            list.sort_by_key(|a| a.0);
            let mut nb: Vec<usize> = Vec::with_capacity(list.len());
            let mut wt: Vec<f64> = Vec::with_capacity(list.len());
            for (j, w) in list {
                if nb.last() == Some(&j) {
                    let prev = *wt.last().unwrap();
                    if prev != w {
                        return Err(Error::InvalidInstance(format!("edge ({i}, {j}) listed with conflicting weights {prev} and {w}")));
                    }
                    continue;
                }
                nb.push(j);
                wt.push(w);
            }
            neighbors.push(nb);
            weights.push(wt);
        }

        let degrees: Vec<f64> = weights.iter().map(|w| w.iter().sum()).collect();
        let num_edges = neighbors.iter().map(Vec::len).sum::<usize>() / 2;
        let reverse_slot = neighbors
            .iter()
            .enumerate()
            .map(|(i, nb)| nb.iter().map(|&j| neighbors[j].binary_search(&i).expect("adjacency is symmetric")).collect())
            .collect();

        let graph = Self { n, neighbors, weights, degrees, reverse_slot, num_edges };
        graph.check_connected()?;
        Ok(graph)
    }

    fn check_connected(&self) -> Result<()> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    reached += 1;
                    queue.push_back(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            None => Ok(()),
            Some(isolated) => Err(Error::Connectivity { isolated, component_size: reached }),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges `|E|`.
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Sorted neighbor list `N_i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Weights aligned with [`Graph::neighbors`].
    pub fn neighbor_weights(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Position of `j` in `N_i`.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        self.neighbors[i].binary_search(&j).ok()
    }

    /// Position of `i` in the neighbor list of its `s`-th neighbor.
    pub fn reverse_slot(&self, i: usize, s: usize) -> usize {
        self.reverse_slot[i][s]
    }

    /// `W_ij`, zero when `(i, j)` is not an edge.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.weights[i][s])
    }

    /// Undirected edges `(i, j, W_ij)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n)
            .flat_map(move |i| self.neighbors[i].iter().zip(&self.weights[i]).filter(move |(&j, _)| j > i).map(move |(&j, &w)| (i, j, w)))
    }

    /// Parse the `i j w` edge-list text format (0-based, whitespace
    /// separated, `#` comments). `n` defaults to one past the largest index.
    pub fn from_edge_list(text: &str, n: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_index = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse { line: lineno + 1, message: format!("expected `i j w`, found {} fields", fields.len()) });
            }
            let parse_err = |what: &str, e: &dyn std::fmt::Display| Error::Parse { line: lineno + 1, message: format!("bad {what}: {e}") };
            let i: usize = fields[0].parse().map_err(|e| parse_err("index", &e))?;
            let j: usize = fields[1].parse().map_err(|e| parse_err("index", &e))?;
            let w: f64 = fields[2].parse().map_err(|e| parse_err("weight", &e))?;
            max_index = max_index.max(i).max(j);
            edges.push((i, j, w));
        }
        Graph::from_edges(n.unwrap_or(max_index + 1), edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (i, j, w) in self.edges() {
            let _ = writeln!(out, "{i} {j} {w:e}");
        }
        out
    }
}

/// Complete graph with `W_ij = exp(-||v_i - v_j||^2 / (2 sigma^2))`.
///
/// Pairs whose kernel value underflows to zero are not linked.
pub fn build_gaussian_kernel_graph(points: &[[f64; 2]], sigma: f64) -> Result<Graph> {
    if points.len() < 2 {
        return Err(Error::InvalidInstance(format!("need at least 2 points, got {}", points.len())));
    }
    if !(sigma > 0.0) {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    let denom = 2.0 * sigma * sigma;
    let n = points.len();
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            edges.push((i, j, (-(dx * dx + dy * dy) / denom).exp()));
        }
    }
    Graph::from_edges(n, edges)
}

/// Default pruning threshold for [`build_angle_kernel_graph`].
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-4;

fn unit_rows(models: &Matrix) -> Result<Vec<Vec<f64>>> {
    models
        .iter_rows()
        .enumerate()
        .map(|(i, r)| {
            let len = norm(r);
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::Parameter(format!("target model {i} has zero or non-finite norm")));
            }
            Ok(r.iter().map(|v| v / len).collect())
        })
        .collect()
}

/// Cosine similarity matrix entry between unit vectors, clamped to [-1, 1].
fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0)
}

/// `W_ij = exp((cos(phi_ij) - 1) / sigma)` over the angle between target
/// models; weights below `prune_threshold` are dropped.
pub fn build_angle_kernel_graph(target_models: &Matrix, sigma: f64, prune_threshold: f64) -> Result<Graph> {
    if !(sigma > 0.0) {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    if !(prune_threshold >= 0.0) {
        return Err(Error::Parameter(format!("prune threshold must be nonnegative, got {prune_threshold}")));
    }
    let units = unit_rows(target_models)?;
    let n = units.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let w = ((cosine(&units[i], &units[j]) - 1.0) / sigma).exp();
            if w >= prune_threshold && w > 0.0 {
                edges.push((i, j, w));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// Unit-weight k-nearest-neighbor graph by angle similarity, symmetrized by
/// union. Ties go to the lower agent index.
pub fn build_knn_graph(target_models: &Matrix, k: usize) -> Result<Graph> {
    let n = target_models.rows();
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!("k must satisfy 1 <= k < n = {n}, got {k}")));
    }
    let units = unit_rows(target_models)?;
    let mut edges = Vec::with_capacity(n * k);
    for i in 0..n {
        let mut ranked: Vec<(usize, f64)> = (0..n).filter(|&j| j != i).map(|j| (j, cosine(&units[i], &units[j]))).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        edges.extend(ranked.into_iter().take(k).map(|(j, _)| (i.min(j), i.max(j), 1.0)));
    }
    edges.sort_by_key(|a| (a.0, a.1));
    edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    Graph::from_edges(n, edges)
}

/// Sparse row-stochastic operator `P = D^{-1} W`.
#[derive(Debug, Clone)]
pub struct StochasticMatrix {
    cols: Vec<Vec<usize>>,
    values: Vec<Vec<f64>>,
}

pub fn stochastic_matrix(graph: &Graph) -> StochasticMatrix {
    let values = (0..graph.n())
        .map(|i| {
            let d = graph.degree(i);
            graph.neighbor_weights(i).iter().map(|w| w / d).collect()
        })
        .collect();
    StochasticMatrix { cols: (0..graph.n()).map(|i| graph.neighbors(i).to_vec()).collect(), values }
}

impl StochasticMatrix {
    pub fn n(&self) -> usize {
        self.cols.len()
    }

    /// Nonzero column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        (&self.cols[i], &self.values[i])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cols[i].binary_search(&j).map_or(0.0, |s| self.values[i][s])
    }

    /// `P X` for an `n x p` matrix `X`.
    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..self.n() {
            let dst = out.row_mut(i);
            for (&j, &v) in self.cols[i].iter().zip(&self.values[i]) {
                for (d, s) in dst.iter_mut().zip(x.row(j)) {
                    *d += v * s;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for (&j, &v) in self.cols[i].iter().zip(&self.values[i]) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Per-agent neighbor selection distributions `pi_i`, supported exactly on
/// `N_i` and aligned with [`Graph::neighbors`].
#[derive(Debug, Clone)]
pub struct NeighborDistribution {
    neighbors: Vec<Vec<usize>>,
    probs: Vec<Vec<f64>>,
    cumulative: Vec<Vec<f64>>,
    uniform: bool,
}

pub fn uniform_neighbor_distribution(graph: &Graph) -> NeighborDistribution {
    let probs = (0..graph.n())
        .map(|i| {
            let deg = graph.neighbors(i).len();
            vec![1.0 / deg as f64; deg]
        })
        .collect();
    NeighborDistribution::build(graph, probs, true)
}

impl NeighborDistribution {
    /// Custom distribution; `probs[i]` is aligned with `graph.neighbors(i)`.
    pub fn from_probabilities(graph: &Graph, probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.len() != graph.n() {
            return Err(crate::error::shape_err(graph.n(), probs.len()));
        }
        for (i, row) in probs.iter().enumerate() {
            if row.len() != graph.neighbors(i).len() {
                return Err(crate::error::shape_err(graph.neighbors(i).len(), row.len()));
            }
            if row.iter().any(|&p| !(p > 0.0)) {
                return Err(Error::Parameter(format!("pi_{i} must be positive on every neighbor")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Parameter(format!("pi_{i} sums to {total}, not 1")));
            }
        }
        Ok(Self::build(graph, probs, false))
    }

    fn build(graph: &Graph, probs: Vec<Vec<f64>>, uniform: bool) -> Self {
        let cumulative = probs
            .iter()
            .map(|row| {
                row.iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Self { neighbors: (0..graph.n()).map(|i| graph.neighbors(i).to_vec()).collect(), probs, cumulative, uniform }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    /// `pi_i^j`, zero off the neighborhood.
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.neighbors[i].binary_search(&j).map_or(0.0, |s| self.probs[i][s])
    }

    pub fn probs(&self, i: usize) -> &[f64] {
        &self.probs[i]
    }

    /// Draw a neighbor of `agent` according to `pi_agent`.
    pub fn sample_neighbor<R: Rng + ?Sized>(&self, agent: usize, rng: &mut R) -> usize {
        let nb = &self.neighbors[agent];
        if nb.len() == 1 {
            return nb[0];
        }
        if self.uniform {
            return nb[rng.random_range(0..nb.len())];
        }
        let cum = &self.cumulative[agent];
        let u = rng.random::<f64>() * cum[cum.len() - 1];
        let s = cum.partition_point(|&c| c <= u).min(nb.len() - 1);
        nb[s]
    }
}
