// SPDX-License-Identifier: Apache-2.0

//! Model propagation: smoothing solitary models over the graph with
//! per-agent confidences.
//!
//! The objective is
//!
//! ```text
//! Q_mp(T) = 1/2 ( sum_{i<j} W_ij |t_i - t_j|^2 + mu sum_i D_ii c_i |t_i - t_i^loc|^2 )
//! ```
//!
//! with `mu = (1 - alpha) / alpha`. Three solvers share it: the direct
//! linear solve [`solve_closed_form`], the synchronous fixed-point
//! iteration [`sync_step`], and the asynchronous gossip protocol
//! [`MpNetwork`] in which an activated agent exchanges models with one
//! neighbor and both re-run their local update.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::graph::{stochastic_matrix, Graph};
use crate::linalg::{axpy, from_dmatrix, lu_solve, sq_dist, to_dmatrix, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpConfig {
    alpha: f64,
}

/// Smoothing parameter used for the mean-estimation task.
pub const DEFAULT_ALPHA: f64 = 0.99;

impl MpConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `1 - alpha`
    pub fn alpha_bar(&self) -> f64 {
        1.0 - self.alpha
    }

    /// Trade-off `mu = (1 - alpha) / alpha`.
    pub fn mu(&self) -> f64 {
        (1.0 - self.alpha) / self.alpha
    }
}

impl std::str::FromStr for KnowledgeInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "solitary" => Ok(Self::Solitary),
            _ => Err(Error::Parameter(format!("unknown knowledge init {s:?}, expected zero or solitary"))),
        }
    }
}

impl Default for MpConfig {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA }
    }
}

fn check_inputs(graph: &Graph, theta_loc: &Matrix, c: &[f64]) -> Result<()> {
    if theta_loc.rows() != graph.n() {
        return Err(shape_err(format!("{} solitary models", graph.n()), theta_loc.rows()));
    }
    if c.len() != graph.n() {
        return Err(shape_err(format!("{} confidences", graph.n()), c.len()));
    }
    if let Some((i, v)) = c.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v <= 1.0)) {
        return Err(Error::Parameter(format!("confidence c_{i} = {v} outside (0, 1]")));
    }
    Ok(())
}

pub fn objective_qmp(graph: &Graph, theta: &Matrix, theta_loc: &Matrix, c: &[f64], cfg: &MpConfig) -> Result<f64> {
    check_inputs(graph, theta_loc, c)?;
    theta.ensure_shape(theta_loc.rows(), theta_loc.cols())?;
    let smooth: f64 = graph.edges().map(|(i, j, w)| w * sq_dist(theta.row(i), theta.row(j))).sum();
    let fit: f64 = (0..graph.n()).map(|i| graph.degree(i) * c[i] * sq_dist(theta.row(i), theta_loc.row(i))).sum();
    Ok(0.5 * (smooth + cfg.mu() * fit))
}

/// Minimizer of `Q_mp`: solves `(I - abar (I - C) - alpha P) T = abar C T_loc`
/// with one dense LU factorization shared by all model coordinates.
pub fn solve_closed_form(graph: &Graph, theta_loc: &Matrix, c: &[f64], cfg: &MpConfig) -> Result<Matrix> {
    check_inputs(graph, theta_loc, c)?;
    let n = graph.n();
    let (alpha, abar) = (cfg.alpha(), cfg.alpha_bar());
    let mut a = stochastic_matrix(graph).to_dense() * (-alpha);
    for i in 0..n {
        a[(i, i)] += 1.0 - abar * (1.0 - c[i]);
    }
    let mut rhs = to_dmatrix(theta_loc);
    for i in 0..n {
        for k in 0..rhs.ncols() {
            rhs[(i, k)] *= abar * c[i];
        }
    }
    let scale = rhs.amax().max(1.0);
    let (x, residual) = lu_solve(a, &rhs)?;
    if residual > 1e-9 * scale {
        return Err(Error::Numerical { message: "closed-form model propagation solve is inaccurate".into(), residual });
    }
    Ok(from_dmatrix(&x))
}

/// Plain label propagation, i.e. the closed form with `C = I`.
pub fn label_propagation(graph: &Graph, theta_loc: &Matrix, cfg: &MpConfig) -> Result<Matrix> {
    solve_closed_form(graph, theta_loc, &vec![1.0; graph.n()], cfg)
}

/// `out = (alpha sum_k (W_lk / D_ll) known_k + abar c_l loc) / (alpha + abar c_l)`
fn local_update<'m>(
    cfg: &MpConfig,
    weights: &[f64],
    degree: f64,
    confidence: f64,
    loc: &[f64],
    known: impl Iterator<Item = &'m [f64]>,
    out: &mut [f64],
) {
    let (alpha, abar) = (cfg.alpha(), cfg.alpha_bar());
    out.iter_mut().for_each(|v| *v = 0.0);
    for (w, model) in weights.iter().zip(known) {
        axpy(w / degree, model, out);
    }
    let denom = alpha + abar * confidence;
    for (o, l) in out.iter_mut().zip(loc) {
        *o = (alpha * *o + abar * confidence * l) / denom;
    }
}

/// One synchronous iteration of every agent's local update.
pub fn sync_step(graph: &Graph, theta: &Matrix, theta_loc: &Matrix, c: &[f64], cfg: &MpConfig) -> Result<Matrix> {
    check_inputs(graph, theta_loc, c)?;
    theta.ensure_shape(theta_loc.rows(), theta_loc.cols())?;
    let mut next = Matrix::zeros(theta.rows(), theta.cols());
    for i in 0..graph.n() {
        local_update(
            cfg,
            graph.neighbor_weights(i),
            graph.degree(i),
            c[i],
            theta_loc.row(i),
            graph.neighbors(i).iter().map(|&j| theta.row(j)),
            next.row_mut(i),
        );
    }
    Ok(next)
}

/// Stopping rule for [`iterate_sync`].
#[derive(Debug, Clone, Copy)]
pub struct SyncOptions {
    /// Stop once `|T(t+1) - T(t)| / max(1, |T(t)|)` falls below this.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SyncOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, max_iter: 100_000 }
    }
}

/// Iterate [`sync_step`] from `theta0`. Returns the final models and the
/// number of iterations performed.
pub fn iterate_sync(
    graph: &Graph,
    theta0: &Matrix,
    theta_loc: &Matrix,
    c: &[f64],
    cfg: &MpConfig,
    opts: SyncOptions,
) -> Result<(Matrix, usize)> {
    let mut theta = theta0.clone();
    for it in 1..=opts.max_iter {
        let next = sync_step(graph, &theta, theta_loc, c, cfg)?;
        let mut diff = next.clone();
        for r in 0..diff.rows() {
            axpy(-1.0, theta.row(r), diff.row_mut(r));
        }
        let rel = diff.norm() / theta.norm().max(1.0);
        theta = next;
        if rel < opts.rel_tol {
            return Ok((theta, it));
        }
    }
    Ok((theta, opts.max_iter))
}

/// One agent's view in the asynchronous protocol: its own model plus the
/// last models it received from each neighbor (aligned with
/// [`Graph::neighbors`]).
#[derive(Debug, Clone, PartialEq)]
pub struct MpAgentState {
    pub own: Vec<f64>,
    pub known: Matrix,
    /// Clock value of the last exchange with each neighbor.
    pub last_exchange: Vec<Option<u64>>,
}

/// Initial neighbor knowledge of the asynchronous protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnowledgeInit {
    /// Unknown neighbors count as zero until the first contact.
    #[default]
    Zero,
    /// Every agent starts out knowing its neighbors' solitary models.
    Solitary,
}

/// Asynchronous model-propagation protocol over a whole network.
#[derive(Debug, Clone)]
pub struct MpNetwork<'a> {
    graph: &'a Graph,
    theta_loc: &'a Matrix,
    confidences: &'a [f64],
    cfg: MpConfig,
    agents: Vec<MpAgentState>,
    clock: u64,
}

impl<'a> MpNetwork<'a> {
    /// Own models start at the solitary models; neighbor knowledge starts
    /// at zero until the first contact.
    pub fn new(graph: &'a Graph, theta_loc: &'a Matrix, confidences: &'a [f64], cfg: MpConfig) -> Result<Self> {
        Self::with_knowledge(graph, theta_loc, confidences, cfg, KnowledgeInit::Zero)
    }

    /// Like [`MpNetwork::new`] with a chosen initial neighbor knowledge.
    /// Own models always start at the solitary models.
    pub fn with_knowledge(
        graph: &'a Graph,
        theta_loc: &'a Matrix,
        confidences: &'a [f64],
        cfg: MpConfig,
        init: KnowledgeInit,
    ) -> Result<Self> {
        check_inputs(graph, theta_loc, confidences)?;
        let p = theta_loc.cols();
        let agents = (0..graph.n())
            .map(|i| {
                let deg = graph.neighbors(i).len();
                let mut known = Matrix::zeros(deg, p);
                if init == KnowledgeInit::Solitary {
                    for (s, &j) in graph.neighbors(i).iter().enumerate() {
                        known.set_row(s, theta_loc.row(j));
                    }
                }
                MpAgentState { own: theta_loc.row(i).to_vec(), known, last_exchange: vec![None; deg] }
            })
            .collect();
        Ok(Self { graph, theta_loc, confidences, cfg, agents, clock: 0 })
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn agent(&self, i: usize) -> &MpAgentState {
        &self.agents[i]
    }

    pub fn agents(&self) -> &[MpAgentState] {
        &self.agents
    }

    /// Replace agent `i`'s state; the shape must match its neighborhood.
    pub fn set_agent(&mut self, i: usize, state: MpAgentState) -> Result<()> {
        let p = self.theta_loc.cols();
        state.known.ensure_shape(self.graph.neighbors(i).len(), p)?;
        if state.own.len() != p || state.last_exchange.len() != self.graph.neighbors(i).len() {
            return Err(shape_err(format!("agent block for {} neighbors", self.graph.neighbors(i).len()), "mismatched block"));
        }
        self.agents[i] = state;
        Ok(())
    }

    pub fn own_models(&self) -> Matrix {
        let mut m = Matrix::zeros(self.agents.len(), self.theta_loc.cols());
        for (i, a) in self.agents.iter().enumerate() {
            m.set_row(i, &a.own);
        }
        m
    }

    fn update_own(&mut self, l: usize) {
        let graph = self.graph;
        let state = &mut self.agents[l];
        local_update(
            &self.cfg,
            graph.neighbor_weights(l),
            graph.degree(l),
            self.confidences[l],
            self.theta_loc.row(l),
            state.known.iter_rows(),
            &mut state.own,
        );
    }

    /// Agent `i` wakes up and contacts neighbor `j`: the two swap models,
    /// then both recompute their own. Returns the communications spent.
    pub fn async_step(&mut self, i: usize, j: usize) -> Result<u64> {
        let si = self.graph.slot(i, j).ok_or(Error::Protocol { agent: i, neighbor: j })?;
        let sj = self.graph.slot(j, i).expect("adjacency is symmetric");
        self.clock += 1;

        let model_i = self.agents[i].own.clone();
        let model_j = self.agents[j].own.clone();
        self.agents[i].known.set_row(si, &model_j);
        self.agents[i].last_exchange[si] = Some(self.clock);
        self.agents[j].known.set_row(sj, &model_i);
        self.agents[j].last_exchange[sj] = Some(self.clock);

        self.update_own(i);
        self.update_own(j);
        Ok(2)
    }

    /// Every agent collects all current neighbor models, then every agent
    /// updates. Equivalent to [`sync_step`] on the own models.
    pub fn sync_round(&mut self) -> u64 {
        self.clock += 1;
        let current = self.own_models();
        for i in 0..self.graph.n() {
            let state = &mut self.agents[i];
            for (s, &j) in self.graph.neighbors(i).iter().enumerate() {
                state.known.set_row(s, current.row(j));
                state.last_exchange[s] = Some(self.clock);
            }
        }
        for i in 0..self.graph.n() {
            self.update_own(i);
        }
        2 * self.graph.num_edges() as u64
    }
}
