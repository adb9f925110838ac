// SPDX-License-Identifier: Apache-2.0

//! Collaborative learning with decentralized ADMM.
//!
//! The objective
//!
//! ```text
//! Q_cl(T) = sum_{i<j} W_ij |t_i - t_j|^2 + mu sum_i D_ii L_i(t_i)
//! ```
//!
//! is split into per-agent costs over local copies of the neighborhood
//! models. Each agent `i` keeps its own model, a copy of every neighbor's
//! model, and for each incident edge `e = (i, j)` two secondary estimates
//! (`Z_ei^i`, `Z_ei^j`) and two dual vectors (`L_ei^i`, `L_ei^j`). An
//! asynchronous step on edge `e` runs the three ADMM updates (primal at both
//! ends, secondary on `e`, dual on `e`) and leaves everything else alone.

use crate::error::{shape_err, Error, Result};
use crate::graph::Graph;
use crate::linalg::{axpy, dot, from_dmatrix, lu_solve, sq_dist, Matrix};
use crate::tasks::{subgradient_descent, LocalView, LossKind, StepSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarmStart {
    /// Every variable starts at zero.
    None,
    /// Own models and copies start at the solitary models.
    Solitary,
    /// Own models and copies start at a model-propagation solution.
    ModelPropagation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    pub mu: f64,
    pub rho: f64,
    /// Sweeps of the inner solver for non-quadratic losses.
    pub subproblem_budget: usize,
    pub warm_start: WarmStart,
}

pub const DEFAULT_RHO: f64 = 1.0;
pub const DEFAULT_SUBPROBLEM_BUDGET: usize = 50;

impl AdmmConfig {
    pub fn new(mu: f64, rho: f64) -> Result<Self> {
        let cfg = Self { mu, rho, subproblem_budget: DEFAULT_SUBPROBLEM_BUDGET, warm_start: WarmStart::Solitary };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `mu = (1 - alpha) / alpha`, mirroring the model-propagation convention.
    pub fn from_alpha(alpha: f64, rho: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Self::new((1.0 - alpha) / alpha, rho)
    }

    pub fn with_warm_start(mut self, warm_start: WarmStart) -> Self {
        self.warm_start = warm_start;
        self
    }

    pub fn with_subproblem_budget(mut self, budget: usize) -> Self {
        self.subproblem_budget = budget;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::Parameter(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::Parameter(format!("rho must be positive, got {}", self.rho)));
        }
        if self.subproblem_budget == 0 {
            return Err(Error::Parameter("subproblem budget must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_view(graph: &Graph, view: &LocalView<'_>) -> Result<()> {
    if view.n != graph.n() || view.datasets.len() != graph.n() {
        return Err(shape_err(format!("{} agents", graph.n()), view.n));
    }
    Ok(())
}

pub fn objective_qcl(graph: &Graph, theta: &Matrix, view: &LocalView<'_>, mu: f64) -> Result<f64> {
    check_view(graph, view)?;
    theta.ensure_shape(graph.n(), view.p)?;
    let smooth: f64 = graph.edges().map(|(i, j, w)| w * sq_dist(theta.row(i), theta.row(j))).sum();
    let mut fit = 0.0;
    for i in 0..graph.n() {
        fit += graph.degree(i) * view.local_loss(i, theta.row(i))?;
    }
    Ok(smooth + mu * fit)
}

/// Agent `i`'s share `1/2 sum_j W_ij |t_i - t_j|^2 + mu D_ii L_i(t_i)` evaluated
/// on its own model and its copies of the neighbor models.
pub fn agent_cost(graph: &Graph, i: usize, own: &[f64], copies: &Matrix, view: &LocalView<'_>, mu: f64) -> Result<f64> {
    let smooth: f64 = graph.neighbor_weights(i).iter().zip(copies.iter_rows()).map(|(w, c)| w * sq_dist(own, c)).sum();
    Ok(0.5 * smooth + mu * graph.degree(i) * view.local_loss(i, own)?)
}

/// Variables held by one agent. Every per-edge matrix has one row per
/// neighbor slot, aligned with [`Graph::neighbors`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmAgentState {
    /// Own model.
    pub own: Vec<f64>,
    /// Copies of the neighbor models.
    pub copies: Matrix,
    /// Secondary estimate of the own model on each incident edge.
    pub z_own: Matrix,
    /// Secondary estimate of the neighbor's model on each incident edge.
    pub z_copy: Matrix,
    pub dual_own: Matrix,
    pub dual_copy: Matrix,
    /// Warm start for the inner hinge solver (one entry per example).
    pub inner: Vec<f64>,
}

impl AdmmAgentState {
    fn zeros(deg: usize, p: usize, m: usize) -> Self {
        Self {
            own: vec![0.0; p],
            copies: Matrix::zeros(deg, p),
            z_own: Matrix::zeros(deg, p),
            z_copy: Matrix::zeros(deg, p),
            dual_own: Matrix::zeros(deg, p),
            dual_copy: Matrix::zeros(deg, p),
            inner: vec![0.0; m],
        }
    }
}

/// New primal block of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalBlock {
    pub own: Vec<f64>,
    pub copies: Matrix,
    pub inner: Vec<f64>,
}

/// Local augmented Lagrangian `L_rho^i` at the primal block (`own`,
/// `copies`) with the agent's current secondary and dual variables.
pub fn local_lagrangian(
    graph: &Graph,
    i: usize,
    own: &[f64],
    copies: &Matrix,
    state: &AdmmAgentState,
    view: &LocalView<'_>,
    cfg: &AdmmConfig,
) -> Result<f64> {
    let mut value = agent_cost(graph, i, own, copies, view, cfg.mu)?;
    let mut diff = vec![0.0; own.len()];
    for s in 0..graph.neighbors(i).len() {
        for (d, (t, z)) in diff.iter_mut().zip(own.iter().zip(state.z_own.row(s))) {
            *d = t - z;
        }
        value += dot(state.dual_own.row(s), &diff) + 0.5 * cfg.rho * dot(&diff, &diff);
        for (d, (t, z)) in diff.iter_mut().zip(copies.row(s).iter().zip(state.z_copy.row(s))) {
            *d = t - z;
        }
        value += dot(state.dual_copy.row(s), &diff) + 0.5 * cfg.rho * dot(&diff, &diff);
    }
    Ok(value)
}

/// Minimize `(a/2) |t - center|^2 + c sum_k max(0, 1 - y_k x_k^T t)` by dual
/// coordinate ascent over the box `0 <= beta_k <= c`, warm-started from
/// `beta`. Returns the primal point.
fn hinge_prox(a: f64, center: &[f64], c: f64, data: &[crate::tasks::Example], beta: &mut [f64], sweeps: usize) -> Vec<f64> {
    let mut theta = center.to_vec();
    for (b, ex) in beta.iter_mut().zip(data) {
        *b = b.clamp(0.0, c);
        axpy(*b * ex.y / a, &ex.x, &mut theta);
    }
    let sq: Vec<f64> = data.iter().map(|ex| dot(&ex.x, &ex.x)).collect();
    for _ in 0..sweeps {
        let mut largest = 0.0f64;
        for (k, ex) in data.iter().enumerate() {
            if sq[k] == 0.0 {
                beta[k] = c;
                continue;
            }
            let grad = 1.0 - ex.y * dot(&ex.x, &theta);
            let next = (beta[k] + a * grad / sq[k]).clamp(0.0, c);
            let delta = next - beta[k];
            if delta != 0.0 {
                axpy(delta * ex.y / a, &ex.x, &mut theta);
                beta[k] = next;
                largest = largest.max(delta.abs());
            }
        }
        if largest <= 1e-13 * c.max(1.0) {
            break;
        }
    }
    theta
}

/// Step 1: `argmin_T L_rho^i(T, Z_i, L_i)` for agent `i`.
///
/// Each neighbor copy enters quadratically and is eliminated in closed form,
/// which leaves a proximal problem in the own model. That problem is solved
/// exactly for the quadratic loss and by warm-started dual coordinate ascent
/// for the hinge loss. The result never scores worse than the current block.
pub fn local_primal_update(graph: &Graph, i: usize, state: &AdmmAgentState, view: &LocalView<'_>, cfg: &AdmmConfig) -> Result<PrimalBlock> {
    let p = view.p;
    let rho = cfg.rho;
    let weights = graph.neighbor_weights(i);
    let deg = weights.len();

    // Copy targets b_s = Z_copy - L_copy / rho, own targets a_s = Z_own - L_own / rho.
    let mut copy_targets = Matrix::zeros(deg, p);
    let mut curvature = 0.0;
    let mut center = vec![0.0; p];
    for (s, &w) in weights.iter().enumerate() {
        let b = copy_targets.row_mut(s);
        for ((bk, z), l) in b.iter_mut().zip(state.z_copy.row(s)).zip(state.dual_copy.row(s)) {
            *bk = z - l / rho;
        }
        let omega = w * rho / (w + rho);
        curvature += omega + rho;
        for (((ck, bk), z), l) in center.iter_mut().zip(b.iter()).zip(state.z_own.row(s)).zip(state.dual_own.row(s)) {
            *ck += omega * bk + rho * (z - l / rho);
        }
    }
    center.iter_mut().for_each(|v| *v /= curvature);

    let data = &view.datasets[i];
    let fit_weight = cfg.mu * graph.degree(i);
    let mut inner = state.inner.clone();
    inner.resize(data.len(), 0.0);
    let (own, inner) = match view.loss_kind {
        LossKind::Quadratic => {
            // (A + 2 c m) t = A center + 2 c sum_k x_k
            let mut num: Vec<f64> = center.iter().map(|v| curvature * v).collect();
            for ex in data {
                axpy(2.0 * fit_weight, &ex.x, &mut num);
            }
            let denom = curvature + 2.0 * fit_weight * data.len() as f64;
            (num.into_iter().map(|v| v / denom).collect(), inner)
        }
        LossKind::Hinge => {
            let candidate = hinge_prox(curvature, &center, fit_weight, data, &mut inner, cfg.subproblem_budget);
            // With the copies eliminated exactly, L_rho^i differs from the
            // reduced objective by a constant, and the current copies are never
            // better than the eliminated ones. Comparing reduced values is
            // therefore enough to guarantee descent.
            let reduced = |t: &[f64]| {
                let dist: f64 = t.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
                let hinge: f64 = data.iter().map(|ex| (1.0 - ex.y * dot(&ex.x, t)).max(0.0)).sum();
                0.5 * curvature * dist + fit_weight * hinge
            };
            if reduced(&candidate) <= reduced(&state.own) {
                (candidate, inner)
            } else {
                (state.own.clone(), state.inner.clone())
            }
        }
    };

    let mut copies = Matrix::zeros(deg, p);
    for (s, &w) in weights.iter().enumerate() {
        let scale = 1.0 / (w + rho);
        for ((v, o), b) in copies.row_mut(s).iter_mut().zip(&own).zip(copy_targets.row(s)) {
            *v = (w * o + rho * b) * scale;
        }
    }

    if !own.iter().all(|v| v.is_finite()) || !copies.is_finite() {
        return Err(Error::Numerical { message: format!("primal update of agent {i} produced non-finite values"), residual: f64::NAN });
    }
    Ok(PrimalBlock { own, copies, inner })
}

/// Step 2 for one model on one edge:
/// `1/2 [ (dual_owner + dual_holder) / rho + model_owner + model_holder ]`.
///
/// `owner` is the agent whose model is estimated and `holder` the agent
/// keeping a copy of it. Both endpoints call this with the same operands in
/// the same order, so their estimates agree bit for bit.
pub fn secondary_update(dual_owner: &[f64], dual_holder: &[f64], model_owner: &[f64], model_holder: &[f64], rho: f64) -> Vec<f64> {
    dual_owner
        .iter()
        .zip(dual_holder)
        .zip(model_owner.iter().zip(model_holder))
        .map(|((lo, lh), (to, th))| 0.5 * ((lo + lh) / rho + to + th))
        .collect()
}

/// Step 3 on neighbor slot `s`: `L += rho (T - Z)` for the own and copy duals.
pub fn dual_update(state: &mut AdmmAgentState, s: usize, rho: f64) {
    let p = state.own.len();
    for k in 0..p {
        let own_res = state.own[k] - state.z_own.get(s, k);
        state.dual_own.row_mut(s)[k] += rho * own_res;
        let copy_res = state.copies.get(s, k) - state.z_copy.get(s, k);
        state.dual_copy.row_mut(s)[k] += rho * copy_res;
    }
}

/// Reference minimizer of `Q_cl`.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub models: Matrix,
    pub value: f64,
    /// False when the iteration budget ran out before the internal
    /// tolerance was met; `models` is then the best iterate seen.
    pub converged: bool,
    /// Linear-system residual (quadratic) or relative objective change
    /// over the last tenth of the run (subgradient).
    pub diagnostic: f64,
}

/// Centralized minimizer of `Q_cl`: an exact linear solve for the quadratic
/// loss, averaged subgradient descent on the stacked models otherwise.
pub fn centralized_oracle(graph: &Graph, view: &LocalView<'_>, mu: f64, budget: usize) -> Result<OracleSolution> {
    check_view(graph, view)?;
    let n = graph.n();
    let p = view.p;
    match view.loss_kind {
        LossKind::Quadratic => {
            // (2 W-degree + 2 mu D_ii m_i) t_i - 2 sum_j W_ij t_j = 2 mu D_ii sum_k x_ik
            let mut a = nalgebra::DMatrix::zeros(n, n);
            let mut b = nalgebra::DMatrix::zeros(n, p);
            for i in 0..n {
                let d = graph.degree(i);
                let m = view.datasets[i].len() as f64;
                a[(i, i)] = 2.0 * d + 2.0 * mu * d * m;
                for (&j, &w) in graph.neighbors(i).iter().zip(graph.neighbor_weights(i)) {
                    a[(i, j)] -= 2.0 * w;
                }
                for ex in &view.datasets[i] {
                    for k in 0..p {
                        b[(i, k)] += 2.0 * mu * d * ex.x[k];
                    }
                }
            }
            if view.datasets.iter().all(Vec::is_empty) {
                return Err(Error::InvalidInstance("every agent has an empty dataset".into()));
            }
            let (x, residual) = lu_solve(a, &b)?;
            let models = from_dmatrix(&x);
            let value = objective_qcl(graph, &models, view, mu)?;
            Ok(OracleSolution { models, value, converged: residual < 1e-8, diagnostic: residual })
        }
        LossKind::Hinge => {
            // Step scale from the smoothness term's curvature.
            let max_deg = graph.degrees().iter().copied().fold(0.0, f64::max);
            let step = StepSchedule::InvSqrt(1.0 / (4.0 * max_deg));
            let tail_start = budget - budget / 10;
            let mut tail_first = f64::NAN;
            let mut last = f64::NAN;
            let mut t = 0usize;
            let flat = subgradient_descent(n * p, budget, step, |theta, grad| {
                let value = stacked_qcl(graph, view, mu, theta, Some(grad))?;
                t += 1;
                if t == tail_start.max(1) {
                    tail_first = value;
                }
                last = value;
                Ok(value)
            })?;
            let models = Matrix::from_rows(&flat.chunks(p).map(<[f64]>::to_vec).collect::<Vec<_>>())?;
            let value = objective_qcl(graph, &models, view, mu)?;
            let diagnostic = ((tail_first - last) / last.abs().max(1e-12)).abs();
            Ok(OracleSolution { models, value, converged: diagnostic < 1e-4, diagnostic })
        }
    }
}

/// `Q_cl` on row-stacked models, optionally adding a subgradient.
fn stacked_qcl(graph: &Graph, view: &LocalView<'_>, mu: f64, theta: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
    let p = view.p;
    let row = |i: usize| &theta[i * p..(i + 1) * p];
    let mut value = 0.0;
    let mut g_local = grad;
    for (i, j, w) in graph.edges() {
        value += w * sq_dist(row(i), row(j));
        if let Some(g) = g_local.as_deref_mut() {
            for k in 0..p {
                let d = 2.0 * w * (theta[i * p + k] - theta[j * p + k]);
                g[i * p + k] += d;
                g[j * p + k] -= d;
            }
        }
    }
    for i in 0..graph.n() {
        let scale = mu * graph.degree(i);
        for ex in &view.datasets[i] {
            value += scale * view.loss_kind.evaluate(row(i), ex)?;
            if let Some(g) = g_local.as_deref_mut() {
                let mut sub = vec![0.0; p];
                view.loss_kind.add_subgradient(row(i), ex, &mut sub)?;
                axpy(scale, &sub, &mut g[i * p..(i + 1) * p]);
            }
        }
    }
    Ok(value)
}

/// Decentralized ADMM over a whole network.
#[derive(Debug, Clone)]
pub struct AdmmNetwork<'a> {
    graph: &'a Graph,
    view: LocalView<'a>,
    cfg: AdmmConfig,
    agents: Vec<AdmmAgentState>,
}

impl<'a> AdmmNetwork<'a> {
    /// Initialize according to `cfg.warm_start`. `mp_solution` is required
    /// for [`WarmStart::ModelPropagation`].
    pub fn new(graph: &'a Graph, view: LocalView<'a>, cfg: AdmmConfig, mp_solution: Option<&Matrix>) -> Result<Self> {
        cfg.validate()?;
        check_view(graph, &view)?;
        let p = view.p;
        let mut agents: Vec<AdmmAgentState> =
            (0..graph.n()).map(|i| AdmmAgentState::zeros(graph.neighbors(i).len(), p, view.datasets[i].len())).collect();
        let init = match cfg.warm_start {
            WarmStart::None => None,
            WarmStart::Solitary => Some(view.solitary_models),
            WarmStart::ModelPropagation => Some(
                mp_solution.ok_or_else(|| Error::Parameter("model-propagation warm start needs a model-propagation solution".into()))?,
            ),
        };
        if let Some(init) = init {
            init.ensure_shape(graph.n(), p)?;
            warm_start(graph, &mut agents, init);
        }
        Ok(Self { graph, view, cfg, agents })
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn config(&self) -> &AdmmConfig {
        &self.cfg
    }

    pub fn agent(&self, i: usize) -> &AdmmAgentState {
        &self.agents[i]
    }

    pub fn agents(&self) -> &[AdmmAgentState] {
        &self.agents
    }

    pub fn set_agent(&mut self, i: usize, state: AdmmAgentState) -> Result<()> {
        let deg = self.graph.neighbors(i).len();
        let p = self.view.p;
        for m in [&state.copies, &state.z_own, &state.z_copy, &state.dual_own, &state.dual_copy] {
            m.ensure_shape(deg, p)?;
        }
        if state.own.len() != p {
            return Err(shape_err(p, state.own.len()));
        }
        self.agents[i] = state;
        Ok(())
    }

    pub fn own_models(&self) -> Matrix {
        let mut m = Matrix::zeros(self.agents.len(), self.view.p);
        for (i, a) in self.agents.iter().enumerate() {
            m.set_row(i, &a.own);
        }
        m
    }

    fn apply_primal(&mut self, i: usize) -> Result<()> {
        let block = local_primal_update(self.graph, i, &self.agents[i], &self.view, &self.cfg)?;
        let state = &mut self.agents[i];
        state.own = block.own;
        state.copies = block.copies;
        state.inner = block.inner;
        Ok(())
    }

    /// Steps 2 and 3 on edge `(i, j)` after both primal blocks are fresh.
    fn edge_exchange(&mut self, i: usize, si: usize, j: usize, sj: usize) {
        let rho = self.cfg.rho;
        let (a, b) = (&self.agents[i], &self.agents[j]);
        // Estimates of model i: owner i, holder j.
        let zi_at_i = secondary_update(a.dual_own.row(si), b.dual_copy.row(sj), &a.own, b.copies.row(sj), rho);
        let zi_at_j = secondary_update(a.dual_own.row(si), b.dual_copy.row(sj), &a.own, b.copies.row(sj), rho);
        // Estimates of model j: owner j, holder i.
        let zj_at_i = secondary_update(b.dual_own.row(sj), a.dual_copy.row(si), &b.own, a.copies.row(si), rho);
        let zj_at_j = secondary_update(b.dual_own.row(sj), a.dual_copy.row(si), &b.own, a.copies.row(si), rho);

        let a = &mut self.agents[i];
        a.z_own.set_row(si, &zi_at_i);
        a.z_copy.set_row(si, &zj_at_i);
        dual_update(a, si, rho);
        let b = &mut self.agents[j];
        b.z_own.set_row(sj, &zj_at_j);
        b.z_copy.set_row(sj, &zi_at_j);
        dual_update(b, sj, rho);
    }

    /// Agent `i` wakes up and selects neighbor `j`.
    pub fn async_step(&mut self, i: usize, j: usize) -> Result<u64> {
        let si = self.graph.slot(i, j).ok_or(Error::Protocol { agent: i, neighbor: j })?;
        let sj = self.graph.reverse_slot(i, si);
        self.apply_primal(i)?;
        self.apply_primal(j)?;
        self.edge_exchange(i, si, j, sj);
        Ok(2)
    }

    /// Every agent updates its primal block, then every edge runs steps 2
    /// and 3.
    pub fn sync_round(&mut self) -> Result<u64> {
        for i in 0..self.graph.n() {
            self.apply_primal(i)?;
        }
        let graph = self.graph;
        for i in 0..graph.n() {
            for (si, &j) in graph.neighbors(i).iter().enumerate() {
                if j > i {
                    self.edge_exchange(i, si, j, graph.reverse_slot(i, si));
                }
            }
        }
        Ok(2 * graph.num_edges() as u64)
    }

    /// Largest `|T - Z|` entry over every constraint.
    pub fn primal_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in &self.agents {
            for s in 0..a.copies.rows() {
                for k in 0..a.own.len() {
                    worst = worst.max((a.own[k] - a.z_own.get(s, k)).abs());
                    worst = worst.max((a.copies.get(s, k) - a.z_copy.get(s, k)).abs());
                }
            }
        }
        worst
    }

    /// Largest disagreement between a neighbor copy and the neighbor's own
    /// model.
    pub fn copy_disagreement(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.agents.iter().enumerate() {
            for (s, &j) in self.graph.neighbors(i).iter().enumerate() {
                let own_j = &self.agents[j].own;
                for (c, o) in a.copies.row(s).iter().zip(own_j) {
                    worst = worst.max((c - o).abs());
                }
            }
        }
        worst
    }

    /// Whether both endpoints of every edge hold bit-identical secondary
    /// estimates.
    pub fn secondary_consistent(&self) -> bool {
        let graph = self.graph;
        (0..graph.n()).all(|i| {
            graph.neighbors(i).iter().enumerate().all(|(si, &j)| {
                let sj = graph.reverse_slot(i, si);
                let (a, b) = (&self.agents[i], &self.agents[j]);
                a.z_own.row(si) == b.z_copy.row(sj) && a.z_copy.row(si) == b.z_own.row(sj)
            })
        })
    }
}

/// Set own models and copies from `init`, secondaries equal to the primal
/// values, and zero duals. The result lies in the consensus set.
fn warm_start(graph: &Graph, agents: &mut [AdmmAgentState], init: &Matrix) {
    for (i, state) in agents.iter_mut().enumerate() {
        state.own = init.row(i).to_vec();
        for (s, &j) in graph.neighbors(i).iter().enumerate() {
            state.copies.set_row(s, init.row(j));
            state.z_own.set_row(s, init.row(i));
            state.z_copy.set_row(s, init.row(j));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{Example, ProblemInstance};
    use rand::Rng;

    fn instance(graph: &Graph, data: Vec<Vec<Example>>, kind: LossKind, p: usize) -> ProblemInstance {
        let n = graph.n();
        ProblemInstance {
            n,
            p,
            loss_kind: kind,
            seed: 0,
            solitary_models: Matrix::zeros(n, p),
            confidences: vec![1.0; n],
            test_sets: vec![Vec::new(); n],
            target_models: Matrix::zeros(n, p),
            auxiliary_points: Vec::new(),
            label_flips: 0,
            datasets: data,
        }
    }

    fn pair_instance() -> (Graph, ProblemInstance) {
        let g = Graph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let inst = instance(&g, vec![vec![Example::sample(vec![0.0])], vec![Example::sample(vec![1.0])]], LossKind::Quadratic, 1);
        (g, inst)
    }

    #[test]
    fn empty_datasets_reduce_to_smoothness() {
        let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        let inst = instance(&g, vec![Vec::new(); 3], LossKind::Hinge, 2);
        let constant = Matrix::from_rows(&vec![vec![0.4, -1.0]; 3]).unwrap();
        assert_eq!(objective_qcl(&g, &constant, &inst.local_view(), 1.0).unwrap(), 0.0);
        let other = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(objective_qcl(&g, &other, &inst.local_view(), 1.0).unwrap(), 1.0);
    }

    #[test]
    fn objective_two_agents_by_hand() {
        let (g, inst) = pair_instance();
        let theta = Matrix::from_column(&[0.0, 1.0]);
        assert_eq!(objective_qcl(&g, &theta, &inst.local_view(), 1.0).unwrap(), 1.0);
    }

    #[test]
    fn agent_costs_sum_to_objective() {
        let g = Graph::from_edges(4, [(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (3, 0, 0.3)]).unwrap();
        let data = vec![
            vec![Example::labeled(vec![1.0, 0.2], 1.0)],
            vec![Example::labeled(vec![-0.3, 0.9], -1.0), Example::labeled(vec![0.1, 0.1], 1.0)],
            vec![],
            vec![Example::labeled(vec![0.5, -0.5], -1.0)],
        ];
        let inst = instance(&g, data, LossKind::Hinge, 2);
        let view = inst.local_view();
        let theta = Matrix::from_rows(&[vec![0.3, 1.0], vec![-2.0, 0.5], vec![0.0, 0.1], vec![1.1, 1.1]]).unwrap();
        let total: f64 = (0..4)
            .map(|i| {
                let copies = Matrix::from_rows(&g.neighbors(i).iter().map(|&j| theta.row(j).to_vec()).collect::<Vec<_>>()).unwrap();
                agent_cost(&g, i, theta.row(i), &copies, &view, 0.7).unwrap()
            })
            .sum();
        let q = objective_qcl(&g, &theta, &view, 0.7).unwrap();
        assert!((total - q).abs() < 1e-12);
    }

    #[test]
    fn oracle_two_agents_solves_stationarity() {
        // (2 + 2 mu) t1 - 2 t2 = 0, -2 t1 + (2 + 2 mu) t2 = 2 mu with mu = 1.
        let (g, inst) = pair_instance();
        let sol = centralized_oracle(&g, &inst.local_view(), 1.0, 0).unwrap();
        let (t1, t2) = (sol.models.get(0, 0), sol.models.get(1, 0));
        assert!((4.0 * t1 - 2.0 * t2).abs() < 1e-10);
        assert!((-2.0 * t1 + 4.0 * t2 - 2.0).abs() < 1e-10);
        assert!(sol.converged && sol.diagnostic < 1e-10);
    }

    #[test]
    fn oracle_with_identical_data_is_constant() {
        let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let data = vec![vec![Example::sample(vec![1.0, 2.0]), Example::sample(vec![3.0, 0.0])]; 3];
        let inst = instance(&g, data, LossKind::Quadratic, 2);
        let sol = centralized_oracle(&g, &inst.local_view(), 0.5, 0).unwrap();
        for i in 0..3 {
            assert!((sol.models.get(i, 0) - 2.0).abs() < 1e-12);
            assert!((sol.models.get(i, 1) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hinge_oracle_improves_on_zero() {
        let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let data = vec![
            vec![Example::labeled(vec![1.0, 0.0], 1.0)],
            vec![Example::labeled(vec![0.0, 1.0], 1.0)],
            vec![Example::labeled(vec![-1.0, 0.0], -1.0)],
        ];
        let inst = instance(&g, data, LossKind::Hinge, 2);
        let view = inst.local_view();
        let sol = centralized_oracle(&g, &view, 1.0, 20_000).unwrap();
        let zero = objective_qcl(&g, &Matrix::zeros(3, 2), &view, 1.0).unwrap();
        assert!(sol.value < zero);
        assert!(sol.value <= objective_qcl(&g, &sol.models, &view, 1.0).unwrap() + 1e-12);
    }

    #[test]
    fn large_rho_pins_primal_to_secondaries() {
        let (g, inst) = pair_instance();
        let cfg = AdmmConfig::new(1.0, 1e6).unwrap().with_warm_start(WarmStart::None);
        let mut net = AdmmNetwork::new(&g, inst.local_view(), cfg, None).unwrap();
        let mut st = net.agent(0).clone();
        st.z_own.set_row(0, &[2.5]);
        st.z_copy.set_row(0, &[-1.5]);
        net.set_agent(0, st).unwrap();
        let block = local_primal_update(&g, 0, net.agent(0), &inst.local_view(), &cfg).unwrap();
        assert!((block.own[0] - 2.5).abs() < 1e-3);
        assert!((block.copies.get(0, 0) + 1.5).abs() < 1e-3);
    }

    #[test]
    fn quadratic_primal_update_matches_grid_search() {
        let (g, inst) = pair_instance();
        let view = inst.local_view();
        let cfg = AdmmConfig::new(1.0, 1.0).unwrap().with_warm_start(WarmStart::None);
        let mut net = AdmmNetwork::new(&g, view, cfg, None).unwrap();
        let mut st = net.agent(0).clone();
        st.z_own.set_row(0, &[0.4]);
        st.z_copy.set_row(0, &[0.9]);
        st.dual_own.set_row(0, &[0.2]);
        st.dual_copy.set_row(0, &[-0.3]);
        net.set_agent(0, st.clone()).unwrap();
        let block = local_primal_update(&g, 0, &st, &view, &cfg).unwrap();

        let eval = |a: f64, b: f64| local_lagrangian(&g, 0, &[a], &Matrix::from_column(&[b]), &st, &view, &cfg).unwrap();
        let (mut best, mut arg) = (f64::INFINITY, (0.0, 0.0));
        for ia in -3000..=3000 {
            let a = ia as f64 * 1e-3;
            // The copy minimizer is separable given the own model; scan it too.
            for ib in -3000..=3000 {
                let b = ib as f64 * 1e-3;
                if (b - a).abs() > 1.0 {
                    continue;
                }
                let v = eval(a, b);
                if v < best {
                    best = v;
                    arg = (a, b);
                }
            }
        }
        assert!((block.own[0] - arg.0).abs() <= 1e-3, "{} vs {}", block.own[0], arg.0);
        assert!((block.copies.get(0, 0) - arg.1).abs() <= 1e-3);
        assert!(eval(block.own[0], block.copies.get(0, 0)) <= best + 1e-12);
    }

    #[test]
    fn quadratic_primal_update_matches_dense_solve() {
        // Direct (|N_i| + 1) x (|N_i| + 1) stationarity system for agent 1.
        let g = Graph::from_edges(3, [(0, 1, 0.5), (1, 2, 2.0)]).unwrap();
        let data = vec![vec![], vec![Example::sample(vec![1.0]), Example::sample(vec![2.0])], vec![Example::sample(vec![-1.0])]];
        let inst = instance(&g, data, LossKind::Quadratic, 1);
        let view = inst.local_view();
        let cfg = AdmmConfig::new(0.8, 1.3).unwrap().with_warm_start(WarmStart::None);
        let mut st = AdmmAgentState::zeros(2, 1, 2);
        st.z_own = Matrix::from_column(&[0.1, -0.4]);
        st.z_copy = Matrix::from_column(&[0.7, 1.2]);
        st.dual_own = Matrix::from_column(&[0.05, 0.3]);
        st.dual_copy = Matrix::from_column(&[-0.2, 0.1]);
        let block = local_primal_update(&g, 1, &st, &view, &cfg).unwrap();

        let (rho, mu, d) = (1.3, 0.8, g.degree(1));
        let w = [0.5, 2.0];
        let mut a = nalgebra::DMatrix::zeros(3, 3);
        let mut b = nalgebra::DVector::zeros(3);
        a[(0, 0)] = w.iter().sum::<f64>() + 2.0 * mu * d * 2.0 + 2.0 * rho;
        b[0] = 2.0 * mu * d * 3.0;
        for s in 0..2 {
            a[(0, s + 1)] = -w[s];
            a[(s + 1, 0)] = -w[s];
            a[(s + 1, s + 1)] = w[s] + rho;
            b[0] += rho * st.z_own.get(s, 0) - st.dual_own.get(s, 0);
            b[s + 1] = rho * st.z_copy.get(s, 0) - st.dual_copy.get(s, 0);
        }
        let x = a.lu().solve(&b).unwrap();
        assert!((block.own[0] - x[0]).abs() < 1e-12);
        assert!((block.copies.get(0, 0) - x[1]).abs() < 1e-12);
        assert!((block.copies.get(1, 0) - x[2]).abs() < 1e-12);
    }

    #[test]
    fn hinge_primal_update_never_increases_lagrangian() {
        let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 0.4), (0, 2, 0.6)]).unwrap();
        let mut rng = crate::rng::stream_rng(17, crate::rng::Stream::Solver);
        let mut random_vec = |p: usize, s: f64| (0..p).map(|_| rng.random_range(-s..s)).collect::<Vec<f64>>();
        let data: Vec<Vec<Example>> = (0..3)
            .map(|i| (0..(2 + i)).map(|k| Example::labeled(random_vec(3, 1.0), if k % 2 == 0 { 1.0 } else { -1.0 })).collect())
            .collect();
        let inst = instance(&g, data, LossKind::Hinge, 3);
        let view = inst.local_view();
        let cfg = AdmmConfig::new(0.5, 1.0).unwrap();
        for trial in 0..100 {
            let i = trial % 3;
            let deg = g.neighbors(i).len();
            let rows = |f: &mut dyn FnMut() -> Vec<f64>| Matrix::from_rows(&(0..deg).map(|_| f()).collect::<Vec<_>>()).unwrap();
            let mut gen = || random_vec(3, 2.0);
            let st = AdmmAgentState {
                own: gen(),
                copies: rows(&mut gen),
                z_own: rows(&mut gen),
                z_copy: rows(&mut gen),
                dual_own: rows(&mut gen),
                dual_copy: rows(&mut gen),
                inner: vec![0.0; view.datasets[i].len()],
            };
            let before = local_lagrangian(&g, i, &st.own, &st.copies, &st, &view, &cfg).unwrap();
            let block = local_primal_update(&g, i, &st, &view, &cfg).unwrap();
            let after = local_lagrangian(&g, i, &block.own, &block.copies, &st, &view, &cfg).unwrap();
            assert!(after <= before, "trial {trial}: {after} > {before}");
        }
    }

    #[test]
    fn hinge_prox_matches_subgradient_reference() {
        let data =
            vec![Example::labeled(vec![1.0, 0.3], 1.0), Example::labeled(vec![-0.2, 0.8], -1.0), Example::labeled(vec![0.4, -0.9], 1.0)];
        let (a, c) = (1.7, 0.9);
        let center = [0.2, -0.1];
        let mut beta = vec![0.0; 3];
        let theta = hinge_prox(a, &center, c, &data, &mut beta, 1000);
        let f = |t: &[f64]| 0.5 * a * sq_dist(t, &center) + c * LossKind::Hinge.local_loss(t, &data).unwrap();
        let mut best = f64::INFINITY;
        for x in -200..=200 {
            for y in -200..=200 {
                best = best.min(f(&[x as f64 * 0.005, y as f64 * 0.005]));
            }
        }
        assert!(f(&theta) <= best + 1e-9);
    }

    #[test]
    fn secondary_update_examples() {
        assert_eq!(secondary_update(&[0.0], &[0.0], &[1.5], &[1.5], 1.0), vec![1.5]);
        assert_eq!(secondary_update(&[0.0], &[0.0], &[0.0], &[2.0], 1.0), vec![1.0]);
    }

    #[test]
    fn dual_update_examples() {
        let mut st = AdmmAgentState::zeros(1, 1, 0);
        st.own = vec![0.5];
        dual_update(&mut st, 0, 1.0);
        assert_eq!(st.dual_own.get(0, 0), 0.5);
        assert_eq!(st.dual_copy.get(0, 0), 0.0);
        dual_update(&mut st, 0, 1.0);
        assert_eq!(st.dual_own.get(0, 0), 1.0);
    }

    #[test]
    fn warm_starts_land_in_consensus_set() {
        let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let mut inst = instance(&g, vec![vec![Example::sample(vec![1.0])]; 3], LossKind::Quadratic, 1);
        inst.solitary_models = Matrix::from_column(&[1.0, 2.0, 3.0]);
        let view = inst.local_view();
        for ws in [WarmStart::None, WarmStart::Solitary, WarmStart::ModelPropagation] {
            let mp = Matrix::from_column(&[0.5, 0.6, 0.7]);
            let cfg = AdmmConfig::new(1.0, 1.0).unwrap().with_warm_start(ws);
            let net = AdmmNetwork::new(&g, view, cfg, Some(&mp)).unwrap();
            assert!(net.secondary_consistent());
            if ws == WarmStart::Solitary {
                assert_eq!(net.agent(1).z_own.row(0), &[2.0]);
                assert_eq!(net.agent(0).z_copy.row(0), &[2.0]);
            }
        }
        let cfg = AdmmConfig::new(1.0, 1.0).unwrap().with_warm_start(WarmStart::ModelPropagation);
        assert!(AdmmNetwork::new(&g, view, cfg, None).is_err());
    }

    #[test]
    fn async_step_rejects_non_neighbor() {
        let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let inst = instance(&g, vec![vec![Example::sample(vec![1.0])]; 3], LossKind::Quadratic, 1);
        let mut net = AdmmNetwork::new(&g, inst.local_view(), AdmmConfig::new(1.0, 1.0).unwrap(), None).unwrap();
        assert!(matches!(net.async_step(0, 2), Err(Error::Protocol { .. })));
    }

    #[test]
    fn two_agent_sync_round_equals_async_step() {
        let (g, inst) = pair_instance();
        let cfg = AdmmConfig::new(1.0, 0.7).unwrap().with_warm_start(WarmStart::None);
        let mut a = AdmmNetwork::new(&g, inst.local_view(), cfg, None).unwrap();
        let mut b = a.clone();
        for _ in 0..5 {
            assert_eq!(a.async_step(0, 1).unwrap(), 2);
            assert_eq!(b.sync_round().unwrap(), 2);
            assert_eq!(a.agents(), b.agents());
        }
    }

    #[test]
    fn two_agent_async_converges_to_oracle() {
        let (g, inst) = pair_instance();
        let view = inst.local_view();
        let oracle = centralized_oracle(&g, &view, 1.0, 0).unwrap();
        let cfg = AdmmConfig::new(1.0, 1.0).unwrap().with_warm_start(WarmStart::None);
        let mut net = AdmmNetwork::new(&g, view, cfg, None).unwrap();
        for t in 0..2000 {
            let (i, j) = if t % 3 == 0 { (1, 0) } else { (0, 1) };
            net.async_step(i, j).unwrap();
        }
        assert!(net.own_models().max_abs_diff(&oracle.models) < 1e-6);
    }

    #[test]
    fn optimum_with_matching_duals_is_a_fixed_point() {
        let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 0.5), (0, 2, 2.0)]).unwrap();
        let data = vec![
            vec![Example::sample(vec![1.0, 0.0])],
            vec![Example::sample(vec![0.0, 2.0]), Example::sample(vec![-1.0, 1.0])],
            vec![Example::sample(vec![3.0, -1.0])],
        ];
        let inst = instance(&g, data, LossKind::Quadratic, 2);
        let view = inst.local_view();
        let star = centralized_oracle(&g, &view, 0.6, 0).unwrap().models;
        let cfg = AdmmConfig::new(0.6, 1.0).unwrap().with_warm_start(WarmStart::ModelPropagation);
        let mut net = AdmmNetwork::new(&g, view, cfg, Some(&star)).unwrap();
        for i in 0..3 {
            let mut st = net.agent(i).clone();
            for (s, (&j, &w)) in g.neighbors(i).iter().zip(g.neighbor_weights(i)).enumerate() {
                let dual: Vec<f64> = (0..2).map(|k| w * (star.get(i, k) - star.get(j, k))).collect();
                st.dual_own.set_row(s, &dual);
                st.dual_copy.set_row(s, &dual);
            }
            net.set_agent(i, st).unwrap();
        }
        let before: Vec<AdmmAgentState> = net.agents().to_vec();
        net.async_step(0, 2).unwrap();
        net.sync_round().unwrap();
        for (a, b) in before.iter().zip(net.agents()) {
            assert!(
                Matrix::from_rows(std::slice::from_ref(&a.own))
                    .unwrap()
                    .max_abs_diff(&Matrix::from_rows(std::slice::from_ref(&b.own)).unwrap())
                    < 1e-9
            );
            assert!(a.copies.max_abs_diff(&b.copies) < 1e-9);
            assert!(a.z_own.max_abs_diff(&b.z_own) < 1e-9);
            assert!(a.dual_own.max_abs_diff(&b.dual_own) < 1e-9);
            assert!(a.dual_copy.max_abs_diff(&b.dual_copy) < 1e-9);
        }
    }

    #[test]
    fn async_step_is_local_and_keeps_consensus() {
        let g = Graph::from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 0.5)]).unwrap();
        let data = vec![vec![Example::sample(vec![1.0])], vec![], vec![Example::sample(vec![-2.0])], vec![Example::sample(vec![0.5])]];
        let inst = instance(&g, data, LossKind::Quadratic, 1);
        let mut net = AdmmNetwork::new(&g, inst.local_view(), AdmmConfig::new(1.0, 1.0).unwrap(), None).unwrap();
        net.async_step(2, 3).unwrap();
        let snapshot = net.agents().to_vec();
        net.async_step(0, 1).unwrap();
        assert_eq!(net.agent(2), &snapshot[2]);
        assert_eq!(net.agent(3), &snapshot[3]);
        // Edge (0, 3) variables at agent 0 are untouched by the (0, 1) step.
        let s03 = g.slot(0, 3).unwrap();
        assert_eq!(net.agent(0).z_own.row(s03), snapshot[0].z_own.row(s03));
        assert_eq!(net.agent(0).dual_copy.row(s03), snapshot[0].dual_copy.row(s03));
        assert!(net.secondary_consistent());
    }

    #[test]
    fn config_validation() {
        assert!(AdmmConfig::new(0.0, 1.0).is_err());
        assert!(AdmmConfig::new(1.0, -1.0).is_err());
        assert!(AdmmConfig::new(1.0, 1.0).unwrap().with_subproblem_budget(0).validate().is_err());
        let cfg = AdmmConfig::from_alpha(0.5, 1.0).unwrap();
        assert!((cfg.mu - 1.0).abs() < 1e-15);
    }
}
