// SPDX-License-Identifier: Apache-2.0

use serde_json::json;

use super::config::{ExperimentConfig, ExperimentId, TaskFamily};
use super::metrics::{consensus_baseline, metric_distance, metric_l2_error, metric_test_accuracy};
use super::output::{ExperimentOutput, ResultRow};
use super::parallel_map;
use crate::admm::{AdmmConfig, AdmmNetwork, WarmStart};
use crate::error::{Error, Result};
use crate::graph::{
    build_angle_kernel_graph, build_gaussian_kernel_graph, build_knn_graph, uniform_neighbor_distribution, Graph, DEFAULT_PRUNE_THRESHOLD,
};
use crate::linalg::Matrix;
use crate::mp::{label_propagation, solve_closed_form, MpConfig, MpNetwork, DEFAULT_ALPHA};
use crate::rng::derive_seed;
use crate::simulator::{run_async, run_sync, ActivationSchedule, GossipProtocol, Measurements, RunRecord};
use crate::tasks::{
    confidence_from_sizes, generate_linear_classification_instance, generate_two_moons_instance, Example, ProblemInstance, CONFIDENCE_FLOOR,
};

/// Kernel width of both similarity graphs.
const KERNEL_SIGMA: f64 = 0.1;
/// Subgradient iterations for the hinge consensus baseline.
const CONSENSUS_BUDGET: usize = 2_000;
/// Fraction of the reference accuracy a scalability run must reach.
const SCALABILITY_TARGET: f64 = 0.9;

fn instance_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, index)
}

fn heldout_seed(master: u64, index: u64) -> u64 {
    derive_seed(derive_seed(master, u64::MAX), index)
}

fn run_seed(instance: u64, run: u64) -> u64 {
    derive_seed(derive_seed(instance, u64::MAX - 1), run)
}

struct Rows<'a> {
    experiment: ExperimentId,
    n: usize,
    p: usize,
    epsilon: Option<f64>,
    out: &'a mut Vec<ResultRow>,
}

impl Rows<'_> {
    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, seed: u64, method: &str, agent: Option<usize>, x_name: &str, x: f64, metric: &str, value: f64) {
        self.out.push(ResultRow {
            experiment: self.experiment.to_string(),
            seed,
            n: self.n,
            p: self.p,
            epsilon: self.epsilon,
            method: method.to_string(),
            agent_id: agent.map_or_else(|| "mean".to_string(), |i| i.to_string()),
            x_axis_name: x_name.to_string(),
            x_value: x,
            metric: metric.to_string(),
            value,
        });
    }
}

fn rows_for<'a>(cfg: &ExperimentConfig, n: usize, p: usize, epsilon: Option<f64>, out: &'a mut Vec<ResultRow>) -> Rows<'a> {
    Rows { experiment: cfg.experiment, n, p, epsilon, out }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GraphKind {
    AngleKernel,
    Knn(usize),
}

struct ClassificationCase {
    instance: ProblemInstance,
    graph: Graph,
}

impl ClassificationCase {
    fn new(n: usize, p: usize, seed: u64, kind: GraphKind) -> Result<Self> {
        let instance = generate_linear_classification_instance(n, p, seed)?;
        let graph = match kind {
            GraphKind::AngleKernel => build_angle_kernel_graph(&instance.target_models, KERNEL_SIGMA, DEFAULT_PRUNE_THRESHOLD)?,
            GraphKind::Knn(k) => build_knn_graph(&instance.target_models, k)?,
        };
        Ok(Self { instance, graph })
    }

    fn accuracy(&self, models: &Matrix) -> Result<f64> {
        Ok(metric_test_accuracy(models, &self.instance.test_sets)?.mean)
    }

    fn mp_solution(&self, alpha: f64) -> Result<Matrix> {
        let inst = &self.instance;
        solve_closed_form(&self.graph, &inst.solitary_models, &inst.confidences, &MpConfig::new(alpha)?)
    }

    fn admm_config(&self, alpha: f64, rho: f64, warm: WarmStart) -> Result<AdmmConfig> {
        Ok(AdmmConfig::from_alpha(alpha, rho)?.with_warm_start(warm))
    }

    /// Synchronous ADMM warm-started at `init`.
    fn cl_solution(&self, alpha: f64, rho: f64, rounds: u64, init: &Matrix) -> Result<Matrix> {
        let cfg = self.admm_config(alpha, rho, WarmStart::ModelPropagation)?;
        let mut net = AdmmNetwork::new(&self.graph, self.instance.local_view(), cfg, Some(init))?;
        for _ in 0..rounds {
            net.sync_round()?;
        }
        Ok(net.own_models())
    }
}

fn accuracy_metric<P: GossipProtocol>(tests: &[Vec<Example>]) -> impl FnMut(&P) -> Result<Measurements> + '_ {
    move |p: &P| Ok(vec![("test_accuracy", metric_test_accuracy(&p.models(), tests)?.mean)])
}

fn mp_error_metrics<'c>(targets: &'c Matrix, star: &'c Matrix) -> impl FnMut(&MpNetwork<'_>) -> Result<Measurements> + 'c {
    move |net| {
        let m = net.own_models();
        Ok(vec![("l2_error", metric_l2_error(&m, targets)?), ("distance_to_optimum", metric_distance(&m, star)?)])
    }
}

/// Average `metric` across records sampled at the same positions.
fn average_series(records: &[RunRecord], metric: &str) -> Result<Vec<(u64, f64)>> {
    let first = records.first().ok_or_else(|| Error::Parameter("no runs to average".into()))?.series(metric);
    let mut sums: Vec<f64> = first.iter().map(|&(_, v)| v).collect();
    for rec in &records[1..] {
        let s = rec.series(metric);
        if s.len() != sums.len() {
            return Err(crate::error::shape_err(sums.len(), s.len()));
        }
        for (acc, (_, v)) in sums.iter_mut().zip(s) {
            *acc += v;
        }
    }
    let k = records.len() as f64;
    Ok(first.iter().zip(sums).map(|(&(c, _), s)| (c, s / k)).collect())
}

/// Best `alpha` per algorithm on held-out instances.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedAlpha {
    pub mp: f64,
    /// `None` for the mean-estimation task.
    pub cl: Option<f64>,
    pub rows: Vec<ResultRow>,
}

fn argbest(grid: &[f64], scores: &[f64], larger_is_better: bool) -> f64 {
    let mut best = 0;
    for k in 1..grid.len() {
        let better = if larger_is_better { scores[k] > scores[best] } else { scores[k] < scores[best] };
        if better {
            best = k;
        }
    }
    grid[best]
}

/// Grid-search `alpha` for each algorithm on `cfg.tune_instances` held-out
/// instances of size (`n`, `p`).
pub fn tune_alpha(cfg: &ExperimentConfig, n: usize, p: usize, threads: usize) -> Result<TunedAlpha> {
    tune_alpha_on(cfg, n, p, GraphKind::AngleKernel, threads)
}

fn tune_alpha_on(cfg: &ExperimentConfig, n: usize, p: usize, kind: GraphKind, threads: usize) -> Result<TunedAlpha> {
    let grid = &cfg.alpha_grid;
    let jobs: Vec<(usize, u64)> = (0..grid.len()).flat_map(|a| (0..cfg.tune_instances as u64).map(move |h| (a, h))).collect();
    let mut rows = Vec::new();
    match cfg.task {
        TaskFamily::Mean => {
            let eps = cfg.epsilon[0];
            let errors = parallel_map(threads, &jobs, |&(a, h)| {
                let inst = generate_two_moons_instance(n, eps, heldout_seed(cfg.seed, h))?;
                let graph = build_gaussian_kernel_graph(&inst.auxiliary_points, KERNEL_SIGMA)?;
                let c = confidence_from_sizes(&inst.sizes(), CONFIDENCE_FLOOR)?;
                let star = solve_closed_form(&graph, &inst.solitary_models, &c, &MpConfig::new(grid[a])?)?;
                metric_l2_error(&star, &inst.target_models)
            })?;
            let mut out = rows_for(cfg, n, 1, Some(eps), &mut rows);
            let mut means = vec![0.0; grid.len()];
            for (&(a, h), e) in jobs.iter().zip(&errors) {
                out.push(heldout_seed(cfg.seed, h), "mp", None, "alpha", grid[a], "l2_error", *e);
                means[a] += e / cfg.tune_instances as f64;
            }
            let mp = argbest(grid, &means, false);
            out.push(cfg.seed, "mp", None, "alpha", mp, "selected_alpha", mp);
            Ok(TunedAlpha { mp, cl: None, rows })
        }
        TaskFamily::Classification => {
            let scores = parallel_map(threads, &jobs, |&(a, h)| {
                let case = ClassificationCase::new(n, p, heldout_seed(cfg.seed, h), kind)?;
                let mp = case.mp_solution(grid[a])?;
                let cl = case.cl_solution(grid[a], cfg.rho, cfg.rounds, &mp)?;
                Ok((case.accuracy(&mp)?, case.accuracy(&cl)?))
            })?;
            let mut out = rows_for(cfg, n, p, None, &mut rows);
            let (mut mp_means, mut cl_means) = (vec![0.0; grid.len()], vec![0.0; grid.len()]);
            for (&(a, h), (mp, cl)) in jobs.iter().zip(&scores) {
                let seed = heldout_seed(cfg.seed, h);
                out.push(seed, "mp", None, "alpha", grid[a], "test_accuracy", *mp);
                out.push(seed, "cl", None, "alpha", grid[a], "test_accuracy", *cl);
                mp_means[a] += mp / cfg.tune_instances as f64;
                cl_means[a] += cl / cfg.tune_instances as f64;
            }
            let mp = argbest(grid, &mp_means, true);
            let cl = argbest(grid, &cl_means, true);
            out.push(cfg.seed, "mp", None, "alpha", mp, "selected_alpha", mp);
            out.push(cfg.seed, "cl", None, "alpha", cl, "selected_alpha", cl);
            Ok(TunedAlpha { mp, cl: Some(cl), rows })
        }
    }
}

/// `(mp_alpha, cl_alpha)`, tuning whichever is unset.
fn resolve_alphas(cfg: &ExperimentConfig, n: usize, p: usize, kind: GraphKind, threads: usize) -> Result<(f64, f64)> {
    if let (Some(a), Some(b)) = (cfg.alpha, cfg.cl_alpha) {
        return Ok((a, b));
    }
    let mut tune_cfg = cfg.clone();
    tune_cfg.task = TaskFamily::Classification;
    let tuned = tune_alpha_on(&tune_cfg, n, p, kind, threads)?;
    Ok((cfg.alpha.unwrap_or(tuned.mp), cfg.cl_alpha.unwrap_or(tuned.cl.unwrap_or(DEFAULT_ALPHA))))
}

fn win(a: f64, b: f64) -> f64 {
    if a < b {
        1.0
    } else if a == b {
        0.5
    } else {
        0.0
    }
}

/// Mean estimation on two moons over a grid of confidence widths. Each
/// instance is solved in closed form with the size-derived confidences and
/// with uniform confidence.
pub fn experiment_confidence_sweep(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let alpha = MpConfig::new(cfg.alpha.unwrap_or(DEFAULT_ALPHA))?;
    let jobs: Vec<(usize, u64)> = (0..cfg.epsilon.len()).flat_map(|e| (0..cfg.instances as u64).map(move |i| (e, i))).collect();
    let results = parallel_map(threads, &jobs, |&(e, i)| {
        // The same seeds at every width pair the instances across the grid.
        let seed = instance_seed(cfg.seed, i);
        let inst = generate_two_moons_instance(cfg.n, cfg.epsilon[e], seed)?;
        let graph = build_gaussian_kernel_graph(&inst.auxiliary_points, KERNEL_SIGMA)?;
        let c = confidence_from_sizes(&inst.sizes(), CONFIDENCE_FLOOR)?;
        let weighted = solve_closed_form(&graph, &inst.solitary_models, &c, &alpha)?;
        let uniform = label_propagation(&graph, &inst.solitary_models, &alpha)?;
        Ok((
            seed,
            metric_l2_error(&inst.solitary_models, &inst.target_models)?,
            metric_l2_error(&weighted, &inst.target_models)?,
            metric_l2_error(&uniform, &inst.target_models)?,
        ))
    })?;
    let mut rows = Vec::new();
    for (&(e, _), &(seed, solitary, weighted, uniform)) in jobs.iter().zip(&results) {
        let eps = cfg.epsilon[e];
        let mut out = rows_for(cfg, cfg.n, 1, Some(eps), &mut rows);
        out.push(seed, "solitary", None, "epsilon", eps, "l2_error", solitary);
        out.push(seed, "mp_confidence", None, "epsilon", eps, "l2_error", weighted);
        out.push(seed, "mp_uniform", None, "epsilon", eps, "l2_error", uniform);
        out.push(seed, "mp_confidence", None, "epsilon", eps, "win", win(weighted, uniform));
    }
    Ok(ExperimentOutput { config: cfg.clone(), rows })
}

/// Asynchronous against synchronous model propagation on two moons, as
/// error curves over pairwise communications.
pub fn experiment_mp_async_vs_sync(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mp_cfg = MpConfig::new(cfg.alpha.unwrap_or(DEFAULT_ALPHA))?;
    let eps = cfg.epsilon[0];
    let sample_every = cfg.sampling_interval(cfg.n);

    struct Case {
        seed: u64,
        inst: ProblemInstance,
        graph: Graph,
        c: Vec<f64>,
        star: Matrix,
    }
    let seeds: Vec<u64> = (0..cfg.instances as u64).map(|i| instance_seed(cfg.seed, i)).collect();
    let cases = parallel_map(threads, &seeds, |&seed| {
        let inst = generate_two_moons_instance(cfg.n, eps, seed)?;
        let graph = build_gaussian_kernel_graph(&inst.auxiliary_points, KERNEL_SIGMA)?;
        let c = confidence_from_sizes(&inst.sizes(), CONFIDENCE_FLOOR)?;
        let star = solve_closed_form(&graph, &inst.solitary_models, &c, &mp_cfg)?;
        Ok(Case { seed, inst, graph, c, star })
    })?;

    let snapshot = json!({ "alpha": mp_cfg.alpha(), "epsilon": eps });

    let jobs: Vec<(usize, u64)> = (0..cases.len()).flat_map(|c| (0..cfg.runs as u64).map(move |r| (c, r))).collect();
    let async_records = parallel_map(threads, &jobs, |&(c, r)| {
        let case = &cases[c];
        let dist = uniform_neighbor_distribution(&case.graph);
        let mut net = MpNetwork::with_knowledge(&case.graph, &case.inst.solitary_models, &case.c, mp_cfg, cfg.knowledge)?;
        let schedule = ActivationSchedule::new(cfg.budget, run_seed(case.seed, r));
        run_async(&mut net, &dist, &schedule, sample_every, snapshot.clone(), mp_error_metrics(&case.inst.target_models, &case.star))
    })?;
    let sync_records = parallel_map(threads, &cases, |case| {
        let rounds = (cfg.budget / case.graph.num_edges() as u64).max(1);
        let mut net = MpNetwork::new(&case.graph, &case.inst.solitary_models, &case.c, mp_cfg)?;
        run_sync(&mut net, rounds, 1, snapshot.clone(), mp_error_metrics(&case.inst.target_models, &case.star))
    })?;

    let mut rows = Vec::new();
    let mut out = rows_for(cfg, cfg.n, 1, Some(eps), &mut rows);
    for (c, case) in cases.iter().enumerate() {
        out.push(case.seed, "closed_form", None, "communications", 0.0, "l2_error", metric_l2_error(&case.star, &case.inst.target_models)?);
        let runs: Vec<RunRecord> = jobs.iter().zip(&async_records).filter(|((k, _), _)| *k == c).map(|(_, r)| r.clone()).collect();
        for metric in ["l2_error", "distance_to_optimum"] {
            for (comms, value) in average_series(&runs, metric)? {
                out.push(case.seed, "mp_async", None, "communications", comms as f64, metric, value);
            }
            for (comms, value) in sync_records[c].series(metric) {
                out.push(case.seed, "mp_sync", None, "communications", comms as f64, metric, value);
            }
        }
    }
    Ok(ExperimentOutput { config: cfg.clone(), rows })
}

/// Test accuracy of solitary, consensus, model-propagation and
/// collaborative models over a grid of feature dimensions.
pub fn experiment_cl_vs_mp(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &p in &cfg.p_grid {
        let (mp_alpha, cl_alpha) = resolve_alphas(cfg, cfg.n, p, GraphKind::AngleKernel, threads)?;
        let seeds: Vec<u64> = (0..cfg.instances as u64).map(|i| instance_seed(cfg.seed, i)).collect();
        let results = parallel_map(threads, &seeds, |&seed| {
            let case = ClassificationCase::new(cfg.n, p, seed, GraphKind::AngleKernel)?;
            let inst = &case.instance;
            let mp = case.mp_solution(mp_alpha)?;
            let cl = case.cl_solution(cl_alpha, cfg.rho, cfg.rounds, &mp)?;
            let cons = consensus_baseline(inst, CONSENSUS_BUDGET)?;
            let cons = Matrix::from_rows(&vec![cons; cfg.n])?;
            let mut per_method = Vec::new();
            for (name, models) in [("solitary", &inst.solitary_models), ("consensus", &cons), ("mp", &mp), ("cl", &cl)] {
                per_method.push((name, metric_test_accuracy(models, &inst.test_sets)?));
            }
            Ok((seed, inst.sizes(), per_method))
        })?;
        let mut out = rows_for(cfg, cfg.n, p, None, &mut rows);
        out.push(cfg.seed, "mp", None, "p", p as f64, "alpha", mp_alpha);
        out.push(cfg.seed, "cl", None, "p", p as f64, "alpha", cl_alpha);
        for (seed, sizes, per_method) in &results {
            for (name, acc) in per_method {
                out.push(*seed, name, None, "p", p as f64, "test_accuracy", acc.mean);
                for (i, (a, m)) in acc.per_agent.iter().zip(sizes).enumerate() {
                    out.push(*seed, name, Some(i), "train_size", *m as f64, "test_accuracy", *a);
                }
            }
        }
    }
    Ok(ExperimentOutput { config: cfg.clone(), rows })
}

/// Accuracy over pairwise communications for asynchronous and synchronous
/// variants of both algorithms, plus a cold-started asynchronous ADMM.
pub fn experiment_cl_async_vs_sync(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let (n, p) = (cfg.n, cfg.p);
    let (mp_alpha, cl_alpha) = resolve_alphas(cfg, n, p, GraphKind::AngleKernel, threads)?;
    let sample_every = cfg.sampling_interval(n);
    let mp_cfg = MpConfig::new(mp_alpha)?;
    let snapshot = json!({ "mp_alpha": mp_alpha, "cl_alpha": cl_alpha, "rho": cfg.rho });

    let seeds: Vec<u64> = (0..cfg.instances as u64).map(|i| instance_seed(cfg.seed, i)).collect();
    let cases = parallel_map(threads, &seeds, |&seed| {
        let case = ClassificationCase::new(n, p, seed, GraphKind::AngleKernel)?;
        let mp = case.mp_solution(mp_alpha)?;
        Ok((seed, case, mp))
    })?;

    const ASYNC_METHODS: [&str; 3] = ["mp_async", "cl_async", "cl_async_cold"];
    let jobs: Vec<(usize, usize, u64)> =
        (0..cases.len()).flat_map(|c| (0..ASYNC_METHODS.len()).flat_map(move |m| (0..cfg.runs as u64).map(move |r| (c, m, r)))).collect();
    let async_records = parallel_map(threads, &jobs, |&(c, m, r)| {
        let (seed, case, mp) = &cases[c];
        let inst = &case.instance;
        let dist = uniform_neighbor_distribution(&case.graph);
        let schedule = ActivationSchedule::new(cfg.budget, run_seed(*seed, r));
        match ASYNC_METHODS[m] {
            "mp_async" => {
                let mut net = MpNetwork::with_knowledge(&case.graph, &inst.solitary_models, &inst.confidences, mp_cfg, cfg.knowledge)?;
                run_async(&mut net, &dist, &schedule, sample_every, snapshot.clone(), accuracy_metric(&inst.test_sets))
            }
            name => {
                let warm = if name == "cl_async" { WarmStart::ModelPropagation } else { WarmStart::None };
                let acfg = case.admm_config(cl_alpha, cfg.rho, warm)?;
                let mut net = AdmmNetwork::new(&case.graph, inst.local_view(), acfg, Some(mp))?;
                run_async(&mut net, &dist, &schedule, sample_every, snapshot.clone(), accuracy_metric(&inst.test_sets))
            }
        }
    })?;
    let sync_jobs: Vec<(usize, bool)> = (0..cases.len()).flat_map(|c| [(c, false), (c, true)]).collect();
    let sync_records = parallel_map(threads, &sync_jobs, |&(c, is_cl)| {
        let (_, case, mp) = &cases[c];
        let inst = &case.instance;
        let rounds = (cfg.budget / case.graph.num_edges() as u64).max(1);
        if is_cl {
            let acfg = case.admm_config(cl_alpha, cfg.rho, WarmStart::ModelPropagation)?;
            let mut net = AdmmNetwork::new(&case.graph, inst.local_view(), acfg, Some(mp))?;
            run_sync(&mut net, rounds, 1, snapshot.clone(), accuracy_metric(&inst.test_sets))
        } else {
            let mut net = MpNetwork::new(&case.graph, &inst.solitary_models, &inst.confidences, mp_cfg)?;
            run_sync(&mut net, rounds, 1, snapshot.clone(), accuracy_metric(&inst.test_sets))
        }
    })?;

    let mut rows = Vec::new();
    let mut out = rows_for(cfg, n, p, None, &mut rows);
    out.push(cfg.seed, "mp", None, "communications", 0.0, "alpha", mp_alpha);
    out.push(cfg.seed, "cl", None, "communications", 0.0, "alpha", cl_alpha);
    for (c, (seed, _, _)) in cases.iter().enumerate() {
        for (m, method) in ASYNC_METHODS.iter().enumerate() {
            let runs: Vec<RunRecord> =
                jobs.iter().zip(&async_records).filter(|((k, mm, _), _)| *k == c && *mm == m).map(|(_, r)| r.clone()).collect();
            for (comms, value) in average_series(&runs, "test_accuracy")? {
                out.push(*seed, method, None, "communications", comms as f64, "test_accuracy", value);
            }
        }
        for (k, method) in [(2 * c, "mp_sync"), (2 * c + 1, "cl_sync")] {
            for (comms, value) in sync_records[k].series("test_accuracy") {
                out.push(*seed, method, None, "communications", comms as f64, "test_accuracy", value);
            }
        }
    }
    Ok(ExperimentOutput { config: cfg.clone(), rows })
}

/// Communications spent by an async run until `target` accuracy, or `None`
/// if the activation budget runs out first.
fn communications_to_target<P: GossipProtocol>(
    protocol: &mut P,
    graph: &Graph,
    tests: &[Vec<Example>],
    schedule: &ActivationSchedule,
    sample_every: u64,
    target: f64,
) -> Result<Option<u64>> {
    let dist = uniform_neighbor_distribution(graph);
    let accuracy = |p: &P| -> Result<f64> { Ok(metric_test_accuracy(&p.models(), tests)?.mean) };
    if accuracy(protocol)? >= target {
        return Ok(Some(0));
    }
    let mut comms = 0u64;
    for (step, (i, j)) in schedule.activations(&dist).enumerate() {
        comms += protocol.pairwise_step(i, j)?;
        if (step as u64 + 1).is_multiple_of(sample_every) && accuracy(protocol)? >= target {
            return Ok(Some(comms));
        }
    }
    Ok(None)
}

/// Communications needed by asynchronous model propagation and
/// collaborative learning to reach a fixed fraction of their reference
/// accuracy, over a grid of network sizes on kNN graphs.
pub fn experiment_scalability(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let p = cfg.p;
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let kind = GraphKind::Knn(cfg.k);
        let (mp_alpha, cl_alpha) = resolve_alphas(cfg, n, p, kind, threads)?;
        let sample_every = cfg.sampling_interval(n);
        let seeds: Vec<u64> = (0..cfg.instances as u64).map(|i| instance_seed(cfg.seed, i)).collect();
        let cases = parallel_map(threads, &seeds, |&seed| {
            let case = ClassificationCase::new(n, p, seed, kind)?;
            let mp = case.mp_solution(mp_alpha)?;
            let cl = case.cl_solution(cl_alpha, cfg.rho, cfg.rounds, &mp)?;
            let (mp_ref, cl_ref) = (case.accuracy(&mp)?, case.accuracy(&cl)?);
            Ok((seed, case, mp_ref, cl_ref))
        })?;
        let jobs: Vec<(usize, bool)> = (0..cases.len()).flat_map(|c| [(c, false), (c, true)]).collect();
        let reached = parallel_map(threads, &jobs, |&(c, is_cl)| {
            let (seed, case, mp_ref, cl_ref) = &cases[c];
            let inst = &case.instance;
            let schedule = ActivationSchedule::new(cfg.budget, run_seed(*seed, 0));
            if is_cl {
                let acfg = case.admm_config(cl_alpha, cfg.rho, WarmStart::Solitary)?;
                let mut net = AdmmNetwork::new(&case.graph, inst.local_view(), acfg, None)?;
                communications_to_target(&mut net, &case.graph, &inst.test_sets, &schedule, sample_every, SCALABILITY_TARGET * cl_ref)
            } else {
                let mp_cfg = MpConfig::new(mp_alpha)?;
                let mut net = MpNetwork::with_knowledge(&case.graph, &inst.solitary_models, &inst.confidences, mp_cfg, cfg.knowledge)?;
                communications_to_target(&mut net, &case.graph, &inst.test_sets, &schedule, sample_every, SCALABILITY_TARGET * mp_ref)
            }
        })?;
        let mut out = rows_for(cfg, n, p, None, &mut rows);
        for (&(c, is_cl), hit) in jobs.iter().zip(&reached) {
            let (seed, _, mp_ref, cl_ref) = &cases[c];
            let (method, reference) = if is_cl { ("cl", *cl_ref) } else { ("mp", *mp_ref) };
            out.push(*seed, method, None, "n", n as f64, "reference_accuracy", reference);
            out.push(*seed, method, None, "n", n as f64, "reached", if hit.is_some() { 1.0 } else { 0.0 });
            let comms = hit.map_or(f64::NAN, |c| c as f64);
            out.push(*seed, method, None, "n", n as f64, "communications_to_target", comms);
        }
    }
    Ok(ExperimentOutput { config: cfg.clone(), rows })
}

/// Held-out grid search over `alpha`.
pub fn experiment_tune_alpha(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut tune_cfg = cfg.clone();
    tune_cfg.tune_instances = cfg.instances;
    let tuned = tune_alpha(&tune_cfg, cfg.n, cfg.p, threads)?;
    Ok(ExperimentOutput { config: cfg.clone(), rows: tuned.rows })
}

/// Run the experiment named by `cfg.experiment` on `threads` workers.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    match cfg.experiment {
        ExperimentId::ConfidenceSweep => experiment_confidence_sweep(cfg, threads),
        ExperimentId::MpAsyncVsSync => experiment_mp_async_vs_sync(cfg, threads),
        ExperimentId::ClVsMp => experiment_cl_vs_mp(cfg, threads),
        ExperimentId::ClAsyncVsSync => experiment_cl_async_vs_sync(cfg, threads),
        ExperimentId::Scalability => experiment_scalability(cfg, threads),
        ExperimentId::TuneAlpha => experiment_tune_alpha(cfg, threads),
    }
}
