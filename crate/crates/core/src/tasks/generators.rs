// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{confidence_from_sizes, train_solitary, Example, LossKind, ProblemInstance, CONFIDENCE_FLOOR, SOLITARY_BUDGET, SOLITARY_STEP};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng::{stream_rng, Stream};

/// Parameters of the collaborative mean-estimation task.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTaskConfig {
    pub n: usize,
    /// Width of the uniform confidence distribution centered at 1/2.
    pub epsilon: f64,
    /// Variance of each agent's sample distribution.
    pub variance: f64,
    /// `m_i = ceil(c_i * sample_scale)`.
    pub sample_scale: f64,
    /// Std of the Gaussian jitter on the moon coordinates.
    pub layout_noise: f64,
}

impl MeanTaskConfig {
    pub fn new(n: usize, epsilon: f64) -> Self {
        Self { n, epsilon, variance: 40.0, sample_scale: 100.0, layout_noise: 0.08 }
    }
}

pub fn generate_two_moons_instance(n: usize, epsilon: f64, seed: u64) -> Result<ProblemInstance> {
    generate_two_moons_instance_with(&MeanTaskConfig::new(n, epsilon), seed)
}

/// Sample size for confidence `c`. The small offset keeps products such as
/// `0.07 * 100 = 7.000000000000001` from rounding up.
fn size_for_confidence(c: f64, scale: f64) -> usize {
    (c * scale - 1e-9).ceil().max(0.0) as usize
}

/// Agents on two interleaved half circles; upper-moon agents estimate the
/// mean of N(1, variance), lower-moon agents that of N(-1, variance).
pub fn generate_two_moons_instance_with(cfg: &MeanTaskConfig, seed: u64) -> Result<ProblemInstance> {
    let n = cfg.n;
    if n < 2 {
        return Err(Error::InvalidInstance(format!("need at least 2 agents, got {n}")));
    }
    if !(0.0..=1.0).contains(&cfg.epsilon) {
        return Err(Error::Parameter(format!("epsilon must lie in [0, 1], got {}", cfg.epsilon)));
    }
    if !(cfg.variance > 0.0) || !(cfg.sample_scale > 0.0) || !(cfg.layout_noise >= 0.0) {
        return Err(Error::Parameter("variance, sample scale and layout noise must be positive".into()));
    }

    let mut task_rng = stream_rng(seed, Stream::Task);
    let jitter = Normal::new(0.0, cfg.layout_noise).expect("valid std");
    let n_upper = n.div_ceil(2);
    let n_lower = n - n_upper;
    let arc = |k: usize, count: usize| if count <= 1 { 0.0 } else { PI * k as f64 / (count - 1) as f64 };

    let mut points = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for k in 0..n_upper {
        let t = arc(k, n_upper);
        points.push([t.cos(), t.sin()]);
        targets.push(1.0);
    }
    for k in 0..n_lower {
        let t = arc(k, n_lower);
        points.push([1.0 - t.cos(), 0.5 - t.sin()]);
        targets.push(-1.0);
    }
    for pt in &mut points {
        pt[0] += jitter.sample(&mut task_rng);
        pt[1] += jitter.sample(&mut task_rng);
    }

    // c_i uniform on (1/2 - eps/2, 1/2 + eps/2], which keeps c_i > 0.
    let confidences: Vec<f64> = (0..n).map(|_| 0.5 + cfg.epsilon * (0.5 - task_rng.random::<f64>())).collect();

    let std = cfg.variance.sqrt();
    let mut datasets = Vec::with_capacity(n);
    let mut solitary = Matrix::zeros(n, 1);
    for i in 0..n {
        let m = size_for_confidence(confidences[i], cfg.sample_scale);
        let dist = Normal::new(targets[i], std).expect("valid std");
        let mut rng = stream_rng(seed, Stream::AgentData(i));
        let data: Vec<Example> = (0..m).map(|_| Example::sample(vec![dist.sample(&mut rng)])).collect();
        solitary.set_row(i, &train_solitary(&data, LossKind::Quadratic, 1, 0, SOLITARY_STEP)?);
        datasets.push(data);
    }

    let inst = ProblemInstance {
        n,
        p: 1,
        loss_kind: LossKind::Quadratic,
        seed,
        datasets,
        confidences,
        solitary_models: solitary,
        test_sets: vec![Vec::new(); n],
        target_models: Matrix::from_column(&targets),
        auxiliary_points: points,
        label_flips: 0,
    };
    inst.validate()?;
    Ok(inst)
}

/// Parameters of the collaborative linear-classification task.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTaskConfig {
    pub n: usize,
    pub p: usize,
    pub min_train: usize,
    pub max_train: usize,
    /// Probability of flipping each label.
    pub label_noise: f64,
    pub test_size: usize,
}

impl LinearTaskConfig {
    pub fn new(n: usize, p: usize) -> Self {
        Self { n, p, min_train: 1, max_train: 20, label_noise: 0.05, test_size: 100 }
    }
}

pub fn generate_linear_classification_instance(n: usize, p: usize, seed: u64) -> Result<ProblemInstance> {
    generate_linear_classification_instance_with(&LinearTaskConfig::new(n, p), seed)
}

/// Uniform draw from the unit L2 ball in R^p.
fn uniform_in_ball<R: Rng>(p: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let dir: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let len = dot(&dir, &dir).sqrt();
        if len > 0.0 {
            let radius = rng.random::<f64>().powf(1.0 / p as f64);
            return dir.into_iter().map(|v| v * radius / len).collect();
        }
    }
}

fn labeled_sample<R: Rng>(target: &[f64], noise: f64, rng: &mut R) -> (Example, bool) {
    let x = uniform_in_ball(target.len(), rng);
    let clean = if dot(target, &x) >= 0.0 { 1.0 } else { -1.0 };
    let flip = rng.random::<f64>() < noise;
    let y = if flip { -clean } else { clean };
    (Example::labeled(x, y), flip)
}

/// Agents whose target separators live in the first two coordinates, with
/// 1..=20 noisy training points each and a held-out test sample.
pub fn generate_linear_classification_instance_with(cfg: &LinearTaskConfig, seed: u64) -> Result<ProblemInstance> {
    let (n, p) = (cfg.n, cfg.p);
    if n < 2 {
        return Err(Error::InvalidInstance(format!("need at least 2 agents, got {n}")));
    }
    if p < 2 {
        return Err(Error::Parameter(format!("feature dimension must be at least 2, got {p}")));
    }
    if cfg.min_train > cfg.max_train || cfg.max_train == 0 {
        return Err(Error::Parameter("training-size range is empty".into()));
    }
    if !(0.0..=1.0).contains(&cfg.label_noise) {
        return Err(Error::Parameter(format!("label noise must lie in [0, 1], got {}", cfg.label_noise)));
    }

    let mut task_rng = stream_rng(seed, Stream::Task);
    let mut targets = Matrix::zeros(n, p);
    for i in 0..n {
        let row = targets.row_mut(i);
        loop {
            row[0] = StandardNormal.sample(&mut task_rng);
            row[1] = StandardNormal.sample(&mut task_rng);
            if row[0] != 0.0 || row[1] != 0.0 {
                break;
            }
        }
    }
    let sizes: Vec<usize> = (0..n).map(|_| task_rng.random_range(cfg.min_train..=cfg.max_train)).collect();

    let mut datasets = Vec::with_capacity(n);
    let mut test_sets = Vec::with_capacity(n);
    let mut solitary = Matrix::zeros(n, p);
    let mut flips = 0;
    for i in 0..n {
        let target = targets.row(i);
        let mut rng = stream_rng(seed, Stream::AgentData(i));
        let data: Vec<Example> = (0..sizes[i])
            .map(|_| {
                let (ex, flipped) = labeled_sample(target, cfg.label_noise, &mut rng);
                flips += flipped as usize;
                ex
            })
            .collect();
        let mut rng = stream_rng(seed, Stream::AgentTest(i));
        test_sets.push((0..cfg.test_size).map(|_| labeled_sample(target, cfg.label_noise, &mut rng).0).collect());
        solitary.set_row(i, &train_solitary(&data, LossKind::Hinge, p, SOLITARY_BUDGET, SOLITARY_STEP)?);
        datasets.push(data);
    }

    let inst = ProblemInstance {
        n,
        p,
        loss_kind: LossKind::Hinge,
        seed,
        confidences: confidence_from_sizes(&sizes, CONFIDENCE_FLOOR)?,
        datasets,
        solitary_models: solitary,
        test_sets,
        target_models: targets,
        auxiliary_points: Vec::new(),
        label_flips: flips,
    };
    inst.validate()?;
    Ok(inst)
}
