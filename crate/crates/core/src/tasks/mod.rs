// SPDX-License-Identifier: Apache-2.0

//! Synthetic collaborative tasks and local losses.

mod generators;
mod loss;
mod solitary;

pub use generators::{
    generate_linear_classification_instance, generate_linear_classification_instance_with, generate_two_moons_instance,
    generate_two_moons_instance_with, LinearTaskConfig, MeanTaskConfig,
};
pub use loss::{hinge_loss, quadratic_loss, Example, LossKind};
pub use solitary::{train_solitary, StepSchedule, SOLITARY_BUDGET, SOLITARY_STEP};

pub(crate) use solitary::subgradient_descent;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Confidence used for agents without any training data.
pub const CONFIDENCE_FLOOR: f64 = 0.01;

/// A generated problem: what the agents know plus the ground truth used
/// for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub n: usize,
    pub p: usize,
    pub loss_kind: LossKind,
    pub seed: u64,
    pub datasets: Vec<Vec<Example>>,
    pub confidences: Vec<f64>,
    pub solitary_models: Matrix,
    pub test_sets: Vec<Vec<Example>>,
    pub target_models: Matrix,
    /// 2-D side information, only present for the mean-estimation task.
    #[serde(default)]
    pub auxiliary_points: Vec<[f64; 2]>,
    /// Number of training labels flipped by the generator.
    #[serde(default)]
    pub label_flips: usize,
}

/// The part of an instance the decentralized algorithms may see.
#[derive(Debug, Clone, Copy)]
pub struct LocalView<'a> {
    pub n: usize,
    pub p: usize,
    pub loss_kind: LossKind,
    pub datasets: &'a [Vec<Example>],
    pub confidences: &'a [f64],
    pub solitary_models: &'a Matrix,
}

impl LocalView<'_> {
    pub fn local_loss(&self, agent: usize, theta: &[f64]) -> Result<f64> {
        self.loss_kind.local_loss(theta, &self.datasets[agent])
    }
}

impl ProblemInstance {
    pub fn local_view(&self) -> LocalView<'_> {
        LocalView {
            n: self.n,
            p: self.p,
            loss_kind: self.loss_kind,
            datasets: &self.datasets,
            confidences: &self.confidences,
            solitary_models: &self.solitary_models,
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.datasets.iter().map(Vec::len).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.datasets.len() != n || self.confidences.len() != n || self.test_sets.len() != n {
            return Err(Error::InvalidInstance("per-agent arrays must have n entries".into()));
        }
        self.solitary_models.ensure_shape(n, self.p)?;
        self.target_models.ensure_shape(n, self.p)?;
        if let Some((i, c)) = self.confidences.iter().enumerate().find(|(_, &c)| !(c > 0.0 && c <= 1.0)) {
            return Err(Error::InvalidInstance(format!("confidence c_{i} = {c} outside (0, 1]")));
        }
        let bad_dim = self.datasets.iter().chain(&self.test_sets).flatten().find(|ex| ex.x.len() != self.p);
        if let Some(ex) = bad_dim {
            return Err(crate::error::shape_err(format!("feature dimension {}", self.p), ex.x.len()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }
}

/// `c_i = m_i / max_j m_j`, with `floor` for agents without data.
pub fn confidence_from_sizes(sizes: &[usize], floor: f64) -> Result<Vec<f64>> {
    let max = sizes.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(Error::InvalidInstance("every agent has an empty dataset".into()));
    }
    if !(floor > 0.0 && floor <= 1.0) {
        return Err(Error::Parameter(format!("confidence floor must be in (0, 1], got {floor}")));
    }
    Ok(sizes.iter().map(|&m| if m == 0 { floor } else { m as f64 / max as f64 }).collect())
}
