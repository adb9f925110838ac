// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::admm::DEFAULT_RHO;
use crate::error::{Error, Result};
use crate::mp::{KnowledgeInit, DEFAULT_ALPHA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    ConfidenceSweep,
    MpAsyncVsSync,
    ClVsMp,
    ClAsyncVsSync,
    Scalability,
    TuneAlpha,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] =
        [Self::ConfidenceSweep, Self::MpAsyncVsSync, Self::ClVsMp, Self::ClAsyncVsSync, Self::Scalability, Self::TuneAlpha];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ConfidenceSweep => "confidence-sweep",
            Self::MpAsyncVsSync => "mp-async-vs-sync",
            Self::ClVsMp => "cl-vs-mp",
            Self::ClAsyncVsSync => "cl-async-vs-sync",
            Self::Scalability => "scalability",
            Self::TuneAlpha => "tune-alpha",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|id| id.as_str() == s).ok_or_else(|| Error::Parameter(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::Parameter(format!("unknown format {s:?}, expected csv or json"))),
        }
    }
}

/// Which synthetic task `tune-alpha` tunes on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskFamily {
    /// Two-moons mean estimation, model propagation only.
    Mean,
    /// Linear classification, both algorithms.
    #[default]
    Classification,
}

impl FromStr for TaskFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "classification" => Ok(Self::Classification),
            _ => Err(Error::Parameter(format!("unknown task {s:?}, expected mean or classification"))),
        }
    }
}

/// Parameters of one experiment run. The snapshot is embedded in every
/// output file; the worker count is deliberately not part of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    /// Confidence widths; experiments other than the sweep use the first.
    pub epsilon: Vec<f64>,
    /// Model-propagation `alpha`; `None` tunes it on held-out instances.
    pub alpha: Option<f64>,
    /// Collaborative-learning `alpha`; `None` tunes it on held-out instances.
    pub cl_alpha: Option<f64>,
    pub rho: f64,
    pub k: usize,
    pub instances: usize,
    /// Held-out instances used when tuning `alpha`.
    pub tune_instances: usize,
    /// Async repetitions averaged per instance.
    pub runs: usize,
    /// Async activation budget per run.
    pub budget: u64,
    /// Synchronous ADMM rounds used for collaborative-learning solutions.
    pub rounds: u64,
    /// Async steps between metric samples.
    pub sample_every: u64,
    pub n_grid: Vec<usize>,
    pub p_grid: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    pub task: TaskFamily,
    /// Initial neighbor knowledge of asynchronous model propagation.
    pub knowledge: KnowledgeInit,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
}

const ALPHA_GRID: [f64; 4] = [0.5, 0.9, 0.99, 0.999];

impl ExperimentConfig {
    /// Desk-scale defaults for `experiment`.
    pub fn defaults(experiment: ExperimentId) -> Self {
        let mut cfg = Self {
            experiment,
            seed: 1,
            n: 100,
            p: 50,
            epsilon: vec![1.0],
            alpha: None,
            cl_alpha: None,
            rho: DEFAULT_RHO,
            k: 10,
            instances: 10,
            tune_instances: 3,
            runs: 1,
            budget: 100_000,
            rounds: 200,
            sample_every: 1_000,
            n_grid: vec![100, 200, 300],
            p_grid: vec![2, 5, 10, 20, 50, 100],
            alpha_grid: ALPHA_GRID.to_vec(),
            task: TaskFamily::Classification,
            knowledge: KnowledgeInit::Solitary,
            format: OutputFormat::Csv,
            out: None,
        };
        match experiment {
            ExperimentId::ConfidenceSweep => {
                cfg.n = 300;
                cfg.p = 1;
                cfg.epsilon = (0..=10).map(|k| k as f64 / 10.0).collect();
                cfg.alpha = Some(DEFAULT_ALPHA);
                cfg.instances = 200;
            }
            ExperimentId::MpAsyncVsSync => {
                cfg.n = 300;
                cfg.p = 1;
                cfg.alpha = Some(DEFAULT_ALPHA);
                cfg.instances = 1;
                cfg.runs = 25;
                cfg.budget = 2_000_000;
                cfg.sample_every = 20_000;
            }
            ExperimentId::ClVsMp => {}
            ExperimentId::ClAsyncVsSync => {
                cfg.instances = 3;
                cfg.runs = 2;
                cfg.budget = 500_000;
                cfg.sample_every = 10_000;
            }
            ExperimentId::Scalability => {
                cfg.instances = 3;
                cfg.budget = 2_000_000;
                cfg.sample_every = 0;
            }
            ExperimentId::TuneAlpha => {
                cfg.instances = 3;
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.p == 0 {
            return bad("p must be at least 1".into());
        }
        if self.epsilon.is_empty() || self.epsilon.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return bad(format!("epsilon values must lie in [0, 1], got {:?}", self.epsilon));
        }
        for a in self.alpha.iter().chain(&self.cl_alpha).chain(&self.alpha_grid) {
            if !(*a > 0.0 && *a < 1.0) {
                return bad(format!("alpha must lie in (0, 1), got {a}"));
            }
        }
        if self.alpha_grid.is_empty() {
            return bad("alpha grid must not be empty".into());
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.instances == 0 || self.runs == 0 || self.tune_instances == 0 {
            return bad("instances, runs and tune-instances must be at least 1".into());
        }
        if self.n_grid.iter().any(|&n| n <= self.k) || self.n_grid.is_empty() {
            return bad(format!("every n in the grid must exceed k = {}", self.k));
        }
        if self.p_grid.is_empty() || self.p_grid.contains(&0) {
            return bad("p grid entries must be at least 1".into());
        }
        Ok(())
    }

    /// Async steps between samples, defaulting to `n / 2` when unset.
    pub(crate) fn sampling_interval(&self, n: usize) -> u64 {
        if self.sample_every == 0 {
            (n as u64 / 2).max(1)
        } else {
            self.sample_every
        }
    }
}
