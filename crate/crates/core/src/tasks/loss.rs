// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::linalg::{axpy, dot, sq_dist};

/// A training or test example. `y` is the +-1 label for classification and
/// is ignored by the quadratic loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub x: Vec<f64>,
    #[serde(default)]
    pub y: f64,
}

impl Example {
    pub fn sample(x: Vec<f64>) -> Self {
        Self { x, y: 0.0 }
    }

    pub fn labeled(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `||theta - x||^2`
    Quadratic,
    /// `max(0, 1 - y theta^T x)`
    Hinge,
}

fn check_dims(theta: &[f64], x: &[f64]) -> Result<()> {
    if theta.len() != x.len() {
        return Err(shape_err(format!("feature dimension {}", theta.len()), x.len()));
    }
    Ok(())
}

pub fn quadratic_loss(theta: &[f64], x: &[f64]) -> Result<f64> {
    check_dims(theta, x)?;
    Ok(sq_dist(theta, x))
}

pub fn hinge_loss(theta: &[f64], x: &[f64], y: f64) -> Result<f64> {
    check_dims(theta, x)?;
    Ok((1.0 - y * dot(theta, x)).max(0.0))
}

impl LossKind {
    pub fn evaluate(self, theta: &[f64], ex: &Example) -> Result<f64> {
        match self {
            LossKind::Quadratic => quadratic_loss(theta, &ex.x),
            LossKind::Hinge => hinge_loss(theta, &ex.x, ex.y),
        }
    }

    /// Adds a subgradient of the loss at `theta` into `acc`. At the hinge
    /// kink the zero subgradient is used.
    pub fn add_subgradient(self, theta: &[f64], ex: &Example, acc: &mut [f64]) -> Result<()> {
        check_dims(theta, &ex.x)?;
        match self {
            LossKind::Quadratic => {
                for ((a, t), x) in acc.iter_mut().zip(theta).zip(&ex.x) {
                    *a += 2.0 * (t - x);
                }
            }
            LossKind::Hinge => {
                if ex.y * dot(theta, &ex.x) < 1.0 {
                    axpy(-ex.y, &ex.x, acc);
                }
            }
        }
        Ok(())
    }

    pub fn subgradient(self, theta: &[f64], ex: &Example) -> Result<Vec<f64>> {
        let mut g = vec![0.0; theta.len()];
        self.add_subgradient(theta, ex, &mut g)?;
        Ok(g)
    }

    /// Summed local loss `L_i(theta)` over a dataset.
    pub fn local_loss(self, theta: &[f64], data: &[Example]) -> Result<f64> {
        data.iter().map(|ex| self.evaluate(theta, ex)).sum()
    }
}
