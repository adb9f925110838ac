// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::tasks::{Example, LossKind};

/// Step-size schedule for subgradient methods, indexed from `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `scale / sqrt(t)`
    InvSqrt(f64),
    /// `scale / t`
    InvT(f64),
}

impl StepSchedule {
    pub fn at(self, t: usize) -> f64 {
        let t = t.max(1) as f64;
        match self {
            StepSchedule::Constant(s) => s,
            StepSchedule::InvSqrt(s) => s / t.sqrt(),
            StepSchedule::InvT(s) => s / t,
        }
    }
}

/// Iteration budget of the local hinge solver.
pub const SOLITARY_BUDGET: usize = 500;

pub const SOLITARY_STEP: StepSchedule = StepSchedule::InvSqrt(1.0);

/// Minimize the summed local loss of one agent.
///
/// The quadratic loss is minimized exactly by the sample mean. Other losses
/// run full-batch subgradient descent from zero and return the averaged
/// iterate, or the best visited iterate if that one scores lower. An empty
/// dataset yields the zero model.
pub fn train_solitary(data: &[Example], loss: LossKind, p: usize, budget: usize, step: StepSchedule) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Ok(vec![0.0; p]);
    }
    if let Some(bad) = data.iter().find(|ex| ex.x.len() != p) {
        return Err(crate::error::shape_err(format!("feature dimension {p}"), bad.x.len()));
    }
    match loss {
        LossKind::Quadratic => {
            let mut mean = vec![0.0; p];
            for ex in data {
                axpy(1.0, &ex.x, &mut mean);
            }
            let m = data.len() as f64;
            mean.iter_mut().for_each(|v| *v /= m);
            Ok(mean)
        }
        LossKind::Hinge => subgradient_descent(p, budget, step, |theta, grad| {
            let mut value = 0.0;
            for ex in data {
                value += loss.evaluate(theta, ex)?;
                loss.add_subgradient(theta, ex, grad)?;
            }
            Ok(value)
        }),
    }
}

/// Generic averaged subgradient descent from the origin.
///
/// `oracle(theta, grad)` must add a subgradient at `theta` into the zeroed
/// `grad` and return the objective value there.
pub(crate) fn subgradient_descent(
    p: usize,
    budget: usize,
    step: StepSchedule,
    mut oracle: impl FnMut(&[f64], &mut [f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut theta = vec![0.0; p];
    let mut avg = vec![0.0; p];
    let mut grad = vec![0.0; p];
    let mut best = theta.clone();
    let mut best_value = f64::INFINITY;
    for t in 1..=budget {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let value = oracle(&theta, &mut grad)?;
        if value < best_value {
            best_value = value;
            best.copy_from_slice(&theta);
        }
        axpy(-step.at(t), &grad, &mut theta);
        let w = 1.0 / t as f64;
        for (a, th) in avg.iter_mut().zip(&theta) {
            *a += w * (th - *a);
        }
    }
    if !avg.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical { message: "subgradient descent diverged".into(), residual: f64::NAN });
    }
    grad.iter_mut().for_each(|g| *g = 0.0);
    let avg_value = oracle(&avg, &mut grad)?;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let last_value = oracle(&theta, &mut grad)?;
    if last_value < best_value {
        best_value = last_value;
        best.copy_from_slice(&theta);
    }
    Ok(if best_value < avg_value { best } else { avg })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_solitary_is_sample_mean() {
        let data = vec![Example::sample(vec![2.0]), Example::sample(vec![4.0])];
        let theta = train_solitary(&data, LossKind::Quadratic, 1, 0, SOLITARY_STEP).unwrap();
        assert_eq!(theta, vec![3.0]);
    }

    #[test]
    fn empty_dataset_gives_zero_model() {
        let theta = train_solitary(&[], LossKind::Hinge, 3, SOLITARY_BUDGET, SOLITARY_STEP).unwrap();
        assert_eq!(theta, vec![0.0; 3]);
    }

    #[test]
    fn hinge_solitary_matches_grid_search() {
        let data = vec![
            Example::labeled(vec![1.0, 0.5], 1.0),
            Example::labeled(vec![0.8, -0.3], 1.0),
            Example::labeled(vec![-0.9, 0.2], -1.0),
            Example::labeled(vec![-0.4, -0.7], -1.0),
        ];
        let objective = |t: &[f64]| LossKind::Hinge.local_loss(t, &data).unwrap();

        // Brute-force minimum over [-3, 3]^2 at resolution 0.01.
        let mut grid_min = f64::INFINITY;
        for a in -300..=300 {
            for b in -300..=300 {
                grid_min = grid_min.min(objective(&[a as f64 * 0.01, b as f64 * 0.01]));
            }
        }

        let theta = train_solitary(&data, LossKind::Hinge, 2, SOLITARY_BUDGET, SOLITARY_STEP).unwrap();
        assert!(objective(&theta) <= grid_min + 1e-3, "{} vs {grid_min}", objective(&theta));
    }

    #[test]
    fn schedules() {
        assert_eq!(StepSchedule::InvSqrt(2.0).at(4), 1.0);
        assert_eq!(StepSchedule::InvT(2.0).at(4), 0.5);
        assert_eq!(StepSchedule::Constant(0.1).at(100), 0.1);
    }
}
