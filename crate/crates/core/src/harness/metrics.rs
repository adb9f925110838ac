// SPDX-License-Identifier: Apache-2.0

use crate::error::{shape_err, Error, Result};
use crate::linalg::{dot, sq_dist, Matrix};
use crate::tasks::{subgradient_descent, Example, LossKind, ProblemInstance, SOLITARY_STEP};

/// Mean over agents of `|theta_i - target_i|`.
pub fn metric_l2_error(theta: &Matrix, targets: &Matrix) -> Result<f64> {
    metric_distance(theta, targets)
}

/// Mean per-agent Euclidean distance between two model stacks.
pub fn metric_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    b.ensure_shape(a.rows(), a.cols())?;
    if a.rows() == 0 {
        return Err(shape_err("at least one agent", 0));
    }
    let total: f64 = a.iter_rows().zip(b.iter_rows()).map(|(x, y)| sq_dist(x, y).sqrt()).sum();
    Ok(total / a.rows() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accuracy {
    pub per_agent: Vec<f64>,
    pub mean: f64,
}

/// Fraction of test points where `sign(theta_i^T x)` (zero counted as +1)
/// matches the label.
pub fn metric_test_accuracy(theta: &Matrix, test_sets: &[Vec<Example>]) -> Result<Accuracy> {
    if test_sets.len() != theta.rows() {
        return Err(shape_err(theta.rows(), test_sets.len()));
    }
    let mut per_agent = Vec::with_capacity(test_sets.len());
    for (i, tests) in test_sets.iter().enumerate() {
        if tests.is_empty() {
            return Err(Error::InvalidInstance(format!("agent {i} has an empty test set")));
        }
        let row = theta.row(i);
        let mut correct = 0usize;
        for ex in tests {
            if ex.x.len() != row.len() {
                return Err(shape_err(row.len(), ex.x.len()));
            }
            let predicted = if dot(row, &ex.x) >= 0.0 { 1.0 } else { -1.0 };
            if predicted == ex.y {
                correct += 1;
            }
        }
        per_agent.push(correct as f64 / tests.len() as f64);
    }
    let mean = per_agent.iter().sum::<f64>() / per_agent.len() as f64;
    Ok(Accuracy { per_agent, mean })
}

/// Single global model minimizing the summed local losses, computed
/// centrally as a reference point.
pub fn consensus_baseline(instance: &ProblemInstance, budget: usize) -> Result<Vec<f64>> {
    let pooled: Vec<&Example> = instance.datasets.iter().flatten().collect();
    let p = instance.p;
    if pooled.is_empty() {
        return Ok(vec![0.0; p]);
    }
    match instance.loss_kind {
        LossKind::Quadratic => {
            let mut mean = vec![0.0; p];
            for ex in &pooled {
                crate::linalg::axpy(1.0, &ex.x, &mut mean);
            }
            mean.iter_mut().for_each(|v| *v /= pooled.len() as f64);
            Ok(mean)
        }
        LossKind::Hinge => {
            // The averaged loss has the same minimizer and a better scaled step.
            let scale = 1.0 / pooled.len() as f64;
            subgradient_descent(p, budget, SOLITARY_STEP, |theta, grad| {
                let mut value = 0.0;
                let mut sub = vec![0.0; p];
                for ex in &pooled {
                    value += instance.loss_kind.evaluate(theta, ex)?;
                    instance.loss_kind.add_subgradient(theta, ex, &mut sub)?;
                }
                crate::linalg::axpy(scale, &sub, grad);
                Ok(value * scale)
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::generate_linear_classification_instance;

    #[test]
    fn l2_error_examples() {
        let t = Matrix::from_column(&[1.0, -1.0]);
        assert_eq!(metric_l2_error(&t, &t).unwrap(), 0.0);
        let theta = Matrix::from_column(&[2.0, 2.0]);
        assert_eq!(metric_l2_error(&theta, &t).unwrap(), 2.0);
        assert!(metric_l2_error(&Matrix::zeros(3, 1), &t).is_err());
    }

    #[test]
    fn accuracy_of_targets_and_their_negation() {
        let mut cfg = crate::tasks::LinearTaskConfig::new(20, 5);
        cfg.label_noise = 0.0;
        let inst = crate::tasks::generate_linear_classification_instance_with(&cfg, 9).unwrap();
        let acc = metric_test_accuracy(&inst.target_models, &inst.test_sets).unwrap();
        assert_eq!(acc.mean, 1.0);
        let mut neg = inst.target_models.clone();
        neg.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
        let acc = metric_test_accuracy(&neg, &inst.test_sets).unwrap();
        // Only points exactly on the separator can agree.
        assert!(acc.mean < 0.01);
    }

    #[test]
    fn random_models_score_near_chance() {
        let inst = generate_linear_classification_instance(50, 10, 4).unwrap();
        let mut rng = crate::rng::stream_rng(4, crate::rng::Stream::Solver);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..10).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect()).collect();
        let acc = metric_test_accuracy(&Matrix::from_rows(&rows).unwrap(), &inst.test_sets).unwrap();
        assert!((acc.mean - 0.5).abs() <= 0.1, "{}", acc.mean);
    }

    #[test]
    fn empty_test_set_is_an_error() {
        let theta = Matrix::zeros(2, 1);
        let tests = vec![vec![Example::labeled(vec![1.0], 1.0)], vec![]];
        assert!(matches!(metric_test_accuracy(&theta, &tests), Err(Error::InvalidInstance(_))));
    }

    #[test]
    fn consensus_of_pooled_quadratic_data() {
        let mut inst = crate::tasks::generate_two_moons_instance(2, 0.0, 1).unwrap();
        inst.datasets = vec![vec![Example::sample(vec![0.0])], vec![Example::sample(vec![2.0])]];
        assert_eq!(consensus_baseline(&inst, 0).unwrap(), vec![1.0]);
    }

    #[test]
    fn consensus_on_two_moons_is_near_zero() {
        let inst = crate::tasks::generate_two_moons_instance(300, 0.0, 2).unwrap();
        let theta = consensus_baseline(&inst, 0).unwrap();
        assert!(theta[0].abs() < 0.1, "{}", theta[0]);
    }
}
