// SPDX-License-Identifier: Apache-2.0

//! Property tests for invariants that hold on every graph and instance.

use peerlearn::admm::secondary_update;
use peerlearn::graph::{stochastic_matrix, uniform_neighbor_distribution, Graph};
use peerlearn::harness::{read_csv_rows, ExperimentConfig, ExperimentId, ExperimentOutput, ResultRow};
use peerlearn::linalg::Matrix;
use peerlearn::mp::{objective_qmp, solve_closed_form, sync_step, MpConfig, MpNetwork};
use peerlearn::rng::derive_seed;
use peerlearn::simulator::ActivationSchedule;
use proptest::prelude::*;

/// Path 0-1-...-(n-1) plus the chords selected by `extra`, weights from `w`.
fn graph_from(n: usize, extra: &[bool], w: &[f64]) -> Graph {
    let mut edges: Vec<(usize, usize, f64)> = (1..n).map(|j| (j - 1, j, w[j % w.len()])).collect();
    let mut k = 0;
    for i in 0..n {
        for j in i + 2..n {
            if extra[k % extra.len()] {
                edges.push((i, j, w[(i + j) % w.len()]));
            }
            k += 1;
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

fn case() -> impl Strategy<Value = (Graph, Matrix, Vec<f64>, f64)> {
    (2usize..8, 1usize..3).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(any::<bool>(), 1..30),
            prop::collection::vec(0.05f64..1.0, 1..10),
            prop::collection::vec(-5.0f64..5.0, n * p),
            prop::collection::vec(0.01f64..1.0, n),
            prop::sample::select(vec![0.5, 0.9, 0.99]),
        )
            .prop_map(move |(extra, w, loc, c, alpha)| {
                let rows: Vec<Vec<f64>> = loc.chunks(p).map(<[f64]>::to_vec).collect();
                (graph_from(n, &extra, &w), Matrix::from_rows(&rows).unwrap(), c, alpha)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_is_a_fixed_point((graph, loc, c, alpha) in case()) {
        let cfg = MpConfig::new(alpha).unwrap();
        let star = solve_closed_form(&graph, &loc, &c, &cfg).unwrap();
        let next = sync_step(&graph, &star, &loc, &c, &cfg).unwrap();
        prop_assert!(next.max_abs_diff(&star) <= 1e-9);
    }

    #[test]
    fn closed_form_minimizes_objective((graph, loc, c, alpha) in case(), scale in 1e-3f64..1.0) {
        let cfg = MpConfig::new(alpha).unwrap();
        let star = solve_closed_form(&graph, &loc, &c, &cfg).unwrap();
        let best = objective_qmp(&graph, &star, &loc, &c, &cfg).unwrap();
        let mut moved = star.clone();
        moved.as_mut_slice()[0] += scale;
        let worse = objective_qmp(&graph, &moved, &loc, &c, &cfg).unwrap();
        prop_assert!(worse >= best - 1e-12 * best.abs().max(1.0));
    }

    #[test]
    fn stochastic_rows_sum_to_one((graph, _loc, _c, _alpha) in case()) {
        let pm = stochastic_matrix(&graph);
        for i in 0..graph.n() {
            let (_, values) = pm.row(i);
            prop_assert!((values.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn graph_is_symmetric_with_reverse_slots((graph, _loc, _c, _alpha) in case()) {
        for i in 0..graph.n() {
            for (s, &j) in graph.neighbors(i).iter().enumerate() {
                let r = graph.reverse_slot(i, s);
                prop_assert_eq!(graph.neighbors(j)[r], i);
                prop_assert_eq!(graph.weight(i, j), graph.weight(j, i));
            }
        }
    }

    #[test]
    fn activations_pick_neighbors_and_count_two((graph, loc, c, alpha) in case(), seed in any::<u64>()) {
        let dist = uniform_neighbor_distribution(&graph);
        let mut net = MpNetwork::new(&graph, &loc, &c, MpConfig::new(alpha).unwrap()).unwrap();
        let mut total = 0;
        for (i, j) in ActivationSchedule::new(200, seed).activations(&dist) {
            prop_assert!(graph.slot(i, j).is_some());
            total += net.async_step(i, j).unwrap();
        }
        prop_assert_eq!(total, 400);
        prop_assert_eq!(net.sync_round(), 2 * graph.num_edges() as u64);
    }

    #[test]
    fn secondary_update_is_symmetric_up_to_rounding(
        v in prop::collection::vec(-10.0f64..10.0, 8),
        rho in 0.1f64..10.0,
    ) {
        let (a, b, c, d) = (&v[0..2], &v[2..4], &v[4..6], &v[6..8]);
        let (x, y) = (secondary_update(a, b, c, d, rho), secondary_update(b, a, d, c, rho));
        for (u, w) in x.iter().zip(&y) {
            prop_assert!((u - w).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }

    #[test]
    fn derived_seeds_are_distinct(master in any::<u64>(), i in 0u64..1000, j in 0u64..1000) {
        prop_assume!(i != j);
        prop_assert_ne!(derive_seed(master, i), derive_seed(master, j));
        prop_assert_eq!(derive_seed(master, i), derive_seed(master, i));
    }

    #[test]
    fn csv_round_trips(values in prop::collection::vec(-1e6f64..1e6, 1..20), seed in any::<u64>()) {
        let rows: Vec<ResultRow> = values
            .iter()
            .enumerate()
            .map(|(k, &value)| ResultRow {
                experiment: "confidence-sweep".into(),
                seed,
                n: 10,
                p: 1,
                epsilon: if k % 2 == 0 { Some(0.5) } else { None },
                method: "mp_confidence".into(),
                agent_id: k.to_string(),
                x_axis_name: "epsilon".into(),
                x_value: k as f64,
                metric: "l2_error".into(),
                value,
            })
            .collect();
        let out = ExperimentOutput { config: ExperimentConfig::defaults(ExperimentId::ConfidenceSweep), rows: rows.clone() };
        let back = read_csv_rows(&out.to_csv().unwrap()).unwrap();
        prop_assert_eq!(back, rows);
    }
}
