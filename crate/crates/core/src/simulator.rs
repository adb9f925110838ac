// SPDX-License-Identifier: Apache-2.0

//! Discrete-time driver for the gossip protocols.
//!
//! Independent rate-1 Poisson clocks are realized as one uniformly drawn
//! agent per step. The activated agent then samples a neighbor from its
//! selection distribution and the protocol runs one pairwise step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::admm::AdmmNetwork;
use crate::error::{Error, Result};
use crate::graph::{Graph, NeighborDistribution};
use crate::linalg::Matrix;
use crate::mp::MpNetwork;
use crate::rng::{stream_rng, Stream};

/// A decentralized protocol the simulator can drive.
pub trait GossipProtocol {
    /// Short identifier stored in run metadata.
    fn name(&self) -> &'static str;
    fn topology(&self) -> &Graph;
    /// Agent `i` wakes up and contacts `j`; returns communications spent.
    fn pairwise_step(&mut self, i: usize, j: usize) -> Result<u64>;
    /// One synchronous round; returns communications spent.
    fn full_round(&mut self) -> Result<u64>;
    fn models(&self) -> Matrix;
}

impl GossipProtocol for MpNetwork<'_> {
    fn name(&self) -> &'static str {
        "mp"
    }
    fn topology(&self) -> &Graph {
        self.graph()
    }
    fn pairwise_step(&mut self, i: usize, j: usize) -> Result<u64> {
        self.async_step(i, j)
    }
    fn full_round(&mut self) -> Result<u64> {
        Ok(self.sync_round())
    }
    fn models(&self) -> Matrix {
        self.own_models()
    }
}

impl GossipProtocol for AdmmNetwork<'_> {
    fn name(&self) -> &'static str {
        "admm"
    }
    fn topology(&self) -> &Graph {
        self.graph()
    }
    fn pairwise_step(&mut self, i: usize, j: usize) -> Result<u64> {
        self.async_step(i, j)
    }
    fn full_round(&mut self) -> Result<u64> {
        self.sync_round()
    }
    fn models(&self) -> Matrix {
        self.own_models()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationSchedule {
    pub total_steps: u64,
    pub seed: u64,
}

impl ActivationSchedule {
    pub fn new(total_steps: u64, seed: u64) -> Self {
        Self { total_steps, seed }
    }

    /// The `(agent, neighbor)` pairs of the schedule, drawn from the
    /// schedule stream of `seed`.
    pub fn activations<'a>(&self, dist: &'a NeighborDistribution) -> impl Iterator<Item = (usize, usize)> + 'a {
        let mut rng = stream_rng(self.seed, Stream::Schedule);
        let n = dist.n();
        (0..self.total_steps).map(move |_| {
            let i = rng.random_range(0..n);
            (i, dist.sample_neighbor(i, &mut rng))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSample {
    /// Async steps or sync rounds completed.
    pub step: u64,
    pub communications: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    /// `"async"` or `"sync"`.
    pub mode: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub rows: Vec<RunSample>,
}

impl RunRecord {
    /// Samples of one metric in order as `(communications, value)`.
    pub fn series(&self, metric: &str) -> Vec<(u64, f64)> {
        self.rows.iter().filter(|r| r.metric == metric).map(|r| (r.communications, r.value)).collect()
    }

    pub fn final_value(&self, metric: &str) -> Option<f64> {
        self.rows.iter().rev().find(|r| r.metric == metric).map(|r| r.value)
    }

    /// Total communications at the last sample.
    pub fn communications(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.communications)
    }
}

/// Named measurements taken from a protocol state. Metrics must not use
/// randomness so that sampling never perturbs a run.
pub type Measurements = Vec<(&'static str, f64)>;

fn record_sample<P, F>(rows: &mut Vec<RunSample>, protocol: &P, step: u64, comms: u64, metric: &mut F) -> Result<()>
where
    F: FnMut(&P) -> Result<Measurements>,
{
    for (name, value) in metric(protocol)? {
        rows.push(RunSample { step, communications: comms, metric: name.to_string(), value });
    }
    Ok(())
}

fn check_sampling(sample_every: u64) -> Result<()> {
    if sample_every == 0 {
        return Err(Error::Parameter("sample_every must be at least 1".into()));
    }
    Ok(())
}

/// Run `schedule` on `protocol`, sampling `metric` at step 0, every
/// `sample_every` steps, and after the last step. The protocol is left in
/// its final state.
pub fn run_async<P, F>(
    protocol: &mut P,
    dist: &NeighborDistribution,
    schedule: &ActivationSchedule,
    sample_every: u64,
    config: serde_json::Value,
    mut metric: F,
) -> Result<RunRecord>
where
    P: GossipProtocol,
    F: FnMut(&P) -> Result<Measurements>,
{
    check_sampling(sample_every)?;
    if dist.n() != protocol.topology().n() {
        return Err(crate::error::shape_err(protocol.topology().n(), dist.n()));
    }
    let mut rows = Vec::new();
    let mut comms = 0u64;
    record_sample(&mut rows, protocol, 0, comms, &mut metric)?;
    let mut step = 0u64;
    for (i, j) in schedule.activations(dist) {
        comms += protocol.pairwise_step(i, j)?;
        step += 1;
        if step.is_multiple_of(sample_every) {
            record_sample(&mut rows, protocol, step, comms, &mut metric)?;
        }
    }
    if !step.is_multiple_of(sample_every) {
        record_sample(&mut rows, protocol, step, comms, &mut metric)?;
    }
    Ok(RunRecord { algorithm: protocol.name().to_string(), mode: "async".into(), seed: schedule.seed, config, rows })
}

/// Run `rounds` synchronous rounds with the same sampling rule as
/// [`run_async`], counted in rounds.
pub fn run_sync<P, F>(protocol: &mut P, rounds: u64, sample_every: u64, config: serde_json::Value, mut metric: F) -> Result<RunRecord>
where
    P: GossipProtocol,
    F: FnMut(&P) -> Result<Measurements>,
{
    check_sampling(sample_every)?;
    let mut rows = Vec::new();
    let mut comms = 0u64;
    record_sample(&mut rows, protocol, 0, comms, &mut metric)?;
    for round in 1..=rounds {
        comms += protocol.full_round()?;
        if round % sample_every == 0 || round == rounds {
            record_sample(&mut rows, protocol, round, comms, &mut metric)?;
        }
    }
    Ok(RunRecord { algorithm: protocol.name().to_string(), mode: "sync".into(), seed: 0, config, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::uniform_neighbor_distribution;
    use crate::mp::MpConfig;

    fn ring(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n, 1.0))).unwrap()
    }

    fn mean_model(p: &MpNetwork<'_>) -> Result<Measurements> {
        let m = p.own_models();
        Ok(vec![("mean", m.as_slice().iter().sum::<f64>() / m.rows() as f64)])
    }

    #[test]
    fn activation_frequencies_are_uniform() {
        let g = ring(10);
        let dist = uniform_neighbor_distribution(&g);
        let mut counts = [0usize; 10];
        for (i, j) in ActivationSchedule::new(100_000, 5).activations(&dist) {
            counts[i] += 1;
            assert!(g.slot(i, j).is_some());
        }
        for c in counts {
            let frac = c as f64 / 100_000.0;
            assert!((0.08..=0.12).contains(&frac), "{frac}");
        }
    }

    #[test]
    fn zero_steps_records_only_initial_state() {
        let g = ring(4);
        let loc = Matrix::from_column(&[1.0, 2.0, 3.0, 4.0]);
        let c = vec![1.0; 4];
        let mut net = MpNetwork::new(&g, &loc, &c, MpConfig::new(0.5).unwrap()).unwrap();
        let dist = uniform_neighbor_distribution(&g);
        let rec = run_async(&mut net, &dist, &ActivationSchedule::new(0, 1), 10, serde_json::Value::Null, mean_model).unwrap();
        assert_eq!(rec.rows.len(), 1);
        assert_eq!(rec.rows[0].step, 0);
        assert_eq!(rec.rows[0].value, 2.5);
    }

    #[test]
    fn same_seed_gives_identical_records() {
        let g = ring(6);
        let loc = Matrix::from_column(&[1.0, -2.0, 3.0, 0.0, 5.0, 1.0]);
        let c = vec![0.5, 1.0, 0.2, 0.7, 1.0, 0.3];
        let dist = uniform_neighbor_distribution(&g);
        let run = |seed| {
            let mut net = MpNetwork::new(&g, &loc, &c, MpConfig::new(0.9).unwrap()).unwrap();
            run_async(&mut net, &dist, &ActivationSchedule::new(503, seed), 50, serde_json::Value::Null, mean_model).unwrap()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
        let rec = run(3);
        assert_eq!(rec.communications(), 2 * 503);
        assert_eq!(rec.rows.last().unwrap().step, 503);
        assert_eq!(rec.rows.len(), 12);
    }

    #[test]
    fn sync_run_counts_two_per_edge_per_round() {
        let g = ring(5);
        let loc = Matrix::from_column(&[1.0, 0.0, 0.0, 0.0, 0.0]);
        let c = vec![1.0; 5];
        let mut net = MpNetwork::new(&g, &loc, &c, MpConfig::new(0.5).unwrap()).unwrap();
        let rec = run_sync(&mut net, 7, 2, serde_json::Value::Null, mean_model).unwrap();
        let comms: Vec<u64> = rec.rows.iter().map(|r| r.communications).collect();
        assert_eq!(comms, vec![0, 20, 40, 60, 70]);
    }

    #[test]
    fn zero_sampling_interval_is_rejected() {
        let g = ring(3);
        let loc = Matrix::from_column(&[1.0, 0.0, 0.0]);
        let c = vec![1.0; 3];
        let mut net = MpNetwork::new(&g, &loc, &c, MpConfig::new(0.5).unwrap()).unwrap();
        assert!(run_sync(&mut net, 1, 0, serde_json::Value::Null, mean_model).is_err());
    }
}
