// SPDX-License-Identifier: Apache-2.0

//! Decentralized collaborative learning of personalized models.
//!
//! Agents sit on a weighted similarity graph and each want a model suited
//! to its own objective. Two gossip algorithms are provided:
//!
//! - [`mp`]: model propagation, which smooths pre-trained solitary models
//!   over the graph while weighting each agent by its confidence;
//! - [`admm`]: collaborative learning, which jointly fits local losses and
//!   graph smoothness with asynchronous decentralized ADMM.
//!
//! [`simulator`] drives either protocol under random single-agent
//! activations with exact communication accounting, and [`harness`] hosts
//! the experiment pipelines behind the `peerlearn` CLI.

// Validation uses `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod admm;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod mp;
pub mod rng;
pub mod simulator;
pub mod tasks;

pub use error::{Error, Result};
pub use graph::Graph;
pub use linalg::Matrix;
pub use tasks::{LossKind, ProblemInstance};
