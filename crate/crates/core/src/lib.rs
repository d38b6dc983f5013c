//! Deciding which nodes to remove from a network when every node is only
//! *probably* malicious.
//!
//! A removal decision `s ∈ {0,1}^N` is scored by an expected loss made of
//! three parts: benign nodes removed, benign links cut, and links left
//! between surviving malicious and benign nodes. The crate builds the loss
//! matrices from a graph and a maliciousness model, and minimizes the loss
//! two ways:
//!
//! * [`pgd`]: projected gradient descent over the unit hypercube with
//!   magnitude balancing, geometric step sizes and random restarts;
//! * [`relax`]: an exact solve of the ball-constrained relaxation (a
//!   trust-region subproblem whose value equals the semidefinite
//!   relaxation bound), followed by projection or hyperplane rounding.
//!
//! [`oracle`] enumerates all decisions for small instances and is what
//! both solvers are checked against. [`baseline`] is the network-blind
//! threshold rule.

pub mod baseline;
pub mod error;
pub mod graph;
pub mod loss;
pub mod numerics;
pub mod oracle;
pub mod pgd;
pub mod relax;
pub mod uncertainty;

pub use error::{Error, Result};
pub use graph::Graph;
pub use loss::{LossMatrices, LossWeights, QpForm};
pub use numerics::{Matrix, RngStream, Vector};
pub use uncertainty::{Configuration, MaliciousnessModel};
