//! Differential temporal-difference learning for Markov chains with smooth
//! dynamics.
//!
//! The crate is organized bottom-up:
//!
//! * [`dynamics`]: the Markov model contract `X(t+1) = a(X(t), N(t+1))`,
//!   seeded noise streams, trajectories and the sensitivity process.
//! * [`models`]: concrete chains (scalar AR(1), speed-scaling queue,
//!   Ornstein–Uhlenbeck) together with their closed-form value oracles.
//! * [`features`]: linear feature bases and differentiable nonlinear families.
//! * [`estimators`]: LSTD, ∇-LSTD, TD-K(λ), regenerative LSTD, nonlinear ∇-TD
//!   and the continuous-time ∇-LSTD, each an online state machine.
//! * [`harness`]: replication, statistics, Bellman error, CSV output and the
//!   configuration format used by the `difftd` binary.

pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod features;
pub mod harness;
pub mod models;

pub use error::{Error, Result};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
