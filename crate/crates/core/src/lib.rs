//! Stochastic proximal point method (SPPM) for composite problems
//! `min f(x) + h(x)` where only unbiased, bounded-variance stochastic gradients
//! of the strongly convex `f` are available.
//!
//! The pieces, bottom up:
//!
//! * [`problem`], [`prox`], [`noise`], [`oracle`]: the problem class, the
//!   stochastic gradient oracle and reproducible randomness ([`rng`]).
//! * [`solver`]: a deterministic proximal-point solver used as ground truth.
//! * [`pss`]: the proximal subproblem solver producing one candidate pair.
//! * [`select`]: second tertile selection, robust gradient estimation and the
//!   metrics they run on.
//! * [`booster`]: the probability booster choosing one pair among `n`.
//! * [`schedule`] and [`driver`]: parameter derivation and the outer loop.

pub mod booster;
pub mod driver;
pub mod error;
pub mod instances;
pub mod noise;
pub mod oracle;
pub mod problem;
pub mod prox;
pub mod pss;
pub mod rng;
pub mod schedule;
pub mod select;
pub mod solver;

/// A point of `R^d`.
pub type RealVector = nalgebra::DVector<f64>;

pub use booster::{pb, q_floor, tau_from_eps, PbConfig, PbOutcome};
pub use driver::{select_best, sgd_baseline, sppm_run, RunFailure, RunRecord};
pub use error::{Error, Result};
pub use noise::{NoiseFamily, NoiseModel};
pub use oracle::Oracle;
pub use problem::{CompositeProblem, Optimum, SmoothFunction};
pub use prox::Regularizer;
pub use pss::{alpha_floor, epsilon_k_bound, pss_run, CandidatePair, PssConfig};
pub use rng::RngStream;
pub use schedule::{derive_schedule, total_samples, Mode, Schedule};
pub use select::{bregman_dh, make_dh, rge, sts, DhParams, SelectionMetric, StsOutcome};
pub use solver::exact_prox_point;
