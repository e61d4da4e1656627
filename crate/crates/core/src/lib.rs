//! Risk-sensitive control of the probability of lifetime ruin.
//!
//! The crate solves the limiting zero-sum differential game in closed form
//! ([`game`]), checks it against an independent discrete dynamic program
//! ([`oracle`]) and estimates the prelimit risk-sensitive cost of a feedback
//! policy by Monte Carlo ([`sde`]).
//!
//! ```
//! use ruingame_core::model::{MarketParams, Problem, Shape};
//! use ruingame_core::game::GameSolution;
//!
//! let market = MarketParams { mu: 0.08, r: 0.02, sigma: 0.2, lambda: 0.04, rho: 1.0, a: 1.0 };
//! let problem = Problem::new(market, Shape::constant(0.5), Shape::constant(0.0)).unwrap();
//! let game = GameSolution::solve(&problem);
//! assert!((game.value(2.0).unwrap() - 0.83).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` rejects NaN too.

pub mod error;
pub mod exec;
pub mod game;
pub mod model;
pub mod ode;
pub mod oracle;
pub mod policy;
pub mod quadrature;
pub mod report;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Execution;
pub use game::GameSolution;
pub use model::{Level, MarketParams, Problem, ScalarFunction, Shape, ValidationReport};
pub use policy::{FeedbackPolicy, PolicySpec};
pub use sde::{Crossing, Estimator, SimConfig, SimEstimate};
