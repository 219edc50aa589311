//! Interim envy-free (iEF) lotteries over matchings.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: instances, matchings, allocations, lotteries and welfare.
//! * [`fairness`]: exact and float checkers for EF, proportionality, iEF,
//!   ex-ante/ex-post EF, min-max share, epistemic EF and maximum envy.
//! * [`twoebm`]: the edge-pair-weighted perfect matching problem (2EBM), its
//!   LP relaxation over centro-symmetric doubly stochastic matrices, and a
//!   classical assignment solver.
//! * [`lpengine`]: a dense simplex and a column-generation master with a
//!   pluggable pricing oracle.
//! * [`welfare_opt`]: welfare-maximizing iEF lotteries.
//! * [`payments`]: interim envy graphs, A/B/C payment schemes, subsidy
//!   minimization and rent-constrained utility maximization.
//! * [`testkit`]: brute-force oracles, the fixture catalogue and instance
//!   families used by the tests and the experiment harness.

pub mod error;
pub mod fairness;
pub mod lpengine;
pub mod model;
pub mod payments;
pub mod testkit;
pub mod twoebm;
pub mod welfare_opt;

pub use error::{Error, Result};
pub use model::{Allocation, Instance, Lottery, Matching, Num, Objective, Rat, Scalar, WelfareMeasure};
