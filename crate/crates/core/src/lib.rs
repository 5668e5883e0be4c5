//! Iterative empirical-game solving with single-policy best responses.
//!
//! The crate builds an empirical normal-form game (ENFG) over policies that are
//! discovered by best-response oracles, and solves it with a meta-strategy solver
//! (MSS) each epoch. Three epoch loops are provided:
//!
//! * [`engine::Algorithm::Psro`]: train against opponents resampled from the
//!   current solution at every episode start.
//! * [`engine::Algorithm::MixedOracles`]: train only against the opponent's newest
//!   policy and build the response to the solution by Q-mixing stored responses.
//! * [`engine::Algorithm::MixedOpponents`]: collapse the opponent solution into a
//!   single Q-mixed opponent and train against it.
//!
//! Environments are matrix games ([`env::MatrixGameEnv`]) and two-player Leduc
//! poker ([`env::LeducEnv`]). Oracles are tabular Q-learning
//! ([`oracle::TabularQOracle`]) and an exact analytic oracle for matrix games
//! ([`oracle::ExactOracle`]).

pub mod config;
pub mod engine;
pub mod env;
pub mod error;
pub mod eval;
pub mod game;
pub mod harness;
pub mod hparam_search;
pub mod oracle;
pub mod policy;
pub mod qmix;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
