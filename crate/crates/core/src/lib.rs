//! Exact value functions and optimal allocations for CRRA investors in a
//! regime-switching bond/stock market.
//!
//! With power utility `U(x) = x^gamma / gamma` the value function factors as
//! `V(x, t, i) = U(x) g(i, T - t)`, where `g` solves a linear system driven by
//! the regime chain. [`laplace`] computes `g` exactly as an exponential sum;
//! [`oracles`] recomputes it by ODE integration, matrix exponential and
//! Monte Carlo; [`portfolio`] builds the value function, the optimal
//! strategy and the optimal wealth simulation on top.

pub mod cli;
pub mod config;
pub mod expsum;
pub mod laplace;
pub mod model;
pub mod oracles;
pub mod poly;
pub mod portfolio;
pub mod roots;
pub mod stats;

pub use expsum::{ExpTerm, ExponentialSum};
pub use laplace::{solve_g, LaplaceError, LaplaceSolution, PoleTerm};
pub use model::{GeneratorMatrix, MarketModel, ModelError, RegimeScalars};
pub use oracles::PathEstimate;
pub use portfolio::ValueSolution;
