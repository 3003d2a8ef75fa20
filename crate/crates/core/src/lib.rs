//! Stein's method for the Laplace distribution.
//!
//! The crate solves the second-order Stein equation for `Laplace(0, b)`,
//! samples the bias transforms that characterize the law, estimates
//! distances between samples and Laplace targets, and evaluates explicit
//! convergence bounds for geometric (and general) random sums.

pub mod cli;
pub mod error;
pub mod laplace;
pub mod metrics;
pub mod quadrature;
pub mod random_sums;
pub mod report;
pub mod rng;
pub mod source;
pub mod stats;
pub mod stein;
pub mod transforms;

pub use error::{Error, Result};
pub use laplace::LaplaceParams;
pub use metrics::{DistanceEstimate, DistanceKind, EmpiricalSample};
pub use random_sums::{BoundKind, BoundReport, Coupling, IndexLaw, RandomSumSpec, Summands};
pub use source::{SourceDistribution, SourceShape};
pub use stein::{SteinSolution, TestFunction};
