//! Construction of ridgelet priors for Bayesian neural networks.
//!
//! A ridgelet prior is a distribution over the weights of a one-(or multi-)hidden-layer
//! network whose push-forward through the network approximates a user-chosen Gaussian
//! process `GP(m, k)`. The construction discretises the dual ridgelet transform with a
//! deterministic grid rule over input space and a Monte Carlo rule over weight space,
//! assembles the matrix `[Ψ]_{ij} = v_i u_j ψ(w_i·x_j + b_i)`, and draws output weights
//! from `N(Ψ m, Ψ K Ψᵀ)`.
//!
//! The crate also ships the surrounding experiment machinery: exact GP sampling and
//! regression, approximation-quality diagnostics (MRMSE, network covariance curves),
//! a two-stage posterior sampler (elliptical slice sampling over input weights plus
//! exact conditional Gaussian output-weight draws), dataset ingestion and the
//! config-driven experiment runners behind the `ridgelet` CLI.
//!
//! Interchangeable model families (covariance kernels, mean functions, activation/ψ
//! pairs, experiment pipelines) are trait objects selected by name at runtime; see
//! [`kernels::make_kernel`], [`activations::make_activation`] and
//! [`experiments::registry`].

pub mod activations;
pub mod config;
pub mod cubature;
pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod gp;
pub mod inference;
pub mod kernels;
pub mod linalg;
pub mod points;
pub mod prior;
pub mod report;
pub mod ridgelet;
pub mod rng;

pub use error::{Error, Result};
pub use points::PointSet;
