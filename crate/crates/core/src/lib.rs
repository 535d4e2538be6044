//! Numerical pipeline for the statistical stability of Lorenz-type systems.
//!
//! The library covers the full chain from the three-dimensional flow down to
//! one-dimensional statistics and back up:
//!
//! - [`lorenz_ode`]: the classical vector field, Poincare-section crossings
//!   and the Gronwall closeness bound for C^1 perturbations;
//! - [`onedim_maps`]: a concrete family of piecewise expanding Lorenz maps
//!   `T_eps` with closed-form branches, derivatives and inverses;
//! - [`function_space`]: grid functions, oscillation seminorms and bounded
//!   p-variation;
//! - [`transfer_operator`]: Ulam discretization, invariant densities,
//!   Lasota-Yorke probes and the strong-to-weak operator distance;
//! - [`statistics`]: Green-Kubo variance, empirical CLT and the variance
//!   continuity sweep;
//! - [`suspension_flow`]: the Poincare skew product, logarithmic roof,
//!   SRB averages and the flow variance ratio formula;
//! - [`experiments`] and [`config`]: the declarative experiment harness
//!   behind the CLI.

pub mod config;
pub mod error;
pub mod experiments;
pub mod function_space;
pub mod lorenz_ode;
pub mod onedim_maps;
pub mod statistics;
pub mod suspension_flow;
pub mod transfer_operator;

pub use error::{Error, Result};
