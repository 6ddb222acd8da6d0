//! Regional hurricane and tropical-storm damage model.
//!
//! Three conditionally independent submodels share one location graph:
//! storm counts follow a seasonal non-homogeneous Poisson process, storm
//! paths follow an autologistic model restricted to LOS-connected location
//! sets, and per-location damages are lognormal with phase-specific spatial
//! effects and a per-storm severity effect. Posterior draws feed a predictive
//! simulator and empirical premium pricing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod count;
pub mod damage;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod lognormal;
pub mod mcar;
pub mod mcmc;
pub mod path;
pub mod predict;
pub mod pricing;
pub mod quadrature;
pub mod simstudy;

pub use error::{Error, Result};
