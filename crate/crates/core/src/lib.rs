//! Doubly robust estimation of the average causal effect with SCAD-based
//! selection of the adjustment set.
//!
//! The pipeline is: [`data::standardize`] the covariates,
//! [`selection::select_variables`] with penalized outcome and propensity
//! models, pick an adjustment set with [`selection::strategy_set`],
//! [`refit::build_refit`] unpenalized models on that set, and
//! [`aipw::estimate`] the effect with an influence-function standard error.
//! [`dgp`] and [`sim`] reproduce the Monte Carlo study built around it.

pub mod aipw;
pub mod data;
pub mod dgp;
pub mod error;
pub(crate) mod linalg;
pub mod pglm;
pub mod refit;
pub mod rng;
pub mod scad;
pub mod selection;
pub mod sim;

pub use data::{set_intersection, set_union, split_by_arm, standardize, ArmData, Dataset, IndexSet, Standardization};
pub use error::{Error, ModelKind, Result};
pub use scad::{scad_rate, scad_threshold, ScadParams};
