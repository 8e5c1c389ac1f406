//! Tabular anomaly-detection toolkit with feature-importance fusion.
//!
//! The crate trains classifiers on tabular data ([`models`]), explains them
//! with exact interventional Shapley values, local linear surrogates, and
//! permutation importance ([`explainers`]), fuses the resulting rankings with
//! a weighted point scheme in two levels ([`fusion`]), and evaluates fused
//! feature subsets on held-out data ([`evaluation`]). [`pipeline`] wires the
//! stages together behind a JSON configuration.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod explainers;
pub mod fixtures;
pub mod fusion;
pub mod models;
mod par;
pub mod pipeline;
pub mod seed;

pub use error::{Error, Result};
