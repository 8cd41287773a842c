//! Generalized gamma and generalized F accelerated failure time models.

pub mod dist;
mod fit;
pub mod optim;

pub use dist::{AftDistribution, GfParams, GgParams, P_LIMIT, TAU_LIMIT};
pub use fit::{aft_fit, aft_fit_with, AftFamily, AftFit, AftLikelihood, AftOptions, WaldTest};
