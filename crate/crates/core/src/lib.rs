//! Two-stage Bayesian model interpretation.
//!
//! Stage one fits a flexible regression model (Gaussian process or horseshoe
//! linear regression) and stores posterior draws of the fitted values. Stage
//! two summarizes those draws with lower-dimensional surrogates — sparse
//! linear, additive, partially additive, or local linear — each carrying a
//! projected posterior obtained by applying the summary-fitting map to every
//! posterior draw. Summary quality is tracked by the predictive-variance
//! ratio `R²_γ`, the interval-inflation factor `φ_γ`, and a regression tree
//! on the summary residuals that flags unmodeled interactions.

pub mod additive;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod gp;
pub mod horseshoe;
pub mod linalg;
pub mod linear;
pub mod search;
pub mod simulate;

pub use data::{
    Dataset, LoadOptions, ModelTag, PosteriorDraws, PredictiveLocations, SummaryLossConfig,
};
pub use error::{Error, Result};
