//! Thresholded scaled Lasso for high-dimensional threshold regression.
//!
//! The model is `Y = X'β + X'δ·1{Q < τ} + U`. For each candidate `τ` the
//! coefficients `α = (β', δ')'` are estimated by a Lasso whose penalty on
//! each coefficient is weighted by the empirical norm of its design column.
//! `τ` is profiled over a grid, `λ` is selected by BIC along a geometric path
//! and the resulting estimate is hard-thresholded to recover the exact support
//! and to decide whether a break is present at all.
//!
//! Module map:
//!
//! - [`model`]: datasets, the augmented threshold design, column scalings.
//! - [`solver`]: weighted Lasso by cyclic coordinate descent plus KKT checks.
//! - [`estimator`]: τ grid, profiling, τ̂ tie-break, λ path and BIC selection.
//! - [`selector`]: tuning formula, hard thresholding, BIC choice of `C`.
//! - [`equicorr`]: closed-form equicorrelation inverses and sup-norm bounds.
//! - [`montecarlo`]: simulation designs, replications and summaries.
//! - [`growth`]: panel growth-regression pipeline.

pub mod equicorr;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod growth;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod pipeline;
pub mod selector;
pub mod solver;

pub use error::{Error, Result};
pub use estimator::{GridSpec, PathOptions, ProfilePoint, TauGrid, ThresholdRegressionFit};
pub use exec::Execution;
pub use model::{Dataset, InterceptMode, Layout, ThresholdDesign, TrueModel};
pub use pipeline::{estimate, FitOptions, LambdaChoice};
pub use selector::{ThresholdRule, ThresholdedFit};
pub use solver::{LassoFit, LassoProblem, SolverOptions};
