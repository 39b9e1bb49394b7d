//! Estimation followed by thresholding, as one call.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimator::{
    candidate_taus, fit_threshold_regression, lambda_path, select_lambda_bic, EstimatorOptions, GridSpec,
    ThresholdRegressionFit,
};
use crate::model::{rn_ratio, Dataset};
use crate::selector::{hard_threshold, select_c_bic, theoretical_lambda, CGrid, ThresholdRule, ThresholdedFit};

/// How λ is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum LambdaChoice {
    #[default]
    Bic,
    Fixed(f64),
    /// Tuning formula with constant `A`, `r_n` taken at the smallest grid point.
    Theoretical(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct FitOptions {
    pub grid: GridSpec,
    pub estimator: EstimatorOptions,
    pub c_grid: CGrid,
    pub rule: ThresholdRule,
    pub lambda: LambdaChoice,
    /// Skip the BIC search over C.
    pub fixed_c: Option<f64>,
}

/// Scaled Lasso over the τ grid, then hard thresholding.
pub fn estimate(dataset: &Dataset, opts: &FitOptions) -> Result<(ThresholdRegressionFit, ThresholdedFit)> {
    let grid = candidate_taus(dataset.q(), &opts.grid)?;
    let fit = match opts.lambda {
        LambdaChoice::Bic => {
            let path = lambda_path(dataset, &grid, opts.estimator.path.count, opts.estimator.path.ratio)?;
            select_lambda_bic(dataset, &grid, &path, &opts.estimator)?.1
        }
        LambdaChoice::Fixed(l) => fit_threshold_regression(dataset, l, &grid, &opts.estimator.solver)?,
        LambdaChoice::Theoretical(a) => {
            let r = rn_ratio(dataset, grid.values()[0])?;
            let l = theoretical_lambda(a, dataset.m(), dataset.n(), r.value)?;
            fit_threshold_regression(dataset, l, &grid, &opts.estimator.solver)?
        }
    };
    let thresholded = match opts.fixed_c {
        Some(c) => {
            let mut t = hard_threshold(&fit.alpha_hat, opts.rule.cutoff(c, fit.lambda), &fit.penalized, fit.layout);
            t.c = Some(c);
            t
        }
        None => select_c_bic(&fit, &opts.c_grid, dataset, opts.rule)?.1,
    };
    Ok((fit, thresholded))
}
