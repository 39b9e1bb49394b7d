//! Profiling the scaled Lasso over candidate thresholds and choosing λ.
//!
//! For a fixed λ, every candidate τ gets its own weighted Lasso fit. The
//! threshold estimate minimizes `S_n(α̂(τ), τ) + λ‖D(τ)α̂(τ)‖₁`, note the
//! penalty multiplier 1 here against 2 in the α-step, and ties go to the
//! largest τ. λ is then chosen along a geometric path by BIC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::linalg::{axpy, least_squares, quantile_sorted};
use crate::model::{build_design, mean_square, Dataset, Layout, ThresholdDesign};
use crate::solver::{fit_weighted_lasso_from, lambda_max, LassoFit, LassoProblem, SolverOptions};

/// How candidate thresholds are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GridSpec {
    /// Empirical quantiles of Q at centiles `lo, lo+step, …, hi`.
    Quantiles { lo: f64, hi: f64, step: f64 },
    /// Every distinct observed Q inside `[t0, t1]`.
    Exhaustive { t0: f64, t1: f64 },
    /// Fixed threshold values `lo, lo+step, …, hi`, independent of the sample.
    Values { lo: f64, hi: f64, step: f64 },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Quantiles {
            lo: 0.15,
            hi: 0.85,
            step: 0.05,
        }
    }
}

impl GridSpec {
    /// Parses `lo:hi:step`.
    pub fn parse_centiles(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidGrid(format!("expected lo:hi:step, got `{s}`")));
        }
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidGrid(format!("`{s}`: {e}")))?;
        Ok(GridSpec::Quantiles {
            lo: v[0],
            hi: v[1],
            step: v[2],
        })
    }
}

/// Evenly spaced `lo, lo+step, …, hi` without accumulated rounding.
pub(crate) fn stepped(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidGrid(format!("bad range {lo}:{hi}:{step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    values: Vec<f64>,
}

impl TauGrid {
    /// Sorts and de-duplicates; fails when nothing is left.
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite candidate".into()));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        if values.is_empty() {
            return Err(Error::EmptyTauGrid);
        }
        Ok(TauGrid { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn candidate_taus(q: &[f64], spec: &GridSpec) -> Result<TauGrid> {
    if q.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = q.to_vec();
    sorted.sort_by(f64::total_cmp);
    match *spec {
        GridSpec::Quantiles { lo, hi, step } => {
            if !(lo > 0.0 && hi < 1.0) {
                return Err(Error::InvalidGrid(format!("centiles must lie in (0,1), got {lo}..{hi}")));
            }
            let centiles = stepped(lo, hi, step)?;
            TauGrid::from_values(centiles.iter().map(|&p| quantile_sorted(&sorted, p)).collect())
        }
        GridSpec::Exhaustive { t0, t1 } => {
            TauGrid::from_values(sorted.into_iter().filter(|&v| v >= t0 && v <= t1).collect())
        }
        GridSpec::Values { lo, hi, step } => TauGrid::from_values(stepped(lo, hi, step)?),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub tau: f64,
    pub fit: LassoFit,
    /// `S_n(α̂(τ), τ) + λ‖D(τ)α̂(τ)‖₁`
    pub criterion: f64,
}

impl ProfilePoint {
    fn new(tau: f64, lambda: f64, fit: LassoFit) -> Self {
        let criterion = fit.rss_n + lambda * fit.weighted_l1;
        ProfilePoint { tau, fit, criterion }
    }
}

/// One λ of a BIC path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub tau_hat: f64,
    pub rss_n: f64,
    pub df: usize,
    pub bic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRegressionFit {
    pub alpha_hat: Vec<f64>,
    pub tau_hat: f64,
    pub tau_index: usize,
    pub lambda: f64,
    pub profile: Vec<ProfilePoint>,
    pub rss_n: f64,
    pub df: usize,
    pub bic: f64,
    /// `S_n` was floored before taking the log.
    pub bic_floored: bool,
    pub delta_hat_nonzero: bool,
    /// Every profile fit met the solver tolerances.
    pub all_converged: bool,
    pub layout: Layout,
    pub penalized: Vec<bool>,
    pub n: usize,
    /// Filled by [`select_lambda_bic`].
    pub path: Vec<PathPoint>,
}

impl ThresholdRegressionFit {
    pub fn beta_hat(&self) -> &[f64] {
        &self.alpha_hat[self.layout.beta()]
    }
    pub fn delta_hat(&self) -> &[f64] {
        &self.alpha_hat[self.layout.delta()]
    }
}

/// Options shared by every estimator entry point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct EstimatorOptions {
    pub solver: SolverOptions,
    pub path: PathOptions,
    /// Schedules the τ loop of [`select_lambda_bic`].
    pub exec: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathOptions {
    pub count: usize,
    pub ratio: f64,
    /// Stop descending once `1 − S_n/S_null` at τ̂ reaches this value.
    pub max_dev_ratio: Option<f64>,
    /// Stop descending once τ̂'s fit has this many nonzero penalized
    /// coefficients. Defaults to `n − (#unpenalized) − 1` when `None`.
    pub max_nonzero: Option<usize>,
    /// Stop after this many λ values that add parameters without improving
    /// the best BIC.
    pub patience: Option<usize>,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            count: 100,
            ratio: 0.001,
            max_dev_ratio: Some(0.999),
            max_nonzero: None,
            patience: Some(10),
        }
    }
}

pub const BIC_RSS_FLOOR: f64 = 1e-300;

/// `n·ln(S_n) + df·ln(n)`, with `S_n` floored so an interpolating fit stays finite.
pub fn bic(n: usize, rss_n: f64, df: usize) -> (f64, bool) {
    let floored = rss_n < BIC_RSS_FLOOR;
    let s = rss_n.max(BIC_RSS_FLOOR);
    let nf = n as f64;
    (nf * s.ln() + df as f64 * nf.ln(), floored)
}

pub fn build_designs(dataset: &Dataset, grid: &TauGrid) -> Vec<ThresholdDesign> {
    grid.values().iter().map(|&t| build_design(dataset, t)).collect()
}

/// Largest τ among the criterion minimizers; criteria within `1e-12`
/// relative of the minimum count as ties.
pub fn select_tau(profile: &[ProfilePoint]) -> (f64, usize) {
    let criteria: Vec<f64> = profile.iter().map(|p| p.criterion).collect();
    let idx = argmin_last(&criteria);
    (profile[idx].tau, idx)
}

pub(crate) fn argmin_last(values: &[f64]) -> usize {
    assert!(!values.is_empty(), "empty profile");
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * min.abs();
    values
        .iter()
        .rposition(|&c| c - min <= tol)
        .unwrap_or(0)
}

fn fit_one(
    design: &ThresholdDesign,
    dataset: &Dataset,
    lambda: f64,
    opts: &SolverOptions,
    start: Option<&[f64]>,
) -> Result<LassoFit> {
    let problem = LassoProblem::new(design, dataset.y(), lambda, dataset.penalized())?;
    fit_weighted_lasso_from(&problem, opts, start)
}

/// Fits every τ in order, warm-starting each from the previous grid point.
pub fn profile(dataset: &Dataset, lambda: f64, grid: &TauGrid, opts: &SolverOptions) -> Result<Vec<ProfilePoint>> {
    let designs = build_designs(dataset, grid);
    let mut out: Vec<ProfilePoint> = Vec::with_capacity(designs.len());
    for design in &designs {
        let start = out.last().map(|p| p.fit.alpha.clone()).or_else(|| opts.initial.clone());
        let fit = fit_one(design, dataset, lambda, opts, start.as_deref())?;
        out.push(ProfilePoint::new(design.tau(), lambda, fit));
    }
    Ok(out)
}

/// Every τ from a cold start; grid points are independent and may run concurrently.
pub fn profile_cold(
    dataset: &Dataset,
    lambda: f64,
    grid: &TauGrid,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<Vec<ProfilePoint>> {
    let designs = build_designs(dataset, grid);
    map_indexed(exec, designs.len(), |g| {
        fit_one(&designs[g], dataset, lambda, opts, None).map(|fit| ProfilePoint::new(designs[g].tau(), lambda, fit))
    })
    .into_iter()
    .collect()
}

fn penalized_nonzero(alpha: &[f64], penalized: &[bool]) -> usize {
    alpha
        .iter()
        .zip(penalized)
        .filter(|(&a, &p)| p && a != 0.0)
        .count()
}

fn delta_nonzero(alpha: &[f64], penalized: &[bool], layout: Layout) -> bool {
    layout.delta().any(|j| penalized[j] && alpha[j] != 0.0)
}

/// Degrees of freedom charged by the λ-BIC: nonzero penalized coefficients,
/// every estimable unpenalized column, and one for τ when δ̂ ≠ 0.
pub fn lambda_bic_df(alpha: &[f64], penalized: &[bool], scaling: &[f64], layout: Layout) -> usize {
    let free = penalized
        .iter()
        .zip(scaling)
        .filter(|(&p, &s)| !p && s > 0.0)
        .count();
    penalized_nonzero(alpha, penalized) + free + usize::from(delta_nonzero(alpha, penalized, layout))
}

fn assemble(dataset: &Dataset, designs: &[ThresholdDesign], lambda: f64, profile: Vec<ProfilePoint>) -> ThresholdRegressionFit {
    let (tau_hat, idx) = select_tau(&profile);
    let layout = dataset.layout();
    let penalized = dataset.penalized().to_vec();
    let best = &profile[idx].fit;
    let df = lambda_bic_df(&best.alpha, &penalized, designs[idx].scaling(), layout);
    let (bic_value, floored) = bic(dataset.n(), best.rss_n, df);
    ThresholdRegressionFit {
        alpha_hat: best.alpha.clone(),
        rss_n: best.rss_n,
        tau_hat,
        tau_index: idx,
        lambda,
        df,
        bic: bic_value,
        bic_floored: floored,
        delta_hat_nonzero: delta_nonzero(&best.alpha, &penalized, layout),
        all_converged: profile.iter().all(|p| p.fit.converged),
        layout,
        n: dataset.n(),
        penalized,
        profile,
        path: Vec::new(),
    }
}

/// Profile plus τ̂ selection at a single λ.
pub fn fit_threshold_regression(
    dataset: &Dataset,
    lambda: f64,
    grid: &TauGrid,
    opts: &SolverOptions,
) -> Result<ThresholdRegressionFit> {
    let designs = build_designs(dataset, grid);
    let prof = profile(dataset, lambda, grid, opts)?;
    let fit = assemble(dataset, &designs, lambda, prof);
    if !fit.all_converged {
        log::warn!("threshold regression at lambda={lambda}: some profile fits did not converge");
    }
    Ok(fit)
}

/// Geometric sequence of `count` values from `λ_top` down to `ratio·λ_top`.
pub fn geometric_path(top: f64, count: usize, ratio: f64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidParameter("lambda path needs at least one point".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("path ratio must be in (0,1), got {ratio}")));
    }
    if top == 0.0 {
        return Ok(vec![0.0]);
    }
    if count == 1 {
        return Ok(vec![top]);
    }
    let step = ratio.ln() / (count - 1) as f64;
    Ok((0..count)
        .map(|i| if i == 0 { top } else { top * (step * i as f64).exp() })
        .collect())
}

fn lambda_top(dataset: &Dataset, designs: &[ThresholdDesign]) -> Result<f64> {
    let mut top = 0.0f64;
    let mut any = false;
    for d in designs {
        let problem = LassoProblem::new(d, dataset.y(), 0.0, dataset.penalized())?;
        match lambda_max(d, dataset.y(), problem.weights(), dataset.penalized()) {
            Ok(v) => {
                any = true;
                top = top.max(v);
            }
            Err(Error::NoPenalizedColumns) => {}
            Err(e) => return Err(e),
        }
    }
    if !any {
        return Err(Error::NoPenalizedColumns);
    }
    Ok(top)
}

/// Descending λ path starting at the largest `lambda_max` over the grid.
pub fn lambda_path(dataset: &Dataset, grid: &TauGrid, count: usize, ratio: f64) -> Result<Vec<f64>> {
    let designs = build_designs(dataset, grid);
    geometric_path(lambda_top(dataset, &designs)?, count, ratio)
}

/// `S_null`: residual mean square of Y on the unpenalized columns alone.
fn null_rss(design: &ThresholdDesign, dataset: &Dataset) -> f64 {
    let free: Vec<usize> = (0..design.layout().width())
        .filter(|&j| !dataset.penalized()[j] && design.scaling()[j] > 0.0)
        .collect();
    let mut r = dataset.y().to_vec();
    if !free.is_empty() {
        let coef = least_squares(design.columns(), &free, dataset.y());
        for (&j, &b) in free.iter().zip(&coef) {
            axpy(-b, design.columns().col(j), &mut r);
        }
    }
    mean_square(&r)
}

/// Fits the threshold regression at every λ of `path` (each τ warm-started
/// from the same τ at the previous λ), and returns the BIC minimizer. On
/// ties the larger λ wins.
///
/// The descent stops early once the fit at τ̂ saturates, see [`PathOptions`].
pub fn select_lambda_bic(
    dataset: &Dataset,
    grid: &TauGrid,
    path: &[f64],
    opts: &EstimatorOptions,
) -> Result<(f64, ThresholdRegressionFit)> {
    if path.is_empty() {
        return Err(Error::InvalidParameter("empty lambda path".into()));
    }
    let designs = build_designs(dataset, grid);
    let null: Vec<f64> = designs.iter().map(|d| null_rss(d, dataset)).collect();
    let unpenalized = dataset.penalized().iter().filter(|p| !**p).count();
    let max_nonzero = opts
        .path
        .max_nonzero
        .unwrap_or_else(|| dataset.n().saturating_sub(unpenalized + 1));

    let mut warm: Vec<Option<Vec<f64>>> = vec![opts.solver.initial.clone(); designs.len()];
    let mut best: Option<ThresholdRegressionFit> = None;
    let mut trace = Vec::with_capacity(path.len());
    let mut since_best = 0usize;

    for &lambda in path {
        let fits: Vec<Result<LassoFit>> = map_indexed(opts.exec, designs.len(), |g| {
            fit_one(&designs[g], dataset, lambda, &opts.solver, warm[g].as_deref())
        });
        let mut prof = Vec::with_capacity(designs.len());
        for (g, f) in fits.into_iter().enumerate() {
            let f = f?;
            warm[g] = Some(f.alpha.clone());
            prof.push(ProfilePoint::new(designs[g].tau(), lambda, f));
        }
        let fit = assemble(dataset, &designs, lambda, prof);
        trace.push(PathPoint {
            lambda,
            tau_hat: fit.tau_hat,
            rss_n: fit.rss_n,
            df: fit.df,
            bic: fit.bic,
        });
        let saturated = {
            let dev = if null[fit.tau_index] > 0.0 {
                1.0 - fit.rss_n / null[fit.tau_index]
            } else {
                1.0
            };
            opts.path.max_dev_ratio.is_some_and(|cap| dev >= cap)
                || penalized_nonzero(&fit.alpha_hat, &fit.penalized) >= max_nonzero
        };
        match &best {
            Some(b) if fit.bic >= b.bic => {
                if fit.df > b.df {
                    since_best += 1;
                }
            }
            _ => {
                best = Some(fit);
                since_best = 0;
            }
        }
        if saturated || opts.path.patience.is_some_and(|k| since_best >= k) {
            break;
        }
    }
    let mut best = best.expect("nonempty path");
    if best.bic_floored {
        log::warn!("BIC: residual sum of squares floored at {BIC_RSS_FLOOR}");
    }
    best.path = trace;
    Ok((best.lambda, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fake_point(tau: f64, criterion: f64) -> ProfilePoint {
        ProfilePoint {
            tau,
            criterion,
            fit: LassoFit {
                alpha: vec![],
                objective: criterion,
                rss_n: criterion,
                weighted_l1: 0.0,
                iterations: 0,
                converged: true,
                kkt_violation: 0.0,
                pinned_unpenalized: vec![],
                objective_trace: vec![],
            },
        }
    }

    #[test]
    fn value_grid_ignores_sample() {
        let spec = GridSpec::Values { lo: 0.15, hi: 0.85, step: 0.05 };
        let g = candidate_taus(&[3.0, 4.0], &spec).unwrap();
        assert_eq!(g.len(), 15);
        assert!((g.values()[7] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quantile_grid_has_fifteen_points() {
        let q: Vec<f64> = (0..200).map(|i| ((i * 7919) % 200) as f64 / 200.0).collect();
        let grid = candidate_taus(&q, &GridSpec::default()).unwrap();
        assert_eq!(grid.len(), 15);
        assert!(grid.values().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn constant_q_collapses_grid() {
        let grid = candidate_taus(&[0.1; 10], &GridSpec::default()).unwrap();
        assert_eq!(grid.values(), &[0.1]);
    }

    #[test]
    fn exhaustive_grid() {
        let q = [0.5, 0.1, 0.9, 0.5, 0.3];
        let g = candidate_taus(&q, &GridSpec::Exhaustive { t0: 0.0, t1: 1.0 }).unwrap();
        assert_eq!(g.values(), &[0.1, 0.3, 0.5, 0.9]);
        let g = candidate_taus(&q, &GridSpec::Exhaustive { t0: 0.2, t1: 0.6 }).unwrap();
        assert_eq!(g.values(), &[0.3, 0.5]);
        assert!(matches!(
            candidate_taus(&q, &GridSpec::Exhaustive { t0: 0.95, t1: 1.0 }),
            Err(Error::EmptyTauGrid)
        ));
        assert!(candidate_taus(&q, &GridSpec::Quantiles { lo: 0.0, hi: 0.5, step: 0.1 }).is_err());
    }

    #[test]
    fn parse_centile_spec() {
        assert_eq!(GridSpec::parse_centiles("0.15:0.85:0.05").unwrap(), GridSpec::default());
        assert!(GridSpec::parse_centiles("0.1:0.2").is_err());
        assert!(GridSpec::parse_centiles("a:b:c").is_err());
    }

    #[test]
    fn tau_tie_break() {
        let convex: Vec<_> = [0.2, 0.3, 0.4, 0.5].iter().zip([3.0, 1.0, 2.0, 4.0]).map(|(&t, c)| fake_point(t, c)).collect();
        assert_eq!(select_tau(&convex), (0.3, 1));
        let flat: Vec<_> = [0.2, 0.3, 0.4].iter().map(|&t| fake_point(t, 1.0)).collect();
        assert_eq!(select_tau(&flat), (0.4, 2));
        let two: Vec<_> = [0.3, 0.45, 0.6, 0.7].iter().zip([1.0, 2.0, 1.0, 3.0]).map(|(&t, c)| fake_point(t, c)).collect();
        assert_eq!(select_tau(&two), (0.6, 2));
    }

    #[test]
    fn geometric_path_shapes() {
        assert_eq!(geometric_path(2.0, 1, 0.01).unwrap(), vec![2.0]);
        let p = geometric_path(2.0, 3, 0.01).unwrap();
        assert!((p[0] - 2.0).abs() < 1e-15);
        assert!((p[1] - 0.2).abs() < 1e-12);
        assert!((p[2] - 0.02).abs() < 1e-12);
        assert_eq!(geometric_path(0.0, 10, 0.01).unwrap(), vec![0.0]);
        assert!(geometric_path(1.0, 0, 0.5).is_err());
        assert!(geometric_path(1.0, 5, 1.0).is_err());
    }

    #[test]
    fn single_column_lambda_top() {
        let ds = Dataset::new(vec![vec![1.0; 4]], vec![2.0; 4], vec![0.9; 4]).unwrap();
        let grid = TauGrid::from_values(vec![0.5]).unwrap();
        let path = lambda_path(&ds, &grid, 1, 0.5).unwrap();
        assert!((path[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bic_floor() {
        let (v, floored) = bic(10, 0.0, 2);
        assert!(v.is_finite());
        assert!(floored);
        let (v, floored) = bic(10, 1.0, 2);
        assert!((v - 2.0 * 10f64.ln()).abs() < 1e-12);
        assert!(!floored);
    }

    proptest! {
        #[test]
        fn select_tau_scale_invariant(
            crit in proptest::collection::vec(prop_oneof![Just(1.0f64), Just(2.0), 0.5f64..3.0], 1..12),
            c in prop_oneof![Just(0.5f64), Just(2.0), Just(4.0), 0.1f64..10.0],
        ) {
            let pts: Vec<_> = crit.iter().enumerate().map(|(i, &v)| fake_point(i as f64, v)).collect();
            let scaled: Vec<_> = crit.iter().enumerate().map(|(i, &v)| fake_point(i as f64, c * v)).collect();
            prop_assert_eq!(select_tau(&pts), select_tau(&scaled));
            let (_, idx) = select_tau(&pts);
            prop_assert!(crit.iter().all(|&v| crit[idx] <= v + 1e-12 * crit[idx]));
        }
    }
}
