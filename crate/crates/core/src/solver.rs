//! Column-norm weighted Lasso for a fixed τ.
//!
//! Minimizes `n⁻¹‖Y − X(τ)α‖² + 2λ Σ_j w_j |α_j|` by cyclic coordinate
//! descent. The residual is maintained incrementally, one `n`-vector update
//! per coordinate that moves. After a full sweep the solver iterates on the
//! active set only, and it declares convergence only after a full sweep with
//! coefficient change below `coef_tol` and a KKT violation below `kkt_tol`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, least_squares};
use crate::model::ThresholdDesign;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_sweeps: usize,
    pub coef_tol: f64,
    pub kkt_tol: f64,
    /// Warm start. Must have the design's width when set.
    #[serde(skip)]
    pub initial: Option<Vec<f64>>,
    /// Record the objective after every sweep into [`LassoFit::objective_trace`].
    #[serde(skip)]
    pub trace_objective: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_sweeps: 100_000,
            coef_tol: 1e-8,
            kkt_tol: 1e-6,
            initial: None,
            trace_objective: false,
        }
    }
}

/// One weighted Lasso problem. Weights default to the design scaling on
/// penalized columns and zero elsewhere.
#[derive(Debug, Clone)]
pub struct LassoProblem<'a> {
    design: &'a ThresholdDesign,
    y: &'a [f64],
    lambda: f64,
    weights: Vec<f64>,
    penalized: Vec<bool>,
}

impl<'a> LassoProblem<'a> {
    pub fn new(design: &'a ThresholdDesign, y: &'a [f64], lambda: f64, penalized: &[bool]) -> Result<Self> {
        let p = design.layout().width();
        if penalized.len() != p {
            return Err(Error::InvalidParameter(format!(
                "penalization mask has {} entries, design has {p}",
                penalized.len()
            )));
        }
        let weights = design
            .scaling()
            .iter()
            .zip(penalized)
            .map(|(&s, &pen)| if pen { s } else { 0.0 })
            .collect();
        Self::with_weights(design, y, lambda, weights, penalized)
    }

    pub fn with_weights(
        design: &'a ThresholdDesign,
        y: &'a [f64],
        lambda: f64,
        weights: Vec<f64>,
        penalized: &[bool],
    ) -> Result<Self> {
        let p = design.layout().width();
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if y.len() != design.n() {
            return Err(Error::InvalidParameter("response length mismatch".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        if weights.len() != p || penalized.len() != p {
            return Err(Error::InvalidParameter("weights/mask length mismatch".into()));
        }
        for (j, (&w, &pen)) in weights.iter().zip(penalized).enumerate() {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!("weight {j} is {w}")));
            }
            if !pen && w != 0.0 {
                return Err(Error::InvalidParameter(format!("unpenalized column {j} has weight {w}")));
            }
        }
        Ok(LassoProblem {
            design,
            y,
            lambda,
            weights,
            penalized: penalized.to_vec(),
        })
    }

    pub fn design(&self) -> &ThresholdDesign {
        self.design
    }
    pub fn y(&self) -> &[f64] {
        self.y
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn penalized(&self) -> &[bool] {
        &self.penalized
    }

    /// `Σ_j w_j |α_j|`
    pub fn weighted_l1(&self, alpha: &[f64]) -> f64 {
        self.weights.iter().zip(alpha).map(|(w, a)| w * a.abs()).sum()
    }

    /// `S_n(α, τ) = ‖Y − X(τ)α‖²_n`
    pub fn rss_n(&self, alpha: &[f64]) -> f64 {
        let fitted = self.design.columns().mul_vec(alpha);
        let n = self.y.len() as f64;
        self.y
            .iter()
            .zip(&fitted)
            .map(|(y, f)| (y - f) * (y - f))
            .sum::<f64>()
            / n
    }

    pub fn objective(&self, alpha: &[f64]) -> f64 {
        self.rss_n(alpha) + 2.0 * self.lambda * self.weighted_l1(alpha)
    }

    pub fn lambda_max(&self) -> Result<f64> {
        lambda_max(self.design, self.y, &self.weights, &self.penalized)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub alpha: Vec<f64>,
    /// `S_n + 2λ Σ w_j|α_j|`
    pub objective: f64,
    pub rss_n: f64,
    /// `Σ w_j|α_j|`
    pub weighted_l1: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_violation: f64,
    /// Unpenalized columns with zero norm, pinned at zero.
    pub pinned_unpenalized: Vec<usize>,
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// A coordinate or a `(β_j, δ_j)` pair updated jointly.
#[derive(Debug, Clone, Copy)]
enum Unit {
    Single(usize),
    /// Columns `a`, `b` and their cross product `x_a'x_b / n`.
    Pair(usize, usize, f64),
}

/// Exact minimizer of `½v'Gv − g'v + t_a|v_a| + t_b|v_b|` with
/// `G = [[sa, c], [c, sb]]` positive definite. `None` when no case checks out
/// numerically.
fn pair_lasso(sa: f64, sb: f64, c: f64, ga: f64, gb: f64, ta: f64, tb: f64) -> Option<(f64, f64)> {
    let slack = 1e-12 * (ga.abs() + gb.abs() + ta + tb);
    // one coordinate held at zero
    if ga.abs() <= ta && gb.abs() <= tb {
        return Some((0.0, 0.0));
    }
    let a = soft_threshold(ga, ta) / sa;
    if a != 0.0 && (gb - c * a).abs() <= tb + slack {
        return Some((a, 0.0));
    }
    let b = soft_threshold(gb, tb) / sb;
    if b != 0.0 && (ga - c * b).abs() <= ta + slack {
        return Some((0.0, b));
    }
    let det = sa * sb - c * c;
    if !(det > 1e-12 * sa * sb) {
        return None;
    }
    let sign_ok = |v: f64, sigma: f64, t: f64| t == 0.0 || v * sigma > 0.0;
    for sig_a in [1.0, -1.0] {
        for sig_b in [1.0, -1.0] {
            let (ra, rb) = (ga - ta * sig_a, gb - tb * sig_b);
            let a = (sb * ra - c * rb) / det;
            let b = (sa * rb - c * ra) / det;
            if sign_ok(a, sig_a, ta) && sign_ok(b, sig_b, tb) {
                return Some((a, b));
            }
            if tb == 0.0 {
                break;
            }
        }
        if ta == 0.0 {
            break;
        }
    }
    None
}

struct State<'p> {
    cols: &'p crate::linalg::ColMatrix,
    col_sq: Vec<f64>,
    thresh: Vec<f64>,
    inv_n: f64,
    alpha: Vec<f64>,
    resid: Vec<f64>,
}

impl State<'_> {
    fn update_single(&mut self, j: usize) -> f64 {
        let x = self.cols.col(j);
        let old = self.alpha[j];
        let z = self.inv_n * dot(x, &self.resid) + self.col_sq[j] * old;
        let new = soft_threshold(z, self.thresh[j]) / self.col_sq[j];
        let delta = new - old;
        if delta != 0.0 {
            axpy(-delta, x, &mut self.resid);
            self.alpha[j] = new;
        }
        delta.abs()
    }

    fn update_pair(&mut self, a: usize, b: usize, c: f64) -> f64 {
        let (xa, xb) = (self.cols.col(a), self.cols.col(b));
        let (oa, ob) = (self.alpha[a], self.alpha[b]);
        let (sa, sb) = (self.col_sq[a], self.col_sq[b]);
        let ga = self.inv_n * dot(xa, &self.resid) + sa * oa + c * ob;
        let gb = self.inv_n * dot(xb, &self.resid) + c * oa + sb * ob;
        match pair_lasso(sa, sb, c, ga, gb, self.thresh[a], self.thresh[b]) {
            Some((na, nb)) => {
                let (da, db) = (na - oa, nb - ob);
                if da != 0.0 {
                    axpy(-da, xa, &mut self.resid);
                    self.alpha[a] = na;
                }
                if db != 0.0 {
                    axpy(-db, xb, &mut self.resid);
                    self.alpha[b] = nb;
                }
                da.abs().max(db.abs())
            }
            None => self.update_single(a).max(self.update_single(b)),
        }
    }

    /// One pass over `units`; returns the largest absolute coefficient change.
    fn sweep(&mut self, units: &[Unit]) -> f64 {
        let mut max_change = 0.0f64;
        for &u in units {
            let d = match u {
                Unit::Single(j) => self.update_single(j),
                Unit::Pair(a, b, c) => self.update_pair(a, b, c),
            };
            max_change = max_change.max(d);
        }
        max_change
    }

    fn objective(&self, lambda_weights: &[f64]) -> f64 {
        let rss = self.inv_n * dot(&self.resid, &self.resid);
        rss + 2.0
            * lambda_weights
                .iter()
                .zip(&self.alpha)
                .map(|(t, a)| t * a.abs())
                .sum::<f64>()
    }

    fn finite(&self) -> bool {
        self.alpha.iter().all(|a| a.is_finite()) && self.resid.iter().all(|r| r.is_finite())
    }
}

pub fn fit_weighted_lasso(problem: &LassoProblem<'_>, opts: &SolverOptions) -> Result<LassoFit> {
    fit_weighted_lasso_from(problem, opts, opts.initial.as_deref())
}

/// Like [`fit_weighted_lasso`] with an explicit warm start.
pub fn fit_weighted_lasso_from(
    problem: &LassoProblem<'_>,
    opts: &SolverOptions,
    start: Option<&[f64]>,
) -> Result<LassoFit> {
    let design = problem.design;
    let cols = design.columns();
    let n = design.n();
    let p = cols.ncols();
    let inv_n = 1.0 / n as f64;

    let col_sq: Vec<f64> = (0..p).map(|j| inv_n * dot(cols.col(j), cols.col(j))).collect();
    let pinned: Vec<bool> = col_sq.iter().map(|&c| c == 0.0).collect();
    let pinned_unpenalized: Vec<usize> = (0..p).filter(|&j| pinned[j] && !problem.penalized[j]).collect();
    let layout = design.layout();
    let mut movable: Vec<Unit> = Vec::with_capacity(p);
    for j in 0..p {
        if pinned[j] {
            continue;
        }
        if layout.beta().contains(&j) && !pinned[j + layout.m] {
            let k = j + layout.m;
            movable.push(Unit::Pair(j, k, inv_n * dot(cols.col(j), cols.col(k))));
        } else if !layout.delta().contains(&j) || pinned[j - layout.m] {
            movable.push(Unit::Single(j));
        }
    }

    let mut alpha = match start {
        Some(s) if s.len() == p => s.to_vec(),
        Some(s) => {
            return Err(Error::InvalidParameter(format!(
                "warm start has {} entries, design has {p}",
                s.len()
            )))
        }
        None => vec![0.0; p],
    };
    for j in 0..p {
        if pinned[j] || !alpha[j].is_finite() {
            alpha[j] = 0.0;
        }
    }
    let fitted = cols.mul_vec(&alpha);
    let resid: Vec<f64> = problem.y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let thresh: Vec<f64> = problem.weights.iter().map(|w| problem.lambda * w).collect();

    let mut st = State {
        cols,
        col_sq,
        thresh,
        inv_n,
        alpha,
        resid,
    };

    let mut trace = Vec::new();
    if opts.trace_objective {
        trace.push(st.objective(&st.thresh));
    }
    let mut sweeps = 0usize;
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    let mut active: Vec<Unit> = Vec::with_capacity(p);

    while sweeps < opts.max_sweeps {
        let change = st.sweep(&movable);
        sweeps += 1;
        if opts.trace_objective {
            trace.push(st.objective(&st.thresh));
        }
        if !st.finite() {
            return Err(Error::NonFinite("coordinate descent"));
        }
        if change < opts.coef_tol {
            kkt = kkt_from_residual(cols, &st.resid, &st.alpha, &st.thresh, &problem.penalized, inv_n);
            if kkt <= opts.kkt_tol {
                converged = true;
                break;
            }
        }
        active.clear();
        let live = |j: usize| st.alpha[j] != 0.0 || !problem.penalized[j];
        active.extend(movable.iter().copied().filter(|u| match *u {
            Unit::Single(j) => live(j),
            Unit::Pair(a, b, _) => live(a) || live(b),
        }));
        while sweeps < opts.max_sweeps && !active.is_empty() {
            let change = st.sweep(&active);
            sweeps += 1;
            if opts.trace_objective {
                trace.push(st.objective(&st.thresh));
            }
            if change < opts.coef_tol {
                break;
            }
        }
        if !st.finite() {
            return Err(Error::NonFinite("coordinate descent"));
        }
    }
    if !converged {
        kkt = kkt_from_residual(cols, &st.resid, &st.alpha, &st.thresh, &problem.penalized, inv_n);
    }

    let alpha = st.alpha;
    let rss_n = problem.rss_n(&alpha);
    let weighted_l1 = problem.weighted_l1(&alpha);
    if !rss_n.is_finite() {
        return Err(Error::NonFinite("residual sum of squares"));
    }
    Ok(LassoFit {
        objective: rss_n + 2.0 * problem.lambda * weighted_l1,
        rss_n,
        weighted_l1,
        alpha,
        iterations: sweeps,
        converged,
        kkt_violation: kkt,
        pinned_unpenalized,
        objective_trace: trace,
    })
}

fn kkt_from_residual(
    cols: &crate::linalg::ColMatrix,
    resid: &[f64],
    alpha: &[f64],
    thresh: &[f64],
    penalized: &[bool],
    inv_n: f64,
) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..cols.ncols() {
        let g = inv_n * dot(cols.col(j), resid);
        let v = if !penalized[j] {
            g.abs()
        } else if alpha[j] != 0.0 {
            (g - thresh[j] * alpha[j].signum()).abs()
        } else {
            (g.abs() - thresh[j]).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Largest violation of the stationarity conditions
/// `n⁻¹ x_j'(Y − X(τ)α) = λ w_j z_j`, `|z_j| ≤ 1`, `z_j = sign(α_j)` when
/// `α_j ≠ 0`, and zero gradient on unpenalized columns.
pub fn kkt_violation(fit: &LassoFit, problem: &LassoProblem<'_>) -> f64 {
    let cols = problem.design.columns();
    let fitted = cols.mul_vec(&fit.alpha);
    let resid: Vec<f64> = problem.y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let thresh: Vec<f64> = problem.weights.iter().map(|w| problem.lambda * w).collect();
    kkt_from_residual(
        cols,
        &resid,
        &fit.alpha,
        &thresh,
        &problem.penalized,
        1.0 / problem.y.len() as f64,
    )
}

/// Smallest λ at which every penalized coefficient is zero, after profiling
/// the unpenalized columns out by least squares.
pub fn lambda_max(design: &ThresholdDesign, y: &[f64], weights: &[f64], penalized: &[bool]) -> Result<f64> {
    let cols = design.columns();
    let p = cols.ncols();
    let inv_n = 1.0 / y.len() as f64;
    let candidates: Vec<usize> = (0..p).filter(|&j| penalized[j] && weights[j] > 0.0).collect();
    if candidates.is_empty() {
        return Err(Error::NoPenalizedColumns);
    }
    let free: Vec<usize> = (0..p)
        .filter(|&j| !penalized[j] && design.scaling()[j] > 0.0)
        .collect();
    let mut r0 = y.to_vec();
    if !free.is_empty() {
        let coef = least_squares(cols, &free, y);
        for (&j, &b) in free.iter().zip(&coef) {
            axpy(-b, cols.col(j), &mut r0);
        }
    }
    Ok(candidates
        .iter()
        .map(|&j| (inv_n * dot(cols.col(j), &r0)).abs() / weights[j])
        .fold(0.0, f64::max))
}
