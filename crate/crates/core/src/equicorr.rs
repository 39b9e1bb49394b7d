//! Closed forms for an equicorrelated design: `Σ = (1−ρ)I + ριι'`, its
//! inverse `Θ`, and the sup-norm of `Θ(τ) = Σ(τ)⁻¹` for a uniform threshold
//! variable independent of the regressors.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquicorrSpec {
    pub m: usize,
    pub rho: f64,
    pub tau: f64,
}

impl EquicorrSpec {
    /// Validates `m ≥ 1` and `0 ≤ ρ < 1`; τ is checked where it matters.
    pub fn new(m: usize, rho: f64, tau: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("m must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!("rho must be in [0,1), got {rho}")));
        }
        if !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be finite, got {tau}")));
        }
        Ok(EquicorrSpec { m, rho, tau })
    }
}

pub fn equicorr_sigma(spec: &EquicorrSpec) -> DMatrix<f64> {
    DMatrix::from_fn(spec.m, spec.m, |i, j| if i == j { 1.0 } else { spec.rho })
}

/// Sherman–Morrison: `Θ = (1/(1−ρ))·(I − ριι'/(1−ρ+ρm))`.
pub fn equicorr_theta(spec: &EquicorrSpec) -> DMatrix<f64> {
    let (m, rho) = (spec.m as f64, spec.rho);
    let scale = 1.0 / (1.0 - rho);
    let off = rho / (1.0 - rho + rho * m);
    DMatrix::from_fn(spec.m, spec.m, |i, j| {
        if i == j {
            scale * (1.0 - off)
        } else {
            -scale * off
        }
    })
}

/// `‖Θ‖_ℓ∞ = (1−3ρ+2mρ) / ((1−ρ)(1−ρ+mρ))`
pub fn theta_infnorm(spec: &EquicorrSpec) -> f64 {
    let (m, rho) = (spec.m as f64, spec.rho);
    (1.0 - 3.0 * rho + 2.0 * m * rho) / ((1.0 - rho) * (1.0 - rho + m * rho))
}

/// Max absolute row sum.
pub fn linf_operator_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaTauNorm {
    pub theta_norm: f64,
    pub norm: f64,
    /// `2/((1−τ)(1−ρ))·max(2, (τ+1)/τ)`
    pub bound: f64,
    pub holds: bool,
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::SingularSigmaTau(tau))
    }
}

/// `‖Θ(τ)‖_ℓ∞` from `Θ(τ) = (1/(1−τ))·[[1, −1], [−1, 1/τ]] ⊗ Θ`, without
/// forming the `2m×2m` matrix.
pub fn theta_tau_infnorm(spec: &EquicorrSpec) -> Result<ThetaTauNorm> {
    check_tau(spec.tau)?;
    let (tau, rho) = (spec.tau, spec.rho);
    let theta_norm = theta_infnorm(spec);
    let norm = (1.0 / (1.0 - tau)) * f64::max(2.0, 1.0 + 1.0 / tau) * theta_norm;
    let bound = 2.0 / ((1.0 - tau) * (1.0 - rho)) * f64::max(2.0, (tau + 1.0) / tau);
    Ok(ThetaTauNorm {
        theta_norm,
        norm,
        bound,
        holds: norm <= bound,
    })
}

/// `Σ(τ) = [[Σ, τΣ], [τΣ, τΣ]]`, the second moment of `X_i(τ)`.
pub fn sigma_tau(spec: &EquicorrSpec) -> Result<DMatrix<f64>> {
    check_tau(spec.tau)?;
    let s = equicorr_sigma(spec);
    let block = DMatrix::from_row_slice(2, 2, &[1.0, spec.tau, spec.tau, spec.tau]);
    Ok(block.kronecker(&s))
}

/// Materialized `Θ(τ)`, for checking the Kronecker identity on small `m`.
pub fn theta_tau(spec: &EquicorrSpec) -> Result<DMatrix<f64>> {
    check_tau(spec.tau)?;
    let t = spec.tau;
    let block = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0 / t]) / (1.0 - t);
    Ok(block.kronecker(&equicorr_theta(spec)))
}

/// One row of a bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryRow {
    pub spec: EquicorrSpec,
    pub result: ThetaTauNorm,
}

pub const DEFAULT_M: [usize; 3] = [2, 10, 100];
pub const DEFAULT_RHO: [f64; 3] = [0.0, 0.5, 0.9];
pub const DEFAULT_TAU: [f64; 3] = [0.2, 0.5, 0.8];

/// Evaluates the bound over the Cartesian product of the inputs.
pub fn theory_grid(ms: &[usize], rhos: &[f64], taus: &[f64]) -> Result<Vec<TheoryRow>> {
    let mut rows = Vec::with_capacity(ms.len() * rhos.len() * taus.len());
    for &m in ms {
        for &rho in rhos {
            for &tau in taus {
                let spec = EquicorrSpec::new(m, rho, tau)?;
                rows.push(TheoryRow {
                    spec,
                    result: theta_tau_infnorm(&spec)?,
                });
            }
        }
    }
    Ok(rows)
}
