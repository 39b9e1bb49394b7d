//! The thresholded scaled Lasso: the tuning formula for λ, hard thresholding
//! at level `H`, BIC choice of the threshold constant `C`, and break detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{bic, stepped, ThresholdRegressionFit};
use crate::model::{build_design, Dataset, Layout};
use crate::solver::LassoProblem;

/// `λ = A·sqrt(ln(3m) / (n·r_n))`
pub fn theoretical_lambda(a: f64, m: usize, n: usize, r_n: f64) -> Result<f64> {
    if !(r_n > 0.0) {
        return Err(Error::DegenerateRatio);
    }
    if m == 0 || n == 0 || !(a >= 0.0) {
        return Err(Error::InvalidParameter(format!("A={a}, m={m}, n={n}")));
    }
    Ok(a * ((3.0 * m as f64).ln() / (n as f64 * r_n)).sqrt())
}

/// How the cutoff `H` follows from `C` and λ̂.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// `H = C·λ`, the level used to produce the simulation tables.
    #[default]
    Table,
    /// `H = 2·C·λ`, the level of the selection-consistency results.
    Theory,
}

impl ThresholdRule {
    pub fn cutoff(self, c: f64, lambda: f64) -> f64 {
        match self {
            ThresholdRule::Table => c * lambda,
            ThresholdRule::Theory => 2.0 * c * lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdedFit {
    pub alpha_tilde: Vec<f64>,
    /// Set when the cutoff came from a threshold constant.
    pub c: Option<f64>,
    pub h: f64,
    /// Selected penalized coordinates of the full vector.
    pub j_alpha: Vec<usize>,
    /// Selected penalized δ coordinates, indexed within the δ block.
    pub j_delta: Vec<usize>,
    pub break_detected: bool,
}

/// Keeps `α̂_j` when `|α̂_j| ≥ H`, zeroes it otherwise. Unpenalized
/// coordinates always pass through.
pub fn hard_threshold(alpha_hat: &[f64], h: f64, penalized: &[bool], layout: Layout) -> ThresholdedFit {
    assert_eq!(alpha_hat.len(), penalized.len());
    let alpha_tilde: Vec<f64> = alpha_hat
        .iter()
        .zip(penalized)
        .map(|(&a, &p)| if !p || a.abs() >= h { a } else { 0.0 })
        .collect();
    let j_alpha: Vec<usize> = (0..alpha_tilde.len())
        .filter(|&j| penalized[j] && alpha_tilde[j] != 0.0)
        .collect();
    let j_delta: Vec<usize> = j_alpha
        .iter()
        .filter(|j| layout.delta().contains(j))
        .map(|j| j - layout.m)
        .collect();
    ThresholdedFit {
        alpha_tilde,
        c: None,
        h,
        break_detected: !j_delta.is_empty(),
        j_alpha,
        j_delta,
    }
}

/// Threshold constants `lo, lo+step, …, hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for CGrid {
    fn default() -> Self {
        CGrid {
            lo: 0.1,
            hi: 5.0,
            step: 0.1,
        }
    }
}

impl CGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        stepped(self.lo, self.hi, self.step)
    }
}

/// Thresholds the fit at every `C` of the grid (no refit), scores each by
/// `n·ln(S_n(α̃, τ̂)) + df·ln(n)` where `df` counts nonzero coordinates of α̃
/// plus one when δ̃ ≠ 0, and returns the minimizer. Ties go to the larger `C`.
pub fn select_c_bic(
    fit: &ThresholdRegressionFit,
    grid: &CGrid,
    dataset: &Dataset,
    rule: ThresholdRule,
) -> Result<(f64, ThresholdedFit)> {
    if !(fit.lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "C selection needs lambda > 0, got {}",
            fit.lambda
        )));
    }
    let cs = grid.values()?;
    if cs.is_empty() {
        return Err(Error::InvalidGrid("empty C grid".into()));
    }
    let design = build_design(dataset, fit.tau_hat);
    let problem = LassoProblem::new(&design, dataset.y(), fit.lambda, dataset.penalized())?;
    let mut best: Option<(f64, f64, ThresholdedFit)> = None;
    let mut last_support: Option<(Vec<usize>, f64)> = None;
    for &c in &cs {
        let mut t = hard_threshold(&fit.alpha_hat, rule.cutoff(c, fit.lambda), &fit.penalized, fit.layout);
        t.c = Some(c);
        // consecutive C values often give the same support; reuse its score
        let score = match &last_support {
            Some((s, v)) if *s == t.j_alpha => *v,
            _ => {
                let nonzero = t.alpha_tilde.iter().filter(|a| **a != 0.0).count();
                let df = nonzero + usize::from(t.break_detected);
                bic(dataset.n(), problem.rss_n(&t.alpha_tilde), df).0
            }
        };
        last_support = Some((t.j_alpha.clone(), score));
        if best.as_ref().is_none_or(|(_, b, _)| score <= *b) {
            best = Some((c, score, t));
        }
    }
    let (c, _, t) = best.expect("nonempty grid");
    Ok((c, t))
}

/// Break present iff some δ coordinate survives thresholding.
pub fn detect_break(thresholded: &ThresholdedFit) -> (bool, Vec<usize>) {
    (!thresholded.j_delta.is_empty(), thresholded.j_delta.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn theoretical_lambda_values() {
        assert_eq!(theoretical_lambda(0.0, 5, 100, 0.5).unwrap(), 0.0);
        let v = theoretical_lambda(1.0, 1, 100, 1.0).unwrap();
        assert!((v - 0.104_814_707_396_820_5).abs() < 1e-12, "{v}");
        let a = theoretical_lambda(1.3, 20, 150, 0.4).unwrap();
        let b = theoretical_lambda(1.3, 20, 150, 0.2).unwrap();
        assert!((b / a - 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(theoretical_lambda(1.0, 1, 100, 0.0), Err(Error::DegenerateRatio)));
        assert!(matches!(theoretical_lambda(1.0, 1, 100, -1.0), Err(Error::DegenerateRatio)));
    }

    #[test]
    fn threshold_examples() {
        let layout = Layout { m: 1, k: 0 };
        let t = hard_threshold(&[0.5, 1.5], 1.0, &[true, true], layout);
        assert_eq!(t.alpha_tilde, vec![0.0, 1.5]);
        assert_eq!(t.j_delta, vec![0]);
        assert!(t.break_detected);

        let t = hard_threshold(&[0.5, -1.5], 0.0, &[true, true], layout);
        assert_eq!(t.alpha_tilde, vec![0.5, -1.5]);

        let t = hard_threshold(&[1.0, -1.0], 1.0, &[true, true], layout);
        assert_eq!(t.alpha_tilde, vec![1.0, -1.0]);

        let t = hard_threshold(&[0.1, 0.2, 0.3], 1.0, &[true, true, false], Layout { m: 1, k: 1 });
        assert_eq!(t.alpha_tilde, vec![0.0, 0.0, 0.3]);
        assert!(t.j_alpha.is_empty());
        assert!(!t.break_detected);
    }

    #[test]
    fn break_detection() {
        let layout = Layout { m: 3, k: 0 };
        let none = hard_threshold(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.5, &[true; 6], layout);
        assert_eq!(detect_break(&none), (false, vec![]));
        let last = hard_threshold(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0], 0.5, &[true; 6], layout);
        // last δ coordinate, 0-based within the block
        assert_eq!(detect_break(&last), (true, vec![2]));
    }

    #[test]
    fn c_grid_values() {
        let v = CGrid::default().values().unwrap();
        assert_eq!(v.len(), 50);
        assert!((v[0] - 0.1).abs() < 1e-15);
        assert!((v[49] - 5.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn threshold_properties(
            alpha in proptest::collection::vec(-3.0f64..3.0, 2..16),
            h1 in 0.0f64..3.0,
            h2 in 0.0f64..3.0,
            seed in 0u64..1000,
        ) {
            let m = alpha.len() / 2;
            let alpha = alpha[..2 * m].to_vec();
            let pen: Vec<bool> = (0..alpha.len()).map(|j| (seed >> (j % 8)) & 1 == 1 || j % 3 != 0).collect();
            let layout = Layout { m, k: 0 };
            let (lo, hi) = (h1.min(h2), h1.max(h2));
            let a = hard_threshold(&alpha, lo, &pen, layout);
            let again = hard_threshold(&a.alpha_tilde, lo, &pen, layout);
            prop_assert_eq!(&again.alpha_tilde, &a.alpha_tilde);
            let b = hard_threshold(&alpha, hi, &pen, layout);
            prop_assert!(b.j_alpha.iter().all(|j| a.j_alpha.contains(j)));
            // permutation commutes: reverse order
            let rev: Vec<f64> = alpha.iter().rev().copied().collect();
            let rev_pen: Vec<bool> = pen.iter().rev().copied().collect();
            let r = hard_threshold(&rev, lo, &rev_pen, layout);
            let back: Vec<f64> = r.alpha_tilde.iter().rev().copied().collect();
            prop_assert_eq!(back, a.alpha_tilde.clone());
        }
    }
}
