//! Data model: the raw dataset, the augmented threshold design `X(τ)` and the
//! column scalings that weight the penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ColMatrix;

/// Root mean square `‖v‖_n = sqrt(n⁻¹ Σ vᵢ²)`.
pub fn empirical_norm(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(mean_square(v).sqrt())
}

pub(crate) fn mean_square(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}

/// How an intercept enters the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterceptMode {
    None,
    /// A single column of ones that does not switch with the regime.
    #[default]
    Common,
    /// Ones in the base block and `1{Q<τ}` in the threshold block.
    BothRegimes,
}

/// Column layout of the augmented design: `m` base columns, `m` threshold
/// columns, then `k` fixed columns that do not interact with the regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub m: usize,
    pub k: usize,
}

impl Layout {
    pub fn width(&self) -> usize {
        2 * self.m + self.k
    }
    pub fn beta(&self) -> std::ops::Range<usize> {
        0..self.m
    }
    pub fn delta(&self) -> std::ops::Range<usize> {
        self.m..2 * self.m
    }
    pub fn fixed(&self) -> std::ops::Range<usize> {
        2 * self.m..self.width()
    }
}

/// Raw regressors, response and threshold variable.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: ColMatrix,
    fixed: ColMatrix,
    y: Vec<f64>,
    q: Vec<f64>,
    penalized: Vec<bool>,
    labels: Vec<String>,
    fixed_labels: Vec<String>,
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidDataset(format!("non-finite value in {name}")))
    }
}

impl Dataset {
    /// Every coefficient penalized, no fixed columns.
    pub fn new(x_columns: Vec<Vec<f64>>, y: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need n >= 2, got {n}")));
        }
        if x_columns.is_empty() {
            return Err(Error::InvalidDataset("need at least one regressor".into()));
        }
        if q.len() != n {
            return Err(Error::InvalidDataset(format!(
                "Q has {} rows, Y has {n}",
                q.len()
            )));
        }
        for (j, c) in x_columns.iter().enumerate() {
            if c.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "column {j} has {} rows, Y has {n}",
                    c.len()
                )));
            }
            check_finite("X", c)?;
        }
        check_finite("Y", &y)?;
        check_finite("Q", &q)?;
        let m = x_columns.len();
        Ok(Dataset {
            x: ColMatrix::from_columns(n, &x_columns),
            fixed: ColMatrix::zeros(n, 0),
            y,
            q,
            penalized: vec![true; 2 * m],
            labels: (1..=m).map(|j| format!("x{j}")).collect(),
            fixed_labels: Vec::new(),
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.m() {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {} regressors",
                labels.len(),
                self.m()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    /// Appends columns that enter only the base regime. They start unpenalized.
    pub fn with_fixed_columns(mut self, columns: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let n = self.n();
        if labels.len() != columns.len() {
            return Err(Error::InvalidDataset("fixed column labels mismatch".into()));
        }
        let mut all: Vec<Vec<f64>> = (0..self.fixed.ncols())
            .map(|j| self.fixed.col(j).to_vec())
            .collect();
        for c in columns {
            if c.len() != n {
                return Err(Error::InvalidDataset("fixed column length mismatch".into()));
            }
            check_finite("fixed columns", &c)?;
            all.push(c);
            self.penalized.push(false);
        }
        self.fixed = ColMatrix::from_columns(n, &all);
        self.fixed_labels.extend(labels);
        Ok(self)
    }

    /// Adds an intercept. With `BothRegimes` a column of ones is prepended to
    /// the regressors, so it also gets a threshold counterpart.
    pub fn with_intercept(self, mode: InterceptMode, penalize: bool) -> Result<Self> {
        let n = self.n();
        match mode {
            InterceptMode::None => Ok(self),
            InterceptMode::Common => {
                let mut ds = self.with_fixed_columns(vec![vec![1.0; n]], vec!["intercept".into()])?;
                let last = ds.penalized.len() - 1;
                ds.penalized[last] = penalize;
                Ok(ds)
            }
            InterceptMode::BothRegimes => {
                let m = self.m();
                let mut cols = vec![vec![1.0; n]];
                cols.extend((0..m).map(|j| self.x.col(j).to_vec()));
                let mut labels = vec!["intercept".to_string()];
                labels.extend(self.labels.iter().cloned());
                let mut penalized = Vec::with_capacity(self.penalized.len() + 2);
                penalized.push(penalize);
                penalized.extend_from_slice(&self.penalized[..m]);
                penalized.push(penalize);
                penalized.extend_from_slice(&self.penalized[m..]);
                Ok(Dataset {
                    x: ColMatrix::from_columns(n, &cols),
                    labels,
                    penalized,
                    ..self
                })
            }
        }
    }

    /// Replaces the penalization mask (length `2m + k`).
    pub fn with_penalized(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.layout().width() {
            return Err(Error::InvalidDataset(format!(
                "penalization mask has {} entries, design has {}",
                mask.len(),
                self.layout().width()
            )));
        }
        self.penalized = mask;
        Ok(self)
    }

    /// Same regressors and threshold variable with a different response.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::InvalidDataset("response length mismatch".into()));
        }
        check_finite("Y", &y)?;
        Ok(Dataset { y, ..self.clone() })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
    pub fn m(&self) -> usize {
        self.x.ncols()
    }
    pub fn layout(&self) -> Layout {
        Layout {
            m: self.m(),
            k: self.fixed.ncols(),
        }
    }
    pub fn x(&self) -> &ColMatrix {
        &self.x
    }
    pub fn fixed(&self) -> &ColMatrix {
        &self.fixed
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    pub fn q(&self) -> &[f64] {
        &self.q
    }
    pub fn penalized(&self) -> &[bool] {
        &self.penalized
    }
    pub fn labels(&self) -> &[String] {
        &self.labels
    }
    pub fn fixed_labels(&self) -> &[String] {
        &self.fixed_labels
    }
}

/// `X(τ)` for one τ plus the diagonal of `D(τ)`.
#[derive(Debug, Clone)]
pub struct ThresholdDesign {
    tau: f64,
    layout: Layout,
    columns: ColMatrix,
    scaling: Vec<f64>,
}

impl ThresholdDesign {
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn layout(&self) -> Layout {
        self.layout
    }
    pub fn columns(&self) -> &ColMatrix {
        &self.columns
    }
    pub fn scaling(&self) -> &[f64] {
        &self.scaling
    }
    pub fn n(&self) -> usize {
        self.columns.nrows()
    }
}

/// Regime indicator. The boundary `Q = τ` belongs to the upper regime.
#[inline]
pub fn in_lower_regime(q: f64, tau: f64) -> bool {
    q < tau
}

pub fn build_design(dataset: &Dataset, tau: f64) -> ThresholdDesign {
    let n = dataset.n();
    let layout = dataset.layout();
    let mut columns = ColMatrix::zeros(n, layout.width());
    for j in 0..layout.m {
        let src = dataset.x.col(j);
        columns.col_mut(j).copy_from_slice(src);
        let dst = columns.col_mut(layout.m + j);
        for (i, (d, &s)) in dst.iter_mut().zip(src).enumerate() {
            *d = if in_lower_regime(dataset.q[i], tau) { s } else { 0.0 };
        }
    }
    for j in 0..layout.k {
        columns
            .col_mut(2 * layout.m + j)
            .copy_from_slice(dataset.fixed.col(j));
    }
    let scaling = (0..layout.width())
        .map(|j| mean_square(columns.col(j)).sqrt())
        .collect();
    ThresholdDesign {
        tau,
        layout,
        columns,
        scaling,
    }
}

/// `r_n` together with a flag for the empty-regime case, where the tuning
/// formula is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnRatio {
    pub value: f64,
    pub degenerate: bool,
}

/// `min_j ‖Z^(j)(t0)‖²_n / ‖X^(j)‖²_n` over the penalized base columns.
pub fn rn_ratio(dataset: &Dataset, t0: f64) -> Result<RnRatio> {
    let m = dataset.m();
    let mut best: Option<f64> = None;
    for j in (0..m).filter(|&j| dataset.penalized[j]) {
        let col = dataset.x.col(j);
        let full = mean_square(col);
        if full == 0.0 {
            return Err(Error::ZeroVarianceColumn(j));
        }
        let lower = col
            .iter()
            .zip(&dataset.q)
            .filter(|(_, &q)| in_lower_regime(q, t0))
            .map(|(x, _)| x * x)
            .sum::<f64>()
            / col.len() as f64;
        let r = lower / full;
        best = Some(best.map_or(r, |b: f64| b.min(r)));
    }
    let value = best.ok_or(Error::NoPenalizedColumns)?.min(1.0);
    Ok(RnRatio {
        value,
        degenerate: value == 0.0,
    })
}

/// Ground truth of a simulated threshold model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueModel {
    pub beta0: Vec<f64>,
    pub delta0: Vec<f64>,
    pub tau0: f64,
}

impl TrueModel {
    pub fn m(&self) -> usize {
        self.beta0.len()
    }

    /// Stacked `(β0', δ0')'`.
    pub fn alpha0(&self) -> Vec<f64> {
        let mut a = self.beta0.clone();
        a.extend_from_slice(&self.delta0);
        a
    }

    pub fn support_alpha(&self) -> Vec<usize> {
        support(&self.alpha0())
    }

    pub fn support_beta(&self) -> Vec<usize> {
        support(&self.beta0)
    }

    pub fn support_delta(&self) -> Vec<usize> {
        support(&self.delta0)
    }

    /// Regression function `x'β0 + x'δ0·1{q<τ0}` for one observation.
    pub fn mean(&self, x: &[f64], q: f64) -> f64 {
        let base: f64 = x.iter().zip(&self.beta0).map(|(a, b)| a * b).sum();
        if in_lower_regime(q, self.tau0) {
            base + x.iter().zip(&self.delta0).map(|(a, b)| a * b).sum::<f64>()
        } else {
            base
        }
    }
}

pub fn support(v: &[f64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, &x)| x != 0.0)
        .map(|(j, _)| j)
        .collect()
}
