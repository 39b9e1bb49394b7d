//! Small dense helpers shared by the solver and the estimators.

use nalgebra::{DMatrix, DVector};

/// Column-major dense matrix. Column access dominates in coordinate descent.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl ColMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        ColMatrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    /// Builds a matrix from a list of equally long columns.
    pub fn from_columns(nrows: usize, columns: &[Vec<f64>]) -> Self {
        let mut data = Vec::with_capacity(nrows * columns.len());
        for c in columns {
            assert_eq!(c.len(), nrows, "column length mismatch");
            data.extend_from_slice(c);
        }
        ColMatrix {
            nrows,
            ncols: columns.len(),
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    /// `X·v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.ncols);
        let mut out = vec![0.0; self.nrows];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                axpy(vj, self.col(j), &mut out);
            }
        }
        out
    }

    pub fn to_nalgebra(&self, cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows, cols.len(), |i, k| self.get(i, cols[k]))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a·x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Minimum-norm least squares of `y` on the selected columns, via SVD so that
/// collinear columns (e.g. an intercept and a full-regime indicator intercept)
/// do not break it. Returns the coefficients in the order of `cols`.
pub fn least_squares(x: &ColMatrix, cols: &[usize], y: &[f64]) -> Vec<f64> {
    if cols.is_empty() {
        return Vec::new();
    }
    let a = x.to_nalgebra(cols);
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12 * (x.nrows().max(cols.len()) as f64);
    match svd.solve(&b, eps) {
        Ok(sol) => sol.iter().copied().collect(),
        Err(_) => vec![0.0; cols.len()],
    }
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n-1)p`). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_matches_linear_interpolation() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert!((quantile_sorted(&v, 0.6) - 3.4).abs() < 1e-12);
    }

    #[test]
    fn least_squares_handles_collinear_columns() {
        let x = ColMatrix::from_columns(4, &[vec![1.0; 4], vec![1.0; 4]]);
        let b = least_squares(&x, &[0, 1], &[2.0, 2.0, 2.0, 2.0]);
        assert!((b[0] + b[1] - 2.0).abs() < 1e-10);
        assert!((b[0] - b[1]).abs() < 1e-10);
    }
}
