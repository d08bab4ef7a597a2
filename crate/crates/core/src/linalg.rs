//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Posterior of a Gaussian linear model in precision form: mean `P^{-1} b`
/// and a draw `mean + L^{-T} e`, where `P = L L'`.
pub struct GaussianPrecision {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    mean: DVector<f64>,
}

impl GaussianPrecision {
    /// Returns `None` if `precision` is not positive definite.
    pub fn new(precision: DMatrix<f64>, b: &DVector<f64>) -> Option<Self> {
        let chol = precision.cholesky()?;
        let mean = chol.solve(b);
        Some(Self { chol, mean })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let d = self.mean.len();
        let e = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let lt = self.chol.l().transpose();
        let z = lt
            .solve_upper_triangular(&e)
            .expect("Cholesky factor has a positive diagonal");
        &self.mean + z
    }
}

/// Least squares of `y` on the rows of `x` (row-major, `d` columns).
/// Returns `None` when `X'X` is singular.
pub fn ols(x: &[f64], y: &[f64], d: usize) -> Option<(Vec<f64>, f64)> {
    let n = y.len();
    let xm = DMatrix::from_row_slice(n, d, x);
    let yv = DVector::from_column_slice(y);
    let xtx = xm.transpose() * &xm;
    let xty = xm.transpose() * &yv;
    let beta = solve_spd(xtx, &xty)?;
    let resid = &yv - &xm * &beta;
    Some((beta.iter().copied().collect(), resid.norm_squared()))
}

/// Solves `A x = b` for symmetric positive definite `A`, rejecting matrices
/// whose Cholesky pivots collapse relative to the diagonal.
pub fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = a.diagonal().iter().cloned().fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows()).map(|k| l[(k, k)] * l[(k, k)]).fold(f64::INFINITY, f64::min);
    if min_pivot <= scale * 1e-12 {
        return None;
    }
    Some(chol.solve(b))
}
