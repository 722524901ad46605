//! Small dense complex helpers: vector norms, Hermitian positive-definite
//! factorization for the M x M covariances of the posterior oracle.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn norm_sq(x: ArrayView1<'_, Complex64>) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frobenius_sq(x: ArrayView2<'_, Complex64>) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Lower-triangular Cholesky factor of a Hermitian positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Array2<Complex64>,
}

impl Cholesky {
    pub fn new(a: ArrayView2<'_, Complex64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("Cholesky of a {}x{} matrix", n, a.ncols())));
        }
        let scale = a.diag().iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        for i in 0..n {
            for j in 0..i {
                if (a[[i, j]] - a[[j, i]].conj()).norm() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::domain("covariance is not Hermitian"));
                }
            }
        }
        let mut l = Array2::<Complex64>::zeros((n, n));
        for j in 0..n {
            let mut d = a[[j, j]].re;
            for k in 0..j {
                d -= l[[j, k]].norm_sqr();
            }
            if !(d > 0.0) {
                return Err(Error::domain("covariance is not positive definite"));
            }
            let d = d.sqrt();
            l[[j, j]] = Complex64::new(d, 0.0);
            for i in j + 1..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]].conj();
                }
                l[[i, j]] = s / d;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diag().iter().map(|z| z.re.ln()).sum::<f64>()
    }

    /// Solves `A v = b`.
    pub fn solve(&self, b: ArrayView1<'_, Complex64>) -> Array1<Complex64> {
        let n = self.lower.nrows();
        let l = &self.lower;
        let mut y = b.to_owned();
        for i in 0..n {
            for k in 0..i {
                let t = l[[i, k]] * y[k];
                y[i] -= t;
            }
            y[i] /= l[[i, i]];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let t = l[[k, i]].conj() * y[k];
                y[i] -= t;
            }
            y[i] /= l[[i, i]];
        }
        y
    }

    /// `A^{-1}` column by column.
    pub fn inverse(&self) -> Array2<Complex64> {
        let n = self.lower.nrows();
        let mut inv = Array2::zeros((n, n));
        for j in 0..n {
            let mut e = Array1::zeros(n);
            e[j] = Complex64::new(1.0, 0.0);
            inv.column_mut(j).assign(&self.solve(e.view()));
        }
        inv
    }

    /// Quadratic form `b^H A^{-1} b`.
    pub fn quad_form(&self, b: ArrayView1<'_, Complex64>) -> f64 {
        let v = self.solve(b);
        b.iter().zip(v.iter()).map(|(bi, vi)| (bi.conj() * vi).re).sum()
    }
}

/// Log-density of `CN(0, cov)` at `x`: `-M log(pi) - log det(cov) - x^H cov^{-1} x`.
pub fn log_gaussian_density_cov(x: ArrayView1<'_, Complex64>, cov: &Cholesky) -> f64 {
    -(x.len() as f64) * std::f64::consts::PI.ln() - cov.log_det() - cov.quad_form(x)
}

pub fn identity(m: usize) -> Array2<Complex64> {
    Array2::from_diag_elem(m, Complex64::new(1.0, 0.0))
}
