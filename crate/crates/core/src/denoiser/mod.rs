//! Row-wise denoisers applied to the AMP pseudo-data.
//!
//! Both families act on a row `x` as a data-dependent scalar gain, `eta(x) = g x`,
//! and their Wirtinger Jacobians share the shape `a I + b x x^H`.

pub mod mmse;
pub mod soft;

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;

/// Jacobian `d eta / d x = diag I + outer x x^H` of a radial shrinkage map.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShrinkJacobian {
    pub diag: f64,
    pub outer: f64,
}

impl ShrinkJacobian {
    pub const ZERO: Self = Self { diag: 0.0, outer: 0.0 };
    pub const IDENTITY: Self = Self { diag: 1.0, outer: 0.0 };

    pub fn to_matrix(&self, x: ArrayView1<'_, Complex64>) -> Array2<Complex64> {
        let m = x.len();
        Array2::from_shape_fn((m, m), |(i, k)| {
            let d = if i == k { self.diag } else { 0.0 };
            Complex64::new(d, 0.0) + x[i] * x[k].conj() * self.outer
        })
    }

    /// Adds `J^T` evaluated at `x` into `acc`.
    pub fn add_transpose_to(&self, x: ArrayView1<'_, Complex64>, acc: &mut Array2<Complex64>) {
        let m = x.len();
        for i in 0..m {
            acc[[i, i]] += self.diag;
            if self.outer != 0.0 {
                for k in 0..m {
                    acc[[i, k]] += x[k] * x[i].conj() * self.outer;
                }
            }
        }
    }

    /// `trace(J) / M` at a row of squared norm `norm_sq`.
    pub fn mean_diagonal(&self, norm_sq: f64, m: usize) -> f64 {
        self.diag + self.outer * norm_sq / m as f64
    }
}

pub mod fd {
    //! Wirtinger finite differences on the real embedding, used to check
    //! the analytic Jacobians.

    use ndarray::{Array1, Array2};
    use num_complex::Complex64;

    /// `d f_i / d x_k = (d/d re - i d/d im) f_i / 2` by central differences.
    pub fn wirtinger<F>(f: F, x: &Array1<Complex64>, h: f64) -> Array2<Complex64>
    where
        F: Fn(&Array1<Complex64>) -> Array1<Complex64>,
    {
        let m = x.len();
        let mut jac = Array2::zeros((f(x).len(), m));
        for k in 0..m {
            let step = |dz: Complex64| {
                let mut p = x.clone();
                p[k] += dz;
                let mut q = x.clone();
                q[k] -= dz;
                (f(&p) - f(&q)) / (2.0 * dz.norm())
            };
            let d_re = step(Complex64::new(h, 0.0));
            let d_im = step(Complex64::new(0.0, h));
            for i in 0..jac.nrows() {
                jac[[i, k]] = (d_re[i] - Complex64::i() * d_im[i]) * 0.5;
            }
        }
        jac
    }

    pub fn max_rel_err(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
        let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        a.iter().zip(b.iter()).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max) / scale
    }
}
