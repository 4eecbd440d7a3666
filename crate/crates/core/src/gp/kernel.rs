//! Squared-exponential kernel with one lengthscale per input dimension (ARD).
//!
//! `k(x, x') = σ_f² · exp(-½ Σ_j (x_j - x'_j)² / l_j²)`

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::Scalar;

/// Kernel and likelihood hyperparameters, all stored as logarithms so that the
/// optimizer works on an unconstrained space.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelParams<T: Scalar> {
    pub log_signal_variance: T,
    pub log_lengthscales: DVector<T>,
    pub log_noise_variance: T,
}

impl<T: Scalar> KernelParams<T> {
    pub fn new(signal_variance: T, lengthscales: &[T], noise_variance: T) -> Result<Self> {
        if !(signal_variance > T::zero()) || !(noise_variance > T::zero()) {
            return Err(Error::invalid(
                "signal and noise variances must be positive",
            ));
        }
        if lengthscales.is_empty()
            || lengthscales
                .iter()
                .any(|l| !(*l > T::zero()) || !l.is_finite())
        {
            return Err(Error::invalid("lengthscales must be positive and finite"));
        }
        Ok(Self {
            log_signal_variance: signal_variance.ln(),
            log_lengthscales: DVector::from_iterator(
                lengthscales.len(),
                lengthscales.iter().map(|l| l.ln()),
            ),
            log_noise_variance: noise_variance.ln(),
        })
    }

    pub fn dim(&self) -> usize {
        self.log_lengthscales.len()
    }

    pub fn signal_variance(&self) -> T {
        self.log_signal_variance.exp()
    }

    pub fn noise_variance(&self) -> T {
        self.log_noise_variance.exp()
    }

    pub fn lengthscale(&self, j: usize) -> T {
        self.log_lengthscales[j].exp()
    }

    pub fn is_finite(&self) -> bool {
        self.log_signal_variance.is_finite()
            && self.log_noise_variance.is_finite()
            && self.log_lengthscales.iter().all(|v| v.is_finite())
    }

    fn inv_sq_lengthscales(&self) -> Vec<T> {
        self.log_lengthscales
            .iter()
            .map(|&ll| (-(ll + ll)).exp())
            .collect()
    }

    /// Evaluates `k(x, x')`.
    pub fn eval(&self, x: &[T], y: &[T]) -> Result<T> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                context: "kernel input",
                expected: n,
                got: x.len(),
            });
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                context: "kernel input",
                expected: n,
                got: y.len(),
            });
        }
        let inv = self.inv_sq_lengthscales();
        Ok(self.eval_unchecked(x, y, &inv))
    }

    #[inline]
    fn eval_unchecked(&self, x: &[T], y: &[T], inv_sq: &[T]) -> T {
        let mut r2 = T::zero();
        for j in 0..x.len() {
            let d = x[j] - y[j];
            r2 += d * d * inv_sq[j];
        }
        self.signal_variance() * (-T::lit(0.5) * r2).exp()
    }

    /// Cross-covariance matrix between the rows of `a` and the rows of `b`.
    pub fn cross(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
        debug_assert_eq!(a.ncols(), self.dim());
        debug_assert_eq!(b.ncols(), self.dim());
        let inv = self.inv_sq_lengthscales();
        let sf2 = self.signal_variance();
        let half = T::lit(0.5);
        let n = self.dim();
        let mut out = DMatrix::zeros(a.nrows(), b.nrows());
        for jcol in 0..b.nrows() {
            for i in 0..a.nrows() {
                let mut r2 = T::zero();
                for j in 0..n {
                    let d = a[(i, j)] - b[(jcol, j)];
                    r2 += d * d * inv[j];
                }
                out[(i, jcol)] = sf2 * (-half * r2).exp();
            }
        }
        out
    }

    /// Covariance vector `k(x, rows of b)`.
    pub fn cross_vec(&self, x: &[T], b: &DMatrix<T>) -> DVector<T> {
        let inv = self.inv_sq_lengthscales();
        let sf2 = self.signal_variance();
        let half = T::lit(0.5);
        DVector::from_fn(b.nrows(), |r, _| {
            let mut r2 = T::zero();
            for j in 0..x.len() {
                let d = x[j] - b[(r, j)];
                r2 += d * d * inv[j];
            }
            sf2 * (-half * r2).exp()
        })
    }

    /// Gram matrix of the rows of `a`, exactly symmetric.
    pub fn gram(&self, a: &DMatrix<T>) -> DMatrix<T> {
        let inv = self.inv_sq_lengthscales();
        let sf2 = self.signal_variance();
        let half = T::lit(0.5);
        let m = a.nrows();
        let mut out = DMatrix::zeros(m, m);
        for c in 0..m {
            out[(c, c)] = sf2;
            for r in (c + 1)..m {
                let mut r2 = T::zero();
                for j in 0..a.ncols() {
                    let d = a[(r, j)] - a[(c, j)];
                    r2 += d * d * inv[j];
                }
                let v = sf2 * (-half * r2).exp();
                out[(r, c)] = v;
                out[(c, r)] = v;
            }
        }
        out
    }
}
