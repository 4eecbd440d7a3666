//! Sparse variational GP model: one independent sparse GP per output dimension.
//!
//! Each output keeps inducing locations `Z` (M×n), a variational mean `m` and a
//! lower-triangular factor `C` with `S = C Cᵀ`. Predictions use
//!
//! ```text
//! μ(x)  = k(x,Z) K⁻¹ m
//! σ²(x) = k(x,x) - k(x,Z) K⁻¹ (K - S) K⁻¹ k(Z,x) + σ_ε²
//! ```
//!
//! with `K = k(Z,Z) + jitter·σ_f²·I`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use super::KernelParams;
use crate::error::{Error, Result};
use crate::linalg;
use crate::Scalar;

/// Default relative jitter added to `k(Z,Z)`.
pub const DEFAULT_JITTER: f64 = 1e-6;

/// Variational distribution `q(u) = N(m, C Cᵀ)` and its inducing locations.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationalParams<T: Scalar> {
    pub inducing: DMatrix<T>,
    pub mean: DVector<T>,
    pub chol: DMatrix<T>,
}

impl<T: Scalar> VariationalParams<T> {
    pub fn num_inducing(&self) -> usize {
        self.inducing.nrows()
    }

    pub fn covariance(&self) -> DMatrix<T> {
        &self.chol * self.chol.transpose()
    }

    fn validate(&self, n: usize) -> Result<()> {
        let m = self.inducing.nrows();
        if m == 0 {
            return Err(Error::invalid("need at least one inducing point"));
        }
        if self.inducing.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "inducing locations",
                expected: n,
                got: self.inducing.ncols(),
            });
        }
        if self.mean.len() != m {
            return Err(Error::DimensionMismatch {
                context: "variational mean",
                expected: m,
                got: self.mean.len(),
            });
        }
        if self.chol.nrows() != m || self.chol.ncols() != m {
            return Err(Error::DimensionMismatch {
                context: "variational factor",
                expected: m,
                got: self.chol.nrows(),
            });
        }
        for i in 0..m {
            if !(self.chol[(i, i)] > T::zero()) {
                return Err(Error::invalid(
                    "variational factor needs a strictly positive diagonal",
                ));
            }
            for j in (i + 1)..m {
                if self.chol[(i, j)] != T::zero() {
                    return Err(Error::invalid(
                        "variational factor must be lower triangular",
                    ));
                }
            }
        }
        let finite = self
            .inducing
            .iter()
            .chain(self.mean.iter())
            .chain(self.chol.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("variational parameters must be finite"));
        }
        Ok(())
    }
}

/// One scalar-output sparse GP.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseGp<T: Scalar> {
    pub kernel: KernelParams<T>,
    pub variational: VariationalParams<T>,
}

#[derive(Clone, Debug)]
struct PredictCache<T: Scalar> {
    /// K⁻¹ m
    alpha: DVector<T>,
    /// K⁻¹ (K - S) K⁻¹
    shrink: DMatrix<T>,
    inv_sq_lengthscales: Vec<T>,
}

impl<T: Scalar> SparseGp<T> {
    /// `k(Z,Z) + jitter·σ_f² I`.
    pub fn inducing_cov(&self, jitter: T) -> DMatrix<T> {
        let mut k = self.kernel.gram(&self.variational.inducing);
        let j = jitter * self.kernel.signal_variance();
        for i in 0..k.nrows() {
            k[(i, i)] += j;
        }
        k
    }

    fn cache(&self, jitter: T) -> Result<PredictCache<T>> {
        let k = self.inducing_cov(jitter);
        let ch = linalg::cholesky(&k, "k(Z,Z)")?;
        let kinv = ch.inverse();
        let alpha = &kinv * &self.variational.mean;
        let s = self.variational.covariance();
        let shrink = linalg::symmetrize(&(&kinv * (&k - s) * &kinv));
        let inv_sq_lengthscales = (0..self.kernel.dim())
            .map(|j| (-(self.kernel.log_lengthscales[j] * T::lit(2.0))).exp())
            .collect();
        Ok(PredictCache {
            alpha,
            shrink,
            inv_sq_lengthscales,
        })
    }
}

/// Multi-output SVGP model with zero prior mean.
#[derive(Clone, Debug)]
pub struct SvgpModel<T: Scalar> {
    input_dim: usize,
    jitter: T,
    outputs: Vec<SparseGp<T>>,
    cache: OnceLock<Vec<PredictCache<T>>>,
}

impl<T: Scalar> PartialEq for SvgpModel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.input_dim == other.input_dim
            && self.jitter == other.jitter
            && self.outputs == other.outputs
    }
}

impl<T: Scalar> SvgpModel<T> {
    pub fn new(input_dim: usize, jitter: T, outputs: Vec<SparseGp<T>>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        if outputs.is_empty() {
            return Err(Error::invalid("model needs at least one output"));
        }
        if !(jitter >= T::zero()) {
            return Err(Error::invalid("jitter must be non-negative"));
        }
        for gp in &outputs {
            if gp.kernel.dim() != input_dim {
                return Err(Error::DimensionMismatch {
                    context: "lengthscales",
                    expected: input_dim,
                    got: gp.kernel.dim(),
                });
            }
            if !gp.kernel.is_finite() {
                return Err(Error::invalid("hyperparameters must be finite"));
            }
            gp.variational.validate(input_dim)?;
        }
        Ok(Self {
            input_dim,
            jitter,
            outputs,
            cache: OnceLock::new(),
        })
    }

    fn cache(&self) -> Result<&[PredictCache<T>]> {
        if let Some(c) = self.cache.get() {
            return Ok(c);
        }
        let built = self
            .outputs
            .iter()
            .map(|gp| gp.cache(self.jitter))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.cache.get_or_init(|| built))
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn outputs(&self) -> &[SparseGp<T>] {
        &self.outputs
    }

    pub fn into_outputs(self) -> Vec<SparseGp<T>> {
        self.outputs
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "SVGP query",
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Predictive mean and variance (latent variance plus noise) per output.
    pub fn predict(&self, x: &[T]) -> Result<(DVector<T>, DVector<T>)> {
        self.check_input(x)?;
        let cache = self.cache()?;
        let d = self.outputs.len();
        let mut mean = DVector::zeros(d);
        let mut var = DVector::zeros(d);
        for (k, (gp, c)) in self.outputs.iter().zip(cache).enumerate() {
            let kx = gp.kernel.cross_vec(x, &gp.variational.inducing);
            mean[k] = kx.dot(&c.alpha);
            let latent = gp.kernel.signal_variance() - kx.dot(&(&c.shrink * &kx));
            // latent variance cannot be negative; noise keeps the total strictly positive
            var[k] = latent.max(T::zero()) + gp.kernel.noise_variance();
        }
        Ok((mean, var))
    }

    /// Jacobian of the predictive mean, D×n.
    pub fn mean_jacobian(&self, x: &[T]) -> Result<DMatrix<T>> {
        self.check_input(x)?;
        let cache = self.cache()?;
        let n = self.input_dim;
        let mut jac = DMatrix::zeros(self.outputs.len(), n);
        for (k, (gp, c)) in self.outputs.iter().zip(cache).enumerate() {
            let z = &gp.variational.inducing;
            let kx = gp.kernel.cross_vec(x, z);
            // ∂k(x,z_a)/∂x_j = -k(x,z_a) (x_j - z_aj) / l_j²
            for a in 0..z.nrows() {
                let w = c.alpha[a] * kx[a];
                for j in 0..n {
                    jac[(k, j)] -= w * (x[j] - z[(a, j)]) * c.inv_sq_lengthscales[j];
                }
            }
        }
        Ok(jac)
    }
}

pub fn svgp_predict<T: Scalar>(model: &SvgpModel<T>, x: &[T]) -> Result<(DVector<T>, DVector<T>)> {
    model.predict(x)
}

pub fn svgp_mean_jacobian<T: Scalar>(model: &SvgpModel<T>, x: &[T]) -> Result<DMatrix<T>> {
    model.mean_jacobian(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(z: &[f64], m: &[f64], c: DMatrix<f64>) -> SvgpModel<f64> {
        let mm = m.len();
        let gp = SparseGp {
            kernel: KernelParams::new(1.0, &[0.9], 0.04).unwrap(),
            variational: VariationalParams {
                inducing: DMatrix::from_row_slice(mm, 1, z),
                mean: DVector::from_row_slice(m),
                chol: c,
            },
        };
        SvgpModel::new(1, DEFAULT_JITTER, vec![gp]).unwrap()
    }

    #[test]
    fn zero_variational_mean_predicts_zero() {
        let model = single(&[0.0], &[0.0], DMatrix::from_element(1, 1, 0.5));
        for x in [-3.0, 0.0, 0.4, 10.0] {
            assert_eq!(model.predict(&[x]).unwrap().0[0], 0.0);
        }
        assert_eq!(model.mean_jacobian(&[0.7]).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn prior_covariance_gives_prior_variance() {
        let z = [-1.0, 0.3, 1.4];
        let gp0 = single(&z, &[0.1, 0.2, 0.3], DMatrix::identity(3, 3));
        let k = gp0.outputs()[0].inducing_cov(DEFAULT_JITTER);
        let c = k.clone().cholesky().unwrap().l();
        let model = single(&z, &[0.1, 0.2, 0.3], c);
        for x in [-2.0, 0.0, 0.9] {
            let (_, v) = model.predict(&[x]).unwrap();
            assert!((v[0] - 1.04).abs() < 1e-10, "{}", v[0]);
        }
    }

    #[test]
    fn collapsed_covariance_gives_conditional_variance() {
        let z = [-1.0, 0.3, 1.4];
        let model = single(&z, &[0.1, 0.2, 0.3], DMatrix::identity(3, 3) * 1e-9);
        let kern = &model.outputs()[0].kernel;
        let kinv = model.outputs()[0]
            .inducing_cov(DEFAULT_JITTER)
            .try_inverse()
            .unwrap();
        for x in [-2.0, 0.0, 0.9] {
            let kx = kern.cross_vec(&[x], &model.outputs()[0].variational.inducing);
            let cond = kern.signal_variance() - kx.dot(&(&kinv * &kx)) + kern.noise_variance();
            let (_, v) = model.predict(&[x]).unwrap();
            assert!((v[0] - cond).abs() < 1e-8, "{} vs {cond}", v[0]);
        }
    }

    #[test]
    fn zero_slope_at_single_inducing_point() {
        let model = single(&[0.8], &[1.3], DMatrix::from_element(1, 1, 0.5));
        assert!(model.mean_jacobian(&[0.8]).unwrap()[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn rejects_upper_triangular_factor() {
        let gp = SparseGp {
            kernel: KernelParams::new(1.0, &[1.0], 0.1).unwrap(),
            variational: VariationalParams {
                inducing: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
                mean: DVector::zeros(2),
                chol: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
            },
        };
        assert!(SvgpModel::new(1, DEFAULT_JITTER, vec![gp]).is_err());
    }

    #[test]
    fn query_dimension_checked() {
        let model = single(&[0.0], &[0.0], DMatrix::from_element(1, 1, 0.5));
        assert!(model.predict(&[0.0, 1.0]).is_err());
    }
}
