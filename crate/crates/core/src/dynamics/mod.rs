//! Transition models: the learned SVGP model, the analytic unicycle simulator and a
//! plain affine model, all behind [`TransitionModel`]. Also linearization and
//! transition data collection.

mod unicycle;

pub use unicycle::{
    collect_dataset, unicycle_mean, unicycle_step, AnalyticUnicycle, SamplingBox, UnicycleParams,
};

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gp::SvgpModel;
use crate::linalg;
use crate::Scalar;

/// Stochastic discrete-time model `z' = G(z, u) + w`, `w ~ N(0, W(z, u))`.
pub trait TransitionModel<T: Scalar>: Send + Sync {
    fn state_dim(&self) -> usize;

    fn input_dim(&self) -> usize;

    /// Next-state mean `G(z, u)`.
    fn mean(&self, z: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>>;

    /// Noise covariance `W(z, u)`.
    fn noise_cov(&self, z: &DVector<T>, u: &DVector<T>) -> Result<DMatrix<T>>;

    /// `(∂G/∂z, ∂G/∂u)` at `(z, u)`.
    fn jacobians(&self, z: &DVector<T>, u: &DVector<T>) -> Result<(DMatrix<T>, DMatrix<T>)>;

    /// Draws one noisy transition.
    fn sample(&self, z: &DVector<T>, u: &DVector<T>, rng: &mut dyn RngCore) -> Result<DVector<T>> {
        let mean = self.mean(z, u)?;
        let root = linalg::psd_sqrt(&self.noise_cov(z, u)?);
        let xi = standard_normal_vector(rng, mean.len());
        Ok(mean + root * xi)
    }
}

pub(crate) fn standard_normal_vector<T: Scalar>(rng: &mut dyn RngCore, n: usize) -> DVector<T> {
    DVector::from_fn(n, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        T::lit(v)
    })
}

pub(crate) fn check_point<T: Scalar>(
    model: &(impl TransitionModel<T> + ?Sized),
    z: &DVector<T>,
    u: &DVector<T>,
) -> Result<()> {
    if z.len() != model.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "state",
            expected: model.state_dim(),
            got: z.len(),
        });
    }
    if u.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "input",
            expected: model.input_dim(),
            got: u.len(),
        });
    }
    if z.iter().chain(u.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("linearization point must be finite"));
    }
    Ok(())
}

/// Affine approximation `z' ≈ A z + B u + d` with noise covariance `W`, taken at `(state, input)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearizedModel<T: Scalar> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub d: DVector<T>,
    pub w: DMatrix<T>,
    pub state: DVector<T>,
    pub input: DVector<T>,
}

impl<T: Scalar> LinearizedModel<T> {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn step(&self, z: &DVector<T>, u: &DVector<T>) -> DVector<T> {
        &self.a * z + &self.b * u + &self.d
    }
}

pub fn linearize<T: Scalar>(
    model: &(impl TransitionModel<T> + ?Sized),
    z: &DVector<T>,
    u: &DVector<T>,
) -> Result<LinearizedModel<T>> {
    check_point(model, z, u)?;
    let g = model.mean(z, u)?;
    let (a, b) = model.jacobians(z, u)?;
    let d = &g - &a * z - &b * u;
    let w = linalg::symmetrize(&model.noise_cov(z, u)?);
    Ok(LinearizedModel {
        a,
        b,
        d,
        w,
        state: z.clone(),
        input: u.clone(),
    })
}

/// The learned model: mean `μ_f([z; u])`, noise `diag(Σ_f + σ_ε²)`.
#[derive(Clone, Debug)]
pub struct SvgpDynamics<T: Scalar> {
    model: SvgpModel<T>,
    state_dim: usize,
}

impl<T: Scalar> SvgpDynamics<T> {
    pub fn new(model: SvgpModel<T>) -> Result<Self> {
        let state_dim = model.output_dim();
        if model.input_dim() <= state_dim {
            return Err(Error::invalid(format!(
                "model input dimension {} must exceed its output dimension {}",
                model.input_dim(),
                state_dim
            )));
        }
        Ok(Self { model, state_dim })
    }

    pub fn model(&self) -> &SvgpModel<T> {
        &self.model
    }

    fn features(z: &DVector<T>, u: &DVector<T>) -> Vec<T> {
        z.iter().chain(u.iter()).copied().collect()
    }
}

impl<T: Scalar> TransitionModel<T> for SvgpDynamics<T> {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn input_dim(&self) -> usize {
        self.model.input_dim() - self.state_dim
    }

    fn mean(&self, z: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
        check_point(self, z, u)?;
        Ok(self.model.predict(&Self::features(z, u))?.0)
    }

    fn noise_cov(&self, z: &DVector<T>, u: &DVector<T>) -> Result<DMatrix<T>> {
        check_point(self, z, u)?;
        let (_, var) = self.model.predict(&Self::features(z, u))?;
        Ok(DMatrix::from_diagonal(&var))
    }

    fn jacobians(&self, z: &DVector<T>, u: &DVector<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
        check_point(self, z, u)?;
        let jac = self.model.mean_jacobian(&Self::features(z, u))?;
        let nz = self.state_dim;
        let a = jac.columns(0, nz).into_owned();
        let b = jac.columns(nz, jac.ncols() - nz).into_owned();
        Ok((a, b))
    }
}

/// `z' = A z + B u + d + w` with constant `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineModel<T: Scalar> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub d: DVector<T>,
    pub w: DMatrix<T>,
}

impl<T: Scalar> AffineModel<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, d: DVector<T>, w: DMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "A columns",
                expected: n,
                got: a.ncols(),
            });
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "B rows",
                expected: n,
                got: b.nrows(),
            });
        }
        if d.len() != n {
            return Err(Error::DimensionMismatch {
                context: "offset",
                expected: n,
                got: d.len(),
            });
        }
        if w.nrows() != n || w.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "noise covariance",
                expected: n,
                got: w.nrows(),
            });
        }
        Ok(Self { a, b, d, w })
    }
}

impl<T: Scalar> TransitionModel<T> for AffineModel<T> {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    fn mean(&self, z: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
        check_point(self, z, u)?;
        Ok(&self.a * z + &self.b * u + &self.d)
    }

    fn noise_cov(&self, _z: &DVector<T>, _u: &DVector<T>) -> Result<DMatrix<T>> {
        Ok(self.w.clone())
    }

    fn jacobians(&self, _z: &DVector<T>, _u: &DVector<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
        Ok((self.a.clone(), self.b.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_linearization_is_exact() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, -0.2, 0.9]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 0.5]);
        let d = DVector::from_vec(vec![0.3, -0.1]);
        let model = AffineModel::new(
            a.clone(),
            b.clone(),
            d.clone(),
            DMatrix::identity(2, 2) * 0.01,
        )
        .unwrap();
        let lin = linearize(
            &model,
            &DVector::from_vec(vec![2.0, -1.0]),
            &DVector::from_vec(vec![0.7]),
        )
        .unwrap();
        assert!((lin.a - a).norm() < 1e-12);
        assert!((lin.b - b).norm() < 1e-12);
        assert!((lin.d - d).norm() < 1e-12);
    }

    #[test]
    fn wrong_input_length_is_error() {
        let model = AffineModel::new(
            DMatrix::<f64>::identity(2, 2),
            DMatrix::zeros(2, 1),
            DVector::zeros(2),
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        assert!(linearize(&model, &DVector::zeros(2), &DVector::zeros(2)).is_err());
    }
}
