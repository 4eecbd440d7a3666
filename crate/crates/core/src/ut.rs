//! Unscented transform of a Gaussian state through a transition model under an
//! affine feedback law, with the model's own noise covariance added on top.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::TransitionModel;
use crate::error::{Error, Result};
use crate::linalg;
use crate::Scalar;

/// Mean and covariance of an uncertain state.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState<T: Scalar> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
}

impl<T: Scalar> GaussianState<T> {
    pub fn new(mean: DVector<T>, cov: DMatrix<T>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "state covariance",
                expected: n,
                got: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("state mean and covariance must be finite"));
        }
        let scale = cov.amax().max(T::one());
        if (&cov - cov.transpose()).amax() > T::lit(1e-9) * scale {
            return Err(Error::invalid("state covariance must be symmetric"));
        }
        let min_eig = linalg::min_eigenvalue(&cov);
        if min_eig < -T::lit(1e-9) * scale {
            return Err(Error::NotPositiveDefinite {
                what: "state covariance",
                min_eig: min_eig.to_f64_lossy(),
            });
        }
        Ok(Self {
            mean,
            cov: linalg::symmetrize(&cov),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `u = υ + K z`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineLaw<T: Scalar> {
    pub feedforward: DVector<T>,
    pub gain: DMatrix<T>,
}

impl<T: Scalar> AffineLaw<T> {
    pub fn new(feedforward: DVector<T>, gain: DMatrix<T>) -> Result<Self> {
        if gain.nrows() != feedforward.len() {
            return Err(Error::DimensionMismatch {
                context: "law gain rows",
                expected: feedforward.len(),
                got: gain.nrows(),
            });
        }
        if feedforward
            .iter()
            .chain(gain.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("law entries must be finite"));
        }
        Ok(Self { feedforward, gain })
    }

    pub fn zero(input_dim: usize, state_dim: usize) -> Self {
        Self {
            feedforward: DVector::zeros(input_dim),
            gain: DMatrix::zeros(input_dim, state_dim),
        }
    }

    pub fn apply(&self, z: &DVector<T>) -> DVector<T> {
        &self.feedforward + &self.gain * z
    }
}

/// Scaling parameters; `kappa = None` means `3 - n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtParams<T: Scalar> {
    pub alpha: T,
    pub beta: T,
    pub kappa: Option<T>,
    /// Average the noise covariance over the sigma points instead of taking it at the mean.
    pub noise_per_point: bool,
}

impl<T: Scalar> Default for UtParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::one(),
            beta: T::lit(2.0),
            kappa: None,
            noise_per_point: false,
        }
    }
}

impl<T: Scalar> UtParams<T> {
    pub fn new(alpha: T, beta: T, kappa: T) -> Self {
        Self {
            alpha,
            beta,
            kappa: Some(kappa),
            noise_per_point: false,
        }
    }

    pub fn kappa_for(&self, n: usize) -> T {
        self.kappa
            .unwrap_or_else(|| T::lit(3.0) - T::from_usize_lossy(n))
    }
}

/// `2n + 1` points stored as rows, with mean and covariance weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaPointSet<T: Scalar> {
    pub points: DMatrix<T>,
    pub mean_weights: DVector<T>,
    pub cov_weights: DVector<T>,
    pub params: UtParams<T>,
}

impl<T: Scalar> SigmaPointSet<T> {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn point(&self, i: usize) -> DVector<T> {
        self.points.row(i).transpose()
    }
}

pub fn sigma_points<T: Scalar>(
    state: &GaussianState<T>,
    params: &UtParams<T>,
) -> Result<SigmaPointSet<T>> {
    let n = state.dim();
    if n == 0 {
        return Err(Error::invalid("state dimension must be positive"));
    }
    let nf = T::from_usize_lossy(n);
    let kappa = params.kappa_for(n);
    let lambda = params.alpha * params.alpha * (nf + kappa) - nf;
    let spread = nf + lambda;
    if !(spread > T::zero()) {
        return Err(Error::invalid(format!(
            "n + λ must be positive, got {spread}"
        )));
    }
    let root = if state.cov.iter().all(|v| *v == T::zero()) {
        DMatrix::zeros(n, n)
    } else {
        linalg::cholesky_escalating(&(&state.cov * spread), "state covariance")?.l()
    };
    let mut points = DMatrix::zeros(2 * n + 1, n);
    points.set_row(0, &state.mean.transpose());
    for i in 0..n {
        let col = root.column(i);
        points.set_row(1 + i, &(&state.mean + col).transpose());
        points.set_row(1 + n + i, &(&state.mean - col).transpose());
    }
    let w0 = lambda / spread;
    let wi = T::one() / (T::lit(2.0) * spread);
    let mut mean_weights = DVector::from_element(2 * n + 1, wi);
    let mut cov_weights = mean_weights.clone();
    mean_weights[0] = w0;
    cov_weights[0] = w0 + (T::one() - params.alpha * params.alpha + params.beta);
    Ok(SigmaPointSet {
        points,
        mean_weights,
        cov_weights,
        params: *params,
    })
}

/// Closed-loop one-step prediction. The noise covariance is evaluated once, at the
/// mean and the law applied to the mean, unless `params.noise_per_point` is set.
pub fn ut_propagate<T: Scalar>(
    state: &GaussianState<T>,
    model: &(impl TransitionModel<T> + ?Sized),
    law: &AffineLaw<T>,
    params: &UtParams<T>,
) -> Result<GaussianState<T>> {
    let n = state.dim();
    if n != model.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "UT state",
            expected: model.state_dim(),
            got: n,
        });
    }
    if law.gain.ncols() != n || law.feedforward.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "UT law",
            expected: model.input_dim(),
            got: law.feedforward.len(),
        });
    }
    let sp = sigma_points(state, params)?;
    let nz = model.state_dim();
    let mut next = DMatrix::zeros(sp.len(), nz);
    for i in 0..sp.len() {
        let z = sp.point(i);
        let u = law.apply(&z);
        next.set_row(i, &model.mean(&z, &u)?.transpose());
    }
    let mut mean = DVector::zeros(nz);
    for i in 0..sp.len() {
        mean += next.row(i).transpose() * sp.mean_weights[i];
    }
    let mut cov = DMatrix::zeros(nz, nz);
    for i in 0..sp.len() {
        let dev = next.row(i).transpose() - &mean;
        cov += &dev * dev.transpose() * sp.cov_weights[i];
    }
    if params.noise_per_point {
        for i in 0..sp.len() {
            let z = sp.point(i);
            cov += model.noise_cov(&z, &law.apply(&z))? * sp.mean_weights[i];
        }
    } else {
        let u_mean = law.apply(&state.mean);
        cov += model.noise_cov(&state.mean, &u_mean)?;
    }
    let cov = floor_eigenvalues(&linalg::symmetrize(&cov));
    Ok(GaussianState { mean, cov })
}

/// Leaves PSD matrices untouched and projects the rest onto the PSD cone.
fn floor_eigenvalues<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    if linalg::min_eigenvalue(m) >= T::zero() {
        m.clone()
    } else {
        linalg::psd_project(m)
    }
}
