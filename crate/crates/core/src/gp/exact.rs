//! Exact GP regression with a zero prior mean. Used as a reference model for the
//! sparse approximation and for small problems.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{Dataset, KernelParams};
use crate::error::{Error, Result};
use crate::linalg;
use crate::Scalar;

/// Jitter multiples of `σ_f²` tried in order when factorizing `k(X,X) + σ_ε² I`.
const EXACT_JITTERS: [f64; 5] = [0.0, 1e-6, 1e-5, 1e-4, 1e-3];

/// Fitted exact posterior for a single output.
#[derive(Clone, Debug)]
pub struct ExactGpPosterior<T: Scalar> {
    inputs: DMatrix<T>,
    params: KernelParams<T>,
    chol: Cholesky<T, Dyn>,
    weights: DVector<T>,
    jitter: T,
}

/// Floor applied to the posterior variance.
pub const VARIANCE_FLOOR: f64 = 0.0;

fn factorize<T: Scalar>(
    data: &Dataset<T>,
    params: &KernelParams<T>,
) -> Result<(Cholesky<T, Dyn>, T)> {
    if data.output_dim() != 1 {
        return Err(Error::DimensionMismatch {
            context: "exact GP outputs",
            expected: 1,
            got: data.output_dim(),
        });
    }
    if data.input_dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            context: "exact GP inputs",
            expected: params.dim(),
            got: data.input_dim(),
        });
    }
    let mut k = params.gram(data.inputs());
    let s2 = params.noise_variance();
    for i in 0..k.nrows() {
        k[(i, i)] += s2;
    }
    let sf2 = params.signal_variance();
    let jitters: Vec<T> = EXACT_JITTERS.iter().map(|&j| T::lit(j) * sf2).collect();
    for &j in &jitters {
        let mut kj = k.clone();
        for i in 0..kj.nrows() {
            kj[(i, i)] += j;
        }
        if let Some(ch) = Cholesky::new(kj) {
            return Ok((ch, j));
        }
    }
    Err(Error::NotPositiveDefinite {
        what: "k(X,X) + σ_ε² I",
        min_eig: linalg::min_eigenvalue(&k).to_f64_lossy(),
    })
}

pub fn exact_gp_fit<T: Scalar>(
    data: &Dataset<T>,
    params: &KernelParams<T>,
) -> Result<ExactGpPosterior<T>> {
    let (chol, jitter) = factorize(data, params)?;
    let weights = chol.solve(&data.output_column(0));
    Ok(ExactGpPosterior {
        inputs: data.inputs().clone(),
        params: params.clone(),
        chol,
        weights,
        jitter,
    })
}

impl<T: Scalar> ExactGpPosterior<T> {
    pub fn weights(&self) -> &DVector<T> {
        &self.weights
    }

    /// Diagonal jitter that was needed for the factorization (zero in the common case).
    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn params(&self) -> &KernelParams<T> {
        &self.params
    }

    /// Posterior mean and latent variance at `x`.
    pub fn predict(&self, x: &[T]) -> Result<(T, T)> {
        if x.len() != self.params.dim() {
            return Err(Error::DimensionMismatch {
                context: "exact GP query",
                expected: self.params.dim(),
                got: x.len(),
            });
        }
        let ks = self.params.cross_vec(x, &self.inputs);
        let mean = ks.dot(&self.weights);
        let mut v = ks.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut v);
        let var = self.params.signal_variance() - v.dot(&v);
        Ok((mean, var.max(T::lit(VARIANCE_FLOOR))))
    }
}

pub fn exact_gp_predict<T: Scalar>(post: &ExactGpPosterior<T>, x: &[T]) -> Result<(T, T)> {
    post.predict(x)
}

/// Negative log marginal likelihood `-log N(y | 0, k(X,X) + σ_ε² I)`.
pub fn exact_gp_nll<T: Scalar>(data: &Dataset<T>, params: &KernelParams<T>) -> Result<T> {
    let (chol, _) = factorize(data, params)?;
    let y = data.output_column(0);
    let w = chol.solve(&y);
    let n = T::from_usize_lossy(y.len());
    let half = T::lit(0.5);
    Ok(half * y.dot(&w) + half * linalg::chol_logdet(&chol) + half * n * T::two_pi().ln())
}

/// Gradient of [`exact_gp_nll`] with respect to
/// `(log σ_f², log l_1..l_n, log σ_ε²)`.
pub fn exact_gp_nll_gradient<T: Scalar>(
    data: &Dataset<T>,
    params: &KernelParams<T>,
) -> Result<DVector<T>> {
    let (chol, _) = factorize(data, params)?;
    let y = data.output_column(0);
    let w = chol.solve(&y);
    let kinv = chol.inverse();
    // ∂NLL/∂θ = ½ tr((K⁻¹ - w wᵀ) ∂K/∂θ)
    let g = (&kinv - &w * w.transpose()) * T::lit(0.5);
    let kxx = params.gram(data.inputs());
    let x = data.inputs();
    let n = params.dim();
    let mut out = DVector::zeros(n + 2);
    out[0] = g.component_mul(&kxx).sum();
    for j in 0..n {
        let inv = (-(params.log_lengthscales[j] * T::lit(2.0))).exp();
        let mut s = T::zero();
        for a in 0..x.nrows() {
            for b in 0..x.nrows() {
                let d = x[(a, j)] - x[(b, j)];
                s += g[(a, b)] * kxx[(a, b)] * d * d * inv;
            }
        }
        out[1 + j] = s;
    }
    out[n + 1] = g.trace() * params.noise_variance();
    Ok(out)
}
