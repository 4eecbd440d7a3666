//! Discrete-time unicycle with state `(s_x, s_y, θ, v)` and input `(u_θ, u_v)`:
//!
//! ```text
//! s_x' = s_x + v τ cos θ
//! s_y' = s_y + v τ sin θ
//! θ'   = θ + u_θ v τ
//! v'   = v + u_v τ
//! ```
//!
//! plus independent Gaussian noise on each state.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_point, standard_normal_vector, TransitionModel};
use crate::error::{Error, Result};
use crate::gp::Dataset;
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct UnicycleParams<T: Scalar> {
    pub tau: T,
    pub noise_std: [T; 4],
}

impl<T: Scalar> Default for UnicycleParams<T> {
    fn default() -> Self {
        Self {
            tau: T::lit(0.05),
            noise_std: [T::lit(0.02), T::lit(0.02), T::lit(0.04), T::lit(0.04)],
        }
    }
}

impl<T: Scalar> UnicycleParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(Error::invalid("time step must be positive"));
        }
        if self
            .noise_std
            .iter()
            .any(|s| !(*s >= T::zero()) || !s.is_finite())
        {
            return Err(Error::invalid(
                "noise standard deviations must be non-negative",
            ));
        }
        Ok(())
    }

    pub fn noiseless(&self) -> Self {
        Self {
            tau: self.tau,
            noise_std: [T::zero(); 4],
        }
    }
}

/// Noiseless one-step map.
pub fn unicycle_mean<T: Scalar>(
    p: &UnicycleParams<T>,
    z: &DVector<T>,
    u: &DVector<T>,
) -> DVector<T> {
    let (theta, v) = (z[2], z[3]);
    DVector::from_vec(vec![
        z[0] + v * p.tau * theta.cos(),
        z[1] + v * p.tau * theta.sin(),
        theta + u[0] * v * p.tau,
        v + u[1] * p.tau,
    ])
}

/// One noisy step of the simulator.
pub fn unicycle_step<T: Scalar>(
    p: &UnicycleParams<T>,
    z: &DVector<T>,
    u: &DVector<T>,
    rng: &mut dyn RngCore,
) -> DVector<T> {
    let xi: DVector<T> = standard_normal_vector(rng, 4);
    let mut next = unicycle_mean(p, z, u);
    for i in 0..4 {
        next[i] += p.noise_std[i] * xi[i];
    }
    next
}

/// The simulator as a [`TransitionModel`], with hand-derived Jacobians.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct AnalyticUnicycle<T: Scalar> {
    pub params: UnicycleParams<T>,
}

impl<T: Scalar> AnalyticUnicycle<T> {
    pub fn new(params: UnicycleParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl<T: Scalar> TransitionModel<T> for AnalyticUnicycle<T> {
    fn state_dim(&self) -> usize {
        4
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn mean(&self, z: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
        check_point(self, z, u)?;
        Ok(unicycle_mean(&self.params, z, u))
    }

    fn noise_cov(&self, _z: &DVector<T>, _u: &DVector<T>) -> Result<DMatrix<T>> {
        let s = &self.params.noise_std;
        Ok(DMatrix::from_diagonal(&DVector::from_fn(4, |i, _| {
            s[i] * s[i]
        })))
    }

    fn jacobians(&self, z: &DVector<T>, u: &DVector<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
        check_point(self, z, u)?;
        let tau = self.params.tau;
        let (theta, v) = (z[2], z[3]);
        let (s, c) = theta.sin_cos();
        let zero = T::zero();
        let one = T::one();
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(4, 4, &[
            one, zero, -v * tau * s, tau * c,
            zero, one, v * tau * c, tau * s,
            zero, zero, one, u[0] * tau,
            zero, zero, zero, one,
        ]);
        #[rustfmt::skip]
        let b = DMatrix::from_row_slice(4, 2, &[
            zero, zero,
            zero, zero,
            v * tau, zero,
            zero, tau,
        ]);
        Ok((a, b))
    }

    fn sample(&self, z: &DVector<T>, u: &DVector<T>, rng: &mut dyn RngCore) -> Result<DVector<T>> {
        check_point(self, z, u)?;
        Ok(unicycle_step(&self.params, z, u, rng))
    }
}

/// Axis-aligned box that training states and inputs are drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingBox<T: Scalar> {
    pub z_min: DVector<T>,
    pub z_max: DVector<T>,
    pub u_min: DVector<T>,
    pub u_max: DVector<T>,
}

impl<T: Scalar> Default for SamplingBox<T> {
    fn default() -> Self {
        let six_pi = T::lit(6.0 * std::f64::consts::PI);
        Self {
            z_min: DVector::from_vec(vec![T::lit(-20.0), T::lit(-20.0), -six_pi, T::lit(-10.0)]),
            z_max: DVector::from_vec(vec![T::lit(20.0), T::lit(20.0), six_pi, T::lit(20.0)]),
            u_min: DVector::from_vec(vec![T::lit(-20.0), T::lit(-20.0)]),
            u_max: DVector::from_vec(vec![T::lit(20.0), T::lit(20.0)]),
        }
    }
}

impl<T: Scalar> SamplingBox<T> {
    pub fn validate(&self, nz: usize, nu: usize) -> Result<()> {
        if self.z_min.len() != nz || self.z_max.len() != nz {
            return Err(Error::DimensionMismatch {
                context: "state bounds",
                expected: nz,
                got: self.z_min.len().min(self.z_max.len()),
            });
        }
        if self.u_min.len() != nu || self.u_max.len() != nu {
            return Err(Error::DimensionMismatch {
                context: "input bounds",
                expected: nu,
                got: self.u_min.len().min(self.u_max.len()),
            });
        }
        let ordered = |lo: &DVector<T>, hi: &DVector<T>| {
            lo.iter()
                .zip(hi.iter())
                .all(|(a, b)| a < b && a.is_finite() && b.is_finite())
        };
        if !ordered(&self.z_min, &self.z_max) || !ordered(&self.u_min, &self.u_max) {
            return Err(Error::invalid(
                "sampling box needs min < max in every coordinate",
            ));
        }
        Ok(())
    }
}

fn uniform<T: Scalar>(rng: &mut ChaCha8Rng, lo: T, hi: T) -> T {
    let t: f64 = rng.gen();
    lo + (hi - lo) * T::lit(t)
}

/// Samples `size` transitions with states and inputs uniform in the box. Inputs of
/// the returned dataset are `[z; u]`, outputs the noisy next states.
pub fn collect_dataset<T: Scalar>(
    params: &UnicycleParams<T>,
    ranges: &SamplingBox<T>,
    size: usize,
    seed: u64,
) -> Result<Dataset<T>> {
    if size == 0 {
        return Err(Error::invalid("dataset size must be positive"));
    }
    params.validate()?;
    ranges.validate(4, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(size, 6);
    let mut y = DMatrix::zeros(size, 4);
    for i in 0..size {
        let z = DVector::from_fn(4, |j, _| {
            uniform(&mut rng, ranges.z_min[j], ranges.z_max[j])
        });
        let u = DVector::from_fn(2, |j, _| {
            uniform(&mut rng, ranges.u_min[j], ranges.u_max[j])
        });
        let next = unicycle_step(params, &z, &u, &mut rng);
        for j in 0..4 {
            x[(i, j)] = z[j];
            y[(i, j)] = next[j];
        }
        for j in 0..2 {
            x[(i, 4 + j)] = u[j];
        }
    }
    Dataset::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless() -> UnicycleParams<f64> {
        UnicycleParams::default().noiseless()
    }

    #[test]
    fn drives_along_x_at_zero_heading() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]);
        let next = unicycle_step(&noiseless(), &z, &DVector::zeros(2), &mut rng);
        assert_eq!(next.as_slice(), &[0.05, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn drives_along_y_at_right_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let half_pi = std::f64::consts::FRAC_PI_2;
        let z = DVector::from_vec(vec![0.0, 0.0, half_pi, 2.0]);
        let next = unicycle_step(&noiseless(), &z, &DVector::zeros(2), &mut rng);
        assert!(next[0].abs() < 1e-15);
        assert!((next[1] - 0.1).abs() < 1e-15);
        assert_eq!(next[2], half_pi);
        assert_eq!(next[3], 2.0);
    }

    #[test]
    fn hand_jacobian_rows() {
        let model = AnalyticUnicycle::new(noiseless()).unwrap();
        let (a, b) = model
            .jacobians(
                &DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]),
                &DVector::zeros(2),
            )
            .unwrap();
        assert_eq!(
            a.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 0.0, 0.0, 0.05]
        );
        assert_eq!(
            b.row(2).iter().copied().collect::<Vec<_>>(),
            vec![0.05, 0.0]
        );
    }

    #[test]
    fn empty_dataset_rejected() {
        let err = collect_dataset(
            &UnicycleParams::<f64>::default(),
            &SamplingBox::default(),
            0,
            1,
        )
        .unwrap_err();
        assert!(err.to_string().contains("dataset size must be positive"));
    }

    #[test]
    fn inverted_box_rejected() {
        let mut b = SamplingBox::<f64>::default();
        b.u_min[1] = 30.0;
        assert!(collect_dataset(&UnicycleParams::default(), &b, 5, 1).is_err());
    }
}
