use gpcs::dynamics::{AffineModel, TransitionModel};
use gpcs::ut::{sigma_points, ut_propagate, AffineLaw, GaussianState, UtParams};
use gpcs::Result;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_psd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &l * l.transpose() + DMatrix::identity(n, n) * floor
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// `z' = z²` per component with no noise.
struct Square;

impl TransitionModel<f64> for Square {
    fn state_dim(&self) -> usize {
        1
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn mean(&self, z: &DVector<f64>, _u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(z.map(|x| x * x))
    }
    fn noise_cov(&self, _z: &DVector<f64>, _u: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::zeros(1, 1))
    }
    fn jacobians(
        &self,
        z: &DVector<f64>,
        _u: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok((
            DMatrix::from_element(1, 1, 2.0 * z[0]),
            DMatrix::zeros(1, 1),
        ))
    }
}

fn affine_case(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
) -> (AffineModel<f64>, AffineLaw<f64>, GaussianState<f64>) {
    let model = AffineModel::new(
        random_matrix(rng, n, n),
        random_matrix(rng, n, m),
        DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
        random_psd(rng, n, 0.01) * 0.1,
    )
    .unwrap();
    let law = AffineLaw::new(
        DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0)),
        random_matrix(rng, m, n),
    )
    .unwrap();
    let state = GaussianState::new(
        DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0)),
        random_psd(rng, n, 0.05),
    )
    .unwrap();
    (model, law, state)
}

#[test]
fn affine_propagation_is_exact_on_fifty_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..50 {
        let n = 1 + case % 5;
        let m = 1 + case % 3;
        let (model, law, state) = affine_case(&mut rng, n, m);
        let out = ut_propagate(&state, &model, &law, &UtParams::default()).unwrap();
        let acl = &model.a + &model.b * &law.gain;
        let mean = &acl * &state.mean + &model.b * &law.feedforward + &model.d;
        let cov = &acl * &state.cov * acl.transpose() + &model.w;
        assert!((out.mean - mean).amax() <= 1e-10, "case {case}");
        assert!((out.cov - cov).amax() <= 1e-10, "case {case}");
    }
}

#[test]
fn squared_standard_normal_has_unit_mean() {
    let state = GaussianState::new(DVector::zeros(1), DMatrix::identity(1, 1)).unwrap();
    let out = ut_propagate(
        &state,
        &Square,
        &AffineLaw::zero(1, 1),
        &UtParams::new(1.0, 0.0, 2.0),
    )
    .unwrap();
    assert!((out.mean[0] - 1.0).abs() <= 1e-14);
}

#[test]
fn deterministic_propagation_without_spread() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let (mut model, law, _) = affine_case(&mut rng, 3, 2);
    model.w = DMatrix::zeros(3, 3);
    let state = GaussianState::new(
        DVector::from_vec(vec![0.5, -1.0, 2.0]),
        DMatrix::zeros(3, 3),
    )
    .unwrap();
    let out = ut_propagate(&state, &model, &law, &UtParams::default()).unwrap();
    let u = law.apply(&state.mean);
    assert!((out.mean - model.mean(&state.mean, &u).unwrap()).amax() <= 1e-12);
    assert!(out.cov.amax() <= 1e-24);
}

#[test]
fn weights_sum_to_one_and_points_pair_up() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for n in 1..=5 {
        let state = GaussianState::new(
            DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
            random_psd(&mut rng, n, 0.1),
        )
        .unwrap();
        let sp = sigma_points(&state, &UtParams::default()).unwrap();
        assert_eq!(sp.len(), 2 * n + 1);
        assert!((sp.mean_weights.sum() - 1.0).abs() <= 1e-14);
        for i in 1..=n {
            let mid = (sp.point(i) + sp.point(i + n)) * 0.5;
            assert!((mid - &state.mean).amax() <= 1e-14);
        }
    }
}

#[test]
fn invalid_state_covariance_is_rejected() {
    let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    assert!(GaussianState::new(DVector::zeros(2), bad).is_err());
    let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    assert!(GaussianState::new(DVector::zeros(2), asym).is_err());
}

#[test]
fn per_point_noise_equals_mean_noise_for_constant_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let (model, law, state) = affine_case(&mut rng, 4, 2);
    let a = ut_propagate(&state, &model, &law, &UtParams::default()).unwrap();
    let params = UtParams {
        noise_per_point: true,
        ..UtParams::default()
    };
    let b = ut_propagate(&state, &model, &law, &params).unwrap();
    assert!((a.cov - b.cov).amax() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn sigma_points_reconstruct_mean_and_covariance(seed in 0u64..100_000, n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = GaussianState::new(DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0)), random_psd(&mut rng, n, 0.0)).unwrap();
        let alpha = rng.gen_range(0.5..1.5);
        let params = UtParams::new(alpha, 2.0, rng.gen_range(0.0..2.0));
        let sp = sigma_points(&state, &params).unwrap();
        let mut mean = DVector::zeros(n);
        for i in 0..sp.len() {
            mean += sp.point(i) * sp.mean_weights[i];
        }
        let mut cov = DMatrix::zeros(n, n);
        for i in 0..sp.len() {
            let dev = sp.point(i) - &state.mean;
            cov += &dev * dev.transpose() * sp.mean_weights[i];
        }
        prop_assert!((mean - &state.mean).amax() <= 1e-10);
        prop_assert!((cov - &state.cov).amax() <= 1e-10);
    }

    #[test]
    fn affine_propagation_is_exact(seed in 0u64..100_000, n in 1usize..6, m in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (model, law, state) = affine_case(&mut rng, n, m);
        let out = ut_propagate(&state, &model, &law, &UtParams::default()).unwrap();
        let acl = &model.a + &model.b * &law.gain;
        let cov = &acl * &state.cov * acl.transpose() + &model.w;
        prop_assert!((out.cov - cov).amax() <= 1e-10);
    }

    #[test]
    fn noise_increment_passes_through(seed in 0u64..100_000, n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (model, law, state) = affine_case(&mut rng, n, 2);
        let extra = random_psd(&mut rng, n, 0.0);
        let mut bigger = model.clone();
        bigger.w += &extra;
        let a = ut_propagate(&state, &model, &law, &UtParams::default()).unwrap();
        let b = ut_propagate(&state, &bigger, &law, &UtParams::default()).unwrap();
        prop_assert!((b.cov - a.cov - extra).amax() <= 1e-10);
        prop_assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn output_covariance_is_symmetric_psd(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = GaussianState::new(DVector::from_element(1, rng.gen_range(-1.0..1.0)), DMatrix::from_element(1, 1, rng.gen_range(0.0..2.0))).unwrap();
        let out = ut_propagate(&state, &Square, &AffineLaw::zero(1, 1), &UtParams::default()).unwrap();
        prop_assert!(out.cov[(0, 0)] >= 0.0);
    }
}
