mod common;

use gpcs::dynamics::{
    collect_dataset, linearize, unicycle_mean, unicycle_step, AffineModel, AnalyticUnicycle,
    SamplingBox, SvgpDynamics, TransitionModel, UnicycleParams,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_vec(xs.to_vec())
}

/// Central differences of `G` with respect to `[z; u]`.
fn fd_jacobian(
    model: &dyn TransitionModel<f64>,
    z: &DVector<f64>,
    u: &DVector<f64>,
    h: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let nz = z.len();
    let nu = u.len();
    let mut a = DMatrix::zeros(nz, nz);
    let mut b = DMatrix::zeros(nz, nu);
    for j in 0..nz {
        let (mut zp, mut zm) = (z.clone(), z.clone());
        zp[j] += h;
        zm[j] -= h;
        let col = (model.mean(&zp, u).unwrap() - model.mean(&zm, u).unwrap()) / (2.0 * h);
        a.set_column(j, &col);
    }
    for j in 0..nu {
        let (mut up, mut um) = (u.clone(), u.clone());
        up[j] += h;
        um[j] -= h;
        let col = (model.mean(z, &up).unwrap() - model.mean(z, &um).unwrap()) / (2.0 * h);
        b.set_column(j, &col);
    }
    (a, b)
}

fn assert_close_entries(got: &DMatrix<f64>, want: &DMatrix<f64>, abs: f64, rel: f64) {
    for (g, w) in got.iter().zip(want.iter()) {
        assert!(
            (g - w).abs() <= abs.max(rel * w.abs()),
            "got {got} want {want}"
        );
    }
}

#[test]
fn noisy_step_mean_matches_noiseless_step() {
    let p = UnicycleParams::default();
    let z = v(&[0.3, -1.0, 0.7, 2.0]);
    let u = v(&[0.5, -1.0]);
    let clean = unicycle_mean(&p, &z, &u);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let mut sum = DVector::zeros(4);
    for _ in 0..n {
        sum += unicycle_step(&p, &z, &u, &mut rng);
    }
    let mean = sum / n as f64;
    for i in 0..4 {
        let bound = 4.0 * p.noise_std[i] / (n as f64).sqrt();
        assert!(
            (mean[i] - clean[i]).abs() <= bound,
            "component {i}: {} vs {}",
            mean[i],
            clean[i]
        );
    }
}

#[test]
fn dataset_stays_inside_the_box() {
    let ranges = SamplingBox::default();
    let data = collect_dataset(&UnicycleParams::default(), &ranges, 2000, 3).unwrap();
    assert_eq!(data.len(), 2000);
    assert_eq!((data.input_dim(), data.output_dim()), (6, 4));
    let lo: Vec<f64> = ranges
        .z_min
        .iter()
        .chain(ranges.u_min.iter())
        .copied()
        .collect();
    let hi: Vec<f64> = ranges
        .z_max
        .iter()
        .chain(ranges.u_max.iter())
        .copied()
        .collect();
    for i in 0..data.len() {
        for j in 0..6 {
            let x = data.inputs()[(i, j)];
            assert!(x >= lo[j] && x <= hi[j], "row {i} column {j}: {x}");
        }
    }
}

#[test]
fn dataset_residual_spread_matches_noise() {
    let p = UnicycleParams::default();
    let data = collect_dataset(&p, &SamplingBox::default(), 9000, 4).unwrap();
    let mut sq = [0.0; 4];
    for i in 0..data.len() {
        let x = data.inputs().row(i);
        let z = v(&[x[0], x[1], x[2], x[3]]);
        let u = v(&[x[4], x[5]]);
        let clean = unicycle_mean(&p, &z, &u);
        for d in 0..4 {
            sq[d] += (data.outputs()[(i, d)] - clean[d]).powi(2);
        }
    }
    for d in 0..4 {
        let std = (sq[d] / data.len() as f64).sqrt();
        assert!(
            (std / p.noise_std[d] - 1.0).abs() <= 0.2,
            "output {d}: {std}"
        );
    }
}

#[test]
fn dataset_is_reproducible() {
    let p = UnicycleParams::<f64>::default();
    let a = collect_dataset(&p, &SamplingBox::default(), 50, 9).unwrap();
    let b = collect_dataset(&p, &SamplingBox::default(), 50, 9).unwrap();
    let c = collect_dataset(&p, &SamplingBox::default(), 50, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn unicycle_linearization_example() {
    let model = AnalyticUnicycle::new(UnicycleParams::default()).unwrap();
    let z = v(&[0.0, 0.0, 0.0, 1.0]);
    let u = v(&[0.0, 0.0]);
    let lin = linearize(&model, &z, &u).unwrap();
    assert_eq!(
        lin.a.row(0).iter().copied().collect::<Vec<_>>(),
        vec![1.0, 0.0, 0.0, 0.05]
    );
    assert_eq!(
        lin.b.row(2).iter().copied().collect::<Vec<_>>(),
        vec![0.05, 0.0]
    );
    let g = model.mean(&z, &u).unwrap();
    assert!((lin.step(&z, &u) - g).amax() <= 1e-10);
    assert!((&lin.w - DMatrix::from_diagonal(&v(&[4e-4, 4e-4, 1.6e-3, 1.6e-3]))).amax() <= 1e-18);
}

#[test]
fn unicycle_jacobians_match_finite_differences() {
    let model = AnalyticUnicycle::new(UnicycleParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let z = DVector::from_fn(4, |_, _| rng.gen_range(-5.0..5.0));
        let u = DVector::from_fn(2, |_, _| rng.gen_range(-5.0..5.0));
        let (a, b) = model.jacobians(&z, &u).unwrap();
        let (fa, fb) = fd_jacobian(&model, &z, &u, 1e-5);
        assert_close_entries(&a, &fa, 1e-6, 1e-4);
        assert_close_entries(&b, &fb, 1e-6, 1e-4);
    }
}

#[test]
fn svgp_dynamics_jacobians_match_finite_differences() {
    let mut rng = common::rng(22);
    for _ in 0..5 {
        let model = SvgpDynamics::new(common::random_model(&mut rng, 6, 4, 7)).unwrap();
        let z = DVector::from_fn(4, |_, _| rng.gen_range(-1.5..1.5));
        let u = DVector::from_fn(2, |_, _| rng.gen_range(-1.5..1.5));
        let (a, b) = model.jacobians(&z, &u).unwrap();
        let (fa, fb) = fd_jacobian(&model, &z, &u, 1e-5);
        assert_close_entries(&a, &fa, 1e-6, 1e-4);
        assert_close_entries(&b, &fb, 1e-6, 1e-4);
    }
}

#[test]
fn svgp_noise_is_the_predictive_variance() {
    let mut rng = common::rng(23);
    let gp = common::random_model(&mut rng, 6, 4, 5);
    let model = SvgpDynamics::new(gp.clone()).unwrap();
    for _ in 0..10 {
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (_, var) = gp.predict(&x).unwrap();
        let w = model.noise_cov(&v(&x[..4]), &v(&x[4..])).unwrap();
        assert_eq!(w, DMatrix::from_diagonal(&var));
        for d in 0..4 {
            assert!(w[(d, d)] >= gp.outputs()[d].kernel.noise_variance());
        }
    }
}

#[test]
fn svgp_dynamics_rejects_square_model() {
    let mut rng = common::rng(24);
    assert!(SvgpDynamics::new(common::random_model(&mut rng, 4, 4, 3)).is_err());
}

#[test]
fn non_finite_point_is_rejected() {
    let model = AnalyticUnicycle::new(UnicycleParams::default()).unwrap();
    assert!(linearize(&model, &v(&[0.0, f64::NAN, 0.0, 1.0]), &v(&[0.0, 0.0])).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affine_model_linearizes_exactly(seed in 0u64..100_000, nz in 1usize..5, nu in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.gen_range(-2.0..2.0));
        let (a, b, d) = (rand(nz, nz), rand(nz, nu), rand(nz, 1).column(0).into_owned());
        let (z, u) = (rand(nz, 1).column(0).into_owned(), rand(nu, 1).column(0).into_owned());
        let model = AffineModel::new(a.clone(), b.clone(), d.clone(), DMatrix::identity(nz, nz) * 0.1).unwrap();
        let lin = linearize(&model, &z, &u).unwrap();
        prop_assert!((&lin.a - &a).amax() <= 1e-12);
        prop_assert!((&lin.b - &b).amax() <= 1e-12);
        prop_assert!((&lin.d - &d).amax() <= 1e-12);
    }

    #[test]
    fn linearization_reproduces_the_mean(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = AnalyticUnicycle::new(UnicycleParams::default()).unwrap();
        let z = DVector::from_fn(4, |_, _| rng.gen_range(-20.0..20.0));
        let u = DVector::from_fn(2, |_, _| rng.gen_range(-20.0..20.0));
        let lin = linearize(&model, &z, &u).unwrap();
        prop_assert!((lin.step(&z, &u) - model.mean(&z, &u).unwrap()).amax() <= 1e-10);
    }
}
