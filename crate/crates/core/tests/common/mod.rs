#![allow(dead_code)]

pub mod oracles;

use gpcs::gp::{Dataset, KernelParams, SparseGp, SvgpModel, VariationalParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

pub fn random_kernel(rng: &mut ChaCha8Rng, n: usize) -> KernelParams<f64> {
    let ls: Vec<f64> = (0..n).map(|_| rng.gen_range(0.6..2.0)).collect();
    KernelParams::new(rng.gen_range(0.5..2.0), &ls, rng.gen_range(0.05..0.5)).unwrap()
}

/// Random lower-triangular factor with a positive diagonal.
pub fn random_chol(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            rng.gen_range(0.3..1.0)
        } else if i > j {
            rng.gen_range(-0.3..0.3)
        } else {
            0.0
        }
    })
}

pub fn random_model(rng: &mut ChaCha8Rng, n: usize, d: usize, m: usize) -> SvgpModel<f64> {
    let outputs = (0..d)
        .map(|_| SparseGp {
            kernel: random_kernel(rng, n),
            variational: VariationalParams {
                inducing: uniform_matrix(rng, m, n, -2.0, 2.0),
                mean: DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0)),
                chol: random_chol(rng, m),
            },
        })
        .collect();
    SvgpModel::new(n, 1e-6, outputs).unwrap()
}

pub fn random_dataset(rng: &mut ChaCha8Rng, size: usize, n: usize, d: usize) -> Dataset<f64> {
    let x = uniform_matrix(rng, size, n, -2.0, 2.0);
    let y = DMatrix::from_fn(size, d, |i, k| {
        let s: f64 = (0..n).map(|j| x[(i, j)]).sum();
        (s + k as f64).sin() + 0.1 * rng.gen_range(-1.0..1.0)
    });
    Dataset::new(x, y).unwrap()
}

/// Direct SE-ARD evaluation written independently of the library kernel.
pub fn se(sf2: f64, ls: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut q = 0.0;
    for j in 0..ls.len() {
        q += (a[j] - b[j]).powi(2) / (ls[j] * ls[j]);
    }
    sf2 * (-0.5 * q).exp()
}

pub fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

pub fn kernel_parts(k: &KernelParams<f64>) -> (f64, Vec<f64>, f64) {
    (
        k.signal_variance(),
        (0..k.dim()).map(|j| k.lengthscale(j)).collect(),
        k.noise_variance(),
    )
}

pub fn dense_gram(k: &KernelParams<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (sf2, ls, _) = kernel_parts(k);
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        se(sf2, &ls, &row(a, i), &row(b, j))
    })
}
