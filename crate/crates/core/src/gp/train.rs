//! Minibatch training of the SVGP by maximizing the ELBO with Adam.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::elbo::{elbo, elbo_with_output_gradients, ParamLayout};
use super::{Dataset, KernelParams, SparseGp, SvgpModel, VariationalParams, DEFAULT_JITTER};
use crate::error::{Error, Result};
use crate::Scalar;

/// Adam with the usual bias correction.
#[derive(Clone, Debug)]
pub struct Adam<T: Scalar> {
    pub step_size: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    m: DVector<T>,
    v: DVector<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(dim: usize, step_size: T) -> Self {
        Self {
            step_size,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
            m: DVector::zeros(dim),
            v: DVector::zeros(dim),
            t: 0,
        }
    }

    /// Ascent step on `params` along `grad`.
    pub fn ascend(&mut self, params: &mut DVector<T>, grad: &DVector<T>) {
        self.t += 1;
        let one = T::one();
        let bc1 = one - self.beta1.powi(self.t);
        let bc2 = one - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] += self.step_size * mhat / (vhat.sqrt() + self.epsilon);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub num_inducing: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub step_size: f64,
    pub seed: u64,
    /// Share one set of inducing locations across all outputs.
    pub share_inducing: bool,
    pub jitter: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_inducing: 256,
            batch_size: 256,
            iterations: 2000,
            step_size: 1e-2,
            seed: 0,
            share_inducing: false,
            jitter: DEFAULT_JITTER,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport<T: Scalar> {
    pub initial_elbo: T,
    pub final_elbo: T,
    pub iterations: usize,
}

fn column_stats<T: Scalar>(m: &DMatrix<T>, j: usize) -> (T, T) {
    let n = T::from_usize_lossy(m.nrows());
    let mean = m.column(j).sum() / n;
    let var = m
        .column(j)
        .iter()
        .map(|v| (*v - mean) * (*v - mean))
        .fold(T::zero(), |a, b| a + b)
        / n;
    (mean, var)
}

/// Scale-aware initial model: inducing points are a seeded subsample of the inputs,
/// `m = 0`, `C = 0.5 I`, lengthscales from input spreads, variances from output spread.
pub fn initial_model<T: Scalar>(
    data: &Dataset<T>,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SvgpModel<T>> {
    let n = data.input_dim();
    let mm = config.num_inducing;
    let tiny = T::lit(1e-6);
    let lengthscales: Vec<T> = (0..n)
        .map(|j| {
            let (_, var) = column_stats(data.inputs(), j);
            var.sqrt().max(tiny)
        })
        .collect();
    let pick = |rng: &mut ChaCha8Rng| -> DMatrix<T> {
        let idx = rand::seq::index::sample(rng, data.len(), mm).into_vec();
        data.inputs().select_rows(&idx)
    };
    let shared = if config.share_inducing {
        Some(pick(rng))
    } else {
        None
    };
    let mut outputs = Vec::with_capacity(data.output_dim());
    for d in 0..data.output_dim() {
        let (_, yvar) = column_stats(data.outputs(), d);
        let yvar = yvar.max(tiny);
        let z = match &shared {
            Some(z) => z.clone(),
            None => pick(rng),
        };
        outputs.push(SparseGp {
            kernel: KernelParams::new(yvar, &lengthscales, yvar * T::lit(0.01))?,
            variational: VariationalParams {
                inducing: z,
                mean: DVector::zeros(mm),
                chol: DMatrix::identity(mm, mm) * T::lit(0.5),
            },
        });
    }
    SvgpModel::new(n, T::lit(config.jitter), outputs)
}

fn validate(data: &Dataset<impl Scalar>, config: &TrainConfig) -> Result<()> {
    if config.num_inducing == 0 {
        return Err(Error::invalid("number of inducing points must be positive"));
    }
    if config.num_inducing > data.len() {
        return Err(Error::invalid(format!(
            "number of inducing points ({}) exceeds dataset size ({})",
            config.num_inducing,
            data.len()
        )));
    }
    if config.batch_size == 0 || config.batch_size > data.len() {
        return Err(Error::invalid("batch size must be in 1..=N"));
    }
    if !(config.step_size > 0.0) {
        return Err(Error::invalid("step size must be positive"));
    }
    Ok(())
}

/// Trains from the default initialization.
pub fn svgp_train<T: Scalar>(
    data: &Dataset<T>,
    config: &TrainConfig,
) -> Result<(SvgpModel<T>, TrainReport<T>)> {
    validate(data, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = initial_model(data, config, &mut rng)?;
    train_from(init, data, config, &mut rng)
}

/// Continues training `init` with a caller-owned RNG stream for minibatch shuffling.
pub fn train_from<T: Scalar>(
    init: SvgpModel<T>,
    data: &Dataset<T>,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(SvgpModel<T>, TrainReport<T>)> {
    validate(data, config)?;
    let layout = if config.share_inducing {
        ParamLayout::shared(&init)?
    } else {
        ParamLayout::independent(&init)
    };
    let jitter = init.jitter();
    let initial_elbo = elbo(&init, data, data.len())?;
    let mut params = layout.pack(&init);
    let mut adam = Adam::new(params.len(), T::lit(config.step_size));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    let mut current = init.clone();
    for it in 0..config.iterations {
        if cursor >= order.len() {
            order.shuffle(rng);
            cursor = 0;
        }
        let end = (cursor + config.batch_size).min(order.len());
        let batch = data.select(&order[cursor..end])?;
        cursor = end;
        let (value, grads) =
            elbo_with_output_gradients(&current, &batch, data.len()).map_err(|e| match e {
                Error::NotPositiveDefinite { .. } => Error::Divergence { iteration: it },
                other => other,
            })?;
        if !value.is_finite() {
            return Err(Error::Divergence { iteration: it });
        }
        let g = layout.pack_gradients(&grads);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: it });
        }
        adam.ascend(&mut params, &g);
        current = layout
            .unpack(&params, jitter)
            .map_err(|_| Error::Divergence { iteration: it })?;
    }
    let final_elbo = elbo(&current, data, data.len())?;
    if !final_elbo.is_finite() {
        return Err(Error::Divergence {
            iteration: config.iterations,
        });
    }
    // a noisy run that ends below its starting point falls back to the initial model
    let (model, final_elbo) = if final_elbo >= initial_elbo {
        (current, final_elbo)
    } else {
        (init, initial_elbo)
    };
    Ok((
        model,
        TrainReport {
            initial_elbo,
            final_elbo,
            iterations: config.iterations,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_is_step_size() {
        let mut adam = Adam::new(2, 0.01f64);
        let mut p = DVector::from_vec(vec![0.0, 1.0]);
        adam.ascend(&mut p, &DVector::from_vec(vec![3.0, -0.5]));
        assert!((p[0] - 0.01).abs() < 1e-9);
        assert!((p[1] - 0.99).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_configs() {
        let x = DMatrix::from_fn(10, 1, |i, _| i as f64);
        let data = Dataset::single(x, DVector::zeros(10)).unwrap();
        let cfg = TrainConfig {
            num_inducing: 0,
            batch_size: 5,
            iterations: 1,
            ..Default::default()
        };
        assert!(svgp_train(&data, &cfg).is_err());
        let cfg = TrainConfig {
            num_inducing: 11,
            batch_size: 5,
            iterations: 1,
            ..Default::default()
        };
        assert!(svgp_train(&data, &cfg).is_err());
        let cfg = TrainConfig {
            num_inducing: 5,
            batch_size: 11,
            iterations: 1,
            ..Default::default()
        };
        assert!(svgp_train(&data, &cfg).is_err());
    }
}
