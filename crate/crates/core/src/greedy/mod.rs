//! Greedy shrinking-horizon steering of a nonlinear model and Monte Carlo
//! evaluation of the resulting laws on a (possibly different) true system.
//!
//! At step `t` the model is linearized at the predicted mean and nominal input, a
//! linear covariance steering problem over the remaining `T - t` steps is solved,
//! only its first law is kept, and the unscented transform predicts the next state.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{linearize, standard_normal_vector, TransitionModel};
use crate::error::{Error, Result};
use crate::lcs::{lcs_solve, LcsSettings, MeanMode, SteeringTarget};
use crate::linalg;
use crate::sdp::{KktResiduals, SolveStatus};
use crate::ut::{ut_propagate, AffineLaw, GaussianState, UtParams};
use crate::Scalar;

pub const DEFAULT_BACKOFF: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct SteeringScenario<T: Scalar> {
    pub initial: GaussianState<T>,
    pub target: SteeringTarget<T>,
    pub horizon: usize,
    pub ut: UtParams<T>,
    pub lcs: LcsSettings<T>,
    /// With `H` steps left the sub-problem targets `(1 - backoff·(1 - 1/H))·Σ_goal`,
    /// so each plan leaves slack for the next re-solve and the last one targets `Σ_goal`.
    pub backoff: T,
}

impl<T: Scalar> SteeringScenario<T> {
    /// Uses least-squares feedforward, since the final sub-problems are usually too
    /// short to reach every mean direction exactly.
    pub fn new(
        initial: GaussianState<T>,
        target: SteeringTarget<T>,
        horizon: usize,
    ) -> Result<Self> {
        let s = Self {
            initial,
            target,
            horizon,
            ut: UtParams::default(),
            lcs: LcsSettings {
                mean_mode: MeanMode::LeastSquares,
                ..LcsSettings::default()
            },
            backoff: T::lit(DEFAULT_BACKOFF),
        };
        s.validate()?;
        Ok(s)
    }

    /// The unicycle experiment: from `(0, 0, 0, 1)` to `(1, 2, 0, 1)` in 30 steps.
    pub fn unicycle() -> Self {
        let v = |xs: [f64; 4]| DVector::from_iterator(4, xs.iter().map(|x| T::lit(*x)));
        let sq = |xs: [f64; 4]| {
            DMatrix::from_diagonal(&DVector::from_iterator(4, xs.iter().map(|x| T::lit(x * x))))
        };
        Self::new(
            GaussianState {
                mean: v([0.0, 0.0, 0.0, 1.0]),
                cov: sq([0.1, 0.2, 0.1, 0.1]),
            },
            SteeringTarget {
                mean: v([1.0, 2.0, 0.0, 1.0]),
                cov: sq([0.1, 0.05, 0.05, 0.05]),
            },
            30,
        )
        .expect("unicycle scenario is valid")
    }

    /// Target of the sub-problem with `remaining` steps left.
    pub fn planning_target(&self, remaining: usize) -> SteeringTarget<T> {
        let h = T::from_usize_lossy(remaining.max(1));
        let shrink = T::one() - self.backoff * (T::one() - T::one() / h);
        SteeringTarget {
            mean: self.target.mean.clone(),
            cov: &self.target.cov * shrink,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        let n = self.initial.dim();
        if self.target.dim() != n {
            return Err(Error::DimensionMismatch {
                context: "scenario target",
                expected: n,
                got: self.target.dim(),
            });
        }
        if !(self.backoff >= T::zero() && self.backoff < T::one()) {
            return Err(Error::invalid("target backoff must lie in [0, 1)"));
        }
        GaussianState::new(self.initial.mean.clone(), self.initial.cov.clone())?;
        SteeringTarget::new(self.target.mean.clone(), self.target.cov.clone())?;
        Ok(())
    }
}

/// Solver outcome of one greedy step.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveSummary<T: Scalar> {
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: T,
    pub residuals: KktResiduals<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord<T: Scalar> {
    /// Nominal input `ν̂_t` used for linearization.
    pub nominal_input: DVector<T>,
    pub law: AffineLaw<T>,
    pub solve: SolveSummary<T>,
}

/// Predicted states `(μ̂_t, Σ̂_t)` for `t = 0..=T` and the applied laws.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringTrace<T: Scalar> {
    pub states: Vec<GaussianState<T>>,
    pub steps: Vec<StepRecord<T>>,
}

impl<T: Scalar> SteeringTrace<T> {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn terminal(&self) -> &GaussianState<T> {
        self.states
            .last()
            .expect("trace has at least the initial state")
    }

    pub fn laws(&self) -> impl Iterator<Item = &AffineLaw<T>> {
        self.steps.iter().map(|s| &s.law)
    }
}

pub fn greedy_steer<T: Scalar>(
    model: &(impl TransitionModel<T> + ?Sized),
    scenario: &SteeringScenario<T>,
) -> Result<SteeringTrace<T>> {
    scenario.validate()?;
    let n = model.state_dim();
    if scenario.initial.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "scenario state",
            expected: n,
            got: scenario.initial.dim(),
        });
    }
    let big_t = scenario.horizon;
    let mut states = vec![scenario.initial.clone()];
    let mut steps: Vec<StepRecord<T>> = Vec::with_capacity(big_t);
    let mut nominal = DVector::zeros(model.input_dim());
    for t in 0..big_t {
        let state = &states[t];
        let lin = linearize(model, &state.mean, &nominal)?;
        let target = scenario.planning_target(big_t - t);
        let sol =
            lcs_solve(&lin, state, &target, big_t - t, &scenario.lcs).map_err(|e| match e {
                Error::SteeringInfeasible { detail, .. } => {
                    Error::SteeringInfeasible { step: t, detail }
                }
                Error::NumericalFailure(msg) => Error::NumericalFailure(format!("step {t}: {msg}")),
                other => other,
            })?;
        let next = ut_propagate(state, model, &sol.first_law, &scenario.ut)?;
        let report = &sol.report;
        steps.push(StepRecord {
            nominal_input: nominal,
            law: sol.first_law,
            solve: SolveSummary {
                status: report.status,
                iterations: report.iterations,
                objective: report.objective,
                residuals: report.residuals.clone(),
            },
        });
        nominal = steps[t].law.apply(&next.mean);
        states.push(next);
    }
    Ok(SteeringTrace { states, steps })
}

/// Re-propagates the initial state of `trace` through its stored laws.
pub fn replay<T: Scalar>(
    model: &(impl TransitionModel<T> + ?Sized),
    trace: &SteeringTrace<T>,
    ut: &UtParams<T>,
) -> Result<Vec<GaussianState<T>>> {
    let mut states = vec![trace.states[0].clone()];
    for law in trace.laws() {
        let next = ut_propagate(states.last().expect("non-empty"), model, law, ut)?;
        states.push(next);
    }
    Ok(states)
}

/// `trace(Σ̂_T)` of `cautious` minus that of `reference`.
pub fn conservatism<T: Scalar>(cautious: &SteeringTrace<T>, reference: &SteeringTrace<T>) -> T {
    cautious.terminal().cov.trace() - reference.terminal().cov.trace()
}

/// Largest eigenvalue of `cov - scale · bound`.
pub fn loewner_gap<T: Scalar>(cov: &DMatrix<T>, bound: &DMatrix<T>, scale: T) -> T {
    linalg::max_eigenvalue(&linalg::symmetrize(&(cov - bound * scale)))
}

/// One simulated trajectory: `T + 1` state rows and `T` input rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout<T: Scalar> {
    pub states: DMatrix<T>,
    pub inputs: DMatrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutReport<T: Scalar> {
    pub rollouts: Vec<Rollout<T>>,
    pub terminal_mean: DVector<T>,
    /// Unbiased sample covariance of the terminal states.
    pub terminal_cov: DMatrix<T>,
}

/// Seeded generator for rollout `index`; independent of scheduling.
pub fn rollout_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Draws `z_0 ~ N(μ_0, Σ_0)` and applies the stored laws on `true_model`.
pub fn monte_carlo<T: Scalar>(
    true_model: &(impl TransitionModel<T> + ?Sized),
    trace: &SteeringTrace<T>,
    n_rollouts: usize,
    seed: u64,
) -> Result<RolloutReport<T>> {
    let init = &trace.states[0];
    let n = init.dim();
    let m = true_model.input_dim();
    let big_t = trace.horizon();
    if true_model.state_dim() != n {
        return Err(Error::DimensionMismatch {
            context: "rollout model",
            expected: n,
            got: true_model.state_dim(),
        });
    }
    let root = linalg::psd_sqrt(&init.cov);
    let rollouts = (0..n_rollouts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rollout_rng(seed, r);
            let mut states = DMatrix::zeros(big_t + 1, n);
            let mut inputs = DMatrix::zeros(big_t, m);
            let mut z = &init.mean + &root * standard_normal_vector::<T>(&mut rng, n);
            states.set_row(0, &z.transpose());
            for (t, law) in trace.laws().enumerate() {
                let u = law.apply(&z);
                z = true_model.sample(&z, &u, &mut rng)?;
                inputs.set_row(t, &u.transpose());
                states.set_row(t + 1, &z.transpose());
            }
            Ok(Rollout { states, inputs })
        })
        .collect::<Result<Vec<_>>>()?;
    let (terminal_mean, terminal_cov) =
        sample_moments(rollouts.iter().map(|r| r.states.row(big_t).transpose()), n);
    Ok(RolloutReport {
        rollouts,
        terminal_mean,
        terminal_cov,
    })
}

fn sample_moments<T: Scalar>(
    samples: impl Iterator<Item = DVector<T>> + Clone,
    n: usize,
) -> (DVector<T>, DMatrix<T>) {
    let count = samples.clone().count();
    let mut mean = DVector::zeros(n);
    for s in samples.clone() {
        mean += s;
    }
    if count == 0 {
        return (mean, DMatrix::zeros(n, n));
    }
    mean /= T::from_usize_lossy(count);
    let mut cov = DMatrix::zeros(n, n);
    if count > 1 {
        for s in samples {
            let dev = s - &mean;
            cov += &dev * dev.transpose();
        }
        cov /= T::from_usize_lossy(count - 1);
    }
    (mean, linalg::symmetrize(&cov))
}
