//! Run configuration: a TOML file whose every key is optional. Defaults reproduce the
//! unicycle experiment.

use std::path::Path;

use gpcs::dynamics::{SamplingBox, UnicycleParams};
use gpcs::gp::TrainConfig;
use gpcs::greedy::{SteeringScenario, DEFAULT_BACKOFF};
use gpcs::lcs::{LcsSettings, MeanMode, SteeringTarget};
use gpcs::sdp::SolverSettings;
use gpcs::ut::{GaussianState, UtParams};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub system: SystemConfig,
    pub sampling: SamplingConfig,
    pub training: TrainingConfig,
    pub scenario: ScenarioConfig,
    pub ut: UtConfig,
    pub solver: SolverConfig,
    pub evaluation: EvaluationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub tau: f64,
    pub noise_std: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub size: usize,
    pub z_min: [f64; 4],
    pub z_max: [f64; 4],
    pub u_min: [f64; 2],
    pub u_max: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub inducing: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub step_size: f64,
    pub share_inducing: bool,
    pub holdout_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub initial_mean: [f64; 4],
    pub initial_std: [f64; 4],
    pub target_mean: [f64; 4],
    pub target_std: [f64; 4],
    pub horizon: usize,
    pub backoff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Defaults to `3 - n` when absent.
    pub kappa: Option<f64>,
    pub noise_per_point: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub feedback_depth: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub rollouts: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            system: SystemConfig::default(),
            sampling: SamplingConfig::default(),
            training: TrainingConfig::default(),
            scenario: ScenarioConfig::default(),
            ut: UtConfig::default(),
            solver: SolverConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        let p = UnicycleParams::<f64>::default();
        Self {
            tau: p.tau,
            noise_std: p.noise_std,
        }
    }
}

impl Default for SamplingConfig {
    fn default() -> Self {
        let b = SamplingBox::<f64>::default();
        let arr4 = |v: &DVector<f64>| [v[0], v[1], v[2], v[3]];
        Self {
            size: 9000,
            z_min: arr4(&b.z_min),
            z_max: arr4(&b.z_max),
            u_min: [b.u_min[0], b.u_min[1]],
            u_max: [b.u_max[0], b.u_max[1]],
        }
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            inducing: t.num_inducing,
            batch_size: t.batch_size,
            iterations: t.iterations,
            step_size: t.step_size,
            share_inducing: t.share_inducing,
            holdout_fraction: 0.1,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            initial_mean: [0.0, 0.0, 0.0, 1.0],
            initial_std: [0.1, 0.2, 0.1, 0.1],
            target_mean: [1.0, 2.0, 0.0, 1.0],
            target_std: [0.1, 0.05, 0.05, 0.05],
            horizon: 30,
            backoff: DEFAULT_BACKOFF,
        }
    }
}

impl Default for UtConfig {
    fn default() -> Self {
        let u = UtParams::<f64>::default();
        Self {
            alpha: u.alpha,
            beta: u.beta,
            kappa: u.kappa,
            noise_per_point: u.noise_per_point,
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::<f64>::default();
        Self {
            tolerance: s.tol,
            max_outer: s.max_outer,
            max_inner: s.max_inner,
            feedback_depth: None,
        }
    }
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { rollouts: 400 }
    }
}

fn diag_sq(std: &[f64; 4]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(4, std.iter().map(|s| s * s)))
}

fn check(ok: bool, msg: &str) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(Failure::Usage(msg.to_owned()))
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Failure::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                toml::from_str(&text)
                    .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        check(
            self.system.tau > 0.0 && self.system.tau.is_finite(),
            "system.tau must be positive",
        )?;
        check(
            finite(&self.system.noise_std) && self.system.noise_std.iter().all(|s| *s >= 0.0),
            "system.noise_std entries must be non-negative",
        )?;
        check(self.sampling.size > 0, "dataset size must be positive")?;
        self.sampling_box()
            .validate(4, 2)
            .map_err(|e| Failure::Usage(format!("sampling: {e}")))?;
        check(
            self.training.inducing > 0,
            "training.inducing must be positive",
        )?;
        check(
            self.training.batch_size > 0,
            "training.batch_size must be positive",
        )?;
        check(
            self.training.step_size > 0.0,
            "training.step_size must be positive",
        )?;
        check(
            self.training.holdout_fraction > 0.0 && self.training.holdout_fraction < 1.0,
            "training.holdout_fraction must lie in (0, 1)",
        )?;
        let s = &self.scenario;
        check(
            finite(&s.initial_mean) && finite(&s.target_mean),
            "scenario means must be finite",
        )?;
        check(
            s.initial_std.iter().all(|x| *x >= 0.0 && x.is_finite()),
            "scenario.initial_std entries must be non-negative",
        )?;
        check(
            s.target_std.iter().all(|x| *x > 0.0 && x.is_finite()),
            "scenario.target_std entries must be positive",
        )?;
        check(s.horizon > 0, "scenario.horizon must be positive")?;
        check(
            (0.0..1.0).contains(&s.backoff),
            "scenario.backoff must lie in [0, 1)",
        )?;
        check(self.ut.alpha > 0.0, "ut.alpha must be positive")?;
        check(
            self.solver.tolerance > 0.0,
            "solver.tolerance must be positive",
        )?;
        check(
            self.solver.max_outer > 0 && self.solver.max_inner > 0,
            "solver iteration limits must be positive",
        )?;
        check(
            self.evaluation.rollouts > 0,
            "evaluation.rollouts must be positive",
        )?;
        Ok(())
    }

    pub fn unicycle(&self) -> UnicycleParams<f64> {
        UnicycleParams {
            tau: self.system.tau,
            noise_std: self.system.noise_std,
        }
    }

    pub fn sampling_box(&self) -> SamplingBox<f64> {
        SamplingBox {
            z_min: DVector::from_column_slice(&self.sampling.z_min),
            z_max: DVector::from_column_slice(&self.sampling.z_max),
            u_min: DVector::from_column_slice(&self.sampling.u_min),
            u_max: DVector::from_column_slice(&self.sampling.u_max),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            num_inducing: self.training.inducing,
            batch_size: self.training.batch_size,
            iterations: self.training.iterations,
            step_size: self.training.step_size,
            seed: self.seed,
            share_inducing: self.training.share_inducing,
            ..TrainConfig::default()
        }
    }

    pub fn target(&self) -> Result<SteeringTarget<f64>, Failure> {
        SteeringTarget::new(
            DVector::from_column_slice(&self.scenario.target_mean),
            diag_sq(&self.scenario.target_std),
        )
        .map_err(|e| Failure::Usage(format!("scenario target: {e}")))
    }

    pub fn scenario(&self) -> Result<SteeringScenario<f64>, Failure> {
        let initial = GaussianState::new(
            DVector::from_column_slice(&self.scenario.initial_mean),
            diag_sq(&self.scenario.initial_std),
        )
        .map_err(|e| Failure::Usage(format!("scenario initial state: {e}")))?;
        let mut scenario = SteeringScenario::new(initial, self.target()?, self.scenario.horizon)
            .map_err(|e| Failure::Usage(format!("scenario: {e}")))?;
        scenario.backoff = self.scenario.backoff;
        scenario.ut = UtParams {
            alpha: self.ut.alpha,
            beta: self.ut.beta,
            kappa: self.ut.kappa,
            noise_per_point: self.ut.noise_per_point,
        };
        scenario.lcs = LcsSettings {
            solver: SolverSettings {
                tol: self.solver.tolerance,
                max_outer: self.solver.max_outer,
                max_inner: self.solver.max_inner,
                ..SolverSettings::default()
            },
            feedback_depth: self.solver.feedback_depth,
            mean_mode: MeanMode::LeastSquares,
        };
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(
            toml::from_str::<RunConfig>("").unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<RunConfig>("[training]\ninducing_points = 3\n").unwrap_err();
        assert!(err.to_string().contains("inducing_points"), "{err}");
    }

    #[test]
    fn default_round_trips_through_toml() {
        let text = toml::to_string(&RunConfig::default()).unwrap();
        assert_eq!(
            toml::from_str::<RunConfig>(&text).unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn zero_inducing_points_is_a_config_error() {
        let mut cfg = RunConfig::default();
        cfg.training.inducing = 0;
        assert!(matches!(cfg.validate(), Err(Failure::Usage(_))));
    }
}
