//! `gpcs`: collect transitions from the unicycle simulator, train an SVGP model,
//! steer the state distribution greedily, evaluate by Monte Carlo, and plot.

mod config;
mod plot;
mod report;
mod trace;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gpcs::dynamics::{collect_dataset, TransitionModel};
use gpcs::gp::{dataset_load, dataset_save, model_load, model_save, svgp_train};
use gpcs::greedy::{greedy_steer, loewner_gap, monte_carlo};
use gpcs::{AnalyticUnicycle, SvgpDynamics};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use config::RunConfig;

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, configuration, or missing inputs (exit code 2).
    Usage(String),
    /// The computation itself failed (exit code 1).
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<gpcs::Error> for Failure {
    fn from(e: gpcs::Error) -> Self {
        match e {
            gpcs::Error::InvalidInput(m) => Failure::Usage(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "gpcs",
    version,
    about = "Learn a GP model of the unicycle and steer its state distribution"
)]
struct Cli {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample transitions uniformly over the configured box.
    Collect {
        /// Number of transitions (overrides sampling.size).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value = "data.csv")]
        out: PathBuf,
    },
    /// Train the SVGP model on a held-in split and report held-out RMSE.
    Train {
        #[arg(long, default_value = "data.csv")]
        data: PathBuf,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        #[arg(long)]
        inducing: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Run greedy covariance steering and write the trace (also the policy file).
    Steer {
        #[arg(long, default_value = "model.json", conflicts_with = "exact_model")]
        model: PathBuf,
        /// Plan with the analytic unicycle instead of a trained model.
        #[arg(long)]
        exact_model: bool,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
    },
    /// Roll the stored laws out on the noisy simulator.
    Evaluate {
        #[arg(long, default_value = "trace.csv")]
        trace: PathBuf,
        #[arg(long)]
        rollouts: Option<usize>,
        #[arg(long, default_value = "rollouts.csv")]
        out: PathBuf,
        #[arg(long, default_value = "summary.csv")]
        summary: PathBuf,
    },
    /// Draw the trace, target, and terminal particles as SVG.
    Plot {
        #[arg(long, default_value = "trace.csv")]
        trace: PathBuf,
        /// Rollout CSV from `evaluate`.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
    },
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn fmt_vec(v: impl IntoIterator<Item = f64>) -> String {
    let parts: Vec<String> = v.into_iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn collect(cfg: &mut RunConfig, n: Option<usize>, out: &Path) -> Result<(), Failure> {
    if let Some(n) = n {
        cfg.sampling.size = n;
    }
    cfg.validate()?;
    let data = collect_dataset(
        &cfg.unicycle(),
        &cfg.sampling_box(),
        cfg.sampling.size,
        cfg.seed,
    )?;
    dataset_save(&data, out)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", out.display())))?;
    let s = &cfg.sampling;
    println!("wrote {} transitions to {}", data.len(), out.display());
    println!("state box: {} .. {}", fmt_vec(s.z_min), fmt_vec(s.z_max));
    println!("input box: {} .. {}", fmt_vec(s.u_min), fmt_vec(s.u_max));
    Ok(())
}

fn train(
    cfg: &mut RunConfig,
    data: &Path,
    out: &Path,
    inducing: Option<usize>,
    iterations: Option<usize>,
) -> Result<(), Failure> {
    if let Some(m) = inducing {
        cfg.training.inducing = m;
    }
    if let Some(it) = iterations {
        cfg.training.iterations = it;
    }
    cfg.validate()?;
    if !data.exists() {
        return Err(Failure::Usage(format!(
            "data not found: {}",
            data.display()
        )));
    }
    let all = dataset_load::<f64>(data)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", data.display())))?;
    let n = all.len();
    let held = ((n as f64 * cfg.training.holdout_fraction).round() as usize).max(1);
    if held >= n {
        return Err(Failure::Usage(format!(
            "{n} transitions are too few for a held-out split"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    order.shuffle(&mut rng);
    let (test_idx, train_idx) = order.split_at(held);
    let train_set = all.select(train_idx)?;
    let test_set = all.select(test_idx)?;
    let mut train_cfg = cfg.train_config();
    train_cfg.batch_size = train_cfg.batch_size.min(train_set.len());
    let (model, rep) = svgp_train(&train_set, &train_cfg)?;
    model_save(&model, out)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", out.display())))?;

    let d = model.output_dim();
    let mut sq = vec![0.0; d];
    for i in 0..test_set.len() {
        let x: Vec<f64> = test_set.inputs().row(i).iter().copied().collect();
        let (mu, _) = model.predict(&x)?;
        for (k, s) in sq.iter_mut().enumerate() {
            *s += (mu[k] - test_set.outputs()[(i, k)]).powi(2);
        }
    }
    let rmse = sq.iter().map(|s| (s / test_set.len() as f64).sqrt());
    println!(
        "trained on {} transitions, {} held out",
        train_set.len(),
        test_set.len()
    );
    println!(
        "ELBO: initial {:.6e}, final {:.6e} after {} iterations",
        rep.initial_elbo, rep.final_elbo, rep.iterations
    );
    println!("held-out RMSE per output: {}", fmt_vec(rmse));
    println!(
        "simulator noise std:      {}",
        fmt_vec(cfg.system.noise_std)
    );
    println!("wrote model to {}", out.display());
    Ok(())
}

fn steer(
    cfg: &mut RunConfig,
    model: &Path,
    exact: bool,
    horizon: Option<usize>,
    out: &Path,
) -> Result<(), Failure> {
    if let Some(h) = horizon {
        cfg.scenario.horizon = h;
    }
    cfg.validate()?;
    let scenario = cfg.scenario()?;
    let dynamics: Box<dyn TransitionModel<f64>> = if exact {
        Box::new(AnalyticUnicycle::new(cfg.unicycle())?)
    } else {
        if !model.exists() {
            return Err(Failure::Usage(format!(
                "model not found: {}",
                model.display()
            )));
        }
        let gp = model_load::<f64>(model)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", model.display())))?;
        Box::new(SvgpDynamics::new(gp)?)
    };
    let result = greedy_steer(&*dynamics, &scenario)?;
    trace::save(&result, out)?;
    let last = result.terminal();
    println!(
        "steered {} steps with the {} model",
        result.horizon(),
        if exact { "exact" } else { "learned" }
    );
    println!(
        "predicted terminal mean: {}",
        fmt_vec(last.mean.iter().copied())
    );
    println!(
        "mean error (max abs): {:.3e}",
        (&last.mean - &scenario.target.mean).amax()
    );
    println!(
        "max eig(predicted cov - target cov): {:.3e}",
        loewner_gap(&last.cov, &scenario.target.cov, 1.0)
    );
    println!("wrote trace to {}", out.display());
    Ok(())
}

fn evaluate(
    cfg: &mut RunConfig,
    trace_path: &Path,
    rollouts: Option<usize>,
    out: &Path,
    summary_path: &Path,
) -> Result<(), Failure> {
    if let Some(r) = rollouts {
        cfg.evaluation.rollouts = r;
    }
    cfg.validate()?;
    let policy = trace::load(trace_path)?;
    let simulator = AnalyticUnicycle::new(cfg.unicycle())?;
    let m = simulator.input_dim();
    if policy.states[0].dim() != simulator.state_dim()
        || policy.steps.iter().any(|s| s.law.feedforward.len() != m)
    {
        return Err(Failure::Runtime(format!(
            "{}: trace dimensions do not match the simulator ({} states, {m} inputs)",
            trace_path.display(),
            simulator.state_dim()
        )));
    }
    let result = monte_carlo(&simulator, &policy, cfg.evaluation.rollouts, cfg.seed)?;
    let target = cfg.target()?;
    let summary = report::Summary::new(&result, &target.mean, &target.cov);
    write(out, report::rollouts_to_csv(&result))?;
    write(summary_path, summary.to_csv())?;
    println!(
        "{} rollouts over {} steps",
        summary.rollouts,
        policy.horizon()
    );
    println!(
        "sample terminal mean: {}",
        fmt_vec(summary.mean.iter().copied())
    );
    println!("mean error (max abs): {:.3e}", summary.mean_error);
    println!(
        "eigenvalues of (sample cov - target cov): {}",
        fmt_vec(summary.gap_eigenvalues.iter().map(|v| *v * 1e3)).replace(']', "] x1e-3")
    );
    println!(
        "max eig(sample cov - 1.5 target cov): {:.3e}",
        summary.slack_gap
    );
    println!("wrote {} and {}", out.display(), summary_path.display());
    Ok(())
}

fn plot(
    cfg: &RunConfig,
    trace_path: &Path,
    report_path: Option<&Path>,
    out: &Path,
) -> Result<(), Failure> {
    let policy = trace::load(trace_path)?;
    let particles = match report_path {
        None => None,
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("report not found: {}: {e}", p.display())))?;
            Some(
                report::terminal_particles(&text)
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?,
            )
        }
    };
    let target = cfg.target()?;
    write(
        out,
        plot::render(&policy, Some(&target), particles.as_ref()),
    )?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Collect { n, out } => collect(&mut cfg, n, &out),
        Command::Train {
            data,
            out,
            inducing,
            iterations,
        } => train(&mut cfg, &data, &out, inducing, iterations),
        Command::Steer {
            model,
            exact_model,
            horizon,
            out,
        } => steer(&mut cfg, &model, exact_model, horizon, &out),
        Command::Evaluate {
            trace,
            rollouts,
            out,
            summary,
        } => evaluate(&mut cfg, &trace, rollouts, &out, &summary),
        Command::Plot { trace, report, out } => plot(&cfg, &trace, report.as_deref(), &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
