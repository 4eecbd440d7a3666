//! Linear covariance steering over a finite horizon: a minimum-norm feedforward
//! for the terminal mean and an LMI-constrained quadratic program for the feedback
//! gains that bound the terminal covariance.
//!
//! The policy over `H` steps is
//!
//! ```text
//! u_j = V_j + Λ_j (z_0 - μ) + Σ_{i<j} Θ_{j,i} w_i
//! ```
//!
//! so the input mean is `V`, and the expected input energy splits into
//! `VᵀV + tr(ΛΣΛᵀ) + tr(ΘW̄Θᵀ)`. Only the terminal covariance is constrained, so each
//! source of spread (the initial state and every disturbance) contributes gains
//! that live in the row space of its reach matrix onto the terminal state; the
//! program is posed in those coordinates.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::LinearizedModel;
use crate::error::{Error, Result};
use crate::linalg;
use crate::sdp::{
    self, KktResiduals, LmiQpProblem, SolveReport, SolveStatus, SolverSettings, SymSparse,
};
use crate::ut::{AffineLaw, GaussianState};
use crate::Scalar;

/// Terminal mean and covariance bound.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringTarget<T: Scalar> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
}

impl<T: Scalar> SteeringTarget<T> {
    pub fn new(mean: DVector<T>, cov: DMatrix<T>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "target covariance",
                expected: n,
                got: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("target mean and covariance must be finite"));
        }
        if (&cov - cov.transpose()).amax() > T::lit(1e-12) * cov.amax().max(T::one()) {
            return Err(Error::invalid("target covariance must be symmetric"));
        }
        let min_eig = linalg::min_eigenvalue(&cov);
        if !(min_eig > T::zero()) {
            return Err(Error::NotPositiveDefinite {
                what: "target covariance",
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

    /// Slack allowed on the terminal Loewner bound.
    pub fn tolerance(&self) -> T {
        T::lit(1e-6) * self.cov.trace() / T::from_usize_lossy(self.dim())
    }
}

/// Stacked affine recursion `z_{j+1} = A z_j + B u_j + d + w_j` over `H` steps:
/// `z = Γ z_0 + H_u u + H_w w + offset` with `z = (z_0, …, z_H)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizonBlocks<T: Scalar> {
    pub horizon: usize,
    pub gamma: DMatrix<T>,
    pub input_map: DMatrix<T>,
    pub noise_map: DMatrix<T>,
    pub offset: DVector<T>,
}

impl<T: Scalar> HorizonBlocks<T> {
    pub fn state_dim(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.input_map.ncols() / self.horizon
    }

    /// Last block-row of a stacked matrix.
    pub fn terminal_rows(&self, m: &DMatrix<T>) -> DMatrix<T> {
        let n = self.state_dim();
        m.rows(self.horizon * n, n).into_owned()
    }

    /// `E_T`, selecting `z_H` from the stacked states.
    pub fn terminal_selector(&self) -> DMatrix<T> {
        let n = self.state_dim();
        let mut e = DMatrix::zeros(n, (self.horizon + 1) * n);
        e.view_mut((0, self.horizon * n), (n, n))
            .fill_with_identity();
        e
    }

    /// Stacked state mean for initial mean `mu` and input means `v`.
    pub fn stacked_mean(&self, mu: &DVector<T>, v: &DVector<T>) -> DVector<T> {
        &self.gamma * mu + &self.input_map * v + &self.offset
    }

    fn terminal_free_mean(&self, mu: &DVector<T>) -> DVector<T> {
        let n = self.state_dim();
        (&self.gamma * mu + &self.offset)
            .rows(self.horizon * n, n)
            .into_owned()
    }
}

pub fn build_blocks<T: Scalar>(
    lin: &LinearizedModel<T>,
    horizon: usize,
) -> Result<HorizonBlocks<T>> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    let n = lin.state_dim();
    let m = lin.input_dim();
    if lin.b.nrows() != n || lin.d.len() != n || lin.a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "linearized model",
            expected: n,
            got: lin.b.nrows(),
        });
    }
    let mut powers = vec![DMatrix::identity(n, n)];
    for j in 1..=horizon {
        let next = &lin.a * &powers[j - 1];
        powers.push(next);
    }
    let rows = (horizon + 1) * n;
    let mut gamma = DMatrix::zeros(rows, n);
    let mut input_map = DMatrix::zeros(rows, horizon * m);
    let mut noise_map = DMatrix::zeros(rows, horizon * n);
    for j in 0..=horizon {
        gamma.view_mut((j * n, 0), (n, n)).copy_from(&powers[j]);
        for i in 0..j {
            let p = &powers[j - 1 - i];
            input_map
                .view_mut((j * n, i * m), (n, m))
                .copy_from(&(p * &lin.b));
            noise_map.view_mut((j * n, i * n), (n, n)).copy_from(p);
        }
    }
    let repeated = DVector::from_fn(horizon * n, |k, _| lin.d[k % n]);
    let offset = &noise_map * repeated;
    Ok(HorizonBlocks {
        horizon,
        gamma,
        input_map,
        noise_map,
        offset,
    })
}

/// `(V, Λ, Θ)` over the whole horizon; `Θ` is strictly block-lower-triangular.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams<T: Scalar> {
    pub feedforward: DVector<T>,
    pub initial_gain: DMatrix<T>,
    pub disturbance_gain: DMatrix<T>,
}

impl<T: Scalar> PolicyParams<T> {
    pub fn zero(horizon: usize, state_dim: usize, input_dim: usize) -> Self {
        Self {
            feedforward: DVector::zeros(horizon * input_dim),
            initial_gain: DMatrix::zeros(horizon * input_dim, state_dim),
            disturbance_gain: DMatrix::zeros(horizon * input_dim, horizon * state_dim),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.initial_gain.ncols()
    }

    pub fn horizon(&self) -> usize {
        self.disturbance_gain.ncols() / self.state_dim().max(1)
    }

    pub fn input_dim(&self) -> usize {
        self.feedforward.len() / self.horizon().max(1)
    }

    /// Input at step `j` given `z_0 - μ` and the disturbances realized so far.
    pub fn input(
        &self,
        j: usize,
        initial_deviation: &DVector<T>,
        disturbances: &[DVector<T>],
    ) -> DVector<T> {
        let m = self.input_dim();
        let n = self.state_dim();
        let mut u = self.feedforward.rows(j * m, m).into_owned()
            + self.initial_gain.rows(j * m, m) * initial_deviation;
        for (i, w) in disturbances.iter().enumerate().take(j) {
            u += self.disturbance_gain.view((j * m, i * n), (m, n)) * w;
        }
        u
    }

    /// The first step as a state-feedback law around the initial mean `mu`.
    pub fn first_law(&self, mu: &DVector<T>) -> AffineLaw<T> {
        let m = self.input_dim();
        let gain = self.initial_gain.rows(0, m).into_owned();
        let feedforward = self.feedforward.rows(0, m) - &gain * mu;
        AffineLaw { feedforward, gain }
    }

    /// Expected input energy `VᵀV + tr(ΛΣΛᵀ) + tr(ΘW̄Θᵀ)`.
    pub fn expected_cost(&self, sigma: &DMatrix<T>, w: &DMatrix<T>) -> T {
        let n = self.state_dim();
        let mut cost = self.feedforward.norm_squared()
            + (&self.initial_gain * sigma * self.initial_gain.transpose()).trace();
        for i in 0..self.horizon() {
            let block = self.disturbance_gain.columns(i * n, n);
            cost += (&block * w * block.transpose()).trace();
        }
        cost
    }
}

/// Closed-loop terminal mean and covariance of `policy` on the stacked dynamics.
pub fn terminal_moments<T: Scalar>(
    blocks: &HorizonBlocks<T>,
    policy: &PolicyParams<T>,
    mu: &DVector<T>,
    sigma: &DMatrix<T>,
    w: &DMatrix<T>,
) -> (DVector<T>, DMatrix<T>) {
    let n = blocks.state_dim();
    let mean = blocks.terminal_rows(&DMatrix::from_column_slice(
        blocks.gamma.nrows(),
        1,
        blocks.stacked_mean(mu, &policy.feedforward).as_slice(),
    ));
    let init = blocks.terminal_rows(&(&blocks.gamma + &blocks.input_map * &policy.initial_gain));
    let dist =
        blocks.terminal_rows(&(&blocks.input_map * &policy.disturbance_gain + &blocks.noise_map));
    let mut cov = &init * sigma * init.transpose();
    for i in 0..blocks.horizon {
        let c = dist.columns(i * n, n);
        cov += &c * w * c.transpose();
    }
    (mean.column(0).into_owned(), linalg::symmetrize(&cov))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeanMode {
    /// Requires a reachable terminal mean; rank deficiency is an error.
    Exact,
    /// Minimum-norm least-squares feedforward when the target is out of reach.
    LeastSquares,
}

/// Minimum-norm feedforward reaching `mu_goal` from `mu`.
pub fn solve_mean<T: Scalar>(
    blocks: &HorizonBlocks<T>,
    mu: &DVector<T>,
    mu_goal: &DVector<T>,
    mode: MeanMode,
) -> Result<DVector<T>> {
    let n = blocks.state_dim();
    if mu.len() != n || mu_goal.len() != n {
        return Err(Error::DimensionMismatch {
            context: "mean boundary conditions",
            expected: n,
            got: mu.len().min(mu_goal.len()),
        });
    }
    let reach = blocks.terminal_rows(&blocks.input_map);
    let (u, s, v) = linalg::thin_svd(&reach, T::lit(1e-10));
    if mode == MeanMode::Exact && s.len() < n {
        return Err(Error::Unreachable {
            rank: s.len(),
            required: n,
        });
    }
    let rhs = mu_goal - blocks.terminal_free_mean(mu);
    let coeff = DVector::from_fn(s.len(), |i, _| u.column(i).dot(&rhs) / s[i]);
    Ok(v * coeff)
}

/// One source of terminal spread: `fixed + U_r diag(s_r) H` where `H` are program
/// variables mapped back to gains through `V_r`.
#[derive(Clone, Debug)]
struct Source<T: Scalar> {
    /// Policy rows the gains act on.
    row_start: usize,
    /// `None` for the initial state, `Some(i)` for disturbance `w_i`.
    disturbance: Option<usize>,
    fixed: DMatrix<T>,
    reach_left: DMatrix<T>,
    reach_values: DVector<T>,
    reach_right: DMatrix<T>,
    /// Orthonormal factor and variances of the source covariance.
    basis: DMatrix<T>,
    variances: DVector<T>,
    var_offset: usize,
    col_offset: usize,
}

impl<T: Scalar> Source<T> {
    fn rank(&self) -> usize {
        self.reach_values.len()
    }

    fn width(&self) -> usize {
        self.variances.len()
    }
}

/// The covariance program together with what is needed to read gains back from it.
#[derive(Clone, Debug)]
pub struct CovarianceProgram<T: Scalar> {
    pub problem: LmiQpProblem<T>,
    sources: Vec<Source<T>>,
    horizon: usize,
    state_dim: usize,
    input_dim: usize,
}

impl<T: Scalar> CovarianceProgram<T> {
    /// `(Λ, Θ)` for a solution vector.
    pub fn gains(&self, x: &DVector<T>) -> (DMatrix<T>, DMatrix<T>) {
        let (n, m, h) = (self.state_dim, self.input_dim, self.horizon);
        let mut lambda = DMatrix::zeros(h * m, n);
        let mut theta = DMatrix::zeros(h * m, h * n);
        for src in &self.sources {
            let (r, k) = (src.rank(), src.width());
            if r == 0 {
                continue;
            }
            // gain = V_r · H · diag(d)^{-1/2} · Uᵀ
            let mut core = DMatrix::zeros(r, k);
            for a in 0..r {
                for c in 0..k {
                    core[(a, c)] = x[src.var_offset + a * k + c] / src.variances[c].sqrt();
                }
            }
            let gain = &src.reach_right * core * src.basis.transpose();
            match src.disturbance {
                None => lambda
                    .rows_mut(src.row_start, gain.nrows())
                    .copy_from(&gain),
                Some(i) => theta
                    .view_mut((src.row_start, i * n), (gain.nrows(), n))
                    .copy_from(&gain),
            }
        }
        (lambda, theta)
    }
}

fn source_factor<T: Scalar>(cov: &DMatrix<T>) -> (DMatrix<T>, DVector<T>) {
    linalg::psd_factor(cov, T::lit(1e-14))
}

/// Assembles the covariance program. `feedback_depth` limits disturbance feedback to
/// the `depth` steps after each disturbance (`None` keeps all of them).
pub fn covariance_program<T: Scalar>(
    blocks: &HorizonBlocks<T>,
    sigma: &DMatrix<T>,
    w: &DMatrix<T>,
    sigma_goal: &DMatrix<T>,
    feedback_depth: Option<usize>,
) -> Result<CovarianceProgram<T>> {
    let n = blocks.state_dim();
    let m = blocks.input_dim();
    let h = blocks.horizon;
    for (what, mat) in [
        ("state covariance", sigma),
        ("noise covariance", w),
        ("target covariance", sigma_goal),
    ] {
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: what,
                expected: n,
                got: mat.nrows(),
            });
        }
    }
    let goal_chol = linalg::cholesky(&linalg::symmetrize(sigma_goal), "target covariance")?;
    let reach_all = blocks.terminal_rows(&blocks.input_map);
    let fixed_all = blocks.terminal_rows(&blocks.noise_map);
    let terminal_gamma = blocks.terminal_rows(&blocks.gamma);

    let mut sources = Vec::new();
    let mut var_offset = 0;
    let mut col_offset = 0;
    let mut push = |disturbance: Option<usize>,
                    cov: &DMatrix<T>,
                    phi: DMatrix<T>,
                    row_start: usize,
                    row_count: usize| {
        let (basis, variances) = source_factor(cov);
        if variances.is_empty() {
            return;
        }
        let root = DMatrix::from_diagonal(&variances.map(|v| v.sqrt()));
        let fixed = &phi * &basis * root;
        let reach = reach_all.columns(row_start, row_count).into_owned();
        let (reach_left, reach_values, reach_right) = linalg::thin_svd(&reach, T::lit(1e-12));
        let src = Source {
            row_start,
            disturbance,
            fixed,
            reach_left,
            reach_values,
            reach_right,
            basis,
            variances,
            var_offset,
            col_offset,
        };
        var_offset += src.rank() * src.width();
        col_offset += src.width();
        sources.push(src);
    };
    push(None, sigma, terminal_gamma, 0, h * m);
    for i in 0..h {
        let first = i + 1;
        let last = match feedback_depth {
            Some(depth) => (i + depth).min(h - 1),
            None => h - 1,
        };
        let count = if last >= first {
            (last + 1 - first) * m
        } else {
            0
        };
        let phi = fixed_all.columns(i * n, n).into_owned();
        push(Some(i), w, phi, first * m, count);
    }

    let p = var_offset;
    let k = col_offset;
    let s = n + k;
    // congruence with diag(L⁻¹, I) turns [[Σ_goal, S], [Sᵀ, I]] into [[I, L⁻¹S], [.., I]]
    let mut f0 = DMatrix::identity(s, s);
    let mut terms = Vec::with_capacity(p);
    for src in &sources {
        let fixed = linalg::chol_solve_lower(&goal_chol, &src.fixed);
        f0.view_mut((0, n + src.col_offset), (n, src.width()))
            .copy_from(&fixed);
        f0.view_mut((n + src.col_offset, 0), (src.width(), n))
            .copy_from(&fixed.transpose());
        let dirs = linalg::chol_solve_lower(
            &goal_chol,
            &(&src.reach_left * DMatrix::from_diagonal(&src.reach_values)),
        );
        for a in 0..src.rank() {
            for c in 0..src.width() {
                let mut term = SymSparse::new(s);
                for i in 0..n {
                    if dirs[(i, a)] != T::zero() {
                        term.push(i, n + src.col_offset + c, dirs[(i, a)]);
                    }
                }
                terms.push(term);
            }
        }
    }
    let problem = LmiQpProblem::new(
        DMatrix::identity(p, p) * T::lit(2.0),
        DVector::zeros(p),
        T::zero(),
        f0,
        terms,
    )?;
    Ok(CovarianceProgram {
        problem,
        sources,
        horizon: h,
        state_dim: n,
        input_dim: m,
    })
}

#[derive(Clone, Debug)]
pub struct CovarianceSolution<T: Scalar> {
    pub initial_gain: DMatrix<T>,
    pub disturbance_gain: DMatrix<T>,
    /// `tr(ΛΣΛᵀ) + tr(ΘW̄Θᵀ)`.
    pub cost: T,
    pub report: SolveReport<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LcsSettings<T: Scalar> {
    pub solver: SolverSettings<T>,
    pub feedback_depth: Option<usize>,
    pub mean_mode: MeanMode,
}

impl<T: Scalar> Default for LcsSettings<T> {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            feedback_depth: None,
            mean_mode: MeanMode::Exact,
        }
    }
}

fn trivial_report<T: Scalar>(f: &DMatrix<T>) -> SolveReport<T> {
    SolveReport {
        x: DVector::zeros(0),
        objective: T::zero(),
        residuals: KktResiduals {
            stationarity: T::zero(),
            min_eig: linalg::min_eigenvalue(f),
            equality: T::zero(),
            complementarity: T::zero(),
        },
        iterations: 0,
        outer_iterations: 0,
        barrier: T::one(),
        status: SolveStatus::Optimal,
        objective_history: Vec::new(),
    }
}

/// Minimum-energy feedback gains with terminal covariance `⪯ sigma_goal`. The noise
/// covariance `w` is used for every step of the horizon.
pub fn solve_covariance<T: Scalar>(
    blocks: &HorizonBlocks<T>,
    sigma: &DMatrix<T>,
    w: &DMatrix<T>,
    sigma_goal: &DMatrix<T>,
    settings: &LcsSettings<T>,
) -> Result<CovarianceSolution<T>> {
    let program = covariance_program(blocks, sigma, w, sigma_goal, settings.feedback_depth)?;
    let prob = &program.problem;
    let report = if prob.dim() == 0 {
        let f = prob.lmi_constant.clone();
        if !(linalg::min_eigenvalue(&f) > T::zero()) {
            return Err(Error::SteeringInfeasible {
                step: 0,
                detail: "uncontrollable spread already exceeds the target covariance".into(),
            });
        }
        trivial_report(&f)
    } else {
        sdp::solve(prob, &settings.solver)?
    };
    let usable = match report.status {
        SolveStatus::Optimal => true,
        // the stationarity residual can stall above tolerance in double precision
        // while the iterate is strictly feasible with a closed duality gap
        SolveStatus::MaxIter => {
            report.residuals.min_eig > T::zero()
                && report.residuals.complementarity <= settings.solver.tol
        }
        _ => false,
    };
    if report.status == SolveStatus::Infeasible {
        return Err(Error::SteeringInfeasible {
            step: 0,
            detail: format!(
                "terminal covariance target cannot be met over {} steps",
                blocks.horizon
            ),
        });
    }
    if !usable {
        return Err(Error::NumericalFailure(format!(
            "covariance program ended with status {} (residuals {:?})",
            report.status, report.residuals
        )));
    }
    let (initial_gain, disturbance_gain) = program.gains(&report.x);
    let cost = report.x.norm_squared();
    Ok(CovarianceSolution {
        initial_gain,
        disturbance_gain,
        cost,
        report,
    })
}

#[derive(Clone, Debug)]
pub struct LcsSolution<T: Scalar> {
    pub first_law: AffineLaw<T>,
    pub policy: PolicyParams<T>,
    pub terminal_mean: DVector<T>,
    pub terminal_cov: DMatrix<T>,
    pub report: SolveReport<T>,
}

/// Solves the steering problem for the affine model `lin` from `state` over `horizon`
/// steps and returns the full policy with its first law.
pub fn lcs_solve<T: Scalar>(
    lin: &LinearizedModel<T>,
    state: &GaussianState<T>,
    target: &SteeringTarget<T>,
    horizon: usize,
    settings: &LcsSettings<T>,
) -> Result<LcsSolution<T>> {
    let n = lin.state_dim();
    if state.dim() != n || target.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "steering state",
            expected: n,
            got: state.dim().min(target.dim()),
        });
    }
    let blocks = build_blocks(lin, horizon)?;
    let feedforward = solve_mean(&blocks, &state.mean, &target.mean, settings.mean_mode)?;
    let cov = solve_covariance(&blocks, &state.cov, &lin.w, &target.cov, settings)?;
    let policy = PolicyParams {
        feedforward,
        initial_gain: cov.initial_gain,
        disturbance_gain: cov.disturbance_gain,
    };
    let (terminal_mean, terminal_cov) =
        terminal_moments(&blocks, &policy, &state.mean, &state.cov, &lin.w);
    let gap = linalg::max_eigenvalue(&(&terminal_cov - &target.cov));
    if gap > target.tolerance() {
        return Err(Error::NumericalFailure(format!(
            "terminal covariance exceeds the target by {gap}"
        )));
    }
    Ok(LcsSolution {
        first_law: policy.first_law(&state.mean),
        policy,
        terminal_mean,
        terminal_cov,
        report: cov.report,
    })
}
