//! Log-det barrier interior-point solver for quadratic programs with one linear
//! matrix inequality and optional linear equalities:
//!
//! ```text
//! minimize    ½ xᵀ Q x + qᵀ x + c
//! subject to  F₀ + Σ_k x_k F_k ⪰ 0
//!             E x = e
//! ```
//!
//! Equalities are eliminated through a null-space basis. Phase I minimizes a
//! slack `s` with `F(x) + sI ≻ 0` when the start point is not strictly feasible;
//! phase II follows the central path of `t·f(x) - log det F(x)` with damped Newton
//! steps, multiplying `t` by ten per outer iteration.

pub mod io;
mod sparse;

pub use io::{problem_from_str, problem_load, problem_save, problem_to_string};
pub use sparse::SymSparse;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct LmiQpProblem<T: Scalar> {
    pub hessian: DMatrix<T>,
    pub linear: DVector<T>,
    pub constant: T,
    pub lmi_constant: DMatrix<T>,
    pub lmi_terms: Vec<SymSparse<T>>,
    pub eq_matrix: DMatrix<T>,
    pub eq_rhs: DVector<T>,
}

impl<T: Scalar> LmiQpProblem<T> {
    pub fn new(
        hessian: DMatrix<T>,
        linear: DVector<T>,
        constant: T,
        lmi_constant: DMatrix<T>,
        lmi_terms: Vec<SymSparse<T>>,
    ) -> Result<Self> {
        let p = linear.len();
        let prob = Self {
            hessian,
            linear,
            constant,
            lmi_constant,
            lmi_terms,
            eq_matrix: DMatrix::zeros(0, p),
            eq_rhs: DVector::zeros(0),
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn with_equalities(mut self, eq_matrix: DMatrix<T>, eq_rhs: DVector<T>) -> Result<Self> {
        self.eq_matrix = eq_matrix;
        self.eq_rhs = eq_rhs;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn lmi_size(&self) -> usize {
        self.lmi_constant.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dim();
        let s = self.lmi_size();
        if self.hessian.nrows() != p || self.hessian.ncols() != p {
            return Err(Error::DimensionMismatch {
                context: "quadratic cost",
                expected: p,
                got: self.hessian.nrows(),
            });
        }
        if self.lmi_terms.len() != p {
            return Err(Error::DimensionMismatch {
                context: "LMI terms",
                expected: p,
                got: self.lmi_terms.len(),
            });
        }
        if s == 0 || self.lmi_constant.ncols() != s {
            return Err(Error::invalid(
                "LMI constant term must be a non-empty square matrix",
            ));
        }
        if let Some(bad) = self.lmi_terms.iter().find(|f| f.size() != s) {
            return Err(Error::DimensionMismatch {
                context: "LMI term size",
                expected: s,
                got: bad.size(),
            });
        }
        if self.eq_matrix.ncols() != p || self.eq_matrix.nrows() != self.eq_rhs.len() {
            return Err(Error::DimensionMismatch {
                context: "equality constraints",
                expected: p,
                got: self.eq_matrix.ncols(),
            });
        }
        let finite = self
            .hessian
            .iter()
            .chain(self.linear.iter())
            .chain(self.lmi_constant.iter())
            .chain(self.eq_matrix.iter())
            .chain(self.eq_rhs.iter())
            .all(|v| v.is_finite())
            && self.constant.is_finite()
            && self.lmi_terms.iter().all(|f| f.is_finite());
        if !finite {
            return Err(Error::invalid("problem data must be finite"));
        }
        let asym =
            |m: &DMatrix<T>| (m - m.transpose()).amax() > T::lit(1e-12) * m.amax().max(T::one());
        if asym(&self.hessian) {
            return Err(Error::invalid("quadratic cost must be symmetric"));
        }
        if asym(&self.lmi_constant) {
            return Err(Error::invalid("LMI constant term must be symmetric"));
        }
        if p > 0 {
            let scale = self.hessian.trace().abs().max(T::one());
            let min_eig = linalg::min_eigenvalue(&self.hessian);
            if min_eig < -T::lit(1e-9) * scale {
                return Err(Error::NotPositiveDefinite {
                    what: "quadratic cost",
                    min_eig: min_eig.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<T>) -> T {
        T::lit(0.5) * x.dot(&(&self.hessian * x)) + self.linear.dot(x) + self.constant
    }

    /// `F₀ + Σ x_k F_k`.
    pub fn lmi_at(&self, x: &DVector<T>) -> DMatrix<T> {
        let mut f = self.lmi_constant.clone();
        for (k, term) in self.lmi_terms.iter().enumerate() {
            term.add_scaled_to(&mut f, x[k]);
        }
        f
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings<T: Scalar> {
    pub tol: T,
    pub max_outer: usize,
    pub max_inner: usize,
    pub initial_barrier: T,
    pub warm_start: Option<DVector<T>>,
}

impl<T: Scalar> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-7),
            max_outer: 50,
            max_inner: 50,
            initial_barrier: T::one(),
            warm_start: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            SolveStatus::Optimal,
            SolveStatus::Infeasible,
            SolveStatus::MaxIter,
            SolveStatus::NumericalFailure,
        ]
        .into_iter()
        .find(|s| s.as_str() == name)
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KktResiduals<T: Scalar> {
    pub stationarity: T,
    pub min_eig: T,
    pub equality: T,
    pub complementarity: T,
}

impl<T: Scalar> KktResiduals<T> {
    pub fn within(&self, tol: T) -> bool {
        self.stationarity <= tol
            && self.min_eig >= -tol
            && self.equality <= tol
            && self.complementarity <= tol
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport<T: Scalar> {
    pub x: DVector<T>,
    pub objective: T,
    pub residuals: KktResiduals<T>,
    /// Total Newton steps over both phases.
    pub iterations: usize,
    pub outer_iterations: usize,
    /// Final barrier parameter `t`.
    pub barrier: T,
    pub status: SolveStatus,
    /// Objective after each phase-II centering.
    pub objective_history: Vec<T>,
}

/// Stationarity and feasibility residuals at `x` with the barrier dual `Λ = F(x)⁻¹ / t`.
pub fn check_kkt<T: Scalar>(
    prob: &LmiQpProblem<T>,
    x: &DVector<T>,
    barrier: T,
) -> Result<KktResiduals<T>> {
    if x.len() != prob.dim() {
        return Err(Error::DimensionMismatch {
            context: "KKT point",
            expected: prob.dim(),
            got: x.len(),
        });
    }
    if !(barrier > T::zero()) {
        return Err(Error::invalid("barrier parameter must be positive"));
    }
    let f = linalg::symmetrize(&prob.lmi_at(x));
    let ch = Cholesky::new(f.clone())
        .ok_or_else(|| Error::NumericalFailure("LMI is singular at the KKT point".into()))?;
    let dual = ch.inverse() / barrier;
    check_kkt_with_dual(prob, x, &dual)
}

/// Same residuals for an arbitrary dual matrix `Λ ⪰ 0`; the equality multiplier is
/// chosen by least squares.
pub fn check_kkt_with_dual<T: Scalar>(
    prob: &LmiQpProblem<T>,
    x: &DVector<T>,
    dual: &DMatrix<T>,
) -> Result<KktResiduals<T>> {
    let s = prob.lmi_size();
    if dual.nrows() != s || dual.ncols() != s {
        return Err(Error::DimensionMismatch {
            context: "dual matrix",
            expected: s,
            got: dual.nrows(),
        });
    }
    let f = linalg::symmetrize(&prob.lmi_at(x));
    let mut r = &prob.hessian * x + &prob.linear;
    for (k, term) in prob.lmi_terms.iter().enumerate() {
        r[k] -= term.trace_with(dual);
    }
    let mut equality = T::zero();
    if prob.eq_matrix.nrows() > 0 {
        // r + Eᵀν with ν minimizing the norm
        let et = prob.eq_matrix.transpose();
        let svd = et.clone().svd(true, true);
        let nu = svd
            .solve(&(-&r), T::lit(1e-12) * et.amax().max(T::one()))
            .map_err(|e| Error::NumericalFailure(e.to_string()))?;
        r += &et * nu;
        equality = (&prob.eq_matrix * x - &prob.eq_rhs).norm();
    }
    Ok(KktResiduals {
        stationarity: r.norm(),
        min_eig: linalg::min_eigenvalue(&f),
        equality,
        complementarity: (dual * &f).trace().abs(),
    })
}

/// Problem restricted to `x = x_p + N y`.
struct Reduced<T: Scalar> {
    hessian: DMatrix<T>,
    linear: DVector<T>,
    lmi_constant: DMatrix<T>,
    terms: Vec<SymSparse<T>>,
    particular: Option<(DVector<T>, DMatrix<T>)>,
}

impl<T: Scalar> Reduced<T> {
    fn lift(&self, y: &DVector<T>) -> DVector<T> {
        match &self.particular {
            Some((xp, n)) => xp + n * y,
            None => y.clone(),
        }
    }

    fn project(&self, x: &DVector<T>) -> DVector<T> {
        match &self.particular {
            Some((xp, n)) => n.transpose() * (x - xp),
            None => x.clone(),
        }
    }
}

fn reduce<T: Scalar>(
    prob: &LmiQpProblem<T>,
    tol: T,
) -> std::result::Result<Reduced<T>, SolveStatus> {
    if prob.eq_matrix.nrows() == 0 {
        return Ok(Reduced {
            hessian: prob.hessian.clone(),
            linear: prob.linear.clone(),
            lmi_constant: prob.lmi_constant.clone(),
            terms: prob.lmi_terms.clone(),
            particular: None,
        });
    }
    let p = prob.dim();
    let e = &prob.eq_matrix;
    let scale = e.amax().max(T::one());
    let svd = e.clone().svd(true, true);
    let xp = svd
        .solve(&prob.eq_rhs, T::lit(1e-12) * scale)
        .map_err(|_| SolveStatus::NumericalFailure)?;
    if (e * &xp - &prob.eq_rhs).norm() > tol * (T::one() + prob.eq_rhs.norm()) {
        return Err(SolveStatus::Infeasible);
    }
    let gram = e.transpose() * e;
    let eig = SymmetricEigen::new(gram);
    let cutoff = T::lit(1e-12) * scale * scale * T::from_usize_lossy(p);
    let null: Vec<usize> = (0..p).filter(|&i| eig.eigenvalues[i] <= cutoff).collect();
    let mut n = DMatrix::zeros(p, null.len());
    for (c, &i) in null.iter().enumerate() {
        n.set_column(c, &eig.eigenvectors.column(i));
    }
    let hessian = linalg::symmetrize(&(n.transpose() * &prob.hessian * &n));
    let linear = n.transpose() * (&prob.hessian * &xp + &prob.linear);
    let lmi_constant = prob.lmi_at(&xp);
    let terms = (0..null.len())
        .map(|j| {
            SymSparse::combine(
                prob.lmi_size(),
                prob.lmi_terms
                    .iter()
                    .enumerate()
                    .map(|(k, f)| (n[(k, j)], f)),
            )
        })
        .collect();
    Ok(Reduced {
        hessian,
        linear,
        lmi_constant,
        terms,
        particular: Some((xp, n)),
    })
}

/// Newton machinery for `φ(v) = t·(½vᵀQv + qᵀv) - log det F(v)`.
struct Barrier<'a, T: Scalar> {
    hessian: &'a DMatrix<T>,
    linear: &'a DVector<T>,
    lmi_constant: &'a DMatrix<T>,
    terms: &'a [SymSparse<T>],
    /// Distinct upper-triangle positions touched by any term.
    positions: Vec<(usize, usize)>,
    /// Per term: (position index, weight) with off-diagonal weights doubled.
    term_positions: Vec<Vec<(usize, T)>>,
}

enum Centering {
    Converged,
    Stalled,
    Exhausted,
    Stopped,
}

impl<'a, T: Scalar> Barrier<'a, T> {
    fn new(
        hessian: &'a DMatrix<T>,
        linear: &'a DVector<T>,
        lmi_constant: &'a DMatrix<T>,
        terms: &'a [SymSparse<T>],
    ) -> Self {
        let s = lmi_constant.nrows();
        let mut index = std::collections::HashMap::new();
        let mut positions = Vec::new();
        let mut term_positions = Vec::with_capacity(terms.len());
        for term in terms {
            let mut list = Vec::with_capacity(term.nnz());
            for &(i, j, v) in term.entries() {
                let key = i * s + j;
                let idx = *index.entry(key).or_insert_with(|| {
                    positions.push((i, j));
                    positions.len() - 1
                });
                let w = if i == j { v } else { v + v };
                list.push((idx, w));
            }
            term_positions.push(list);
        }
        Self {
            hessian,
            linear,
            lmi_constant,
            terms,
            positions,
            term_positions,
        }
    }

    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn lmi(&self, v: &DVector<T>) -> DMatrix<T> {
        let mut f = self.lmi_constant.clone();
        for (k, term) in self.terms.iter().enumerate() {
            term.add_scaled_to(&mut f, v[k]);
        }
        f
    }

    fn quad(&self, v: &DVector<T>) -> T {
        T::lit(0.5) * v.dot(&(self.hessian * v)) + self.linear.dot(v)
    }

    /// `φ(v)`, or `None` when `F(v)` is not positive definite.
    fn value(&self, v: &DVector<T>, t: T) -> Option<(T, Cholesky<T, Dyn>)> {
        let ch = Cholesky::new(self.lmi(v))?;
        let logdet = linalg::chol_logdet(&ch);
        let val = t * self.quad(v) - logdet;
        if val.is_finite() {
            Some((val, ch))
        } else {
            None
        }
    }

    fn gradient_and_hessian(
        &self,
        v: &DVector<T>,
        t: T,
        ch: &Cholesky<T, Dyn>,
    ) -> (DVector<T>, DMatrix<T>) {
        let g = linalg::symmetrize(&ch.inverse());
        let p = self.dim();
        let mut grad = (self.hessian * v + self.linear) * t;
        for (k, term) in self.terms.iter().enumerate() {
            grad[k] -= term.trace_with(&g);
        }
        // H_kl = tr(G F_k G F_l) through the entries of G F_k G at the touched positions
        let positions = &self.positions;
        let rows: Vec<Vec<T>> = (0..p)
            .into_par_iter()
            .map(|k| {
                let mut y = vec![T::zero(); positions.len()];
                for (slot, &(i, j)) in y.iter_mut().zip(positions.iter()) {
                    let mut acc = T::zero();
                    for &(a, b, val) in self.terms[k].entries() {
                        acc += val * g[(i, a)] * g[(b, j)];
                        if a != b {
                            acc += val * g[(i, b)] * g[(a, j)];
                        }
                    }
                    *slot = acc;
                }
                (0..p)
                    .map(|l| {
                        self.term_positions[l]
                            .iter()
                            .fold(T::zero(), |s, &(idx, w)| s + w * y[idx])
                    })
                    .collect()
            })
            .collect();
        let mut h = self.hessian * t;
        for (k, row) in rows.into_iter().enumerate() {
            for (l, val) in row.into_iter().enumerate() {
                h[(k, l)] += val;
            }
        }
        (grad, linalg::symmetrize(&h))
    }

    /// Damped Newton centering at fixed `t`. `on_step` sees every accepted iterate
    /// and ends the centering early by returning `true`.
    fn center(
        &self,
        v: &mut DVector<T>,
        t: T,
        max_inner: usize,
        stationarity_tol: T,
        iterations: &mut usize,
        on_step: &mut dyn FnMut(&DVector<T>) -> bool,
    ) -> Result<Centering> {
        let (mut phi, mut ch) = self.value(v, t).ok_or_else(|| {
            Error::NumericalFailure("barrier iterate left the LMI interior".into())
        })?;
        for _ in 0..max_inner {
            let (grad, hess) = self.gradient_and_hessian(v, t, &ch);
            let hch = linalg::cholesky_escalating(&hess, "Newton system")
                .map_err(|e| Error::NumericalFailure(e.to_string()))?;
            let step = -hch.solve(&grad);
            let decrement = -grad.dot(&step);
            let stationary = grad.norm() / t <= stationarity_tol;
            if decrement <= T::zero() || (decrement * T::lit(0.5) <= T::lit(1e-10) && stationary) {
                return Ok(Centering::Converged);
            }
            if decrement * T::lit(0.5) <= T::lit(1e-22) {
                return Ok(Centering::Converged);
            }
            let mut alpha = T::one();
            let mut accepted = None;
            if decrement < T::lit(0.25) {
                // the full step of a self-concordant barrier stays inside its domain here
                let cand = &*v + &step;
                if let Some((val, cch)) = self.value(&cand, t) {
                    accepted = Some((cand, val, cch));
                }
            }
            while accepted.is_none() && alpha > T::lit(1e-14) {
                let cand = &*v + &step * alpha;
                if let Some((val, cch)) = self.value(&cand, t) {
                    if val <= phi - T::lit(0.25) * alpha * decrement {
                        accepted = Some((cand, val, cch));
                        break;
                    }
                }
                alpha *= T::lit(0.5);
            }
            *iterations += 1;
            match accepted {
                Some((cand, val, cch)) => {
                    *v = cand;
                    phi = val;
                    ch = cch;
                }
                None => return Ok(Centering::Stalled),
            }
            if on_step(v) {
                return Ok(Centering::Stopped);
            }
        }
        Ok(Centering::Exhausted)
    }
}

fn strictly_feasible<T: Scalar>(f: &DMatrix<T>) -> bool {
    Cholesky::new(linalg::symmetrize(f)).is_some()
}

/// Phase I: finds `y` with `F(y) ≻ 0` by driving the slack of `F(y) + sI ≻ 0` below zero.
fn phase_one<T: Scalar>(
    red: &Reduced<T>,
    start: &DVector<T>,
    settings: &SolverSettings<T>,
    iterations: &mut usize,
) -> Result<std::result::Result<DVector<T>, SolveStatus>> {
    let p = start.len();
    let s = red.lmi_constant.nrows();
    let f0 = red.lmi_constant.clone() + {
        let mut f = DMatrix::zeros(s, s);
        for (k, term) in red.terms.iter().enumerate() {
            term.add_scaled_to(&mut f, start[k]);
        }
        f
    };
    let lam = linalg::min_eigenvalue(&linalg::symmetrize(&f0));
    let mut v = DVector::zeros(p + 1);
    v.rows_mut(0, p).copy_from(start);
    v[p] = (-lam).max(T::zero()) + T::one();
    let mut terms = red.terms.clone();
    terms.push(SymSparse::identity(s));
    // a tiny proximal term keeps the Newton system regular in directions the LMI ignores
    let mut hessian = DMatrix::identity(p + 1, p + 1) * T::lit(1e-8);
    hessian[(p, p)] = T::zero();
    let mut linear = DVector::zeros(p + 1);
    linear[p] = T::one();
    let barrier = Barrier::new(&hessian, &linear, &red.lmi_constant, &terms);
    let mut t = settings.initial_barrier;
    let found = |v: &DVector<T>| {
        v[p] < T::zero()
            && strictly_feasible(&barrier.lmi(&v.rows(0, p).into_owned().push(T::zero())))
    };
    for _ in 0..settings.max_outer {
        barrier.center(
            &mut v,
            t,
            settings.max_inner,
            settings.tol,
            iterations,
            &mut |v| found(v),
        )?;
        if found(&v) {
            return Ok(Ok(v.rows(0, p).into_owned()));
        }
        if T::from_usize_lossy(s + 1) / t < settings.tol {
            break;
        }
        t *= T::lit(10.0);
    }
    Ok(Err(SolveStatus::Infeasible))
}

/// Solves the problem. Malformed data is an `Err`; infeasibility and iteration
/// limits are reported through [`SolveReport::status`].
pub fn solve<T: Scalar>(
    prob: &LmiQpProblem<T>,
    settings: &SolverSettings<T>,
) -> Result<SolveReport<T>> {
    solve_observed(prob, settings, &mut |_| {})
}

/// [`solve`], calling `observer` with every phase-II Newton iterate.
pub fn solve_observed<T: Scalar>(
    prob: &LmiQpProblem<T>,
    settings: &SolverSettings<T>,
    observer: &mut dyn FnMut(&DVector<T>),
) -> Result<SolveReport<T>> {
    prob.validate()?;
    if !(settings.tol > T::zero()) || !(settings.initial_barrier > T::zero()) {
        return Err(Error::invalid(
            "solver tolerance and initial barrier must be positive",
        ));
    }
    let p = prob.dim();
    let s = prob.lmi_size();
    let failed = |x: DVector<T>, status: SolveStatus, iterations: usize| SolveReport {
        objective: prob.objective(&x),
        residuals: KktResiduals {
            stationarity: T::max_value().unwrap(),
            min_eig: linalg::min_eigenvalue(&prob.lmi_at(&x)),
            equality: if prob.eq_matrix.nrows() > 0 {
                (&prob.eq_matrix * &x - &prob.eq_rhs).norm()
            } else {
                T::zero()
            },
            complementarity: T::max_value().unwrap(),
        },
        x,
        iterations,
        outer_iterations: 0,
        barrier: settings.initial_barrier,
        status,
        objective_history: Vec::new(),
    };
    let red = match reduce(prob, settings.tol) {
        Ok(r) => r,
        Err(status) => return Ok(failed(DVector::zeros(p), status, 0)),
    };
    let start = match &settings.warm_start {
        Some(x) if x.len() == p => red.project(x),
        Some(x) => {
            return Err(Error::DimensionMismatch {
                context: "warm start",
                expected: p,
                got: x.len(),
            })
        }
        None => DVector::zeros(red.linear.len()),
    };
    let mut iterations = 0;
    let barrier = Barrier::new(&red.hessian, &red.linear, &red.lmi_constant, &red.terms);
    let mut y = if strictly_feasible(&barrier.lmi(&start)) {
        start
    } else {
        match phase_one(&red, &start, settings, &mut iterations) {
            Ok(Ok(y)) => y,
            Ok(Err(status)) => return Ok(failed(red.lift(&start), status, iterations)),
            Err(_) => {
                return Ok(failed(
                    red.lift(&start),
                    SolveStatus::NumericalFailure,
                    iterations,
                ))
            }
        }
    };
    let gap = |t: T| T::from_usize_lossy(s) / t;
    let mut t = settings.initial_barrier;
    let mut history = Vec::new();
    let mut outer = 0;
    let mut broke_down = false;
    let mut stalled = false;
    while outer < settings.max_outer {
        outer += 1;
        match barrier.center(
            &mut y,
            t,
            settings.max_inner,
            settings.tol,
            &mut iterations,
            &mut |y| {
                observer(&red.lift(y));
                false
            },
        ) {
            Ok(Centering::Stalled) => stalled = true,
            Ok(_) => {}
            Err(_) => {
                broke_down = true;
                break;
            }
        }
        history.push(prob.objective(&red.lift(&y)));
        if gap(t) < settings.tol {
            break;
        }
        // the last increase stops at half the tolerance instead of overshooting by up to 10×
        t = (t * T::lit(10.0)).min(T::lit(2.0) * T::from_usize_lossy(s) / settings.tol);
    }
    let x = red.lift(&y);
    let residuals = match check_kkt(prob, &x, t) {
        Ok(r) => r,
        Err(_) => return Ok(failed(x, SolveStatus::NumericalFailure, iterations)),
    };
    let status = if residuals.within(settings.tol) {
        SolveStatus::Optimal
    } else if broke_down || stalled {
        SolveStatus::NumericalFailure
    } else {
        SolveStatus::MaxIter
    };
    Ok(SolveReport {
        objective: prob.objective(&x),
        x,
        residuals,
        iterations,
        outer_iterations: outer,
        barrier: t,
        status,
        objective_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_problem(q: f64, lin: f64, c: f64, f0: f64, f1: f64) -> LmiQpProblem<f64> {
        let mut term = SymSparse::new(1);
        term.push(0, 0, f1);
        LmiQpProblem::new(
            DMatrix::from_element(1, 1, q),
            DVector::from_element(1, lin),
            c,
            DMatrix::from_element(1, 1, f0),
            vec![term],
        )
        .unwrap()
    }

    #[test]
    fn boundary_minimum_at_origin() {
        // x² s.t. x ≥ 0
        let prob = scalar_problem(2.0, 0.0, 0.0, 0.0, 1.0);
        let rep = solve(&prob, &SolverSettings::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        // the central path approaches a degenerate optimum like 1/√(2t)
        assert!(rep.x[0] > 0.0 && rep.x[0] < 1e-3);
        assert!(rep.objective.abs() <= 1e-7);
    }

    #[test]
    fn interior_optimum_is_stationary() {
        // x² s.t. 1 + x ≥ 0
        let prob = scalar_problem(2.0, 0.0, 0.0, 1.0, 1.0);
        let rep = solve(&prob, &SolverSettings::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        let at_zero = check_kkt(&prob, &DVector::zeros(1), rep.barrier).unwrap();
        assert!(at_zero.stationarity <= 1e-7);
        assert!(check_kkt(&prob, &DVector::from_element(1, -1.0), 1.0).is_err());
    }

    #[test]
    fn active_upper_bound() {
        // (x - 2)² s.t. 1 - x ≥ 0
        let prob = scalar_problem(2.0, -4.0, 4.0, 1.0, -1.0);
        let rep = solve(&prob, &SolverSettings::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert!((rep.x[0] - 1.0).abs() < 1e-6, "{}", rep.x[0]);
        assert!((rep.objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn phase_one_recovers_from_infeasible_start() {
        // (x - 5)² s.t. x - 3 ≥ 0, start at x = 0
        let prob = scalar_problem(2.0, -10.0, 25.0, -3.0, 1.0);
        let rep = solve(&prob, &SolverSettings::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert!((rep.x[0] - 5.0).abs() < 1e-6);
    }

    #[test]
    fn empty_feasible_set_is_infeasible() {
        // diag(x, -1 - x) ⪰ 0 has no solution
        let mut term = SymSparse::new(2);
        term.push(0, 0, 1.0);
        term.push(1, 1, -1.0);
        let prob = LmiQpProblem::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            0.0,
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0])),
            vec![term],
        )
        .unwrap();
        let rep = solve(&prob, &SolverSettings::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Infeasible);
    }

    #[test]
    fn equality_is_enforced() {
        // x² + y² s.t. x + y = 2, x ≥ 0, y ≥ 0
        let mut fx = SymSparse::new(2);
        fx.push(0, 0, 1.0);
        let mut fy = SymSparse::new(2);
        fy.push(1, 1, 1.0);
        let prob = LmiQpProblem::new(
            DMatrix::identity(2, 2) * 2.0f64,
            DVector::zeros(2),
            0.0,
            DMatrix::zeros(2, 2),
            vec![fx, fy],
        )
        .unwrap()
        .with_equalities(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_element(1, 2.0),
        )
        .unwrap();
        let rep = solve(&prob, &SolverSettings::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert!((rep.x[0] - 1.0).abs() < 1e-6 && (rep.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_indefinite_cost() {
        let mut term = SymSparse::new(1);
        term.push(0, 0, 1.0);
        let res = LmiQpProblem::new(
            DMatrix::from_element(1, 1, -1.0),
            DVector::zeros(1),
            0.0,
            DMatrix::identity(1, 1),
            vec![term],
        );
        assert!(res.is_err());
    }
}
