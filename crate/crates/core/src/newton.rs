//! Damped Newton iteration with an error-reduction stopping rule.
//!
//! Convergence is declared when the scaled RMS residual norm falls below
//! `error_reduction` times the initial norm, or below `abs_tol`. Jacobians are
//! either supplied by the problem or built by forward differences, grouping
//! columns that cannot interact inside the declared band.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{BandedLu, BandedMatrix, LinalgError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    /// Use the problem's analytic Jacobian when it provides one, else finite differences.
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    /// Target ratio of final to initial residual norm.
    pub error_reduction: f64,
    /// Residual norm below which the iterate is accepted outright.
    pub abs_tol: f64,
    pub max_iterations: usize,
    /// Smallest admissible line-search factor; 1/256 allows eight halvings.
    pub damping_min: f64,
    pub jacobian_mode: JacobianMode,
}

impl NewtonSettings {
    /// Strict criterion used for every regular solve (error reduction 1e-8).
    pub fn main() -> Self {
        Self {
            error_reduction: 1e-8,
            abs_tol: 1e-10,
            max_iterations: 25,
            damping_min: 1.0 / 256.0,
            jacobian_mode: JacobianMode::FiniteDifference,
        }
    }

    /// Relaxed criterion for the compound predictor (error reduction 1e-3);
    /// `abs_tol` is loosened by the same factor.
    pub fn relaxed() -> Self {
        Self { error_reduction: 1e-3, abs_tol: 1e-5, ..Self::main() }
    }

    pub fn validate(&self) -> Result<(), NewtonError> {
        if !(self.error_reduction > 0.0 && self.error_reduction < 1.0) {
            return Err(NewtonError::InvalidSettings(format!(
                "error_reduction must lie in (0, 1), got {}",
                self.error_reduction
            )));
        }
        if self.max_iterations < 1 {
            return Err(NewtonError::InvalidSettings("max_iterations must be >= 1".into()));
        }
        if !(self.damping_min > 0.0 && self.damping_min <= 1.0) {
            return Err(NewtonError::InvalidSettings("damping_min must lie in (0, 1]".into()));
        }
        if !(self.abs_tol >= 0.0) {
            return Err(NewtonError::InvalidSettings("abs_tol must be non-negative".into()));
        }
        Ok(())
    }
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self::main()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    /// Residual evaluations, including those spent on Jacobians and line search.
    pub residual_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NewtonError {
    #[error("Newton did not converge in {} iterations (residual {:e} from {:e})",
        .0.iterations, .0.final_residual, .0.initial_residual)]
    NoConvergence(Box<NewtonReport>),
    #[error("non-finite residual: {0}")]
    NonFiniteResidual(String),
    #[error("linear solve failed: {0}")]
    Linear(#[from] LinalgError),
    #[error("invalid Newton settings: {0}")]
    InvalidSettings(String),
}

/// Failure raised by a residual evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct EvalError(pub String);

impl From<EvalError> for NewtonError {
    fn from(e: EvalError) -> Self {
        NewtonError::NonFiniteResidual(e.0)
    }
}

/// A square nonlinear system `R(x) = 0`.
pub trait NonlinearProblem {
    fn dim(&self) -> usize;

    fn residual(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError>;

    /// `(kl, ku)` bandwidth of the Jacobian; dense unless overridden.
    fn bandwidth(&self) -> (usize, usize) {
        let n = self.dim().saturating_sub(1);
        (n, n)
    }

    /// Per-equation weights of the RMS norm.
    fn residual_weights(&self) -> Option<&[f64]> {
        None
    }

    /// Typical magnitude of each unknown, used to size finite-difference steps.
    fn unknown_scales(&self) -> Option<&[f64]> {
        None
    }

    fn jacobian(&self, _x: &[f64]) -> Option<Result<BandedMatrix, EvalError>> {
        None
    }
}

/// Closure adapter for small problems.
pub struct FnProblem<F> {
    dim: usize,
    f: F,
}

impl<F> FnProblem<F>
where
    F: Fn(&[f64], &mut [f64]),
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> NonlinearProblem for FnProblem<F>
where
    F: Fn(&[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (self.f)(x, out);
        Ok(())
    }
}

/// Scaled root-mean-square norm.
pub fn weighted_rms(r: &[f64], weights: Option<&[f64]>) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    let sum: f64 = match weights {
        Some(w) => r.iter().zip(w).map(|(v, w)| (v * w) * (v * w)).sum(),
        None => r.iter().map(|v| v * v).sum(),
    };
    (sum / r.len() as f64).sqrt()
}

fn check_finite(r: &[f64]) -> Result<(), NewtonError> {
    match r.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(NewtonError::NonFiniteResidual(format!("entry {i} is {}", r[i]))),
        None => Ok(()),
    }
}

/// Finite-difference step for unknown `j`.
#[inline]
pub fn fd_step(x: f64, scale: f64) -> f64 {
    1e-7 * (x.abs() + scale)
}

/// Forward-difference Jacobian with band coloring: columns `j` sharing
/// `j mod (kl + ku + 1)` touch disjoint rows and are perturbed together.
pub fn fd_jacobian<P: NonlinearProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    r0: &[f64],
) -> Result<(BandedMatrix, usize), NewtonError> {
    let n = problem.dim();
    let (kl, ku) = problem.bandwidth();
    let mut jac = BandedMatrix::zeros(n, kl, ku);
    let (kl, ku) = (jac.lower_bandwidth(), jac.upper_bandwidth());
    let colors = (kl + ku + 1).min(n.max(1));
    let scales = problem.unknown_scales();
    let mut xp = x.to_vec();
    let mut rp = vec![0.0; n];
    let mut steps = vec![0.0; n];
    for color in 0..colors {
        for j in (color..n).step_by(colors) {
            let s = scales.map_or(1.0, |s| s[j]);
            let dx = fd_step(x[j], s);
            // exact representable step
            let xj = x[j] + dx;
            steps[j] = xj - x[j];
            xp[j] = xj;
        }
        problem.residual(&xp, &mut rp)?;
        check_finite(&rp)?;
        for j in (color..n).step_by(colors) {
            let lo = j.saturating_sub(ku);
            let hi = (j + kl + 1).min(n);
            for i in lo..hi {
                jac.set(i, j, (rp[i] - r0[i]) / steps[j]);
            }
            xp[j] = x[j];
        }
    }
    Ok((jac, colors))
}

/// Solves `R(x) = 0` starting from `x0`.
pub fn newton_solve<P: NonlinearProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    settings: &NewtonSettings,
) -> Result<(Vec<f64>, NewtonReport), NewtonError> {
    settings.validate()?;
    let n = problem.dim();
    assert_eq!(x0.len(), n, "initial guess has wrong dimension");
    let weights = problem.residual_weights();

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    problem.residual(&x, &mut r)?;
    check_finite(&r)?;
    let mut evals = 1usize;
    let r0 = weighted_rms(&r, weights);
    let mut norm = r0;
    let mut report = NewtonReport {
        iterations: 0,
        initial_residual: r0,
        final_residual: r0,
        converged: false,
        residual_history: vec![r0],
        residual_evaluations: 0,
    };
    let target = (settings.error_reduction * r0).max(settings.abs_tol);
    if norm <= settings.abs_tol {
        report.converged = true;
        report.residual_evaluations = evals;
        return Ok((x, report));
    }

    let mut x_try = vec![0.0; n];
    let mut r_try = vec![0.0; n];
    for it in 1..=settings.max_iterations {
        let jac = match (settings.jacobian_mode, problem.jacobian(&x)) {
            (JacobianMode::Analytic, Some(j)) => j?,
            _ => {
                let (j, colors) = fd_jacobian(problem, &x, &r)?;
                evals += colors;
                j
            }
        };
        let lu = BandedLu::factor(&jac)?;
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = lu.solve(&neg_r)?;

        let mut lambda = 1.0;
        let mut accepted = false;
        let mut try_norm = f64::INFINITY;
        loop {
            for i in 0..n {
                x_try[i] = x[i] + lambda * dx[i];
            }
            let eval = problem.residual(&x_try, &mut r_try);
            evals += 1;
            if eval.is_ok() && r_try.iter().all(|v| v.is_finite()) {
                try_norm = weighted_rms(&r_try, weights);
                if try_norm < norm {
                    accepted = true;
                    break;
                }
            }
            if lambda * 0.5 < settings.damping_min {
                break;
            }
            lambda *= 0.5;
        }
        if !accepted && !try_norm.is_finite() {
            report.iterations = it;
            report.residual_evaluations = evals;
            return Err(NewtonError::NonFiniteResidual(format!(
                "no finite residual along the Newton direction at iteration {it}"
            )));
        }
        // With no decrease the smallest damped step is taken anyway.
        std::mem::swap(&mut x, &mut x_try);
        std::mem::swap(&mut r, &mut r_try);
        norm = try_norm;
        report.iterations = it;
        report.final_residual = norm;
        report.residual_history.push(norm);
        if norm <= target {
            report.converged = true;
            report.residual_evaluations = evals;
            return Ok((x, report));
        }
    }
    report.residual_evaluations = evals;
    Err(NewtonError::NoConvergence(Box::new(report)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        for _ in 0..200 {
            let c = 0.5 * (a + b);
            if f(a) * f(c) <= 0.0 {
                b = c;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    fn strict(abs_tol: f64) -> NewtonSettings {
        NewtonSettings { abs_tol, error_reduction: 1e-15, ..NewtonSettings::main() }
    }

    #[test]
    fn affine_problem_in_one_iteration() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, -1.0], [0.0, -1.0, 2.0]];
        let b = [1.0, 2.0, 3.0];
        let p = FnProblem::new(3, |x: &[f64], out: &mut [f64]| {
            for i in 0..3 {
                out[i] = (0..3).map(|j| a[i][j] * x[j]).sum::<f64>() - b[i];
            }
        });
        let (_, rep) = newton_solve(&p, &[0.0; 3], &NewtonSettings::main()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.residual_history.len(), rep.iterations + 1);
    }

    #[test]
    fn square_root_of_two() {
        let root = bisect(|x| x * x - 2.0, 1.0, 2.0);
        let p = FnProblem::new(1, |x: &[f64], out: &mut [f64]| out[0] = x[0] * x[0] - 2.0);
        let (x, rep) = newton_solve(&p, &[1.5], &strict(1e-12)).unwrap();
        assert!((x[0] - root).abs() < 1e-12);
        assert!(rep.iterations <= 6, "{} iterations", rep.iterations);

        // quadratic convergence: r_{i+1} / r_i^2 bounded on the tail
        let h = &rep.residual_history;
        let tail: Vec<f64> = h
            .windows(2)
            .filter(|w| w[1] > 1e-14)
            .map(|w| w[1] / (w[0] * w[0]))
            .collect();
        assert!(!tail.is_empty());
        assert!(tail.iter().rev().take(3).all(|&q| q <= 1.0), "{tail:?}");
    }

    #[test]
    fn relaxed_never_needs_more_iterations() {
        let p = FnProblem::new(1, |x: &[f64], out: &mut [f64]| out[0] = x[0] * x[0] - 2.0);
        let (_, strict_rep) = newton_solve(&p, &[1.5], &NewtonSettings::main()).unwrap();
        let relaxed = NewtonSettings { abs_tol: 0.0, ..NewtonSettings::relaxed() };
        let (_, relaxed_rep) = newton_solve(&p, &[1.5], &relaxed).unwrap();
        assert!(relaxed_rep.converged);
        assert!(relaxed_rep.iterations <= strict_rep.iterations);
    }

    #[test]
    fn starting_at_solution_takes_no_step() {
        let p = FnProblem::new(2, |x: &[f64], out: &mut [f64]| {
            out[0] = x[0] - 1.0;
            out[1] = x[1] + 2.0;
        });
        let (x, rep) = newton_solve(&p, &[1.0, -2.0], &NewtonSettings::main()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(x, vec![1.0, -2.0]);
    }

    #[test]
    fn no_convergence_carries_report() {
        // x^2 + 1 has no real root
        let p = FnProblem::new(1, |x: &[f64], out: &mut [f64]| out[0] = x[0] * x[0] + 1.0);
        let s = NewtonSettings { max_iterations: 5, ..NewtonSettings::main() };
        match newton_solve(&p, &[0.5], &s) {
            Err(NewtonError::NoConvergence(rep)) => {
                assert_eq!(rep.iterations, 5);
                assert_eq!(rep.residual_history.len(), 6);
                assert!(!rep.converged);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_residual_is_reported() {
        let p = FnProblem::new(1, |x: &[f64], out: &mut [f64]| out[0] = x[0].ln());
        assert!(matches!(
            newton_solve(&p, &[-1.0], &NewtonSettings::main()),
            Err(NewtonError::NonFiniteResidual(_))
        ));
    }

    #[test]
    fn damping_rescues_overshoot() {
        // atan has a famously divergent undamped Newton iteration from |x0| > 1.39
        let p = FnProblem::new(1, |x: &[f64], out: &mut [f64]| out[0] = x[0].atan());
        let (x, rep) = newton_solve(&p, &[3.0], &strict(1e-13)).unwrap();
        assert!(x[0].abs() < 1e-12);
        assert!(rep.converged);
    }

    #[test]
    fn colored_fd_matches_dense_fd() {
        struct Tri;
        impl NonlinearProblem for Tri {
            fn dim(&self) -> usize {
                6
            }
            fn residual(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
                for i in 0..6 {
                    let l = if i > 0 { x[i - 1] } else { 0.0 };
                    let r = if i < 5 { x[i + 1] } else { 0.0 };
                    out[i] = x[i].powi(3) - l * x[i] + 0.5 * r.sin();
                }
                Ok(())
            }
            fn bandwidth(&self) -> (usize, usize) {
                (1, 1)
            }
        }
        let x = [0.3, -0.2, 0.9, 1.1, -0.7, 0.4];
        let mut r0 = vec![0.0; 6];
        Tri.residual(&x, &mut r0).unwrap();
        let (banded, colors) = fd_jacobian(&Tri, &x, &r0).unwrap();
        assert_eq!(colors, 3);
        for i in 0..6 {
            for j in 0..6 {
                let exact = if i == j {
                    3.0 * x[i] * x[i] - if i > 0 { x[i - 1] } else { 0.0 }
                } else if j + 1 == i {
                    -x[i]
                } else if j == i + 1 {
                    0.5 * x[j].cos()
                } else {
                    0.0
                };
                assert!((banded.get(i, j) - exact).abs() < 1e-6, "({i},{j})");
            }
        }
    }
}
