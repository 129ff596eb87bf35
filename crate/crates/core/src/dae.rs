//! Partitioned semi-explicit DAE contract and its two elementary solves.
//!
//! The active part obeys `d/dt A(X_F, X_G) = F(t, X_F, X_G)` and the latent part
//! `0 = G(t, X_F, X_G)`. `A` defaults to the identity on `X_F`; models whose
//! storage terms depend on the latent unknowns (porosity from strain) override it.

use serde::{Deserialize, Serialize};

use crate::linalg::BandedMatrix;
use crate::newton::{newton_solve, EvalError, NewtonError, NewtonReport, NewtonSettings, NonlinearProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionedState {
    pub active: Vec<f64>,
    pub latent: Vec<f64>,
    pub time: f64,
}

impl PartitionedState {
    pub fn new(active: Vec<f64>, latent: Vec<f64>, time: f64) -> Self {
        Self { active, latent, time }
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.active.iter().all(|v| v.is_finite())
            && self.latent.iter().all(|v| v.is_finite())
    }
}

/// Interleaving of active and latent unknowns that makes the monolithic
/// Jacobian banded.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledLayout {
    /// `order[i]` is the index, in the stacked vector `[X_F; X_G]`, of coupled unknown `i`.
    pub order: Vec<usize>,
    pub kl: usize,
    pub ku: usize,
}

impl CoupledLayout {
    pub fn validate(&self, dim: usize) -> bool {
        if self.order.len() != dim {
            return false;
        }
        let mut seen = vec![false; dim];
        for &k in &self.order {
            if k >= dim || seen[k] {
                return false;
            }
            seen[k] = true;
        }
        true
    }
}

pub trait PartitionedSystem {
    fn active_dim(&self) -> usize;
    fn latent_dim(&self) -> usize;

    /// Right-hand side `F(t, X_F, X_G)`.
    fn eval_active(&self, t: f64, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError>;

    /// Latent residual `G(t, X_F, X_G)`.
    fn eval_latent(&self, t: f64, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError>;

    /// Stored quantity `A(X_F, X_G)` whose time derivative equals `F`.
    fn accumulation(&self, xf: &[f64], _xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        out.copy_from_slice(xf);
        Ok(())
    }

    fn initial_state(&self) -> PartitionedState;

    /// Norm weights for the implicit-Euler residual (accumulation units).
    fn active_weights(&self) -> Vec<f64> {
        vec![1.0; self.active_dim()]
    }

    fn latent_weights(&self) -> Vec<f64> {
        vec![1.0; self.latent_dim()]
    }

    /// Typical unknown magnitudes: finite-difference steps and fixed-point metric.
    fn active_scales(&self) -> Vec<f64> {
        vec![1.0; self.active_dim()]
    }

    fn latent_scales(&self) -> Vec<f64> {
        vec![1.0; self.latent_dim()]
    }

    fn active_bandwidth(&self) -> (usize, usize) {
        let n = self.active_dim().saturating_sub(1);
        (n, n)
    }

    fn latent_bandwidth(&self) -> (usize, usize) {
        let n = self.latent_dim().saturating_sub(1);
        (n, n)
    }

    /// Banded ordering of the monolithic system, if any; dense otherwise.
    fn coupled_layout(&self) -> Option<CoupledLayout> {
        None
    }

    /// Analytic `dG/dX_G`, when the model provides one.
    fn latent_jacobian(&self, _t: f64, _xf: &[f64], _xg: &[f64]) -> Option<Result<BandedMatrix, EvalError>> {
        None
    }

    /// Projects an active iterate onto the admissible set; returns the largest clip.
    fn clip_active(&self, _xf: &mut [f64]) -> f64 {
        0.0
    }

    /// Identifies the model configuration; runs are only comparable on equal fingerprints.
    fn fingerprint(&self) -> String {
        String::new()
    }
}

/// `A(x, xg_used) - A_prev - h F(t_next, x, xg_used)`.
struct MicroStepProblem<'a, S: PartitionedSystem + ?Sized> {
    system: &'a S,
    acc_prev: Vec<f64>,
    xg_used: &'a [f64],
    t_next: f64,
    h: f64,
    weights: Vec<f64>,
    scales: Vec<f64>,
    scratch: std::cell::RefCell<Vec<f64>>,
}

impl<S: PartitionedSystem + ?Sized> NonlinearProblem for MicroStepProblem<'_, S> {
    fn dim(&self) -> usize {
        self.acc_prev.len()
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let mut f = self.scratch.borrow_mut();
        self.system.eval_active(self.t_next, x, self.xg_used, &mut f)?;
        self.system.accumulation(x, self.xg_used, out)?;
        for i in 0..out.len() {
            out[i] = out[i] - self.acc_prev[i] - self.h * f[i];
        }
        Ok(())
    }

    fn bandwidth(&self) -> (usize, usize) {
        self.system.active_bandwidth()
    }

    fn residual_weights(&self) -> Option<&[f64]> {
        Some(&self.weights)
    }

    fn unknown_scales(&self) -> Option<&[f64]> {
        Some(&self.scales)
    }
}

/// One implicit Euler step of the active part with the latent argument frozen
/// at `xg_used`. `state_prev.latent` must be the latent value that was paired
/// with `state_prev.active`; it enters only the previous accumulation.
pub fn implicit_euler_micro_step<S: PartitionedSystem + ?Sized>(
    system: &S,
    state_prev: &PartitionedState,
    xg_used: &[f64],
    t_next: f64,
    h: f64,
    settings: &NewtonSettings,
) -> Result<(Vec<f64>, NewtonReport), NewtonError> {
    implicit_euler_micro_step_from(system, state_prev, xg_used, t_next, h, &state_prev.active, settings)
}

/// [`implicit_euler_micro_step`] with an explicit Newton initial guess.
pub fn implicit_euler_micro_step_from<S: PartitionedSystem + ?Sized>(
    system: &S,
    state_prev: &PartitionedState,
    xg_used: &[f64],
    t_next: f64,
    h: f64,
    guess: &[f64],
    settings: &NewtonSettings,
) -> Result<(Vec<f64>, NewtonReport), NewtonError> {
    if !(h > 0.0) {
        return Err(NewtonError::InvalidSettings(format!("micro step must be positive, got {h}")));
    }
    let nf = system.active_dim();
    assert_eq!(state_prev.active.len(), nf, "active dimension mismatch");
    assert_eq!(xg_used.len(), system.latent_dim(), "latent dimension mismatch");
    let mut acc_prev = vec![0.0; nf];
    system.accumulation(&state_prev.active, &state_prev.latent, &mut acc_prev)?;
    let problem = MicroStepProblem {
        system,
        acc_prev,
        xg_used,
        t_next,
        h,
        weights: system.active_weights(),
        scales: system.active_scales(),
        scratch: std::cell::RefCell::new(vec![0.0; nf]),
    };
    newton_solve(&problem, guess, settings)
}

struct LatentProblem<'a, S: PartitionedSystem + ?Sized> {
    system: &'a S,
    t: f64,
    xf: &'a [f64],
    weights: Vec<f64>,
    scales: Vec<f64>,
}

impl<S: PartitionedSystem + ?Sized> NonlinearProblem for LatentProblem<'_, S> {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        self.system.eval_latent(self.t, self.xf, x, out)
    }

    fn bandwidth(&self) -> (usize, usize) {
        self.system.latent_bandwidth()
    }

    fn residual_weights(&self) -> Option<&[f64]> {
        Some(&self.weights)
    }

    fn unknown_scales(&self) -> Option<&[f64]> {
        Some(&self.scales)
    }

    fn jacobian(&self, x: &[f64]) -> Option<Result<BandedMatrix, EvalError>> {
        self.system.latent_jacobian(self.t, self.xf, x)
    }
}

/// Solves `G(t, xf_used, X_G) = 0` starting from `xg_guess`.
pub fn solve_latent<S: PartitionedSystem + ?Sized>(
    system: &S,
    t: f64,
    xf_used: &[f64],
    xg_guess: &[f64],
    settings: &NewtonSettings,
) -> Result<(Vec<f64>, NewtonReport), NewtonError> {
    assert_eq!(xf_used.len(), system.active_dim(), "active dimension mismatch");
    assert_eq!(xg_guess.len(), system.latent_dim(), "latent dimension mismatch");
    let problem = LatentProblem {
        system,
        t,
        xf: xf_used,
        weights: system.latent_weights(),
        scales: system.latent_scales(),
    };
    newton_solve(&problem, xg_guess, settings)
}

/// Monolithic implicit Euler step for `(X_F, X_G)` jointly, in coupled ordering.
pub struct MonolithicProblem<'a, S: PartitionedSystem + ?Sized> {
    system: &'a S,
    acc_prev: Vec<f64>,
    t_next: f64,
    h: f64,
    order: Vec<usize>,
    kl: usize,
    ku: usize,
    weights: Vec<f64>,
    scales: Vec<f64>,
    stacked: std::cell::RefCell<(Vec<f64>, Vec<f64>)>,
}

impl<'a, S: PartitionedSystem + ?Sized> MonolithicProblem<'a, S> {
    pub fn new(system: &'a S, prev: &PartitionedState, t_next: f64, h: f64) -> Result<Self, EvalError> {
        let nf = system.active_dim();
        let ng = system.latent_dim();
        let n = nf + ng;
        let (order, kl, ku) = match system.coupled_layout() {
            Some(layout) => {
                assert!(layout.validate(n), "invalid coupled layout");
                (layout.order, layout.kl, layout.ku)
            }
            None => ((0..n).collect(), n.saturating_sub(1), n.saturating_sub(1)),
        };
        let mut acc_prev = vec![0.0; nf];
        system.accumulation(&prev.active, &prev.latent, &mut acc_prev)?;
        let stacked_w: Vec<f64> = system.active_weights().into_iter().chain(system.latent_weights()).collect();
        let stacked_s: Vec<f64> = system.active_scales().into_iter().chain(system.latent_scales()).collect();
        let weights = order.iter().map(|&k| stacked_w[k]).collect();
        let scales = order.iter().map(|&k| stacked_s[k]).collect();
        Ok(Self {
            system,
            acc_prev,
            t_next,
            h,
            order,
            kl,
            ku,
            weights,
            scales,
            stacked: std::cell::RefCell::new((vec![0.0; n], vec![0.0; n])),
        })
    }

    pub fn pack(&self, xf: &[f64], xg: &[f64]) -> Vec<f64> {
        let nf = xf.len();
        self.order.iter().map(|&k| if k < nf { xf[k] } else { xg[k - nf] }).collect()
    }

    pub fn unpack(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nf = self.system.active_dim();
        let mut xf = vec![0.0; nf];
        let mut xg = vec![0.0; self.system.latent_dim()];
        for (i, &k) in self.order.iter().enumerate() {
            if k < nf {
                xf[k] = x[i];
            } else {
                xg[k - nf] = x[i];
            }
        }
        (xf, xg)
    }
}

impl<S: PartitionedSystem + ?Sized> NonlinearProblem for MonolithicProblem<'_, S> {
    fn dim(&self) -> usize {
        self.order.len()
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let nf = self.system.active_dim();
        let mut guard = self.stacked.borrow_mut();
        let (stacked_x, stacked_r) = &mut *guard;
        for (i, &k) in self.order.iter().enumerate() {
            stacked_x[k] = x[i];
        }
        let (xf, xg) = stacked_x.split_at(nf);
        let (rf, rg) = stacked_r.split_at_mut(nf);
        let mut f = vec![0.0; nf];
        self.system.eval_active(self.t_next, xf, xg, &mut f)?;
        self.system.accumulation(xf, xg, rf)?;
        for i in 0..nf {
            rf[i] = rf[i] - self.acc_prev[i] - self.h * f[i];
        }
        self.system.eval_latent(self.t_next, xf, xg, rg)?;
        for (i, &k) in self.order.iter().enumerate() {
            out[i] = stacked_r[k];
        }
        Ok(())
    }

    fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn residual_weights(&self) -> Option<&[f64]> {
        Some(&self.weights)
    }

    fn unknown_scales(&self) -> Option<&[f64]> {
        Some(&self.scales)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_linear_banded;
    use crate::newton::JacobianMode;
    use std::cell::Cell;

    /// `x' = -lambda x`, `0 = K y - x` per component.
    struct Scalar {
        lambda: f64,
        k: f64,
    }

    impl PartitionedSystem for Scalar {
        fn active_dim(&self) -> usize {
            1
        }
        fn latent_dim(&self) -> usize {
            1
        }
        fn eval_active(&self, _t: f64, xf: &[f64], _xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
            out[0] = -self.lambda * xf[0];
            Ok(())
        }
        fn eval_latent(&self, _t: f64, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
            out[0] = self.k * xg[0] - xf[0];
            Ok(())
        }
        fn initial_state(&self) -> PartitionedState {
            PartitionedState::new(vec![1.0], vec![1.0 / self.k], 0.0)
        }
    }

    fn tight() -> NewtonSettings {
        NewtonSettings { abs_tol: 1e-15, error_reduction: 1e-14, ..NewtonSettings::main() }
    }

    #[test]
    fn linear_implicit_euler_step() {
        let s = Scalar { lambda: 1.0, k: 2.0 };
        let prev = s.initial_state();
        let (x, _) = implicit_euler_micro_step(&s, &prev, &prev.latent, 0.5, 0.5, &tight()).unwrap();
        assert!((x[0] - 1.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_active_part() {
        let s = Scalar { lambda: 0.0, k: 2.0 };
        let prev = s.initial_state();
        for h in [1e-3, 1.0, 1e6] {
            let (x, rep) = implicit_euler_micro_step(&s, &prev, &prev.latent, h, h, &tight()).unwrap();
            assert_eq!(x, prev.active);
            assert_eq!(rep.iterations, 0);
        }
    }

    #[test]
    fn stiff_step_is_damped_not_amplified() {
        let s = Scalar { lambda: 1e6, k: 2.0 };
        let prev = PartitionedState::new(vec![3.0], vec![0.0], 0.0);
        let (x, _) = implicit_euler_micro_step(&s, &prev, &prev.latent, 1.0, 1.0, &tight()).unwrap();
        let exact = 3.0 / (1.0 + 1e6);
        assert!(x[0].is_finite());
        assert!((x[0] - exact).abs() <= 1e-6 * exact);
    }

    #[test]
    fn non_positive_step_rejected() {
        let s = Scalar { lambda: 1.0, k: 2.0 };
        let prev = s.initial_state();
        assert!(implicit_euler_micro_step(&s, &prev, &prev.latent, 0.0, 0.0, &tight()).is_err());
    }

    /// Tridiagonal latent `K y = b + x` with a dense oracle.
    struct Chain {
        n: usize,
    }

    impl Chain {
        fn k(&self) -> BandedMatrix {
            let mut k = BandedMatrix::zeros(self.n, 1, 1);
            for i in 0..self.n {
                k.set(i, i, 3.0);
                if i > 0 {
                    k.set(i, i - 1, -1.0);
                }
                if i + 1 < self.n {
                    k.set(i, i + 1, -1.0);
                }
            }
            k
        }
    }

    impl PartitionedSystem for Chain {
        fn active_dim(&self) -> usize {
            self.n
        }
        fn latent_dim(&self) -> usize {
            self.n
        }
        fn eval_active(&self, _t: f64, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
            for i in 0..self.n {
                out[i] = -xf[i] + 0.1 * xg[i];
            }
            Ok(())
        }
        fn eval_latent(&self, _t: f64, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
            let ky = self.k().matvec(xg);
            for i in 0..self.n {
                out[i] = ky[i] - (i as f64 + 1.0) - xf[i];
            }
            Ok(())
        }
        fn initial_state(&self) -> PartitionedState {
            PartitionedState::new(vec![0.5; self.n], vec![0.0; self.n], 0.0)
        }
        fn latent_bandwidth(&self) -> (usize, usize) {
            (1, 1)
        }
        fn latent_jacobian(&self, _t: f64, _xf: &[f64], _xg: &[f64]) -> Option<Result<BandedMatrix, EvalError>> {
            Some(Ok(self.k()))
        }
    }

    #[test]
    fn affine_latent_matches_banded_oracle() {
        let c = Chain { n: 7 };
        let xf: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let analytic = NewtonSettings { jacobian_mode: JacobianMode::Analytic, ..NewtonSettings::main() };
        let (y, rep) = solve_latent(&c, 0.0, &xf, &[0.0; 7], &analytic).unwrap();
        assert_eq!(rep.iterations, 1);
        let rhs: Vec<f64> = (0..7).map(|i| i as f64 + 1.0 + xf[i]).collect();
        let oracle = solve_linear_banded(&c.k(), &rhs).unwrap();
        for i in 0..7 {
            assert!((y[i] - oracle[i]).abs() < 1e-10);
        }
        let (y2, rep2) = solve_latent(&c, 0.0, &xf, &oracle, &tight()).unwrap();
        assert!(rep2.iterations <= 1);
        for i in 0..7 {
            assert!((y2[i] - oracle[i]).abs() < 1e-12);
        }
        // finite differences need a second iteration to reach the same accuracy
        let (y3, _) = solve_latent(&c, 0.0, &xf, &[0.0; 7], &tight()).unwrap();
        for i in 0..7 {
            assert!((y3[i] - oracle[i]).abs() < 1e-10);
        }
    }

    /// Records which latent vectors reach the model.
    struct Spy {
        inner: Chain,
        used: Vec<f64>,
        paired: Vec<f64>,
        foreign: Cell<usize>,
        calls: Cell<usize>,
    }

    impl PartitionedSystem for Spy {
        fn active_dim(&self) -> usize {
            self.inner.n
        }
        fn latent_dim(&self) -> usize {
            self.inner.n
        }
        fn eval_active(&self, t: f64, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
            self.calls.set(self.calls.get() + 1);
            if xg != self.used.as_slice() {
                self.foreign.set(self.foreign.get() + 1);
            }
            self.inner.eval_active(t, xf, xg, out)
        }
        fn accumulation(&self, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
            if xg != self.used.as_slice() && xg != self.paired.as_slice() {
                self.foreign.set(self.foreign.get() + 1);
            }
            out.copy_from_slice(xf);
            Ok(())
        }
        fn eval_latent(&self, _t: f64, _xf: &[f64], _xg: &[f64], _out: &mut [f64]) -> Result<(), EvalError> {
            self.foreign.set(self.foreign.get() + 1);
            Ok(())
        }
        fn initial_state(&self) -> PartitionedState {
            self.inner.initial_state()
        }
    }

    #[test]
    fn micro_step_sees_only_supplied_latent() {
        let used = vec![0.25, -1.0, 2.0, 0.0];
        let paired = vec![9.0; 4];
        let spy = Spy {
            inner: Chain { n: 4 },
            used: used.clone(),
            paired: paired.clone(),
            foreign: Cell::new(0),
            calls: Cell::new(0),
        };
        let prev = PartitionedState::new(vec![1.0, 2.0, 3.0, 4.0], paired.clone(), 0.0);
        let (x, _) = implicit_euler_micro_step(&spy, &prev, &used, 1.0, 1.0, &tight()).unwrap();
        assert!(spy.calls.get() > 0);
        assert_eq!(spy.foreign.get(), 0);
        assert_eq!(prev.latent, paired);
        for i in 0..4 {
            let exact = (prev.active[i] + 0.1 * used[i]) / 2.0;
            assert!((x[i] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn micro_step_is_deterministic() {
        let c = Chain { n: 5 };
        let prev = c.initial_state();
        let xg = vec![0.3; 5];
        let a = implicit_euler_micro_step(&c, &prev, &xg, 2.0, 2.0, &tight()).unwrap();
        let b = implicit_euler_micro_step(&c, &prev, &xg, 2.0, 2.0, &tight()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monolithic_pack_roundtrip() {
        struct Perm(Chain);
        impl PartitionedSystem for Perm {
            fn active_dim(&self) -> usize {
                self.0.n
            }
            fn latent_dim(&self) -> usize {
                self.0.n
            }
            fn eval_active(&self, t: f64, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
                self.0.eval_active(t, xf, xg, out)
            }
            fn eval_latent(&self, t: f64, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
                self.0.eval_latent(t, xf, xg, out)
            }
            fn initial_state(&self) -> PartitionedState {
                self.0.initial_state()
            }
            fn coupled_layout(&self) -> Option<CoupledLayout> {
                let n = self.0.n;
                let order = (0..n).flat_map(|i| [i, n + i]).collect();
                Some(CoupledLayout { order, kl: 3, ku: 3 })
            }
        }
        let p = Perm(Chain { n: 3 });
        let prev = p.initial_state();
        let mono = MonolithicProblem::new(&p, &prev, 1.0, 1.0).unwrap();
        let xf = vec![1.0, 2.0, 3.0];
        let xg = vec![4.0, 5.0, 6.0];
        let packed = mono.pack(&xf, &xg);
        assert_eq!(packed, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(mono.unpack(&packed), (xf, xg));
    }
}
