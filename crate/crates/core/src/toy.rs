//! Small partitioned systems with known behaviour, for scheme verification.

use crate::dae::{PartitionedState, PartitionedSystem};
use crate::newton::EvalError;

type Rhs = Box<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;

pub struct ToySystem {
    name: &'static str,
    f: Rhs,
    g: Rhs,
    x0: Vec<f64>,
    y0: Vec<f64>,
}

impl ToySystem {
    pub fn new(name: &'static str, x0: Vec<f64>, y0: Vec<f64>, f: Rhs, g: Rhs) -> Self {
        Self { name, f, g, x0, y0 }
    }

    /// `x' = -lambda x`, `0 = y - c`.
    pub fn decoupled(lambda: f64, c: f64) -> Self {
        Self::new(
            "decoupled",
            vec![1.0],
            vec![0.0],
            Box::new(move |_, x, _, out| out[0] = -lambda * x[0]),
            Box::new(move |_, _, y, out| out[0] = y[0] - c),
        )
    }

    /// `x' = 0`, `0 = y - 1`.
    pub fn stationary() -> Self {
        Self::new(
            "stationary",
            vec![0.7, -1.3],
            vec![5.0],
            Box::new(|_, _, _, out| out.iter_mut().for_each(|v| *v = 0.0)),
            Box::new(|_, _, y, out| out[0] = y[0] - 1.0),
        )
    }

    /// `x' = -x + a y`, `0 = y - a x`. One Gauss-Seidel sweep with step `h`
    /// multiplies the latent error by `a^2 h / (1 + h)`.
    pub fn gauss_seidel(a: f64) -> Self {
        Self::new(
            "gauss_seidel",
            vec![1.0],
            vec![0.0],
            Box::new(move |_, x, y, out| out[0] = -x[0] + a * y[0]),
            Box::new(move |_, x, y, out| out[0] = y[0] - a * x[0]),
        )
    }

    /// `x' = -x + c y`, `0 = y - (a + b t)`: a latent that is linear in time.
    pub fn ramp_latent(a: f64, b: f64, c: f64) -> Self {
        Self::new(
            "ramp_latent",
            vec![1.0],
            vec![0.0],
            Box::new(move |_, x, y, out| out[0] = -x[0] + c * y[0]),
            Box::new(move |t, _, y, out| out[0] = y[0] - (a + b * t)),
        )
    }

    /// `x' = -x + y`, `0 = y - c`.
    pub fn constant_latent(c: f64) -> Self {
        Self::new(
            "constant_latent",
            vec![2.0],
            vec![0.0],
            Box::new(|_, x, y, out| out[0] = -x[0] + y[0]),
            Box::new(move |_, _, y, out| out[0] = y[0] - c),
        )
    }

    /// `x' = x^2`, `0 = y - x`. The implicit Euler step from `x` has no real
    /// solution once `4 h x > 1`.
    pub fn blow_up() -> Self {
        Self::new(
            "blow_up",
            vec![1.0],
            vec![1.0],
            Box::new(|_, x, _, out| out[0] = x[0] * x[0]),
            Box::new(|_, x, y, out| out[0] = y[0] - x[0]),
        )
    }
}

impl PartitionedSystem for ToySystem {
    fn active_dim(&self) -> usize {
        self.x0.len()
    }

    fn latent_dim(&self) -> usize {
        self.y0.len()
    }

    fn eval_active(&self, t: f64, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (self.f)(t, xf, xg, out);
        Ok(())
    }

    fn eval_latent(&self, t: f64, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (self.g)(t, xf, xg, out);
        Ok(())
    }

    fn initial_state(&self) -> PartitionedState {
        PartitionedState::new(self.x0.clone(), self.y0.clone(), 0.0)
    }

    fn fingerprint(&self) -> String {
        self.name.to_string()
    }
}

/// Fast/slow pair with a closed-form solution:
/// `x1' = -lambda (x1 - y) + cos t`, `x2' = -mu x2`, `0 = y - x2`.
///
/// The latent follows the slow variable, so the latent coupling error of a
/// multirate scheme stays far below the micro-step truncation error.
#[derive(Debug, Clone, Copy)]
pub struct FastSlowToy {
    pub lambda: f64,
    pub mu: f64,
}

impl Default for FastSlowToy {
    fn default() -> Self {
        Self { lambda: 5.0, mu: 0.01 }
    }
}

impl FastSlowToy {
    /// Exact `(x1, x2, y)` at time `t` from `x1(0) = 2`, `x2(0) = 1`.
    pub fn exact(&self, t: f64) -> [f64; 3] {
        let (l, mu) = (self.lambda, self.mu);
        let slow = (-mu * t).exp();
        let forced = |t: f64| (l * t.cos() + t.sin()) / (l * l + 1.0);
        let drift = l / (l - mu);
        let a = 2.0 - drift - forced(0.0);
        let x1 = a * (-l * t).exp() + drift * slow + forced(t);
        [x1, slow, slow]
    }
}

impl PartitionedSystem for FastSlowToy {
    fn active_dim(&self) -> usize {
        2
    }

    fn latent_dim(&self) -> usize {
        1
    }

    fn eval_active(&self, t: f64, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        out[0] = -self.lambda * (xf[0] - xg[0]) + t.cos();
        out[1] = -self.mu * xf[1];
        Ok(())
    }

    fn eval_latent(&self, _t: f64, xf: &[f64], xg: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        out[0] = xg[0] - xf[1];
        Ok(())
    }

    fn initial_state(&self) -> PartitionedState {
        PartitionedState::new(vec![2.0, 1.0], vec![0.0], 0.0)
    }

    fn fingerprint(&self) -> String {
        format!("fast_slow(lambda={}, mu={})", self.lambda, self.mu)
    }
}
