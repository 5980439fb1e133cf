use std::sync::Arc;

use super::{solve_theta, Estimator, Fit};
use crate::dynamics::{RngStream, TrajectoryStep};
use crate::features::{Basis, ValueEstimate};
use crate::models::Ou;
use crate::{Error, Matrix, Result, Vector};

/// Continuous-time differential LSTD for the scalar OU diffusion with cost
/// `c(x) = x²`, integrated with the same Euler step as the state:
///
/// ```text
/// φ ← φ + Δt((a′(x) − γ)φ + ψ′(x))
/// b ← b + Δt φ c′(x)
/// M ← M + Δt ψ′(x)ψ′(x)ᵀ
/// ```
///
/// `θ = M⁻¹b`; the common `1/T` normalization cancels.
pub struct CtGradLstd {
    ou: Ou,
    basis: Arc<dyn Basis>,
    pub phi: Vector,
    pub b: Vector,
    pub m: Matrix,
    dpsi: Vec<f64>,
    cost_integral: f64,
    clock: f64,
    t: u64,
}

impl CtGradLstd {
    pub fn new(ou: Ou, basis: Arc<dyn Basis>) -> Result<Self> {
        if basis.state_dim() != 1 {
            return Err(Error::Dimension(format!(
                "continuous-time ∇-LSTD needs a scalar basis, '{}' has state dimension {}",
                basis.name(),
                basis.state_dim()
            )));
        }
        let l = basis.len();
        Ok(Self {
            ou,
            basis,
            phi: Vector::zeros(l),
            b: Vector::zeros(l),
            m: Matrix::zeros(l, l),
            dpsi: vec![0.0; l],
            cost_integral: 0.0,
            clock: 0.0,
            t: 0,
        })
    }

    pub fn model(&self) -> &Ou {
        &self.ou
    }

    /// Time average of the cost `x²`.
    pub fn cbar(&self) -> f64 {
        self.cost_integral / self.clock
    }

    /// Elapsed time `tΔt`.
    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Integrates the statistics over `[t, t+Δt)` at the left point `x`.
    #[inline]
    pub fn advance(&mut self, x: f64) {
        let dt = self.ou.dt;
        self.basis.grad_scalar(x, &mut self.dpsi);
        let decay = 1.0 + dt * (self.ou.drift_derivative(x) - self.ou.gamma);
        let dc = 2.0 * x;
        let l = self.dpsi.len();
        for i in 0..l {
            let p = decay * self.phi[i] + dt * self.dpsi[i];
            self.phi[i] = p;
            self.b[i] += dt * p * dc;
            for j in 0..l {
                self.m[(i, j)] += dt * self.dpsi[i] * self.dpsi[j];
            }
        }
        self.cost_integral += dt * x * x;
        self.clock += dt;
        self.t += 1;
    }

    /// Simulates `n` Euler steps from `x`, feeding each left point to the
    /// estimator, and returns the final state.
    pub fn run(&mut self, mut x: f64, n: u64, rng: &mut RngStream) -> Result<f64> {
        for _ in 0..n {
            self.advance(x);
            x = self.ou.euler_step(x, rng.standard_normal());
            if !x.is_finite() {
                return Err(Error::NonFiniteState {
                    t: self.t,
                    x: vec![x],
                    noise: vec![],
                });
            }
        }
        Ok(x)
    }

    pub fn theta(&self) -> Result<Vector> {
        if self.m.iter().all(|&v| v == 0.0) {
            return Err(Error::InsufficientRank(
                "M is zero: ψ′ vanished on every visited state".into(),
            ));
        }
        if self.m.nrows() == 1 {
            return Ok(&self.b / self.m[(0, 0)]);
        }
        solve_theta(&self.m, &self.b)
    }
}

impl Estimator for CtGradLstd {
    fn name(&self) -> &str {
        "ct_grad_lstd"
    }

    fn update(&mut self, step: &TrajectoryStep) -> Result<()> {
        self.advance(step.x_prev[0]);
        Ok(())
    }

    fn steps(&self) -> u64 {
        self.t
    }

    fn fit(&self) -> Result<Fit> {
        Ok(Fit {
            estimate: ValueEstimate::new(self.theta()?, 0.0),
            cbar: self.cost_integral / self.clock,
        })
    }
}
