use std::sync::Arc;

use super::{check_finite, Estimator, Fit, StepSize};
use crate::dynamics::TrajectoryStep;
use crate::features::{NonlinearFamily, ValueEstimate};
use crate::{Error, Matrix, Result, Vector};

/// Stochastic-gradient differential TD for a nonlinear family `h^θ`:
///
/// ```text
/// φ(t) = α A(t)ᵀ φ(t−1) + ∇ψ^θ(X(t))          (d×ℓ)
/// d(t) = ∇ψ^θ(X(t))ᵀ ∇h^θ(X(t)) − φ(t)ᵀ ∇c(X(t))
/// θ   ← θ − γ_t d(t)
/// ```
///
/// For a linear family the mean of `d` is `Mθ − b`, so the stationary point
/// is the ∇-LSTD solution.
pub struct NonlinearTd {
    family: Arc<dyn NonlinearFamily>,
    schedule: StepSize,
    pub alpha: f64,
    pub theta: Vector,
    pub phi: Matrix,
    pub cbar: f64,
    pub hbar: f64,
    t: u64,
    offset: u64,
}

impl NonlinearTd {
    pub fn new(
        family: Arc<dyn NonlinearFamily>,
        theta0: Vector,
        alpha: f64,
        schedule: StepSize,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain { what: "nonlinear ∇-TD discount alpha", value: alpha });
        }
        if theta0.len() != family.param_len() {
            return Err(Error::Dimension(format!(
                "family '{}' takes {} parameters, got {}",
                family.name(),
                family.param_len(),
                theta0.len()
            )));
        }
        schedule.validate()?;
        let (d, l) = (family.state_dim(), family.param_len());
        Ok(Self {
            family,
            schedule,
            alpha,
            theta: theta0,
            phi: Matrix::zeros(d, l),
            cbar: 0.0,
            hbar: 0.0,
            t: 0,
            offset: 0,
        })
    }

    /// Starts the gain sequence at `γ_{t0+1}` instead of `γ_1`.
    pub fn with_gain_offset(mut self, t0: u64) -> Self {
        self.offset = t0;
        self
    }

    /// Advances the trace without touching `θ`.
    pub fn warm_trace(&mut self, step: &TrajectoryStep) {
        let dpsi = self.family.dtheta_dx(&self.theta, &step.x_next);
        self.advance_trace(&step.jac, &dpsi);
    }

    fn advance_trace(&mut self, jac: &Matrix, dpsi: &Matrix) {
        let mut phi = jac.tr_mul(&self.phi);
        phi *= self.alpha;
        phi += dpsi;
        self.phi = phi;
    }
}

impl Estimator for NonlinearTd {
    fn name(&self) -> &str {
        "nonlinear_dtd"
    }

    fn update(&mut self, step: &TrajectoryStep) -> Result<()> {
        self.t += 1;
        let g = self.schedule.gain(self.t + self.offset);
        let x = &step.x_next;
        let dpsi = self.family.dtheta_dx(&self.theta, x);
        self.advance_trace(&step.jac, &dpsi);

        let grad_h = self.family.grad_x(&self.theta, x);
        let mut d = dpsi.tr_mul(&grad_h);
        d.gemv_tr(-1.0, &self.phi, &step.cost_grad, 1.0);
        self.theta.axpy(-g, &d, 1.0);

        self.cbar += g * (step.cost - self.cbar);
        self.hbar += g * (self.family.value(&self.theta, x) - self.hbar);
        check_finite(self.t, "nonlinear ∇-TD θ", self.theta.as_slice())
    }

    fn steps(&self) -> u64 {
        self.t
    }

    /// `κ` follows the ∇-LSTD convention for `α < 1`; zero otherwise.
    fn fit(&self) -> Result<Fit> {
        let kappa = if self.alpha < 1.0 {
            -self.hbar + self.cbar / (1.0 - self.alpha)
        } else {
            0.0
        };
        Ok(Fit {
            estimate: ValueEstimate::new(self.theta.clone(), kappa),
            cbar: self.cbar,
        })
    }
}
