use std::sync::Arc;

use super::{check_finite, solve_theta, Estimator, Fit, StepSize};
use crate::dynamics::TrajectoryStep;
use crate::features::{Basis, ValueEstimate};
use crate::{Error, Matrix, Result, Vector};

/// Discounted least-squares TD:
///
/// ```text
/// φ(t) = αφ(t−1) + ψ(X(t))
/// b(t) = (1−γ_t) b(t−1) + γ_t φ(t) c(X(t))
/// M(t) = (1−γ_t) M(t−1) + γ_t ψ(X(t)) ψ(X(t))ᵀ
/// ```
///
/// with `θ(t) = M(t)⁻¹ b(t)`.
pub struct Lstd {
    basis: Arc<dyn Basis>,
    schedule: StepSize,
    pub alpha: f64,
    pub phi: Vector,
    pub b: Vector,
    pub m: Matrix,
    pub cbar: f64,
    t: u64,
}

impl Lstd {
    pub fn new(basis: Arc<dyn Basis>, alpha: f64, schedule: StepSize) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Domain { what: "LSTD discount alpha", value: alpha });
        }
        schedule.validate()?;
        let l = basis.len();
        Ok(Self {
            basis,
            schedule,
            alpha,
            phi: Vector::zeros(l),
            b: Vector::zeros(l),
            m: Matrix::identity(l, l),
            cbar: 0.0,
            t: 0,
        })
    }
}

impl Estimator for Lstd {
    fn name(&self) -> &str {
        "lstd"
    }

    fn update(&mut self, step: &TrajectoryStep) -> Result<()> {
        self.t += 1;
        let g = self.schedule.gain(self.t);
        let psi = self.basis.eval(&step.x_next);
        self.phi *= self.alpha;
        self.phi += &psi;
        self.b *= 1.0 - g;
        self.b.axpy(g * step.cost, &self.phi, 1.0);
        self.m *= 1.0 - g;
        self.m.ger(g, &psi, &psi, 1.0);
        self.cbar += g * (step.cost - self.cbar);
        check_finite(self.t, "LSTD b", self.b.as_slice())
    }

    fn steps(&self) -> u64 {
        self.t
    }

    fn fit(&self) -> Result<Fit> {
        let theta = solve_theta(&self.m, &self.b)?;
        Ok(Fit {
            estimate: ValueEstimate::new(theta, 0.0),
            cbar: self.cbar,
        })
    }
}
