use std::sync::Arc;

use super::{check_finite, solve_theta, Estimator, Fit, StepSize};
use crate::dynamics::{Model, TrajectoryStep};
use crate::features::{Basis, ValueEstimate};
use crate::{Error, Matrix, Result, Vector};

/// Average-cost LSTD whose trace restarts on each visit to a regeneration
/// state. Features and cost are centered by their running means:
///
/// ```text
/// φ(t) = 𝟙{X(t−1) ≠ x•} φ(t−1) + ψ̃(X(t))
/// b(t) = (1−γ_t) b(t−1) + γ_t c̃(X(t)) φ(t)
/// M(t) = (1−γ_t) M(t−1) + γ_t ψ̃ψ̃ᵀ
/// ```
pub struct RegenLstd {
    basis: Arc<dyn Basis>,
    schedule: StepSize,
    regen: Vector,
    pub phi: Vector,
    pub b: Vector,
    pub m: Matrix,
    pub cbar: f64,
    pub psi_mean: Vector,
    regenerations: u64,
    t: u64,
}

impl RegenLstd {
    pub fn new(basis: Arc<dyn Basis>, model: &dyn Model, schedule: StepSize) -> Result<Self> {
        let regen = model.regeneration_state().ok_or_else(|| {
            Error::Config(format!(
                "model '{}' has no regeneration state; regenerative LSTD needs one",
                model.name()
            ))
        })?;
        Self::with_state(basis, regen, schedule)
    }

    pub fn with_state(basis: Arc<dyn Basis>, regen: Vector, schedule: StepSize) -> Result<Self> {
        schedule.validate()?;
        if regen.len() != basis.state_dim() {
            return Err(Error::Dimension(format!(
                "regeneration state has dimension {}, basis expects {}",
                regen.len(),
                basis.state_dim()
            )));
        }
        let l = basis.len();
        Ok(Self {
            basis,
            schedule,
            regen,
            phi: Vector::zeros(l),
            b: Vector::zeros(l),
            m: Matrix::identity(l, l),
            cbar: 0.0,
            psi_mean: Vector::zeros(l),
            regenerations: 0,
            t: 0,
        })
    }

    /// Number of trace resets so far.
    pub fn regenerations(&self) -> u64 {
        self.regenerations
    }

    fn is_regeneration(&self, x: &Vector) -> bool {
        x.iter().zip(self.regen.iter()).all(|(a, b)| (a - b).abs() <= 1e-12)
    }
}

impl Estimator for RegenLstd {
    fn name(&self) -> &str {
        "regen_lstd"
    }

    fn update(&mut self, step: &TrajectoryStep) -> Result<()> {
        self.t += 1;
        let g = self.schedule.gain(self.t);
        let psi = self.basis.eval(&step.x_next);
        self.psi_mean *= 1.0 - g;
        self.psi_mean.axpy(g, &psi, 1.0);
        self.cbar += g * (step.cost - self.cbar);
        let psi_c = psi - &self.psi_mean;
        let c_c = step.cost - self.cbar;

        if self.is_regeneration(&step.x_prev) {
            self.regenerations += 1;
            self.phi.fill(0.0);
        }
        self.phi += &psi_c;
        self.b *= 1.0 - g;
        self.b.axpy(g * c_c, &self.phi, 1.0);
        self.m *= 1.0 - g;
        self.m.ger(g, &psi_c, &psi_c, 1.0);
        check_finite(self.t, "regenerative LSTD b", self.b.as_slice())
    }

    fn steps(&self) -> u64 {
        self.t
    }

    fn fit(&self) -> Result<Fit> {
        let theta = solve_theta(&self.m, &self.b)?;
        let kappa = -theta.dot(&self.psi_mean);
        Ok(Fit {
            estimate: ValueEstimate::new(theta, kappa),
            cbar: self.cbar,
        })
    }
}
