use std::sync::Arc;

use super::{check_finite, Estimator, Fit, StepSize};
use crate::dynamics::TrajectoryStep;
use crate::features::{Basis, ValueEstimate};
use crate::{Error, Matrix, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdKConfig {
    pub lambda: f64,
    /// Largest condition number of `A` for which `K = −A⁻¹` is refreshed.
    pub cond_max: f64,
    /// Steps before the matrix gain is used; `None` means `2ℓ`.
    pub warmup: Option<u64>,
}

impl Default for TdKConfig {
    fn default() -> Self {
        Self { lambda: 0.0, cond_max: 1e8, warmup: None }
    }
}

/// Average-cost TD(λ) with an online matrix gain `K = −A⁻¹`, where
/// `A ≈ E[z(t)(ψ(X(t+1)) − ψ(X(t)))ᵀ]`.
///
/// During warm-up the gain is the identity, which is plain TD(λ).
pub struct TdK {
    basis: Arc<dyn Basis>,
    schedule: StepSize,
    cfg: TdKConfig,
    pub theta: Vector,
    pub z: Vector,
    pub cbar: f64,
    pub a: Matrix,
    gain: Option<Matrix>,
    warmup: u64,
    singular_events: u64,
    started: bool,
    t: u64,
}

impl TdK {
    pub fn new(basis: Arc<dyn Basis>, cfg: TdKConfig, schedule: StepSize) -> Result<Self> {
        if !(0.0..1.0).contains(&cfg.lambda) {
            return Err(Error::Domain { what: "TD-K trace decay lambda", value: cfg.lambda });
        }
        if !(cfg.cond_max > 1.0) {
            return Err(Error::Domain { what: "TD-K condition ceiling", value: cfg.cond_max });
        }
        schedule.validate()?;
        let l = basis.len();
        Ok(Self {
            basis,
            schedule,
            cfg,
            theta: Vector::zeros(l),
            z: Vector::zeros(l),
            cbar: 0.0,
            a: Matrix::zeros(l, l),
            gain: None,
            warmup: cfg.warmup.unwrap_or(2 * l as u64),
            singular_events: 0,
            started: false,
            t: 0,
        })
    }

    /// Number of refreshes skipped because `A` failed the conditioning guard.
    pub fn singular_events(&self) -> u64 {
        self.singular_events
    }

    /// Current gain, `None` while the identity is in use.
    pub fn gain(&self) -> Option<&Matrix> {
        self.gain.as_ref()
    }

    fn refresh_gain(&mut self) {
        let svd = self.a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin > 0.0 && smax / smin <= self.cfg.cond_max {
            if let Ok(inv) = svd.pseudo_inverse(0.0) {
                self.gain = Some(-inv);
                return;
            }
        }
        self.singular_events += 1;
    }
}

impl Estimator for TdK {
    fn name(&self) -> &str {
        "tdk"
    }

    fn update(&mut self, step: &TrajectoryStep) -> Result<()> {
        let psi_prev = self.basis.eval(&step.x_prev);
        if !self.started {
            self.z = psi_prev.clone();
            self.cbar = step.prev_cost;
            self.started = true;
        }
        self.t += 1;
        let g = self.schedule.gain(self.t);
        let psi_next = self.basis.eval(&step.x_next);
        let dpsi = &psi_next - &psi_prev;

        let d = (step.prev_cost - self.cbar) + dpsi.dot(&self.theta);
        match &self.gain {
            Some(k) => self.theta.gemv(g * d, k, &self.z, 1.0),
            None => self.theta.axpy(g * d, &self.z, 1.0),
        }
        self.cbar += g * (step.cost - self.cbar);
        self.a *= 1.0 - g;
        self.a.ger(g, &self.z, &dpsi, 1.0);
        self.z *= self.cfg.lambda;
        self.z += &psi_next;

        if self.t >= self.warmup {
            self.refresh_gain();
        }
        check_finite(self.t, "TD-K θ", self.theta.as_slice())
    }

    fn steps(&self) -> u64 {
        self.t
    }

    fn fit(&self) -> Result<Fit> {
        Ok(Fit {
            estimate: ValueEstimate::new(self.theta.clone(), 0.0),
            cbar: self.cbar,
        })
    }
}
