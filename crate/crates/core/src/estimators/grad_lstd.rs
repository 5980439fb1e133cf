use std::sync::Arc;

use super::{check_finite, quick_solve, solve_theta, Estimator, Fit, StepSize};
use crate::dynamics::TrajectoryStep;
use crate::features::{zero_gradient_features, Basis, ValueEstimate};
use crate::{Error, Matrix, Result, Vector};

/// Differential LSTD. The eligibility trace is a `d×ℓ` matrix driven by the
/// step Jacobian:
///
/// ```text
/// φ(t) = α A(t)ᵀ φ(t−1) + ∇ψ(X(t))
/// b(t) = (1−γ_t) b(t−1) + γ_t φ(t)ᵀ ∇c(X(t))
/// M(t) = (1−γ_t) M(t−1) + γ_t ∇ψ(X(t))ᵀ ∇ψ(X(t))
/// ```
///
/// The additive constant is recovered from running means of the cost and of
/// `h^{θ(t)}(X(t))`. With `α = 1` the fit is the relative value function,
/// centered to have zero mean along the trajectory.
pub struct GradLstd {
    basis: Arc<dyn Basis>,
    schedule: StepSize,
    pub alpha: f64,
    pub phi: Matrix,
    pub b: Vector,
    pub m: Matrix,
    pub cbar: f64,
    pub hbar: f64,
    /// Running mean of `ψ(X(t))`, used for centering when `α = 1`.
    pub psi_mean: Vector,
    theta_now: Vector,
    refresh_every: u64,
    t: u64,
}

impl GradLstd {
    pub fn new(basis: Arc<dyn Basis>, alpha: f64, schedule: StepSize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain { what: "∇-LSTD discount alpha", value: alpha });
        }
        schedule.validate()?;
        let flat = zero_gradient_features(basis.as_ref());
        if !flat.is_empty() {
            return Err(Error::Config(format!(
                "basis '{}' has features {flat:?} with identically zero gradient; \
                 ∇-LSTD cannot identify them. Drop constant features and let κ recover the offset \
                 (e.g. use 'quadratic_noconst' instead of 'quadratic')",
                basis.name()
            )));
        }
        let (d, l) = (basis.state_dim(), basis.len());
        Ok(Self {
            basis,
            schedule,
            alpha,
            phi: Matrix::zeros(d, l),
            b: Vector::zeros(l),
            m: Matrix::identity(l, l),
            cbar: 0.0,
            hbar: 0.0,
            psi_mean: Vector::zeros(l),
            theta_now: Vector::zeros(l),
            refresh_every: 1,
            t: 0,
        })
    }

    /// Recompute `θ(t)` for the `h̄` recursion only every `k` steps.
    pub fn with_refresh(mut self, k: u64) -> Self {
        self.refresh_every = k.max(1);
        self
    }

    /// `θ(t)` as last used inside the `h̄` recursion.
    pub fn running_theta(&self) -> &Vector {
        &self.theta_now
    }
}

impl Estimator for GradLstd {
    fn name(&self) -> &str {
        "grad_lstd"
    }

    fn update(&mut self, step: &TrajectoryStep) -> Result<()> {
        self.t += 1;
        let g = self.schedule.gain(self.t);
        let x = &step.x_next;
        let dpsi = self.basis.grad(x);

        let mut phi = step.jac.tr_mul(&self.phi);
        phi *= self.alpha;
        phi += &dpsi;
        self.phi = phi;

        self.b *= 1.0 - g;
        self.b.gemv_tr(g, &self.phi, &step.cost_grad, 1.0);
        self.m *= 1.0 - g;
        self.m.gemm_tr(g, &dpsi, &dpsi, 1.0);
        self.cbar += g * (step.cost - self.cbar);

        let psi = self.basis.eval(x);
        self.psi_mean *= 1.0 - g;
        self.psi_mean.axpy(g, &psi, 1.0);
        if self.t.is_multiple_of(self.refresh_every) {
            if let Some(theta) = quick_solve(&self.m, &self.b) {
                self.theta_now = theta;
            }
        }
        self.hbar += g * (self.theta_now.dot(&psi) - self.hbar);
        check_finite(self.t, "∇-LSTD b", self.b.as_slice())
    }

    fn steps(&self) -> u64 {
        self.t
    }

    fn fit(&self) -> Result<Fit> {
        let theta = solve_theta(&self.m, &self.b)?;
        let kappa = if self.alpha < 1.0 {
            -self.hbar + self.cbar / (1.0 - self.alpha)
        } else {
            -theta.dot(&self.psi_mean)
        };
        Ok(Fit {
            estimate: ValueEstimate::new(theta, kappa),
            cbar: self.cbar,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{generate_trajectory, RngStream, Trajectory};
    use crate::features::{quadratic_basis, quadratic_basis_no_constant, speedscale_basis};
    use crate::models::{ar1_value_oracle, Ar1, LinearGaussian};

    #[test]
    fn constant_feature_is_rejected() {
        let err = GradLstd::new(Arc::new(quadratic_basis()), 0.9, StepSize::Harmonic)
            .err()
            .unwrap();
        assert!(err.to_string().contains("quadratic_noconst"));
    }

    #[test]
    fn ar1_trace_recursion() {
        let m = Ar1::new(0.7).unwrap();
        let steps = generate_trajectory(&m, Vector::zeros(1), 200, RngStream::new(1, 0)).unwrap();
        let mut est =
            GradLstd::new(Arc::new(quadratic_basis_no_constant()), 0.9, StepSize::Harmonic).unwrap();
        let mut phi = 0.0;
        for s in &steps {
            est.update(s).unwrap();
            phi = 0.9 * 0.7 * phi + 2.0 * s.x_next[0];
            assert!((est.phi[(0, 0)] - phi).abs() <= 1e-12 * (1.0 + phi.abs()));
        }
    }

    /// With a zero Jacobian the trace forgets everything but the current
    /// gradient, and θ solves the plain regression `E[∇ψᵀ∇ψ]θ = E[∇ψᵀ∇c]`.
    #[test]
    fn iid_chain_has_memoryless_trace() {
        let m = LinearGaussian::new(Matrix::zeros(1, 1)).unwrap();
        let steps = generate_trajectory(&m, Vector::zeros(1), 300, RngStream::new(2, 0)).unwrap();
        let basis = Arc::new(speedscale_basis());
        let mut est = GradLstd::new(basis.clone(), 0.9, StepSize::Harmonic).unwrap();
        let x0 = |s: &TrajectoryStep| Vector::from_element(1, s.x_next[0].abs());
        let mut mm = Matrix::zeros(2, 2);
        let mut bb = Vector::zeros(2);
        for s in &steps {
            let mut s = s.clone();
            s.x_next = x0(&s);
            s.cost_grad = Vector::from_element(1, 2.0 * s.x_next[0]);
            est.update(&s).unwrap();
            assert_eq!(est.phi, basis.grad(&s.x_next));
            let g = basis.grad(&s.x_next);
            mm += g.transpose() * &g;
            bb += g.transpose() * &s.cost_grad;
        }
        let theta = est.fit().unwrap().estimate.theta;
        let direct = solve_theta(&mm, &bb).unwrap();
        assert!((theta - direct).norm() < 1e-9);
    }

    #[test]
    fn average_cost_centering() {
        let m = Ar1::new(0.7).unwrap();
        let basis = Arc::new(quadratic_basis_no_constant());
        let steps = generate_trajectory(&m, Vector::zeros(1), 2000, RngStream::new(3, 0)).unwrap();
        let mut est = GradLstd::new(basis.clone(), 1.0, StepSize::Harmonic).unwrap();
        for s in &steps {
            est.update(s).unwrap();
        }
        let fit = est.fit().unwrap();
        let mean: f64 = steps
            .iter()
            .map(|s| fit.estimate.evaluate(basis.as_ref(), &s.x_next))
            .sum::<f64>()
            / steps.len() as f64;
        assert!(mean.abs() < 1e-9, "trajectory mean {mean}");
    }

    #[test]
    fn normal_equations_hold_at_the_fit() {
        let m = Ar1::new(0.7).unwrap();
        let mut est =
            GradLstd::new(Arc::new(quadratic_basis_no_constant()), 0.9, StepSize::Harmonic).unwrap();
        for s in Trajectory::new(&m, Vector::zeros(1), RngStream::new(4, 0)).take(5000) {
            est.update(&s.unwrap()).unwrap();
        }
        let theta = est.fit().unwrap().estimate.theta;
        assert!((&est.m * &theta - &est.b).norm() <= 1e-10);
    }

    #[test]
    fn converges_towards_oracle() {
        let m = Ar1::new(0.7).unwrap();
        let (theta_star, kappa_star) = ar1_value_oracle(0.7, 0.9).unwrap();
        let mut traj = Trajectory::new(&m, Vector::zeros(1), RngStream::new(5, 0));
        traj.skip_steps(1000).unwrap();
        let mut est =
            GradLstd::new(Arc::new(quadratic_basis_no_constant()), 0.9, StepSize::Harmonic).unwrap();
        for s in traj.take(100_000) {
            est.update(&s.unwrap()).unwrap();
        }
        let fit = est.fit().unwrap();
        assert!((fit.estimate.theta[0] / theta_star - 1.0).abs() < 0.03);
        assert!((fit.estimate.kappa / kappa_star - 1.0).abs() < 0.05);
    }
}
