//! Online policy-evaluation estimators. Each consumes [`TrajectoryStep`]
//! records one at a time and can report a [`Fit`] at any point.

use crate::dynamics::TrajectoryStep;
use crate::features::ValueEstimate;
use crate::{Error, Matrix, Result, Vector};

mod continuous;
mod grad_lstd;
mod lstd;
mod nonlinear;
mod regen;
mod tdk;

pub use continuous::CtGradLstd;
pub use grad_lstd::GradLstd;
pub use lstd::Lstd;
pub use nonlinear::NonlinearTd;
pub use regen::RegenLstd;
pub use tdk::{TdK, TdKConfig};

/// Condition-number ceiling for [`solve_theta`].
pub const MAX_CONDITION: f64 = 1e12;

/// Gain sequence `γ_t`, `t ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum StepSize {
    /// `γ_t = 1/t`.
    #[default]
    Harmonic,
    /// `γ_t = t^{−ρ}`, `ρ ∈ (1/2, 1]`.
    Power(f64),
    /// Fixed gain in `[0, 1]`; mostly a test hook.
    Constant(f64),
}

impl StepSize {
    pub fn gain(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        match *self {
            StepSize::Harmonic => 1.0 / t as f64,
            StepSize::Power(rho) => (t as f64).powf(-rho),
            StepSize::Constant(g) => g,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSize::Harmonic => Ok(()),
            StepSize::Power(rho) if rho > 0.5 && rho <= 1.0 => Ok(()),
            StepSize::Constant(g) if (0.0..=1.0).contains(&g) => Ok(()),
            StepSize::Power(v) | StepSize::Constant(v) => Err(Error::Domain {
                what: "step-size parameter",
                value: v,
            }),
        }
    }
}

/// Snapshot of an estimator: fitted value function plus average-cost estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    pub estimate: ValueEstimate,
    pub cbar: f64,
}

pub trait Estimator: Send {
    fn name(&self) -> &str;

    fn update(&mut self, step: &TrajectoryStep) -> Result<()>;

    /// Number of steps consumed.
    fn steps(&self) -> u64;

    fn fit(&self) -> Result<Fit>;
}

/// Solves `Mθ = b` for symmetric positive semidefinite `M`, refusing when the
/// eigenvalue ratio exceeds [`MAX_CONDITION`].
pub fn solve_theta(m: &Matrix, b: &Vector) -> Result<Vector> {
    let n = m.nrows();
    if !m.is_square() || b.len() != n {
        return Err(Error::Dimension(format!(
            "M is {}x{}, b has length {}",
            m.nrows(),
            m.ncols(),
            b.len()
        )));
    }
    if !m.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(Error::InsufficientRank("non-finite entries in M or b".into()));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-10 * scale {
        return Err(Error::Dimension("M is not symmetric".into()));
    }
    let eig = m.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if !(lmin > 0.0) || lmax / lmin > MAX_CONDITION {
        return Err(Error::InsufficientRank(format!(
            "eigenvalues of M span [{lmin:e}, {lmax:e}]"
        )));
    }
    m.clone()
        .cholesky()
        .map(|c| c.solve(b))
        .ok_or_else(|| Error::InsufficientRank("Cholesky factorization failed".into()))
}

/// Cheap solve used inside per-step recursions; `None` while `M` is singular.
pub(crate) fn quick_solve(m: &Matrix, b: &Vector) -> Option<Vector> {
    if m.nrows() == 1 {
        let d = m[(0, 0)];
        return (d > 0.0).then(|| b / d);
    }
    m.clone().cholesky().map(|c| c.solve(b))
}

pub(crate) fn check_finite(t: u64, what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            t,
            detail: format!("{what} became non-finite"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_gain() {
        let s = StepSize::default();
        assert_eq!(s.gain(1), 1.0);
        assert_eq!(s.gain(4), 0.25);
        for t in 1..1000 {
            let g = StepSize::Power(0.7).gain(t);
            assert!(g > 0.0 && g <= 1.0);
        }
        assert!(StepSize::Power(0.4).validate().is_err());
        assert!(StepSize::Constant(0.0).validate().is_ok());
    }

    #[test]
    fn identity_solve() {
        let b = Vector::from_vec(vec![1.5, -2.0, 0.25]);
        assert_eq!(solve_theta(&Matrix::identity(3, 3), &b).unwrap(), b);
    }

    #[test]
    fn rank_one_is_rejected() {
        let psi = Vector::from_vec(vec![1.0, 4.0]);
        let m = &psi * psi.transpose();
        let err = solve_theta(&m, &(4.0 * &psi)).unwrap_err();
        assert!(matches!(err, Error::InsufficientRank(_)));
        assert!(solve_theta(&Matrix::zeros(1, 1), &Vector::zeros(1)).is_err());
    }

    #[test]
    fn scaling_invariance() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = Vector::from_vec(vec![1.0, -1.0]);
        let theta = solve_theta(&m, &b).unwrap();
        for c in [1e-6, 0.3, 7.0, 1e5] {
            let scaled = solve_theta(&(c * &m), &(c * &b)).unwrap();
            assert!((&scaled - &theta).norm() <= 1e-12 * theta.norm());
        }
        assert!((&m * &theta - &b).norm() < 1e-12);
    }

    #[test]
    fn quick_solve_matches() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = Vector::from_vec(vec![1.0, -1.0]);
        let q = quick_solve(&m, &b).unwrap();
        assert!((q - solve_theta(&m, &b).unwrap()).norm() < 1e-14);
        assert!(quick_solve(&Matrix::zeros(1, 1), &Vector::zeros(1)).is_none());
    }
}
