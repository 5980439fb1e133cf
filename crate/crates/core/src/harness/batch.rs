//! Direct-summation counterparts of the recursive estimators, for equivalence
//! checks on short trajectories. Traces are rebuilt from their closed-form
//! sums, so the cost is `O(T²)`.

use crate::dynamics::TrajectoryStep;
use crate::estimators::solve_theta;
use crate::features::{validate_orientation, Basis};
use crate::{Error, Matrix, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BatchAlgorithm {
    Lstd { alpha: f64 },
    GradLstd { alpha: f64 },
    /// Regenerative LSTD with the given scalar regeneration state.
    RegenLstd { regen: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchResult {
    pub m: Matrix,
    pub b: Vector,
    pub theta: Vector,
}

pub fn batch_oracle(
    steps: &[TrajectoryStep],
    basis: &dyn Basis,
    algorithm: BatchAlgorithm,
) -> Result<BatchResult> {
    validate_orientation(basis)?;
    if steps.is_empty() {
        return Err(Error::Config("batch oracle needs at least one step".into()));
    }
    let (m, b) = match algorithm {
        BatchAlgorithm::Lstd { alpha } => lstd_sums(steps, basis, alpha),
        BatchAlgorithm::GradLstd { alpha } => grad_lstd_sums(steps, basis, alpha),
        BatchAlgorithm::RegenLstd { regen } => regen_sums(steps, basis, regen),
    };
    let theta = solve_theta(&m, &b)?;
    Ok(BatchResult { m, b, theta })
}

fn lstd_sums(steps: &[TrajectoryStep], basis: &dyn Basis, alpha: f64) -> (Matrix, Vector) {
    let l = basis.len();
    let psi: Vec<Vector> = steps.iter().map(|s| basis.eval(&s.x_next)).collect();
    let n = steps.len() as f64;
    let mut m = Matrix::zeros(l, l);
    let mut b = Vector::zeros(l);
    for (t, s) in steps.iter().enumerate() {
        let mut phi = Vector::zeros(l);
        for k in 0..=t {
            phi += alpha.powi((t - k) as i32) * &psi[k];
        }
        b += &phi * s.cost;
        m += &psi[t] * psi[t].transpose();
    }
    (m / n, b / n)
}

fn grad_lstd_sums(steps: &[TrajectoryStep], basis: &dyn Basis, alpha: f64) -> (Matrix, Vector) {
    let (d, l) = (basis.state_dim(), basis.len());
    let grads: Vec<Matrix> = steps.iter().map(|s| basis.grad(&s.x_next)).collect();
    let n = steps.len() as f64;
    let mut m = Matrix::zeros(l, l);
    let mut b = Vector::zeros(l);
    for (t, s) in steps.iter().enumerate() {
        // φ(t) = Σ_k α^{t−k} A(t)ᵀ ⋯ A(k+1)ᵀ ∇ψ(X(k))
        let mut phi = Matrix::zeros(d, l);
        let mut q = Matrix::identity(d, d);
        for k in (0..=t).rev() {
            phi += alpha.powi((t - k) as i32) * &q * &grads[k];
            q = &q * steps[k].jac.transpose();
        }
        b += phi.transpose() * &s.cost_grad;
        m += grads[t].transpose() * &grads[t];
    }
    (m / n, b / n)
}

fn regen_sums(steps: &[TrajectoryStep], basis: &dyn Basis, regen: f64) -> (Matrix, Vector) {
    let l = basis.len();
    let psi: Vec<Vector> = steps.iter().map(|s| basis.eval(&s.x_next)).collect();
    // centered features and costs use the means up to and including each step
    let mut psi_c = Vec::with_capacity(steps.len());
    let mut cost_c = Vec::with_capacity(steps.len());
    let (mut psi_sum, mut cost_sum) = (Vector::zeros(l), 0.0);
    for (k, s) in steps.iter().enumerate() {
        psi_sum += &psi[k];
        cost_sum += s.cost;
        let cnt = (k + 1) as f64;
        psi_c.push(&psi[k] - &psi_sum / cnt);
        cost_c.push(s.cost - cost_sum / cnt);
    }
    let n = steps.len() as f64;
    let mut m = Matrix::zeros(l, l);
    let mut b = Vector::zeros(l);
    for t in 0..steps.len() {
        let start = (0..=t)
            .rev()
            .find(|&k| (steps[k].x_prev[0] - regen).abs() <= 1e-12)
            .unwrap_or(0);
        let mut phi = Vector::zeros(l);
        for v in &psi_c[start..=t] {
            phi += v;
        }
        b += &phi * cost_c[t];
        m += &psi_c[t] * psi_c[t].transpose();
    }
    (m / n, b / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Basis;

    struct Empty;

    impl Basis for Empty {
        fn name(&self) -> &str {
            "empty"
        }
        fn state_dim(&self) -> usize {
            1
        }
        fn len(&self) -> usize {
            0
        }
        fn eval(&self, _x: &Vector) -> Vector {
            Vector::zeros(0)
        }
        fn grad(&self, _x: &Vector) -> Matrix {
            Matrix::zeros(1, 0)
        }
    }

    #[test]
    fn empty_basis_is_a_configuration_error() {
        let step = TrajectoryStep {
            x_prev: Vector::zeros(1),
            x_next: Vector::zeros(1),
            noise: Vector::zeros(1),
            jac: Matrix::identity(1, 1),
            prev_cost: 0.0,
            cost: 0.0,
            cost_grad: Vector::zeros(1),
        };
        let err = batch_oracle(&[step], &Empty, BatchAlgorithm::Lstd { alpha: 0.5 }).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
