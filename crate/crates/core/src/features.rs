//! Feature bases `ψ: ℝᵈ → ℝˡ` with gradient matrices, and differentiable
//! nonlinear parameterizations.
//!
//! Gradient matrices are `d×ℓ`: rows index state coordinates, columns index
//! features, so `[∇ψ(x)]_{i,j} = ∂ψ_j/∂x_i`.

use std::sync::Arc;

use crate::{Error, Matrix, Result, Vector};

pub trait Basis: Send + Sync {
    fn name(&self) -> &str;

    fn state_dim(&self) -> usize;

    /// Number of features `ℓ`.
    fn len(&self) -> usize;

    fn eval(&self, x: &Vector) -> Vector;

    /// `d×ℓ` gradient matrix.
    fn grad(&self, x: &Vector) -> Matrix;

    fn in_domain(&self, _x: &Vector) -> bool {
        true
    }

    /// Points used for orientation and degeneracy probes.
    fn probe_points(&self) -> Vec<Vector> {
        [0.25, 0.5, 1.0, 2.0, 3.5]
            .iter()
            .map(|&v| Vector::from_element(self.state_dim(), v))
            .filter(|x| self.in_domain(x))
            .collect()
    }

    /// Derivatives `ψ_j′(x)` for scalar state, written into `out`.
    fn grad_scalar(&self, x: f64, out: &mut [f64]) {
        let g = self.grad(&Vector::from_element(1, x));
        for (o, v) in out.iter_mut().zip(g.row(0).iter()) {
            *o = *v;
        }
    }
}

/// `ψ(x) = (1, x²)`, or `ψ(x) = (x²)` with the constant dropped.
#[derive(Clone, Debug)]
pub struct QuadraticBasis {
    with_constant: bool,
}

pub fn quadratic_basis() -> QuadraticBasis {
    QuadraticBasis { with_constant: true }
}

/// The quadratic basis without its constant feature, as required by ∇-LSTD.
pub fn quadratic_basis_no_constant() -> QuadraticBasis {
    QuadraticBasis { with_constant: false }
}

impl Basis for QuadraticBasis {
    fn name(&self) -> &str {
        if self.with_constant {
            "quadratic"
        } else {
            "quadratic_noconst"
        }
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn len(&self) -> usize {
        if self.with_constant {
            2
        } else {
            1
        }
    }

    fn eval(&self, x: &Vector) -> Vector {
        let sq = x[0] * x[0];
        if self.with_constant {
            Vector::from_vec(vec![1.0, sq])
        } else {
            Vector::from_element(1, sq)
        }
    }

    fn grad(&self, x: &Vector) -> Matrix {
        let g = 2.0 * x[0];
        if self.with_constant {
            Matrix::from_row_slice(1, 2, &[0.0, g])
        } else {
            Matrix::from_element(1, 1, g)
        }
    }

    fn probe_points(&self) -> Vec<Vector> {
        [-2.0, -0.5, 0.75, 1.5, 3.0]
            .iter()
            .map(|&v| Vector::from_element(1, v))
            .collect()
    }

    fn grad_scalar(&self, x: f64, out: &mut [f64]) {
        if self.with_constant {
            out[0] = 0.0;
            out[1] = 2.0 * x;
        } else {
            out[0] = 2.0 * x;
        }
    }
}

/// `ψ(x) = (x^{3/2}, x)` on `x ≥ 0`.
#[derive(Clone, Debug, Default)]
pub struct SpeedScaleBasis;

pub fn speedscale_basis() -> SpeedScaleBasis {
    SpeedScaleBasis
}

impl SpeedScaleBasis {
    pub fn try_eval(&self, x: &Vector) -> Result<Vector> {
        if !self.in_domain(x) {
            return Err(Error::Domain { what: "speed-scaling basis state", value: x[0] });
        }
        Ok(self.eval(x))
    }

    pub fn try_grad(&self, x: &Vector) -> Result<Matrix> {
        if !self.in_domain(x) {
            return Err(Error::Domain { what: "speed-scaling basis state", value: x[0] });
        }
        Ok(self.grad(x))
    }
}

impl Basis for SpeedScaleBasis {
    fn name(&self) -> &str {
        "speedscale"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn len(&self) -> usize {
        2
    }

    fn eval(&self, x: &Vector) -> Vector {
        let x = x[0].max(0.0);
        Vector::from_vec(vec![x * x.sqrt(), x])
    }

    fn grad(&self, x: &Vector) -> Matrix {
        let x = x[0].max(0.0);
        Matrix::from_row_slice(1, 2, &[1.5 * x.sqrt(), 1.0])
    }

    fn in_domain(&self, x: &Vector) -> bool {
        x[0] >= 0.0
    }

    fn grad_scalar(&self, x: f64, out: &mut [f64]) {
        out[0] = 1.5 * x.max(0.0).sqrt();
        out[1] = 1.0;
    }
}

/// Looks up a basis by its configuration name.
pub fn basis_by_name(name: &str) -> Result<Arc<dyn Basis>> {
    match name {
        "quadratic" => Ok(Arc::new(quadratic_basis())),
        "quadratic_noconst" => Ok(Arc::new(quadratic_basis_no_constant())),
        "speedscale" => Ok(Arc::new(speedscale_basis())),
        other => Err(Error::Config(format!(
            "unknown basis '{other}' (expected quadratic, quadratic_noconst or speedscale)"
        ))),
    }
}

/// Checks that `grad(x)` is `d×ℓ` and that `grad(x)ᵀ v` is an `ℓ`-vector for a
/// `d`-vector `v`, at the first probe point.
pub fn validate_orientation(basis: &dyn Basis) -> Result<()> {
    let probe = basis
        .probe_points()
        .into_iter()
        .next()
        .ok_or_else(|| Error::Config(format!("basis '{}' has no probe points", basis.name())))?;
    let (d, l) = (basis.state_dim(), basis.len());
    if l == 0 {
        return Err(Error::Config(format!("basis '{}' has no features", basis.name())));
    }
    let psi = basis.eval(&probe);
    let g = basis.grad(&probe);
    if psi.len() != l || g.nrows() != d || g.ncols() != l {
        return Err(Error::Dimension(format!(
            "basis '{}': ψ has length {}, ∇ψ is {}x{}, expected {l} and {d}x{l}",
            basis.name(),
            psi.len(),
            g.nrows(),
            g.ncols()
        )));
    }
    debug_assert_eq!(g.tr_mul(&Vector::zeros(d)).len(), l);
    Ok(())
}

/// Features whose gradient vanishes at every probe point.
pub fn zero_gradient_features(basis: &dyn Basis) -> Vec<usize> {
    let grads: Vec<Matrix> = basis.probe_points().iter().map(|x| basis.grad(x)).collect();
    (0..basis.len())
        .filter(|&j| grads.iter().all(|g| g.column(j).iter().all(|v| *v == 0.0)))
        .collect()
}

#[derive(Clone, Debug)]
pub struct GradientReport {
    /// Largest `|g − fd| / (1 + |g|)` per feature.
    pub max_rel_err: Vec<f64>,
    pub tolerance: f64,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        self.worst_feature().is_none()
    }

    /// Index of the feature with the largest error above tolerance.
    pub fn worst_feature(&self) -> Option<usize> {
        self.max_rel_err
            .iter()
            .enumerate()
            .filter(|(_, e)| !(**e <= self.tolerance))
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, _)| j)
    }
}

/// Central finite-difference audit of `∇ψ`.
pub fn check_basis_gradient(basis: &dyn Basis, points: &[Vector], tolerance: f64) -> GradientReport {
    let h = 1e-6;
    let mut max_rel_err = vec![0.0f64; basis.len()];
    for x in points {
        let g = basis.grad(x);
        for i in 0..basis.state_dim() {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (basis.eval(&plus) - basis.eval(&minus)) / (2.0 * h);
            for j in 0..basis.len() {
                let err = (g[(i, j)] - fd[j]).abs() / (1.0 + g[(i, j)].abs());
                max_rel_err[j] = max_rel_err[j].max(err);
            }
        }
    }
    GradientReport { max_rel_err, tolerance }
}

/// Fitted value function `h(x) = θᵀψ(x) + κ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueEstimate {
    pub theta: Vector,
    pub kappa: f64,
}

impl ValueEstimate {
    pub fn new(theta: Vector, kappa: f64) -> Self {
        Self { theta, kappa }
    }

    pub fn evaluate(&self, basis: &dyn Basis, x: &Vector) -> f64 {
        self.theta.dot(&basis.eval(x)) + self.kappa
    }

    pub fn gradient(&self, basis: &dyn Basis, x: &Vector) -> Vector {
        basis.grad(x) * &self.theta
    }
}

/// A parameterized family `h^θ(x)` differentiable in both `θ` and `x`.
pub trait NonlinearFamily: Send + Sync {
    fn name(&self) -> &str;

    fn state_dim(&self) -> usize;

    fn param_len(&self) -> usize;

    fn value(&self, theta: &Vector, x: &Vector) -> f64;

    /// `∇ₓ h^θ(x)`, a `d`-vector.
    fn grad_x(&self, theta: &Vector, x: &Vector) -> Vector;

    /// `ψ^θ(x) = ∂h^θ/∂θ`, an `ℓ`-vector.
    fn dtheta(&self, theta: &Vector, x: &Vector) -> Vector;

    /// `∇ψ^θ(x)`, the `d×ℓ` matrix whose column `i` is `∇ₓ ψ_i^θ`.
    fn dtheta_dx(&self, theta: &Vector, x: &Vector) -> Matrix;
}

/// `h^θ = θᵀψ` viewed as a nonlinear family.
pub struct LinearFamily {
    basis: Arc<dyn Basis>,
}

impl LinearFamily {
    pub fn new(basis: Arc<dyn Basis>) -> Self {
        Self { basis }
    }
}

impl NonlinearFamily for LinearFamily {
    fn name(&self) -> &str {
        "linear"
    }

    fn state_dim(&self) -> usize {
        self.basis.state_dim()
    }

    fn param_len(&self) -> usize {
        self.basis.len()
    }

    fn value(&self, theta: &Vector, x: &Vector) -> f64 {
        theta.dot(&self.basis.eval(x))
    }

    fn grad_x(&self, theta: &Vector, x: &Vector) -> Vector {
        self.basis.grad(x) * theta
    }

    fn dtheta(&self, _theta: &Vector, x: &Vector) -> Vector {
        self.basis.eval(x)
    }

    fn dtheta_dx(&self, _theta: &Vector, x: &Vector) -> Matrix {
        self.basis.grad(x)
    }
}

/// Scalar family `h^θ(x) = θ₁x² + θ₂·log(1 + e^{θ₃}x²)`.
#[derive(Clone, Debug, Default)]
pub struct SoftQuadraticFamily;

impl NonlinearFamily for SoftQuadraticFamily {
    fn name(&self) -> &str {
        "softquad"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn param_len(&self) -> usize {
        3
    }

    fn value(&self, theta: &Vector, x: &Vector) -> f64 {
        let x2 = x[0] * x[0];
        theta[0] * x2 + theta[1] * (theta[2].exp() * x2).ln_1p()
    }

    fn grad_x(&self, theta: &Vector, x: &Vector) -> Vector {
        let (x, s) = (x[0], theta[2].exp());
        Vector::from_element(1, 2.0 * theta[0] * x + theta[1] * 2.0 * s * x / (1.0 + s * x * x))
    }

    fn dtheta(&self, theta: &Vector, x: &Vector) -> Vector {
        let (x2, s) = (x[0] * x[0], theta[2].exp());
        let q = 1.0 + s * x2;
        Vector::from_vec(vec![x2, q.ln(), theta[1] * s * x2 / q])
    }

    fn dtheta_dx(&self, theta: &Vector, x: &Vector) -> Matrix {
        let (x, s) = (x[0], theta[2].exp());
        let q = 1.0 + s * x * x;
        Matrix::from_row_slice(
            1,
            3,
            &[2.0 * x, 2.0 * s * x / q, theta[1] * 2.0 * s * x / (q * q)],
        )
    }
}

#[derive(Clone, Debug)]
pub struct FamilyReport {
    pub dtheta_err: f64,
    pub dtheta_dx_err: f64,
    pub grad_x_err: f64,
    pub tolerance: f64,
}

impl FamilyReport {
    pub fn passed(&self) -> bool {
        self.dtheta_err <= self.tolerance
            && self.dtheta_dx_err <= self.tolerance
            && self.grad_x_err <= self.tolerance
    }
}

/// Finite-difference audit of a family's `θ`, `x` and mixed derivatives.
pub fn check_family_derivatives(
    family: &dyn NonlinearFamily,
    thetas: &[Vector],
    points: &[Vector],
    tolerance: f64,
) -> FamilyReport {
    let h = 1e-5;
    let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + a.abs());
    let (mut e_th, mut e_mix, mut e_x) = (0.0f64, 0.0f64, 0.0f64);
    for theta in thetas {
        for x in points {
            let psi = family.dtheta(theta, x);
            let mix = family.dtheta_dx(theta, x);
            let gx = family.grad_x(theta, x);
            for k in 0..family.param_len() {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[k] += h;
                tm[k] -= h;
                let fd = (family.value(&tp, x) - family.value(&tm, x)) / (2.0 * h);
                e_th = e_th.max(rel(psi[k], fd));
            }
            for i in 0..family.state_dim() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (family.value(theta, &xp) - family.value(theta, &xm)) / (2.0 * h);
                e_x = e_x.max(rel(gx[i], fd));
                let fd_mix = (family.dtheta(theta, &xp) - family.dtheta(theta, &xm)) / (2.0 * h);
                for k in 0..family.param_len() {
                    e_mix = e_mix.max(rel(mix[(i, k)], fd_mix[k]));
                }
            }
        }
    }
    FamilyReport {
        dtheta_err: e_th,
        dtheta_dx_err: e_mix,
        grad_x_err: e_x,
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    #[test]
    fn quadratic_examples() {
        let b = quadratic_basis();
        assert_eq!(b.eval(&v(2.0)).as_slice(), &[1.0, 4.0]);
        assert_eq!(b.grad(&v(2.0)).as_slice(), &[0.0, 4.0]);
        assert_eq!(b.grad(&v(0.0)).as_slice(), &[0.0, 0.0]);
        let b = quadratic_basis_no_constant();
        assert_eq!(b.eval(&v(3.0)).as_slice(), &[9.0]);
        assert_eq!(b.grad(&v(3.0)).as_slice(), &[6.0]);
    }

    #[test]
    fn speedscale_examples() {
        let b = speedscale_basis();
        assert_eq!(b.eval(&v(4.0)).as_slice(), &[8.0, 4.0]);
        assert_eq!(b.grad(&v(4.0)).as_slice(), &[3.0, 1.0]);
        assert_eq!(b.eval(&v(0.0)).as_slice(), &[0.0, 0.0]);
        assert_eq!(b.grad(&v(0.0)).as_slice(), &[0.0, 1.0]);
        assert_eq!(b.grad(&v(1.0)).as_slice(), &[1.5, 1.0]);
        assert!(b.try_eval(&v(-1.0)).is_err());
        assert!(b.try_grad(&v(-0.1)).is_err());
    }

    #[test]
    fn scalar_fast_path_matches_grad() {
        for b in [basis_by_name("quadratic").unwrap(), basis_by_name("speedscale").unwrap()] {
            let mut out = vec![0.0; b.len()];
            for x in [0.0, 0.3, 2.0, 7.5] {
                b.grad_scalar(x, &mut out);
                assert_eq!(out.as_slice(), b.grad(&v(x)).as_slice());
            }
        }
    }

    #[test]
    fn gradient_checks_pass_on_shipped_bases() {
        let pts: Vec<_> = [-2.0, -1.0, 1.0, 2.0].iter().map(|&x| v(x)).collect();
        assert!(check_basis_gradient(&quadratic_basis(), &pts, 1e-5).passed());
        let pts: Vec<_> = [0.25, 1.0, 4.0, 9.0].iter().map(|&x| v(x)).collect();
        let r = check_basis_gradient(&speedscale_basis(), &pts, 1e-5);
        assert!(r.passed(), "{r:?}");
    }

    struct Corrupted(QuadraticBasis);

    impl Basis for Corrupted {
        fn name(&self) -> &str {
            "corrupted"
        }
        fn state_dim(&self) -> usize {
            1
        }
        fn len(&self) -> usize {
            2
        }
        fn eval(&self, x: &Vector) -> Vector {
            self.0.eval(x)
        }
        fn grad(&self, x: &Vector) -> Matrix {
            let mut g = self.0.grad(x);
            g[(0, 1)] *= 1.01;
            g
        }
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let pts: Vec<_> = [-2.0, -1.0, 1.0, 2.0].iter().map(|&x| v(x)).collect();
        let r = check_basis_gradient(&Corrupted(quadratic_basis()), &pts, 1e-5);
        assert!(!r.passed());
        assert_eq!(r.worst_feature(), Some(1));
    }

    #[test]
    fn orientation_and_degeneracy_probes() {
        for name in ["quadratic", "quadratic_noconst", "speedscale"] {
            validate_orientation(basis_by_name(name).unwrap().as_ref()).unwrap();
        }
        assert_eq!(zero_gradient_features(&quadratic_basis()), vec![0]);
        assert!(zero_gradient_features(&quadratic_basis_no_constant()).is_empty());
        assert!(zero_gradient_features(&speedscale_basis()).is_empty());
        assert!(basis_by_name("cubic").is_err());
    }

    #[test]
    fn value_estimate_is_linear_in_theta() {
        let b = speedscale_basis();
        let base = ValueEstimate::new(Vector::from_vec(vec![0.3, -1.2]), 4.0);
        let x = v(2.5);
        let psi = b.eval(&x);
        for i in 0..2 {
            let mut bumped = base.clone();
            bumped.theta[i] += 0.5;
            let diff = bumped.evaluate(&b, &x) - base.evaluate(&b, &x);
            assert!((diff - 0.5 * psi[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn family_derivatives() {
        let pts: Vec<_> = [-1.5, -0.3, 0.4, 2.0].iter().map(|&x| v(x)).collect();
        let thetas = vec![
            Vector::from_vec(vec![1.0, 0.5, 0.2]),
            Vector::from_vec(vec![-0.3, 2.0, -1.0]),
        ];
        let r = check_family_derivatives(&SoftQuadraticFamily, &thetas, &pts, 1e-4);
        assert!(r.passed(), "{r:?}");
        let lin = LinearFamily::new(Arc::new(quadratic_basis()));
        let thetas = vec![Vector::from_vec(vec![1.0, 0.5])];
        assert!(check_family_derivatives(&lin, &thetas, &pts, 1e-4).passed());
    }
}
