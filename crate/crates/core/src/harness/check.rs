//! Finite-difference validation of every shipped basis, model and family.

use serde::Serialize;

use crate::dynamics::{check_model_jacobian, Model, RngStream};
use crate::features::{
    basis_by_name, check_basis_gradient, check_family_derivatives, LinearFamily, NonlinearFamily,
    SoftQuadraticFamily,
};
use crate::models::{Ar1, LinearGaussian, Ou, SpeedScaling};
use crate::{Matrix, Result, Vector};

/// Relative tolerance for basis gradients and model Jacobians.
pub const GRADIENT_TOL: f64 = 1e-5;
/// Relative tolerance for nonlinear-family derivatives.
pub const FAMILY_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
    pub detail: String,
}

pub fn run_checks() -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();

    for name in ["quadratic", "quadratic_noconst", "speedscale"] {
        let basis = basis_by_name(name)?;
        let mut points = basis.probe_points();
        points.extend([0.25, 1.0, 4.0, 9.0].iter().map(|&x| Vector::from_element(1, x)));
        points.retain(|x| basis.in_domain(x));
        let r = check_basis_gradient(basis.as_ref(), &points, GRADIENT_TOL);
        let worst = r.max_rel_err.iter().fold(0.0f64, |m, &e| m.max(e));
        lines.push(CheckLine {
            name: format!("basis/{name}"),
            passed: r.passed(),
            max_error: worst,
            tolerance: GRADIENT_TOL,
            detail: format!("{} points", points.len()),
        });
    }

    let models: Vec<Box<dyn Model>> = vec![
        Box::new(Ar1::new(0.7)?),
        Box::new(LinearGaussian::new(Matrix::from_row_slice(2, 2, &[0.5, 0.4, -0.1, 0.3]))?),
        Box::new(SpeedScaling::exponential(0.5)?),
        Box::new(Ou::new(1.0, 1.0, 1e-3)?),
    ];
    let mut rng = RngStream::new(20_170_101, 0);
    for m in &models {
        let pairs: Vec<(Vector, Vector)> = (0..200)
            .map(|_| {
                let x = Vector::from_fn(m.state_dim(), |_, _| 0.1 + 8.0 * rng.uniform());
                (x, m.sample_noise(&mut rng))
            })
            .collect();
        let r = check_model_jacobian(m.as_ref(), &pairs, 1e-6, GRADIENT_TOL);
        lines.push(CheckLine {
            name: format!("model/{}", m.name()),
            passed: r.passed() && r.points > 0,
            max_error: r.max_rel_err,
            tolerance: GRADIENT_TOL,
            detail: format!("{} points, {} skipped at the kink", r.points, r.skipped),
        });
    }

    let points: Vec<Vector> = [-1.5, -0.3, 0.4, 2.0, 5.0]
        .iter()
        .map(|&x| Vector::from_element(1, x))
        .collect();
    let families: Vec<(Box<dyn NonlinearFamily>, Vec<Vector>)> = vec![
        (
            Box::new(SoftQuadraticFamily),
            vec![Vector::from_vec(vec![1.0, 0.5, 0.2]), Vector::from_vec(vec![-0.3, 2.0, -1.0])],
        ),
        (
            Box::new(LinearFamily::new(basis_by_name("quadratic")?)),
            vec![Vector::from_vec(vec![1.0, 0.5])],
        ),
    ];
    for (f, thetas) in &families {
        let r = check_family_derivatives(f.as_ref(), thetas, &points, FAMILY_TOL);
        lines.push(CheckLine {
            name: format!("family/{}", f.name()),
            passed: r.passed(),
            max_error: r.dtheta_err.max(r.dtheta_dx_err).max(r.grad_x_err),
            tolerance: FAMILY_TOL,
            detail: format!("{} parameter points", thetas.len()),
        });
    }
    Ok(lines)
}
