use serde::Serialize;

use crate::dynamics::{Model, RngStream};
use crate::features::{Basis, ValueEstimate};
use crate::{Error, Result, Vector};

/// Largest neglected probability mass for [`BellmanMethod::Exact`].
pub const TAIL_MASS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BellmanMethod {
    /// Sum over the atoms of a discrete noise law.
    Exact,
    /// Sample mean over `samples` noise draws, stream `k` for grid point `k`.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BellmanPoint {
    pub x: f64,
    pub error: f64,
    /// Zero for the exact method.
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BellmanReport {
    pub theta: Vec<f64>,
    pub kappa: f64,
    pub cbar: f64,
    pub method: String,
    /// Atoms summed (exact) or samples drawn (Monte Carlo) per grid point.
    pub terms: usize,
    pub tail_mass: f64,
    pub points: Vec<BellmanPoint>,
}

impl BellmanReport {
    pub fn sup_abs(&self) -> f64 {
        self.points.iter().fold(0.0, |m, p| m.max(p.error.abs()))
    }
}

/// `E_B(x) = E[h(X(t+1)) | X(t) = x] − h(x) + c(x) − c̄` on a scalar grid.
pub fn bellman_error(
    h: &ValueEstimate,
    basis: &dyn Basis,
    model: &dyn Model,
    cbar: f64,
    grid: &[f64],
    method: BellmanMethod,
) -> Result<BellmanReport> {
    if model.state_dim() != 1 || basis.state_dim() != 1 {
        return Err(Error::Dimension("Bellman error is evaluated on scalar models".into()));
    }
    let value = |x: &Vector| h.evaluate(basis, x);
    let states: Vec<Vector> = grid.iter().map(|&x| Vector::from_element(1, x)).collect();
    if let Some(x) = states.iter().find(|x| !basis.in_domain(x) || !model.in_state_space(x)) {
        return Err(Error::Domain { what: "Bellman grid point", value: x[0] });
    }
    let mut report = BellmanReport {
        theta: h.theta.iter().copied().collect(),
        kappa: h.kappa,
        cbar,
        method: String::new(),
        terms: 0,
        tail_mass: 0.0,
        points: Vec::with_capacity(grid.len()),
    };
    match method {
        BellmanMethod::Exact => {
            let (atoms, tail) = model.noise_atoms(TAIL_MASS).ok_or_else(|| {
                Error::Config(format!(
                    "model '{}' has continuous noise; use the Monte-Carlo method",
                    model.name()
                ))
            })?;
            report.method = "exact".into();
            report.terms = atoms.len();
            report.tail_mass = tail;
            for x in &states {
                let ph: f64 = atoms.iter().map(|(w, n)| w * value(&model.step(x, n))).sum();
                report.points.push(BellmanPoint {
                    x: x[0],
                    error: ph - value(x) + model.cost(x) - cbar,
                    stderr: 0.0,
                });
            }
        }
        BellmanMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::Config("Monte-Carlo Bellman error needs at least 2 samples".into()));
            }
            report.method = "monte_carlo".into();
            report.terms = samples;
            for (k, x) in states.iter().enumerate() {
                let mut rng = RngStream::new(seed, k as u64);
                let (mut mean, mut m2) = (0.0, 0.0);
                for i in 0..samples {
                    let v = value(&model.step(x, &model.sample_noise(&mut rng)));
                    let delta = v - mean;
                    mean += delta / (i + 1) as f64;
                    m2 += delta * (v - mean);
                }
                let var = m2 / (samples - 1) as f64;
                report.points.push(BellmanPoint {
                    x: x[0],
                    error: mean - value(x) + model.cost(x) - cbar,
                    stderr: (var / samples as f64).sqrt(),
                });
            }
        }
    }
    Ok(report)
}

/// Grid `0, 1, …, 40`.
pub fn default_grid() -> Vec<f64> {
    (0..=40).map(f64::from).collect()
}
