//! Markov model contract, noise streams, trajectories and the sensitivity
//! process.
//!
//! A model is a recursion `X(t+1) = a(X(t), N(t+1))` driven by i.i.d. noise.
//! Its Jacobian follows the column convention: column `i` of
//! [`Model::jacobian`] is the gradient of the `i`-th output coordinate, so
//! `jac[(j, i)] = ∂a_i/∂x_j`. The sensitivity `S(t) = ∂X(t)/∂X(0)` then evolves
//! as `S(t+1) = jacᵀ · S(t)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Matrix, Result, Vector};

/// Seeded random stream. Equal `(seed, stream_id)` pairs replay identical
/// sequences; distinct stream ids select independent ChaCha streams.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Unit-mean exponential by inversion of one uniform draw.
    pub fn exponential(&mut self) -> f64 {
        -(1.0 - self.uniform()).ln()
    }
}

/// The Markov dynamics contract.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    fn state_dim(&self) -> usize;

    fn noise_dim(&self) -> usize;

    /// `a(x, n)`.
    fn step(&self, x: &Vector, noise: &Vector) -> Vector;

    /// `∇a(x, n)` with column `i` equal to `∇a_i`.
    fn jacobian(&self, x: &Vector, noise: &Vector) -> Matrix;

    fn cost(&self, x: &Vector) -> f64;

    fn cost_grad(&self, x: &Vector) -> Vector;

    /// Exactly one call per simulated step.
    fn sample_noise(&self, rng: &mut RngStream) -> Vector;

    /// Frobenius-norm bound on every Jacobian the model can produce.
    fn jacobian_bound(&self) -> f64;

    /// True when the map `x ↦ a(x, n)` is differentiable in the ordinary sense
    /// away from its declared non-smooth set, so finite differences of
    /// [`Model::step`] are a valid oracle for [`Model::jacobian`].
    fn is_smooth(&self) -> bool {
        true
    }

    /// Whether the closed segment between `x_a` and `x_b` touches the model's
    /// non-smooth set.
    fn crosses_nonsmooth(&self, _x_a: &Vector, _x_b: &Vector) -> bool {
        false
    }

    /// Distinguished state that resets regenerative estimators.
    /// Atoms `(probability, noise)` of a discrete noise law, truncated once
    /// the remaining mass is at most `tail`, plus that remaining mass. `None`
    /// for continuous noise.
    fn noise_atoms(&self, _tail: f64) -> Option<(Vec<(f64, Vector)>, f64)> {
        None
    }

    fn regeneration_state(&self) -> Option<Vector> {
        None
    }

    fn in_state_space(&self, x: &Vector) -> bool {
        x.iter().all(|v| v.is_finite())
    }
}

/// One simulated transition `X(t-1) → X(t)` with everything an estimator
/// consumes. `jac` is `A(t) = ∇a(X(t-1), N(t))`; `cost` and `cost_grad` are
/// evaluated at `x_next`, `prev_cost` at `x_prev`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStep {
    pub x_prev: Vector,
    pub x_next: Vector,
    pub noise: Vector,
    pub jac: Matrix,
    pub prev_cost: f64,
    pub cost: f64,
    pub cost_grad: Vector,
}

/// Source of the noise sequence driving a trajectory.
pub trait NoiseSource {
    fn draw(&mut self, model: &dyn Model) -> Vector;
}

impl NoiseSource for RngStream {
    fn draw(&mut self, model: &dyn Model) -> Vector {
        model.sample_noise(self)
    }
}

/// Replays a recorded noise sequence; panics when exhausted.
#[derive(Clone, Debug)]
pub struct ReplayNoise {
    seq: Vec<Vector>,
    pos: usize,
}

impl ReplayNoise {
    pub fn new(seq: Vec<Vector>) -> Self {
        Self { seq, pos: 0 }
    }
}

impl NoiseSource for ReplayNoise {
    fn draw(&mut self, _model: &dyn Model) -> Vector {
        let n = self.seq[self.pos].clone();
        self.pos += 1;
        n
    }
}

/// Test hook: every noise draw is the zero vector.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn draw(&mut self, model: &dyn Model) -> Vector {
        Vector::zeros(model.noise_dim())
    }
}

/// Applies one transition for a given noise value. `t` is the index of the
/// produced state and only appears in error reports.
pub fn step_with_noise(
    model: &dyn Model,
    x: &Vector,
    noise: Vector,
    t: u64,
) -> Result<TrajectoryStep> {
    let x_next = model.step(x, &noise);
    if !x_next.iter().all(|v| v.is_finite()) || !model.in_state_space(&x_next) {
        return Err(Error::NonFiniteState {
            t,
            x: x.iter().copied().collect(),
            noise: noise.iter().copied().collect(),
        });
    }
    let jac = model.jacobian(x, &noise);
    let bound = model.jacobian_bound();
    assert!(
        jac.norm() <= bound * (1.0 + 1e-12),
        "{}: Jacobian norm {} exceeds declared bound {bound}",
        model.name(),
        jac.norm()
    );
    Ok(TrajectoryStep {
        prev_cost: model.cost(x),
        cost: model.cost(&x_next),
        cost_grad: model.cost_grad(&x_next),
        x_prev: x.clone(),
        x_next,
        noise,
        jac,
    })
}

/// Draws one noise sample and advances the state.
pub fn simulate_step(model: &dyn Model, x: &Vector, rng: &mut RngStream) -> Result<TrajectoryStep> {
    let noise = model.sample_noise(rng);
    step_with_noise(model, x, noise, 1)
}

/// `jacᵀ · S`.
pub fn propagate_sensitivity(jac: &Matrix, s: &Matrix) -> Matrix {
    jac.tr_mul(s)
}

/// Streaming trajectory. Each call to `next` consumes one noise draw.
pub struct Trajectory<'a, N: NoiseSource = RngStream> {
    model: &'a dyn Model,
    x: Vector,
    noise: N,
    t: u64,
}

impl<'a, N: NoiseSource> Trajectory<'a, N> {
    pub fn new(model: &'a dyn Model, x0: Vector, noise: N) -> Self {
        Self::resume(model, x0, noise, 0)
    }

    /// Continues a trajectory whose last produced state had index `t`.
    pub fn resume(model: &'a dyn Model, x: Vector, noise: N, t: u64) -> Self {
        assert_eq!(x.len(), model.state_dim(), "initial state dimension");
        Self { model, x, noise, t }
    }

    pub fn state(&self) -> &Vector {
        &self.x
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn into_parts(self) -> (Vector, N, u64) {
        (self.x, self.noise, self.t)
    }

    pub fn next_step(&mut self) -> Result<TrajectoryStep> {
        let noise = self.noise.draw(self.model);
        let step = step_with_noise(self.model, &self.x, noise, self.t + 1)?;
        self.x.copy_from(&step.x_next);
        self.t += 1;
        Ok(step)
    }

    /// Advances `n` steps, discarding the records.
    pub fn skip_steps(&mut self, n: u64) -> Result<()> {
        for _ in 0..n {
            self.next_step()?;
        }
        Ok(())
    }
}

impl<N: NoiseSource> Iterator for Trajectory<'_, N> {
    type Item = Result<TrajectoryStep>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_step())
    }
}

/// Collects `len` steps of a seeded trajectory.
pub fn generate_trajectory(
    model: &dyn Model,
    x0: Vector,
    len: usize,
    rng: RngStream,
) -> Result<Vec<TrajectoryStep>> {
    if len == 0 {
        return Err(Error::Config("trajectory length must be at least 1".into()));
    }
    Trajectory::new(model, x0, rng).take(len).collect()
}

/// Propagated sensitivity `S(T)` along a recorded path.
pub fn path_sensitivity(steps: &[TrajectoryStep], d: usize) -> Matrix {
    steps
        .iter()
        .fold(Matrix::identity(d, d), |s, step| propagate_sensitivity(&step.jac, &s))
}

#[derive(Clone, Debug)]
pub struct FdSensitivity {
    pub matrix: Matrix,
    /// Set when any perturbed pair of paths straddles the model's
    /// non-smooth set; such paths are not valid finite-difference oracles.
    pub crossed_nonsmooth: bool,
}

/// Central finite differences of `X(T)` in `X(0)` under common noise.
pub fn finite_difference_sensitivity(
    model: &dyn Model,
    x0: &Vector,
    noise_seq: &[Vector],
    delta: f64,
) -> Result<FdSensitivity> {
    if !(delta > 0.0) {
        return Err(Error::Domain {
            what: "finite-difference step",
            value: delta,
        });
    }
    let d = model.state_dim();
    let mut matrix = Matrix::identity(d, d);
    let mut crossed = false;
    if noise_seq.is_empty() {
        return Ok(FdSensitivity { matrix, crossed_nonsmooth: false });
    }
    for j in 0..d {
        let mut plus = x0.clone();
        let mut minus = x0.clone();
        plus[j] += delta;
        minus[j] -= delta;
        for noise in noise_seq {
            crossed |= model.crosses_nonsmooth(&minus, &plus);
            plus = model.step(&plus, noise);
            minus = model.step(&minus, noise);
        }
        let col = (&plus - &minus) / (2.0 * delta);
        matrix.set_column(j, &col);
    }
    Ok(FdSensitivity {
        matrix,
        crossed_nonsmooth: crossed,
    })
}

#[derive(Clone, Debug)]
pub struct JacobianReport {
    pub points: usize,
    pub skipped: usize,
    /// Largest `‖jac − fd‖ / (1 + ‖jac‖)` over the checked points.
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl JacobianReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tolerance
    }
}

/// Compares [`Model::jacobian`] with central differences of [`Model::step`] at
/// common noise. Points whose `±h` perturbation straddles the non-smooth set
/// are skipped.
pub fn check_model_jacobian(
    model: &dyn Model,
    pairs: &[(Vector, Vector)],
    h: f64,
    tolerance: f64,
) -> JacobianReport {
    let d = model.state_dim();
    let mut max_rel_err: f64 = 0.0;
    let mut skipped = 0;
    for (x, n) in pairs {
        let jac = model.jacobian(x, n);
        let mut fd = Matrix::zeros(d, d);
        let mut skip = false;
        for j in 0..d {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[j] += h;
            minus[j] -= h;
            if model.crosses_nonsmooth(&minus, &plus) || !model.in_state_space(&minus) {
                skip = true;
                break;
            }
            let diff = (model.step(&plus, n) - model.step(&minus, n)) / (2.0 * h);
            // row j of ∇a holds ∂a_i/∂x_j over i
            fd.set_row(j, &diff.transpose());
        }
        if skip {
            skipped += 1;
            continue;
        }
        let err = (&jac - &fd).norm() / (1.0 + jac.norm());
        max_rel_err = max_rel_err.max(err);
    }
    JacobianReport {
        points: pairs.len() - skipped,
        skipped,
        max_rel_err,
        tolerance,
    }
}
