//! Concrete Markov models and their closed-form oracles.

use crate::dynamics::{Model, RngStream};
use crate::{Error, Matrix, Result, Vector};

/// Scalar linear-Gaussian chain `X(t+1) = a X(t) + N(t+1)`, `N ~ N(0, 1)`,
/// with cost `c(x) = x²`.
#[derive(Clone, Debug)]
pub struct Ar1 {
    pub a: f64,
}

impl Ar1 {
    pub fn new(a: f64) -> Result<Self> {
        if !(a.abs() < 1.0) {
            return Err(Error::Domain { what: "AR(1) coefficient a", value: a });
        }
        Ok(Self { a })
    }
}

impl Model for Ar1 {
    fn name(&self) -> &str {
        "ar1"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn step(&self, x: &Vector, noise: &Vector) -> Vector {
        Vector::from_element(1, self.a * x[0] + noise[0])
    }

    fn jacobian(&self, _x: &Vector, _noise: &Vector) -> Matrix {
        Matrix::from_element(1, 1, self.a)
    }

    fn cost(&self, x: &Vector) -> f64 {
        x[0] * x[0]
    }

    fn cost_grad(&self, x: &Vector) -> Vector {
        Vector::from_element(1, 2.0 * x[0])
    }

    fn sample_noise(&self, rng: &mut RngStream) -> Vector {
        Vector::from_element(1, rng.standard_normal())
    }

    fn jacobian_bound(&self) -> f64 {
        self.a.abs()
    }
}

/// Multivariate linear chain `X(t+1) = B X(t) + N(t+1)` with standard Gaussian
/// noise and cost `‖x‖²`. Mostly useful for pinning matrix conventions.
#[derive(Clone, Debug)]
pub struct LinearGaussian {
    b: Matrix,
}

impl LinearGaussian {
    pub fn new(b: Matrix) -> Result<Self> {
        if !b.is_square() {
            return Err(Error::Dimension(format!(
                "transition matrix must be square, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { b })
    }
}

impl Model for LinearGaussian {
    fn name(&self) -> &str {
        "linear"
    }

    fn state_dim(&self) -> usize {
        self.b.nrows()
    }

    fn noise_dim(&self) -> usize {
        self.b.nrows()
    }

    fn step(&self, x: &Vector, noise: &Vector) -> Vector {
        &self.b * x + noise
    }

    fn jacobian(&self, _x: &Vector, _noise: &Vector) -> Matrix {
        self.b.transpose()
    }

    fn cost(&self, x: &Vector) -> f64 {
        x.norm_squared()
    }

    fn cost_grad(&self, x: &Vector) -> Vector {
        2.0 * x
    }

    fn sample_noise(&self, rng: &mut RngStream) -> Vector {
        Vector::from_fn(self.b.nrows(), |_, _| rng.standard_normal())
    }

    fn jacobian_bound(&self) -> f64 {
        self.b.norm()
    }
}

/// `ε̄ = ½(ε + √(ε² + 4))`, the positive root of `u² − εu − 1`.
pub fn epsilon_bar(epsilon: f64) -> f64 {
    0.5 * (epsilon + (epsilon * epsilon + 4.0).sqrt())
}

/// Service policy `f(x) = min(x, 1 + ε√x)`.
pub fn policy_f(epsilon: f64, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain { what: "queue state x", value: x });
    }
    Ok(policy_value(epsilon, x))
}

fn policy_value(epsilon: f64, x: f64) -> f64 {
    x.min(1.0 + epsilon * x.max(0.0).sqrt())
}

/// Where the speed-scaling Jacobian indicator switches on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BranchPoint {
    /// `ε̄²`, where the two branches of `f` actually meet.
    #[default]
    Corrected,
    /// `ε̄`, the threshold as literally printed alongside the recursion.
    Literal,
}

impl BranchPoint {
    pub fn threshold(self, epsilon: f64) -> f64 {
        let eb = epsilon_bar(epsilon);
        match self {
            BranchPoint::Corrected => eb * eb,
            BranchPoint::Literal => eb,
        }
    }
}

/// `A = 𝟙{x ≥ threshold}·[1 − ½ε x^{−1/2}]`, i.e. `1 − f′(x)` taken as a
/// right derivative.
pub fn speedscale_jacobian(epsilon: f64, x: f64, branch: BranchPoint) -> f64 {
    if x >= branch.threshold(epsilon) && x > 0.0 {
        1.0 - 0.5 * epsilon / x.sqrt()
    } else {
        0.0
    }
}

/// Draws `nΔ` with `P(n) = (1 − p)ⁿ p` by inversion of one uniform.
pub fn sample_geometric_arrival(p: f64, delta: f64, rng: &mut RngStream) -> f64 {
    assert!(p > 0.0 && p <= 1.0, "geometric parameter p = {p} outside (0, 1]");
    assert!(delta > 0.0, "lattice spacing {delta} must be positive");
    let u = rng.uniform();
    if p >= 1.0 {
        return 0.0;
    }
    let n = ((1.0 - u).ln() / (1.0 - p).ln()).floor();
    n.max(0.0) * delta
}

/// Forward difference `(f(x + Δ) − f(x)) / Δ`.
pub fn pseudo_gradient(f: impl Fn(f64) -> f64, x: f64, delta: f64) -> f64 {
    (f(x + delta) - f(x)) / delta
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Arrivals {
    /// Unit-mean exponential; the state is a continuous workload.
    Exponential,
    /// `P(N = nΔ) = (1 − p)ⁿ p`; the state lives on the lattice `ΔZ₊`.
    Lattice { p: f64, delta: f64 },
}

/// Speed-scaling queue `X(t+1) = X(t) − f(X(t)) + N(t+1)` with cost
/// `c(x) = x + f(x)²/2`.
///
/// With lattice arrivals the service is rounded down to the lattice so that
/// states stay exactly representable as multiples of `Δ`; the Jacobian and the
/// cost gradient are then forward-difference pseudo-gradients with step `Δ`.
#[derive(Clone, Debug)]
pub struct SpeedScaling {
    pub epsilon: f64,
    pub arrivals: Arrivals,
    pub branch: BranchPoint,
}

impl SpeedScaling {
    pub fn new(epsilon: f64, arrivals: Arrivals, branch: BranchPoint) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Domain { what: "policy parameter epsilon", value: epsilon });
        }
        if let Arrivals::Lattice { p, delta } = arrivals {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Domain { what: "geometric parameter p_A", value: p });
            }
            if !(delta > 0.0) {
                return Err(Error::Domain { what: "lattice spacing delta_A", value: delta });
            }
        }
        Ok(Self { epsilon, arrivals, branch })
    }

    pub fn exponential(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, Arrivals::Exponential, BranchPoint::Corrected)
    }

    pub fn lattice(epsilon: f64, p: f64, delta: f64) -> Result<Self> {
        Self::new(epsilon, Arrivals::Lattice { p, delta }, BranchPoint::Corrected)
    }

    pub fn policy(&self, x: f64) -> f64 {
        policy_value(self.epsilon, x)
    }

    /// Right derivative of the policy, consistent with the configured branch point.
    pub fn policy_derivative(&self, x: f64) -> f64 {
        1.0 - speedscale_jacobian(self.epsilon, x, self.branch)
    }

    pub fn scalar_cost(&self, x: f64) -> f64 {
        let u = self.policy(x);
        x + 0.5 * u * u
    }

    /// Service actually applied in state `x`.
    pub fn service(&self, x: f64) -> f64 {
        match self.arrivals {
            Arrivals::Exponential => self.policy(x),
            Arrivals::Lattice { delta, .. } => {
                let units = (self.policy(x) / delta + 1e-9).floor();
                units * delta
            }
        }
    }

    /// Next state for a given arrival amount.
    pub fn next_state(&self, x: f64, arrival: f64) -> f64 {
        match self.arrivals {
            Arrivals::Exponential => x - self.policy(x) + arrival,
            Arrivals::Lattice { delta, .. } => {
                let k = (x / delta).round();
                let u = (self.policy(x) / delta + 1e-9).floor();
                let n = (arrival / delta).round();
                (k - u + n) * delta
            }
        }
    }

    pub fn kink(&self) -> f64 {
        BranchPoint::Corrected.threshold(self.epsilon)
    }
}

impl Model for SpeedScaling {
    fn name(&self) -> &str {
        match self.arrivals {
            Arrivals::Exponential => "speedscale",
            Arrivals::Lattice { .. } => "speedscale_lattice",
        }
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn step(&self, x: &Vector, noise: &Vector) -> Vector {
        Vector::from_element(1, self.next_state(x[0], noise[0]))
    }

    fn jacobian(&self, x: &Vector, _noise: &Vector) -> Matrix {
        let a = match self.arrivals {
            Arrivals::Exponential => speedscale_jacobian(self.epsilon, x[0], self.branch),
            Arrivals::Lattice { delta, .. } => {
                1.0 - pseudo_gradient(|y| self.policy(y), x[0], delta)
            }
        };
        Matrix::from_element(1, 1, a)
    }

    fn cost(&self, x: &Vector) -> f64 {
        self.scalar_cost(x[0])
    }

    fn cost_grad(&self, x: &Vector) -> Vector {
        let g = match self.arrivals {
            Arrivals::Exponential => 1.0 + self.policy(x[0]) * self.policy_derivative(x[0]),
            Arrivals::Lattice { delta, .. } => {
                pseudo_gradient(|y| self.scalar_cost(y), x[0], delta)
            }
        };
        Vector::from_element(1, g)
    }

    fn sample_noise(&self, rng: &mut RngStream) -> Vector {
        let n = match self.arrivals {
            Arrivals::Exponential => rng.exponential(),
            Arrivals::Lattice { p, delta } => sample_geometric_arrival(p, delta, rng),
        };
        Vector::from_element(1, n)
    }

    fn jacobian_bound(&self) -> f64 {
        1.0
    }

    fn is_smooth(&self) -> bool {
        matches!(self.arrivals, Arrivals::Exponential)
    }

    fn crosses_nonsmooth(&self, x_a: &Vector, x_b: &Vector) -> bool {
        let (lo, hi) = (x_a[0].min(x_b[0]), x_a[0].max(x_b[0]));
        let kink = self.kink();
        lo <= 0.0 || (lo <= kink && kink <= hi)
    }

    fn noise_atoms(&self, tail: f64) -> Option<(Vec<(f64, Vector)>, f64)> {
        let Arrivals::Lattice { p, delta } = self.arrivals else {
            return None;
        };
        let mut atoms = Vec::new();
        let mut rest = 1.0;
        let mut k = 0.0;
        while rest > tail {
            atoms.push((rest * p, Vector::from_element(1, k * delta)));
            rest *= 1.0 - p;
            k += 1.0;
        }
        Some((atoms, rest))
    }

    fn regeneration_state(&self) -> Option<Vector> {
        match self.arrivals {
            Arrivals::Exponential => None,
            Arrivals::Lattice { .. } => Some(Vector::zeros(1)),
        }
    }

    fn in_state_space(&self, x: &Vector) -> bool {
        x[0].is_finite() && x[0] >= 0.0
    }
}

/// Euler–Maruyama discretization of `dX = −βX dt + dB` with step `dt`.
/// `gamma` is the discount rate used by the continuous-time estimator.
#[derive(Clone, Debug)]
pub struct Ou {
    pub beta: f64,
    pub gamma: f64,
    pub dt: f64,
    sqrt_dt: f64,
}

impl Ou {
    pub fn new(beta: f64, gamma: f64, dt: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Domain { what: "mean-reversion rate beta", value: beta });
        }
        if !(gamma > 0.0) {
            return Err(Error::Domain { what: "discount rate gamma", value: gamma });
        }
        if !(dt > 0.0 && dt <= 1e-2) {
            return Err(Error::Domain { what: "integration step dt", value: dt });
        }
        Ok(Self { beta, gamma, dt, sqrt_dt: dt.sqrt() })
    }

    pub fn drift(&self, x: f64) -> f64 {
        -self.beta * x
    }

    pub fn drift_derivative(&self, _x: f64) -> f64 {
        -self.beta
    }

    /// One Euler–Maruyama step for a standard normal draw `z`.
    #[inline]
    pub fn euler_step(&self, x: f64, z: f64) -> f64 {
        x + self.drift(x) * self.dt + self.sqrt_dt * z
    }
}

impl Model for Ou {
    fn name(&self) -> &str {
        "ou"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn step(&self, x: &Vector, noise: &Vector) -> Vector {
        Vector::from_element(1, self.euler_step(x[0], noise[0]))
    }

    fn jacobian(&self, _x: &Vector, _noise: &Vector) -> Matrix {
        Matrix::from_element(1, 1, 1.0 - self.beta * self.dt)
    }

    fn cost(&self, x: &Vector) -> f64 {
        x[0] * x[0]
    }

    fn cost_grad(&self, x: &Vector) -> Vector {
        Vector::from_element(1, 2.0 * x[0])
    }

    fn sample_noise(&self, rng: &mut RngStream) -> Vector {
        Vector::from_element(1, rng.standard_normal())
    }

    fn jacobian_bound(&self) -> f64 {
        (1.0 - self.beta * self.dt).abs()
    }
}

/// Exact discounted value `h_α(x) = θ₂ x² + κ` of the AR(1) chain with unit
/// noise variance and cost `x²`; returns `(θ₂, κ)`.
pub fn ar1_value_oracle(a: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(a.abs() < 1.0) {
        return Err(Error::Domain { what: "AR(1) coefficient a", value: a });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain { what: "discount factor alpha", value: alpha });
    }
    let theta = 1.0 / (1.0 - alpha * a * a);
    let kappa = (1.0 / (1.0 - alpha) - theta) / (1.0 - a * a);
    Ok((theta, kappa))
}

/// `h_γ′(x) = 2x / (γ + 2β)` for the OU diffusion with cost `x²`. `γ = 0`
/// gives the derivative of the relative value function.
pub fn ou_value_derivative_oracle(beta: f64, gamma: f64, x: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain { what: "mean-reversion rate beta", value: beta });
    }
    if !(gamma >= 0.0) {
        return Err(Error::Domain { what: "discount rate gamma", value: gamma });
    }
    Ok(2.0 * x / (gamma + 2.0 * beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{check_model_jacobian, Trajectory};
    use approx::assert_relative_eq;

    #[test]
    fn policy_examples() {
        assert_eq!(policy_f(0.5, 4.0).unwrap(), 2.0);
        assert_eq!(policy_f(0.3, 0.0).unwrap(), 0.0);
        assert_eq!(policy_f(0.5, 1.0).unwrap(), 1.0);
        assert!(policy_f(0.5, -1.0).is_err());
    }

    #[test]
    fn policy_is_bounded_by_state() {
        for i in 0..1000 {
            let x = i as f64 * 0.37;
            let f = policy_f(0.5, x).unwrap();
            assert!((0.0..=x).contains(&f));
        }
    }

    #[test]
    fn jacobian_examples() {
        assert_relative_eq!(speedscale_jacobian(0.5, 4.0, BranchPoint::Corrected), 0.875);
        assert_eq!(speedscale_jacobian(0.5, 0.5, BranchPoint::Corrected), 0.0);
        assert_relative_eq!(epsilon_bar(0.5), 1.280_776_406_404_415, epsilon = 1e-12);
    }

    #[test]
    fn branch_point_is_where_policy_branches_meet() {
        for eps in [0.2, 0.5, 0.8, 2.0] {
            let k = BranchPoint::Corrected.threshold(eps);
            assert_relative_eq!(k, 1.0 + eps * k.sqrt(), epsilon = 1e-12);
            // literal threshold sits strictly below the kink
            assert!(BranchPoint::Literal.threshold(eps) < k);
        }
        // between the literal and corrected thresholds the policy is still f(x) = x
        let x = 1.4;
        assert_eq!(policy_f(0.5, x).unwrap(), x);
        assert_eq!(speedscale_jacobian(0.5, x, BranchPoint::Corrected), 0.0);
        assert!(speedscale_jacobian(0.5, x, BranchPoint::Literal) > 0.0);
    }

    #[test]
    fn jacobian_matches_policy_derivative() {
        let m = SpeedScaling::exponential(0.5).unwrap();
        for i in 1..400 {
            let x = i as f64 * 0.05;
            if (x - m.kink()).abs() < 1e-3 {
                continue;
            }
            let h = 1e-6;
            let fd = (m.policy(x + h) - m.policy(x - h)) / (2.0 * h);
            assert!((1.0 - fd - speedscale_jacobian(0.5, x, BranchPoint::Corrected)).abs() < 1e-6);
        }
    }

    #[test]
    fn pseudo_gradient_examples() {
        let d = 1.0 / 24.0;
        assert_relative_eq!(pseudo_gradient(|x| x * x, 1.0, d), 2.0 + d, epsilon = 1e-12);
        assert_eq!(pseudo_gradient(|_| 3.0, 1.0, d), 0.0);
        let g = pseudo_gradient(|x| policy_value(0.5, x), 4.0, d);
        assert_relative_eq!(g, 0.124_676_163_629_644, epsilon = 1e-12);
        assert!((1.0 - g - 0.875).abs() < d);
    }

    #[test]
    fn geometric_mean_and_degenerate_case() {
        let (p, d) = (0.04, 1.0 / 24.0);
        assert_relative_eq!(d * (1.0 - p) / p, 1.0, epsilon = 1e-12);
        let mut rng = RngStream::new(17, 0);
        for _ in 0..100 {
            assert_eq!(sample_geometric_arrival(1.0, d, &mut rng), 0.0);
        }
    }

    #[test]
    fn geometric_sample_moments() {
        let (p, d) = (0.04, 1.0 / 24.0);
        let mut rng = RngStream::new(99, 0);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += sample_geometric_arrival(p, d, &mut rng);
        }
        let mean = sum / n as f64;
        let var = d * d * (1.0 - p) / (p * p);
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn ar1_oracle_values() {
        let (t, k) = ar1_value_oracle(0.7, 0.9).unwrap();
        assert_relative_eq!(t, 1.788_908_765_652_951_7, epsilon = 1e-12);
        assert_relative_eq!(k, 16.100_178_890_876_56, epsilon = 1e-9);
        let (t, k) = ar1_value_oracle(0.7, 0.99).unwrap();
        assert_relative_eq!(t, 1.942_124_684_404_739, epsilon = 1e-9);
        assert!((k - 192.27).abs() < 5e-3);
        let (t, k) = ar1_value_oracle(0.0, 0.8).unwrap();
        assert_relative_eq!(t, 1.0);
        assert_relative_eq!(k, 0.8 / 0.2, epsilon = 1e-12);
        assert!(ar1_value_oracle(0.7, 1.0).is_err());
    }

    /// Truncated series `Σ αᵗ E_x[X(t)²]` with `E_x[X(t)²] = a^{2t}x² + (1 − a^{2t})/(1 − a²)`.
    #[test]
    fn ar1_oracle_matches_truncated_sum() {
        let (a, alpha) = (0.7f64, 0.9f64);
        let (theta, kappa) = ar1_value_oracle(a, alpha).unwrap();
        for x in [-2.0, 0.0, 0.5, 3.0] {
            let mut sum = 0.0;
            for t in 0..=1000 {
                let a2t = a.powi(2 * t);
                sum += alpha.powi(t) * (a2t * x * x + (1.0 - a2t) / (1.0 - a * a));
            }
            assert_relative_eq!(theta * x * x + kappa, sum, max_relative = 1e-12);
        }
    }

    #[test]
    fn ar1_oracle_fixed_point() {
        let (a, alpha) = (0.7, 0.9);
        let (theta, kappa) = ar1_value_oracle(a, alpha).unwrap();
        for i in 0..10 {
            let x = -3.0 + 0.6 * i as f64;
            let h = theta * x * x + kappa;
            let next = theta * (a * a * x * x + 1.0) + kappa;
            assert!((h - (x * x + alpha * next)).abs() <= 1e-10);
        }
    }

    #[test]
    fn ou_oracle_values() {
        assert_relative_eq!(ou_value_derivative_oracle(1.0, 1.0, 1.0).unwrap(), 2.0 / 3.0);
        assert_eq!(ou_value_derivative_oracle(0.4, 2.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(ou_value_derivative_oracle(1.0, 0.0, 1.0).unwrap(), 1.0);
    }

    /// `γh = c + ah′ + ½h″` over quadratics `h = px² + q`.
    #[test]
    fn ou_oracle_solves_dynamic_programming_equation() {
        let (beta, gamma) = (0.7, 1.3);
        let p = ou_value_derivative_oracle(beta, gamma, 1.0).unwrap() / 2.0;
        let q = p / gamma;
        for x in [-1.0, 0.0, 0.5, 2.0] {
            let lhs = gamma * (p * x * x + q);
            let rhs = x * x + (-beta * x) * (2.0 * p * x) + p;
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn policy_lipschitz_audit() {
        let eps = 0.5;
        let l = 1.0;
        let grid: Vec<f64> = (0..=20_000).map(|i| i as f64 * 0.05).collect();
        for w in grid.windows(2) {
            let df = (policy_value(eps, w[1]) - policy_value(eps, w[0])).abs();
            assert!(df <= l * (w[1] - w[0]) + 1e-12);
        }
    }

    #[test]
    fn queue_positivity_and_lattice_closure() {
        let m = SpeedScaling::lattice(0.5, 0.04, 1.0 / 24.0).unwrap();
        let delta = 1.0 / 24.0;
        let traj = Trajectory::new(&m, Vector::zeros(1), RngStream::new(4, 0));
        let mut zeros = 0;
        for step in traj.take(100_000) {
            let x = step.unwrap().x_next[0];
            assert!(x >= 0.0);
            let k = x / delta;
            assert!((k - k.round()).abs() < 1e-9, "state {x} left the lattice");
            if x == 0.0 {
                zeros += 1;
            }
        }
        assert!(zeros > 0);

        let m = SpeedScaling::exponential(0.5).unwrap();
        let traj = Trajectory::new(&m, Vector::from_element(1, 5.0), RngStream::new(4, 1));
        for step in traj.take(100_000) {
            assert!(step.unwrap().x_next[0] >= 0.0);
        }
    }

    #[test]
    fn smooth_model_jacobians_match_finite_differences() {
        let mut rng = RngStream::new(123, 0);
        let models: Vec<Box<dyn Model>> = vec![
            Box::new(Ar1::new(0.7).unwrap()),
            Box::new(SpeedScaling::exponential(0.5).unwrap()),
            Box::new(Ou::new(1.0, 1.0, 1e-3).unwrap()),
            Box::new(LinearGaussian::new(Matrix::from_row_slice(2, 2, &[0.5, 0.4, -0.1, 0.3])).unwrap()),
        ];
        for m in &models {
            let pairs: Vec<_> = (0..100)
                .map(|_| {
                    let x = Vector::from_fn(m.state_dim(), |_, _| 0.1 + 8.0 * rng.uniform());
                    let n = m.sample_noise(&mut rng);
                    (x, n)
                })
                .collect();
            let report = check_model_jacobian(m.as_ref(), &pairs, 1e-6, 1e-5);
            assert!(report.passed(), "{}: {report:?}", m.name());
        }
    }

    #[test]
    fn lattice_noise_atoms() {
        let m = SpeedScaling::lattice(0.5, 0.04, 1.0 / 24.0).unwrap();
        let (atoms, tail) = m.noise_atoms(1e-12).unwrap();
        assert!(tail <= 1e-12 && atoms.len() <= 700, "{} atoms", atoms.len());
        let mass: f64 = atoms.iter().map(|a| a.0).sum();
        assert!((mass + tail - 1.0).abs() < 1e-12);
        let mean: f64 = atoms.iter().map(|(w, n)| w * n[0]).sum();
        assert!((mean - 0.96 / 0.04 / 24.0).abs() < 1e-9);
        assert!(SpeedScaling::exponential(0.5).unwrap().noise_atoms(1e-12).is_none());
    }

    #[test]
    fn constructors_validate() {
        assert!(Ar1::new(1.0).is_err());
        assert!(SpeedScaling::exponential(0.0).is_err());
        assert!(SpeedScaling::lattice(0.5, 1.0, 0.1).is_err());
        assert!(SpeedScaling::lattice(0.5, 0.1, 0.0).is_err());
        assert!(Ou::new(1.0, 1.0, 0.1).is_err());
        assert!(Ou::new(-1.0, 1.0, 1e-3).is_err());
    }
}
