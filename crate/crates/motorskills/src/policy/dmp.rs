//! Dynamic movement primitives: one transformed system per joint, all
//! driven by a shared exponentially decaying canonical phase.

use super::{Policy, PolicyError, PolicyRunner};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Shared DMP constants. The transformation gains are critically damped
/// (`alpha_z = 4 * beta_z`) and the canonical phase decays to ~0.05 at
/// `t = tau`.
#[derive(Debug, Clone, Copy)]
pub struct DmpConfig {
    pub alpha_x: f64,
    pub alpha_z: f64,
    pub beta_z: f64,
}

impl Default for DmpConfig {
    fn default() -> Self {
        Self {
            alpha_x: 3.0,
            alpha_z: 25.0,
            beta_z: 6.25,
        }
    }
}

/// Gaussian basis over the canonical phase, shared by all joints.
///
/// Centers are equally spaced in phase via `exp(-alpha_x * i / (K - 1))`;
/// widths come from the spacing of adjacent centers, last one repeated.
#[derive(Debug, Clone)]
pub struct DmpBasis {
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl DmpBasis {
    fn new(k: usize, alpha_x: f64) -> Self {
        assert!(k >= 1);
        if k == 1 {
            return Self {
                centers: vec![1.0],
                widths: vec![1.0],
            };
        }
        let centers: Vec<f64> = (0..k)
            .map(|i| (-alpha_x * i as f64 / (k as f64 - 1.0)).exp())
            .collect();
        let mut widths: Vec<f64> = centers
            .windows(2)
            .map(|w| 1.0 / (w[1] - w[0]).powi(2))
            .collect();
        widths.push(*widths.last().unwrap());
        Self { centers, widths }
    }

    /// Basis activations at phase `x`.
    pub fn activations(&self, x: f64) -> Vec<f64> {
        self.centers
            .iter()
            .zip(&self.widths)
            .map(|(c, h)| (-h * (x - c) * (x - c)).exp())
            .collect()
    }
}

/// Per-joint point-attractor systems with a learnable forcing term.
///
/// The searchable parameters are the forcing weights, the per-joint goals
/// and the shared temporal scale; starts and gains are fixed at
/// construction.
#[derive(Debug, Clone)]
pub struct DmpPolicy {
    /// Forcing weights, one row per joint, one column per basis function.
    weights: DMatrix<f64>,
    goals: Vec<f64>,
    starts: Vec<f64>,
    tau: f64,
    basis: DmpBasis,
    config: DmpConfig,
}

impl DmpPolicy {
    pub fn new(
        weights: DMatrix<f64>,
        goals: Vec<f64>,
        starts: Vec<f64>,
        tau: f64,
        config: DmpConfig,
    ) -> Result<Self, PolicyError> {
        if weights.nrows() != goals.len() || goals.len() != starts.len() {
            return Err(PolicyError::Invalid(
                "weights, goals and starts must agree on joint count".into(),
            ));
        }
        if weights.ncols() == 0 {
            return Err(PolicyError::Invalid("need at least one basis".into()));
        }
        if !(tau > 0.0) {
            return Err(PolicyError::Invalid(format!("tau must be positive, got {tau}")));
        }
        let basis = DmpBasis::new(weights.ncols(), config.alpha_x);
        Ok(Self {
            weights,
            goals,
            starts,
            tau,
            basis,
            config,
        })
    }

    /// Zero forcing: critically damped point attractors from `starts` to
    /// `goals`.
    pub fn point_attractor(
        starts: Vec<f64>,
        goals: Vec<f64>,
        tau: f64,
        k: usize,
    ) -> Result<Self, PolicyError> {
        let n = starts.len();
        Self::new(
            DMatrix::zeros(n, k),
            goals,
            starts,
            tau,
            DmpConfig::default(),
        )
    }

    /// Random initialization for learning-from-scratch baselines: forcing
    /// weights drawn wide, goals jittered around the start posture.
    pub fn random(starts: &[f64], tau: f64, k: usize, rng: &mut ChaCha8Rng) -> Self {
        let n = starts.len();
        let weight_noise = Normal::new(0.0, 2.0).unwrap();
        let weights = DMatrix::from_fn(n, k, |_, _| weight_noise.sample(rng));
        let goals = starts
            .iter()
            .map(|y0| y0 + rng.random_range(-0.3..0.3))
            .collect();
        Self::new(weights, goals, starts.to_vec(), tau, DmpConfig::default())
            .expect("random policy shapes are consistent")
    }

    pub fn joints(&self) -> usize {
        self.goals.len()
    }

    pub fn basis_count(&self) -> usize {
        self.weights.ncols()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn goals(&self) -> &[f64] {
        &self.goals
    }

    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn config(&self) -> DmpConfig {
        self.config
    }

    pub fn basis(&self) -> &DmpBasis {
        &self.basis
    }

    /// Forcing term for one joint at phase `x`, given precomputed basis
    /// activations.
    fn forcing(&self, joint: usize, x: f64, activations: &[f64]) -> f64 {
        let denom: f64 = activations.iter().sum();
        if denom < 1e-30 {
            return 0.0;
        }
        let num: f64 = self
            .weights
            .row(joint)
            .iter()
            .zip(activations)
            .map(|(w, psi)| w * psi)
            .sum();
        num / denom * x * (self.goals[joint] - self.starts[joint])
    }

    /// Number of searchable parameters: `joints * basis + joints + 1`.
    pub fn param_len(&self) -> usize {
        self.joints() * self.basis_count() + self.joints() + 1
    }

    /// Flat parameter vector, laid out as
    /// `[joint 0 weights, .., joint n-1 weights | goals | ln tau]`.
    pub fn param_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_len());
        for j in 0..self.joints() {
            v.extend(self.weights.row(j).iter());
        }
        v.extend_from_slice(&self.goals);
        v.push(self.tau.ln());
        v
    }

    /// Rebuild a policy with the same structure from a flat vector.
    pub fn with_params(&self, params: &[f64]) -> Result<Self, PolicyError> {
        if params.len() != self.param_len() {
            return Err(PolicyError::ParamLength {
                expected: self.param_len(),
                got: params.len(),
            });
        }
        let (n, k) = (self.joints(), self.basis_count());
        let mut weights = DMatrix::zeros(n, k);
        for j in 0..n {
            for i in 0..k {
                weights[(j, i)] = params[j * k + i];
            }
        }
        let goals = params[n * k..n * k + n].to_vec();
        let tau = params[n * k + n].exp();
        Self::new(weights, goals, self.starts.clone(), tau, self.config)
    }

    /// Integrate the policy open loop for `steps` control periods, returning
    /// the internal trajectory `y` (one row per step, including the start).
    pub fn integrate(&self, steps: usize, dt: f64) -> Vec<Vec<f64>> {
        use rand::SeedableRng;
        let mut runner = DmpRunner::new(self, &self.starts, dt);
        let mut rows = Vec::with_capacity(steps);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..steps {
            rows.push(runner.y.clone());
            runner.act(&[], &mut rng, true);
        }
        rows
    }
}

impl Policy for DmpPolicy {
    fn action_dim(&self) -> usize {
        self.joints()
    }

    fn runner(&self, robot_q: &[f64], dt: f64) -> Box<dyn PolicyRunner + '_> {
        Box::new(DmpRunner::new(self, robot_q, dt))
    }
}

/// Integration state for one rollout: canonical phase plus per-joint
/// `(y, z)` pairs. The trajectory is integrated open loop; observations are
/// ignored.
pub struct DmpRunner<'a> {
    policy: &'a DmpPolicy,
    dt: f64,
    x: f64,
    y: Vec<f64>,
    z: Vec<f64>,
}

impl<'a> DmpRunner<'a> {
    fn new(policy: &'a DmpPolicy, robot_q: &[f64], dt: f64) -> Self {
        let y = if robot_q.len() == policy.joints() {
            robot_q.to_vec()
        } else {
            policy.starts.to_vec()
        };
        Self {
            policy,
            dt,
            x: 1.0,
            y,
            z: vec![0.0; policy.joints()],
        }
    }

    pub fn phase(&self) -> f64 {
        self.x
    }
}

impl PolicyRunner for DmpRunner<'_> {
    fn act(&mut self, _obs: &[f64], _rng: &mut ChaCha8Rng, _deterministic: bool) -> Vec<f64> {
        let p = self.policy;
        let tau = p.tau;
        let cfg = p.config;
        let activations = p.basis.activations(self.x);

        // Velocity command is the current transformed-system rate.
        let action: Vec<f64> = self.z.iter().map(|z| z / tau).collect();

        for j in 0..p.joints() {
            let f = p.forcing(j, self.x, &activations);
            let zdot = (cfg.alpha_z * (cfg.beta_z * (p.goals[j] - self.y[j]) - self.z[j]) + f) / tau;
            self.y[j] += self.dt * action[j];
            self.z[j] += self.dt * zdot;
        }
        self.x += self.dt * (-cfg.alpha_x * self.x) / tau;
        action
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rollout_y(policy: &DmpPolicy, duration: f64, dt: f64) -> Vec<Vec<f64>> {
        policy.integrate((duration / dt).round() as usize + 1, dt)
    }

    #[test]
    fn point_attractor_converges_monotonically() {
        let policy = DmpPolicy::point_attractor(vec![0.0], vec![1.0], 1.0, 8).unwrap();
        let ys = rollout_y(&policy, 3.0, 0.001);
        let mut prev = 0.0;
        for row in &ys {
            assert!(row[0] >= prev - 1e-9, "not monotone at y={}", row[0]);
            prev = row[0];
        }
        let last = ys.last().unwrap()[0];
        assert!((last - 1.0).abs() < 0.05, "y(3 tau) = {last}");
    }

    #[test]
    fn at_attractor_actions_are_zero() {
        let policy = DmpPolicy::point_attractor(vec![0.4, -0.2], vec![0.4, -0.2], 1.5, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut runner = policy.runner(&[0.4, -0.2], 0.02);
        for _ in 0..100 {
            let a = runner.act(&[], &mut rng, true);
            assert!(a.iter().all(|v| v.abs() == 0.0));
        }
    }

    #[test]
    fn temporal_rescaling_preserves_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let weights = DMatrix::from_fn(1, 10, |_, _| rng.random_range(-30.0..30.0));
        let slow_tau = 2.0;
        let fast = DmpPolicy::new(weights.clone(), vec![0.7], vec![-0.1], 1.0, DmpConfig::default())
            .unwrap();
        let slow = DmpPolicy::new(weights, vec![0.7], vec![-0.1], slow_tau, DmpConfig::default())
            .unwrap();

        // Fine integration: y_fast(t) should match y_slow(2 t).
        let dt = 1e-4;
        let fast_y = rollout_y(&fast, 1.0, dt);
        let slow_y = rollout_y(&slow, 2.0, dt);
        let mut max_dev: f64 = 0.0;
        for (i, row) in fast_y.iter().enumerate() {
            let j = (i * 2).min(slow_y.len() - 1);
            max_dev = max_dev.max((row[0] - slow_y[j][0]).abs());
        }
        assert!(max_dev < 1e-3, "time rescaling deviation {max_dev}");
    }

    #[test]
    fn goal_convergence_for_bounded_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let weights = DMatrix::from_fn(2, 12, |_, _| rng.random_range(-50.0..50.0));
            let goals = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let starts = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let tau = rng.random_range(0.5..2.0);
            let policy = DmpPolicy::new(weights, goals.clone(), starts, tau, DmpConfig::default())
                .unwrap();
            let ys = rollout_y(&policy, 5.0 * tau, 0.002);
            let last = ys.last().unwrap();
            for (y, g) in last.iter().zip(&goals) {
                assert!((y - g).abs() < 0.05, "missed goal: y={y}, g={g}");
            }
        }
    }

    #[test]
    fn joints_couple_only_through_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let weights = DMatrix::from_fn(3, 6, |_, _| rng.random_range(-20.0..20.0));
        let goals = vec![0.5, -0.5, 1.0];
        let starts = vec![0.0, 0.0, 0.0];
        let base = DmpPolicy::new(weights.clone(), goals.clone(), starts.clone(), 1.0,
            DmpConfig::default()).unwrap();
        let mut perturbed_w = weights;
        for i in 0..6 {
            perturbed_w[(1, i)] += 13.0;
        }
        let perturbed =
            DmpPolicy::new(perturbed_w, goals, starts, 1.0, DmpConfig::default()).unwrap();

        let a = base.integrate(200, 0.01);
        let b = perturbed.integrate(200, 0.01);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra[0].to_bits(), rb[0].to_bits());
            assert_eq!(ra[2].to_bits(), rb[2].to_bits());
            // Joint 1 must differ eventually; checked below.
        }
        assert!(a.iter().zip(&b).any(|(ra, rb)| ra[1] != rb[1]));
    }

    #[test]
    fn param_vector_round_trip_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let weights = DMatrix::from_fn(3, 7, |_, _| rng.random_range(-10.0..10.0));
        let policy = DmpPolicy::new(
            weights,
            vec![0.1, 0.2, 0.3],
            vec![0.0, 0.0, 0.0],
            1.7,
            DmpConfig::default(),
        )
        .unwrap();
        let v = policy.param_vector();
        let rebuilt = policy.with_params(&v).unwrap();
        let v2 = rebuilt.param_vector();
        assert_eq!(v.len(), v2.len());
        for (a, b) in v.iter().zip(&v2) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn param_vector_lengths() {
        let p32 = DmpPolicy::point_attractor(vec![0.0; 3], vec![1.0; 3], 1.0, 32).unwrap();
        assert_eq!(p32.param_vector().len(), 3 * 32 + 3 + 1);
        assert_eq!(p32.param_vector().len(), 100);
        let p10 = DmpPolicy::point_attractor(vec![0.0; 3], vec![1.0; 3], 1.0, 10).unwrap();
        assert_eq!(p10.param_vector().len(), 34);
    }

    #[test]
    fn with_params_rejects_wrong_length() {
        let policy = DmpPolicy::point_attractor(vec![0.0], vec![1.0], 1.0, 4).unwrap();
        assert!(matches!(
            policy.with_params(&[0.0; 3]),
            Err(PolicyError::ParamLength { .. })
        ));
    }
}
