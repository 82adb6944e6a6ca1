//! Gaussian multilayer-perceptron policy with analytic score gradients.

use super::{Policy, PolicyError, PolicyRunner};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const LN_2PI: f64 = 1.8378770664093453;

/// Gaussian policy: action mean from a tanh MLP, a learned log standard
/// deviation per action dimension. Default hidden sizes are (32, 32); the
/// sizes are configurable so gradient machinery can be checked on tiny
/// instances.
#[derive(Debug, Clone)]
pub struct MlpPolicy {
    w1: DMatrix<f64>,
    b1: DVector<f64>,
    w2: DMatrix<f64>,
    b2: DVector<f64>,
    w3: DMatrix<f64>,
    b3: DVector<f64>,
    log_std: DVector<f64>,
}

struct ForwardCache {
    h1: DVector<f64>,
    h2: DVector<f64>,
    mean: DVector<f64>,
}

impl MlpPolicy {
    /// Standard network: obs -> 32 -> 32 -> act, weights uniform in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, zero biases, log-std -1.
    pub fn new(obs_dim: usize, act_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self::with_hidden(obs_dim, act_dim, 32, 32, rng)
    }

    pub fn with_hidden(
        obs_dim: usize,
        act_dim: usize,
        h1: usize,
        h2: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let init = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
            let bound = 1.0 / (cols as f64).sqrt();
            DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
        };
        Self {
            w1: init(h1, obs_dim, rng),
            b1: DVector::zeros(h1),
            w2: init(h2, h1, rng),
            b2: DVector::zeros(h2),
            w3: init(act_dim, h2, rng),
            b3: DVector::zeros(act_dim),
            log_std: DVector::from_element(act_dim, -1.0),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn act_dim(&self) -> usize {
        self.w3.nrows()
    }

    pub fn log_std(&self) -> &DVector<f64> {
        &self.log_std
    }

    pub fn hidden_sizes(&self) -> (usize, usize) {
        (self.w1.nrows(), self.w2.nrows())
    }

    fn check_obs(&self, obs: &[f64]) -> Result<(), PolicyError> {
        if obs.len() != self.obs_dim() {
            return Err(PolicyError::ObsLength {
                expected: self.obs_dim(),
                got: obs.len(),
            });
        }
        Ok(())
    }

    fn forward(&self, obs: &DVector<f64>) -> ForwardCache {
        let h1 = (&self.w1 * obs + &self.b1).map(f64::tanh);
        let h2 = (&self.w2 * &h1 + &self.b2).map(f64::tanh);
        let mean = &self.w3 * &h2 + &self.b3;
        ForwardCache { h1, h2, mean }
    }

    /// Action mean for an observation.
    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>, PolicyError> {
        self.check_obs(obs)?;
        let cache = self.forward(&DVector::from_column_slice(obs));
        Ok(cache.mean.as_slice().to_vec())
    }

    /// Sample an action (or return the mean in deterministic mode).
    pub fn act(
        &self,
        obs: &[f64],
        rng: &mut ChaCha8Rng,
        deterministic: bool,
    ) -> Result<Vec<f64>, PolicyError> {
        let mean = self.mean(obs)?;
        if deterministic {
            return Ok(mean);
        }
        Ok(mean
            .iter()
            .zip(self.log_std.iter())
            .map(|(m, ls)| {
                let z: f64 = StandardNormal.sample(rng);
                m + ls.exp() * z
            })
            .collect())
    }

    /// Log density of `action` under the policy at `obs`.
    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64, PolicyError> {
        self.check_obs(obs)?;
        let cache = self.forward(&DVector::from_column_slice(obs));
        Ok(self.log_prob_from_mean(&cache.mean, action))
    }

    fn log_prob_from_mean(&self, mean: &DVector<f64>, action: &[f64]) -> f64 {
        let mut lp = -(action.len() as f64) * 0.5 * LN_2PI;
        for ((a, m), ls) in action.iter().zip(mean.iter()).zip(self.log_std.iter()) {
            let sigma = ls.exp();
            let z = (a - m) / sigma;
            lp -= 0.5 * z * z + ls;
        }
        lp
    }

    /// Log density and its analytic gradient with respect to the flat
    /// parameter vector (backpropagation through the mean network plus the
    /// closed-form log-std terms).
    pub fn log_prob_grad(
        &self,
        obs: &[f64],
        action: &[f64],
    ) -> Result<(f64, DVector<f64>), PolicyError> {
        self.check_obs(obs)?;
        let obs_v = DVector::from_column_slice(obs);
        let cache = self.forward(&obs_v);
        let lp = self.log_prob_from_mean(&cache.mean, action);

        // d logp / d mean_k = (a_k - mean_k) / sigma_k^2
        let delta3 = DVector::from_iterator(
            self.act_dim(),
            action
                .iter()
                .zip(cache.mean.iter())
                .zip(self.log_std.iter())
                .map(|((a, m), ls)| (a - m) / (2.0 * ls).exp()),
        );
        let dw3 = &delta3 * cache.h2.transpose();
        let db3 = delta3.clone();
        let delta2 = (self.w3.transpose() * &delta3)
            .component_mul(&cache.h2.map(|h| 1.0 - h * h));
        let dw2 = &delta2 * cache.h1.transpose();
        let db2 = delta2.clone();
        let delta1 = (self.w2.transpose() * &delta2)
            .component_mul(&cache.h1.map(|h| 1.0 - h * h));
        let dw1 = &delta1 * obs_v.transpose();
        let db1 = delta1;
        // d logp / d log_std_k = z_k^2 - 1
        let dls = DVector::from_iterator(
            self.act_dim(),
            action
                .iter()
                .zip(cache.mean.iter())
                .zip(self.log_std.iter())
                .map(|((a, m), ls)| {
                    let z = (a - m) / ls.exp();
                    z * z - 1.0
                }),
        );

        let mut grad = Vec::with_capacity(self.param_len());
        grad.extend(dw1.as_slice());
        grad.extend(db1.as_slice());
        grad.extend(dw2.as_slice());
        grad.extend(db2.as_slice());
        grad.extend(dw3.as_slice());
        grad.extend(db3.as_slice());
        grad.extend(dls.as_slice());
        Ok((lp, DVector::from_vec(grad)))
    }

    pub fn param_len(&self) -> usize {
        self.w1.len()
            + self.b1.len()
            + self.w2.len()
            + self.b2.len()
            + self.w3.len()
            + self.b3.len()
            + self.log_std.len()
    }

    /// Flat parameter vector: `[w1, b1, w2, b2, w3, b3, log_std]`, matrices
    /// in nalgebra's column-major element order.
    pub fn param_vector(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.param_len());
        v.extend(self.w1.as_slice());
        v.extend(self.b1.as_slice());
        v.extend(self.w2.as_slice());
        v.extend(self.b2.as_slice());
        v.extend(self.w3.as_slice());
        v.extend(self.b3.as_slice());
        v.extend(self.log_std.as_slice());
        DVector::from_vec(v)
    }

    /// Rebuild a policy with the same shapes from a flat vector.
    pub fn with_params(&self, params: &DVector<f64>) -> Result<Self, PolicyError> {
        if params.len() != self.param_len() {
            return Err(PolicyError::ParamLength {
                expected: self.param_len(),
                got: params.len(),
            });
        }
        let mut at = 0;
        let take_matrix = |rows: usize, cols: usize, at: &mut usize| {
            let m = DMatrix::from_column_slice(rows, cols, &params.as_slice()[*at..*at + rows * cols]);
            *at += rows * cols;
            m
        };
        let w1 = take_matrix(self.w1.nrows(), self.w1.ncols(), &mut at);
        let b1 = DVector::from_column_slice(&params.as_slice()[at..at + self.b1.len()]);
        at += self.b1.len();
        let w2 = take_matrix(self.w2.nrows(), self.w2.ncols(), &mut at);
        let b2 = DVector::from_column_slice(&params.as_slice()[at..at + self.b2.len()]);
        at += self.b2.len();
        let w3 = take_matrix(self.w3.nrows(), self.w3.ncols(), &mut at);
        let b3 = DVector::from_column_slice(&params.as_slice()[at..at + self.b3.len()]);
        at += self.b3.len();
        let log_std = DVector::from_column_slice(&params.as_slice()[at..at + self.log_std.len()]);
        Ok(Self {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            log_std,
        })
    }

    /// Zero all parameters (useful as a fixed reference point).
    pub fn zeroed(&self) -> Self {
        self.with_params(&DVector::zeros(self.param_len()))
            .expect("zero vector has matching length")
    }
}

impl Policy for MlpPolicy {
    fn action_dim(&self) -> usize {
        self.act_dim()
    }

    fn runner(&self, _robot_q: &[f64], _dt: f64) -> Box<dyn PolicyRunner + '_> {
        Box::new(MlpRunner { policy: self })
    }
}

struct MlpRunner<'a> {
    policy: &'a MlpPolicy,
}

impl PolicyRunner for MlpRunner<'_> {
    fn act(&mut self, obs: &[f64], rng: &mut ChaCha8Rng, deterministic: bool) -> Vec<f64> {
        self.policy
            .act(obs, rng, deterministic)
            .expect("observation dimension fixed by the task")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn policy(seed: u64) -> MlpPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MlpPolicy::with_hidden(4, 3, 8, 8, &mut rng)
    }

    #[test]
    fn zero_policy_mean_is_zero() {
        let p = policy(0).zeroed();
        let mean = p.mean(&[0.3, -0.8, 1.5, 0.0]).unwrap();
        assert!(mean.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn deterministic_mode_repeats() {
        let p = policy(1);
        let obs = [0.1, 0.2, -0.4, 0.9];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = p.act(&obs, &mut rng, true).unwrap();
        let b = p.act(&obs, &mut rng, true).unwrap();
        assert_eq!(a, b);
    }

    /// Independent density oracle: plain diagonal-Gaussian formula.
    fn gaussian_logpdf(a: &[f64], mean: &[f64], sigma: &[f64]) -> f64 {
        a.iter()
            .zip(mean)
            .zip(sigma)
            .map(|((a, m), s)| {
                -0.5 * ((a - m) / s).powi(2) - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            })
            .sum()
    }

    #[test]
    fn log_prob_matches_density_oracle() {
        let p = policy(2);
        let obs = [0.5, -0.1, 0.3, 0.8];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = p.act(&obs, &mut rng, false).unwrap();
            let mean = p.mean(&obs).unwrap();
            let sigma: Vec<f64> = p.log_std().iter().map(|ls| ls.exp()).collect();
            let expected = gaussian_logpdf(&a, &mean, &sigma);
            assert_relative_eq!(p.log_prob(&obs, &a).unwrap(), expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn log_prob_at_mean_closed_form() {
        let p = policy(4);
        let obs = [1.0, 0.0, -1.0, 0.5];
        let mean = p.mean(&obs).unwrap();
        let lp = p.log_prob(&obs, &mean).unwrap();
        let expected = -p.log_std().sum() - (p.act_dim() as f64 / 2.0) * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(lp, expected, epsilon = 1e-12);
    }

    #[test]
    fn grad_zero_for_mean_weights_at_mode() {
        let p = policy(5);
        let obs = [0.2, 0.4, -0.6, 0.1];
        let mean = p.mean(&obs).unwrap();
        let (_, grad) = p.log_prob_grad(&obs, &mean).unwrap();
        // All mean-producing parameters have zero gradient at the mode.
        let n_mean = p.param_len() - p.act_dim();
        for g in grad.as_slice()[..n_mean].iter() {
            assert_relative_eq!(*g, 0.0, epsilon = 1e-12);
        }
        // Log-std gradient at the mode is exactly -1 per dimension.
        for g in grad.as_slice()[n_mean..].iter() {
            assert_relative_eq!(*g, -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for trial in 0..25 {
            let p = policy(100 + trial);
            let obs: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, grad) = p.log_prob_grad(&obs, &a).unwrap();

            let params = p.param_vector();
            let h = 1e-6;
            for idx in (0..p.param_len()).step_by(17) {
                let mut hi = params.clone();
                let mut lo = params.clone();
                hi[idx] += h;
                lo[idx] -= h;
                let fhi = p.with_params(&hi).unwrap().log_prob(&obs, &a).unwrap();
                let flo = p.with_params(&lo).unwrap().log_prob(&obs, &a).unwrap();
                let fd = (fhi - flo) / (2.0 * h);
                let denom = fd.abs().max(grad[idx].abs()).max(1e-6);
                assert!(
                    ((grad[idx] - fd) / denom).abs() < 1e-4,
                    "param {idx}: analytic {} vs fd {fd}",
                    grad[idx]
                );
            }
        }
    }

    #[test]
    fn param_round_trip() {
        let p = policy(8);
        let v = p.param_vector();
        let q = p.with_params(&v).unwrap();
        assert_eq!(v, q.param_vector());
        assert!(matches!(
            p.with_params(&DVector::zeros(3)),
            Err(PolicyError::ParamLength { .. })
        ));
    }
}
