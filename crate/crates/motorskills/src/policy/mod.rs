//! Parametric motor policies and rollout records.
//!
//! Two policy classes: per-joint dynamic movement primitives
//! ([`DmpPolicy`]) driven by a shared canonical phase, and a Gaussian
//! multilayer perceptron ([`MlpPolicy`]). Both expose flat parameter
//! vectors for episodic search and implement [`Policy`] for rollouts.

mod dmp;
mod mlp;

pub use dmp::{DmpConfig, DmpPolicy, DmpRunner};
pub use mlp::MlpPolicy;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("parameter vector has {got} entries, expected {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("observation has {got} entries, expected {expected}")]
    ObsLength { expected: usize, got: usize },
    #[error("invalid policy: {0}")]
    Invalid(String),
}

/// Where a recorded episode came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeSource {
    Planner,
    Policy,
    Replay,
}

impl EpisodeSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            EpisodeSource::Planner => "planner",
            EpisodeSource::Policy => "policy",
            EpisodeSource::Replay => "replay",
        }
    }
}

impl std::str::FromStr for EpisodeSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "planner" => Ok(EpisodeSource::Planner),
            "policy" => Ok(EpisodeSource::Policy),
            "replay" => Ok(EpisodeSource::Replay),
            other => Err(format!("unknown episode source `{other}`")),
        }
    }
}

/// One rollout: per-step observations, executed actions and rewards, plus
/// the discounted return.
#[derive(Debug, Clone)]
pub struct Episode {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// Discounted return, `sum gamma^t r_t`.
    pub ret: f64,
    pub seed: u64,
    pub source: EpisodeSource,
}

impl Episode {
    pub fn new(
        states: Vec<Vec<f64>>,
        actions: Vec<Vec<f64>>,
        rewards: Vec<f64>,
        gamma: f64,
        seed: u64,
        source: EpisodeSource,
    ) -> Self {
        assert_eq!(states.len(), actions.len());
        assert_eq!(states.len(), rewards.len());
        let ret = discounted_return(&rewards, gamma);
        Self {
            states,
            actions,
            rewards,
            ret,
            seed,
            source,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut factor = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += factor * r;
        factor *= gamma;
    }
    total
}

/// An immutable policy snapshot. Rollout state lives in the runner so a
/// snapshot can be shared read-only across parallel rollouts.
pub trait Policy: Send + Sync {
    fn action_dim(&self) -> usize;

    /// Fresh per-rollout state. `robot_q` is the robot configuration at
    /// episode start and `dt` the control period.
    fn runner(&self, robot_q: &[f64], dt: f64) -> Box<dyn PolicyRunner + '_>;
}

pub trait PolicyRunner {
    /// Next commanded joint velocities. `deterministic` suppresses
    /// exploration noise for evaluation rollouts.
    fn act(&mut self, obs: &[f64], rng: &mut ChaCha8Rng, deterministic: bool) -> Vec<f64>;
}

/// Replays a fixed action sequence open loop, zero after the end.
#[derive(Debug, Clone)]
pub struct SequencePolicy {
    actions: Vec<Vec<f64>>,
    dim: usize,
}

impl SequencePolicy {
    pub fn new(actions: Vec<Vec<f64>>) -> Self {
        let dim = actions.first().map_or(0, Vec::len);
        Self { actions, dim }
    }
}

impl Policy for SequencePolicy {
    fn action_dim(&self) -> usize {
        self.dim
    }

    fn runner(&self, _robot_q: &[f64], _dt: f64) -> Box<dyn PolicyRunner + '_> {
        Box::new(SequenceRunner {
            policy: self,
            step: 0,
        })
    }
}

struct SequenceRunner<'a> {
    policy: &'a SequencePolicy,
    step: usize,
}

impl PolicyRunner for SequenceRunner<'_> {
    fn act(&mut self, _obs: &[f64], _rng: &mut ChaCha8Rng, _deterministic: bool) -> Vec<f64> {
        let action = self
            .policy
            .actions
            .get(self.step)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.policy.dim]);
        self.step += 1;
        action
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn discounted_return_matches_hand_sum() {
        let rewards = [1.0, 2.0, 4.0];
        assert_eq!(discounted_return(&rewards, 1.0), 7.0);
        assert_eq!(discounted_return(&rewards, 0.5), 1.0 + 1.0 + 1.0);
    }

    #[test]
    fn sequence_policy_zero_pads() {
        let policy = SequencePolicy::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut runner = policy.runner(&[0.0, 0.0], 0.02);
        assert_eq!(runner.act(&[], &mut rng, true), vec![1.0, 2.0]);
        assert_eq!(runner.act(&[], &mut rng, true), vec![3.0, 4.0]);
        assert_eq!(runner.act(&[], &mut rng, true), vec![0.0, 0.0]);
    }
}
