use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{check_feedback, Policy, PolicyError};
use crate::seeding;

/// Plays an arm uniformly at random every step. Reference learner.
#[derive(Debug, Clone)]
pub struct UniformRandom {
    num_arms: usize,
    rng: ChaCha8Rng,
}

impl UniformRandom {
    pub fn new(num_arms: usize, seed: u64) -> Result<Self, PolicyError> {
        if num_arms == 0 {
            return Err(PolicyError::NoArms);
        }
        Ok(Self {
            num_arms,
            rng: seeding::policy_stream(seed),
        })
    }
}

impl Policy for UniformRandom {
    fn name(&self) -> &str {
        "random"
    }

    fn num_arms(&self) -> usize {
        self.num_arms
    }

    fn select(&mut self, _t: u64) -> usize {
        self.rng.random_range(0..self.num_arms)
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError> {
        check_feedback(arm, self.num_arms, reward)
    }

    fn reset(&mut self, seed: u64) {
        self.rng = seeding::policy_stream(seed);
    }
}
