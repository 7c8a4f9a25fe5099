//! Beta-Bernoulli Thompson sampling with optional discounting and optimism.
//!
//! Every update shrinks the pseudo-counts of all arms by `discount` before
//! crediting the played arm. `discount = 1` without optimism is classical TS;
//! the optimistic variant never samples below the posterior mean.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use super::{argmax, check_feedback, hyper, Policy, PolicyError};
use crate::seeding;

#[derive(Debug, Clone)]
pub struct Thompson {
    name: String,
    discount: f64,
    optimistic: bool,
    successes: Vec<f64>,
    failures: Vec<f64>,
    rng: ChaCha8Rng,
}

impl Thompson {
    pub fn new(
        num_arms: usize,
        discount: f64,
        optimistic: bool,
        seed: u64,
    ) -> Result<Self, PolicyError> {
        if num_arms == 0 {
            return Err(PolicyError::NoArms);
        }
        if !(discount > 0.0 && discount <= 1.0) {
            return Err(hyper(
                "discount",
                format!("must lie in (0, 1], got {discount}"),
            ));
        }
        let name = match (optimistic, discount == 1.0) {
            (true, _) => "dOTS",
            (false, true) => "TS",
            (false, false) => "dTS",
        };
        Ok(Self {
            name: name.to_string(),
            discount,
            optimistic,
            successes: vec![0.0; num_arms],
            failures: vec![0.0; num_arms],
            rng: seeding::policy_stream(seed),
        })
    }

    /// Classical TS.
    pub fn classic(num_arms: usize, seed: u64) -> Result<Self, PolicyError> {
        Self::new(num_arms, 1.0, false, seed)
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn successes(&self) -> &[f64] {
        &self.successes
    }

    pub fn failures(&self) -> &[f64] {
        &self.failures
    }

    pub fn set_counts(&mut self, successes: &[f64], failures: &[f64]) {
        self.successes.copy_from_slice(successes);
        self.failures.copy_from_slice(failures);
    }
}

impl Policy for Thompson {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_arms(&self) -> usize {
        self.successes.len()
    }

    fn select(&mut self, _t: u64) -> usize {
        let rng = &mut self.rng;
        let optimistic = self.optimistic;
        let draws: Vec<f64> = self
            .successes
            .iter()
            .zip(&self.failures)
            .map(|(&s, &f)| {
                let (a, b) = (s + 1.0, f + 1.0);
                // a, b >= 1 so the parameters are always valid.
                let theta = Beta::new(a, b).expect("beta parameters").sample(rng);
                if optimistic {
                    theta.max(a / (a + b))
                } else {
                    theta
                }
            })
            .collect();
        argmax(draws)
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError> {
        check_feedback(arm, self.successes.len(), reward)?;
        if self.discount < 1.0 {
            self.successes.iter_mut().for_each(|s| *s *= self.discount);
            self.failures.iter_mut().for_each(|f| *f *= self.discount);
        }
        self.successes[arm] += reward;
        self.failures[arm] += 1.0 - reward;
        Ok(())
    }

    fn reset(&mut self, seed: u64) {
        self.successes.fill(0.0);
        self.failures.fill(0.0);
        self.rng = seeding::policy_stream(seed);
    }
}
