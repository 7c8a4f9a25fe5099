//! Discounted UCB.
//!
//! Index: `X_i + 2 B sqrt(xi ln(n) / N_i)` with discounted reward sum and
//! count per arm, `n = sum_i N_i`, reward bound `B = 1`. Arms with a zero
//! count are played first, lowest index first.

use super::{argmax, check_feedback, hyper, Policy, PolicyError};

const REWARD_BOUND: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct DiscountedUcb {
    gamma: f64,
    xi: f64,
    sums: Vec<f64>,
    counts: Vec<f64>,
}

impl DiscountedUcb {
    pub fn new(num_arms: usize, gamma: f64, xi: f64) -> Result<Self, PolicyError> {
        if num_arms == 0 {
            return Err(PolicyError::NoArms);
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(hyper("gamma", format!("must lie in (0, 1], got {gamma}")));
        }
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(hyper("xi", format!("must be positive, got {xi}")));
        }
        Ok(Self {
            gamma,
            xi,
            sums: vec![0.0; num_arms],
            counts: vec![0.0; num_arms],
        })
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn mean(&self, arm: usize) -> f64 {
        self.sums[arm] / self.counts[arm]
    }
}

impl Policy for DiscountedUcb {
    fn name(&self) -> &str {
        "D-UCB"
    }

    fn num_arms(&self) -> usize {
        self.sums.len()
    }

    fn select(&mut self, _t: u64) -> usize {
        if let Some(fresh) = self.counts.iter().position(|&n| n == 0.0) {
            return fresh;
        }
        let total: f64 = self.counts.iter().sum();
        let log_total = total.ln().max(0.0);
        argmax(
            self.sums
                .iter()
                .zip(&self.counts)
                .map(|(&s, &n)| s / n + 2.0 * REWARD_BOUND * (self.xi * log_total / n).sqrt()),
        )
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError> {
        check_feedback(arm, self.sums.len(), reward)?;
        if self.gamma < 1.0 {
            self.sums.iter_mut().for_each(|s| *s *= self.gamma);
            self.counts.iter_mut().for_each(|n| *n *= self.gamma);
        }
        self.sums[arm] += reward;
        self.counts[arm] += 1.0;
        Ok(())
    }

    fn reset(&mut self, _seed: u64) {
        self.sums.fill(0.0);
        self.counts.fill(0.0);
    }
}
