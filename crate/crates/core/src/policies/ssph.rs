//! Sisyphus (SSPH): retention-weighted scores with Gaussian perturbation.
//!
//! Each arm keeps a score that is a weighted average of its past rewards. The
//! retention rate `alpha` sets how fast old rewards fade: with `alpha = 0` a
//! new reward and the current score are weighted equally, as `alpha -> 1` the
//! history dominates. Selection draws `theta_i ~ N(mu_i, sigma^2)` per arm and
//! plays the argmax. Arms never played so far carry the mean score of the
//! played arms.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{argmax, check_feedback, hyper, Policy, PolicyError};
use crate::seeding;

fn pow(alpha: f64, k: u64) -> f64 {
    alpha.powi(k.min(i32::MAX as u64) as i32)
}

/// History and innovation coefficients `(A_k, B_k)` of the k-th score update.
fn coefficients(k: u64, alpha: f64) -> (f64, f64) {
    if k == 1 {
        // (1 - alpha) / (2 - 2 alpha), reduced so the first play is exact.
        return (0.0, 0.5);
    }
    let denom = 2.0 - alpha - pow(alpha, k);
    ((1.0 - pow(alpha, k - 1)) / denom, (1.0 - alpha) / denom)
}

fn check_alpha(alpha: f64) -> Result<(), PolicyError> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(hyper(
            "alpha",
            format!("retention rate must lie in [0, 1), got {alpha}"),
        ))
    }
}

/// Score after the `k`-th play of an arm, given the previous score and the
/// new reward. For `k = 1` the result is `rho / 2` for every `alpha`.
pub fn ssph_score_update(mu_prev: f64, rho: f64, k: u64, alpha: f64) -> Result<f64, PolicyError> {
    check_alpha(alpha)?;
    if k == 0 {
        return Err(PolicyError::PlayIndex { k, m: 0 });
    }
    let (a, b) = coefficients(k, alpha);
    Ok(a * mu_prev + b * rho)
}

/// Weight carried by the `m`-th reward in the score after `k` plays.
pub fn ssph_memory_weight(k: u64, m: u64, alpha: f64) -> Result<f64, PolicyError> {
    check_alpha(alpha)?;
    if m < 1 || m > k {
        return Err(PolicyError::PlayIndex { k, m });
    }
    let (_, innovation) = coefficients(m, alpha);
    Ok(((m + 1)..=k).fold(innovation, |w, j| w * coefficients(j, alpha).0))
}

#[derive(Debug, Clone)]
pub struct Sisyphus {
    alpha: f64,
    sigma: f64,
    mu: Vec<f64>,
    plays: Vec<u64>,
    rng: ChaCha8Rng,
}

impl Sisyphus {
    pub fn new(num_arms: usize, alpha: f64, sigma: f64, seed: u64) -> Result<Self, PolicyError> {
        if num_arms == 0 {
            return Err(PolicyError::NoArms);
        }
        check_alpha(alpha)?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(hyper("sigma", format!("must be positive, got {sigma}")));
        }
        Ok(Self {
            alpha,
            sigma,
            mu: vec![0.0; num_arms],
            plays: vec![0; num_arms],
            rng: seeding::policy_stream(seed),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn scores(&self) -> &[f64] {
        &self.mu
    }

    pub fn plays(&self) -> &[u64] {
        &self.plays
    }

    /// Replaces the scores, e.g. to probe selection behaviour.
    pub fn set_scores(&mut self, mu: &[f64]) {
        self.mu.copy_from_slice(mu);
    }
}

impl Policy for Sisyphus {
    fn name(&self) -> &str {
        "SSPH"
    }

    fn num_arms(&self) -> usize {
        self.mu.len()
    }

    fn select(&mut self, _t: u64) -> usize {
        let sigma = self.sigma;
        let rng = &mut self.rng;
        let draws: Vec<f64> = self
            .mu
            .iter()
            .map(|&mu| {
                let z: f64 = StandardNormal.sample(rng);
                mu + sigma * z
            })
            .collect();
        argmax(draws)
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError> {
        check_feedback(arm, self.mu.len(), reward)?;
        self.plays[arm] += 1;
        let (a, b) = coefficients(self.plays[arm], self.alpha);
        self.mu[arm] = a * self.mu[arm] + b * reward;

        let (sum, played) = self
            .mu
            .iter()
            .zip(&self.plays)
            .filter(|(_, &k)| k > 0)
            .fold((0.0, 0usize), |(s, n), (mu, _)| (s + mu, n + 1));
        if played < self.mu.len() {
            let mean = sum / played as f64;
            for (mu, _) in self.mu.iter_mut().zip(&self.plays).filter(|(_, &k)| k == 0) {
                *mu = mean;
            }
        }
        Ok(())
    }

    fn reset(&mut self, seed: u64) {
        self.mu.fill(0.0);
        self.plays.fill(0);
        self.rng = seeding::policy_stream(seed);
    }
}
