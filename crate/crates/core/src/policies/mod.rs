//! Bandit policies behind one interface.
//!
//! A policy sees only the reward of the arm it played. The clairvoyant
//! [`oracle_select`] is the exception: it reads a full [`StepOutcome`] and is
//! used as the regret reference, never as a learner.

mod ducb;
mod random;
mod ssph;
mod thompson;

use thiserror::Error;

use crate::env::StepOutcome;

pub use ducb::DiscountedUcb;
pub use random::UniformRandom;
pub use ssph::{ssph_memory_weight, ssph_score_update, Sisyphus};
pub use thompson::Thompson;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("arm index {arm} out of range for {num_arms} arms")]
    InvalidArm { arm: usize, num_arms: usize },
    #[error("reward {0} outside [0, 1]")]
    InvalidReward(f64),
    #[error("invalid hyperparameter `{name}`: {reason}")]
    Hyperparameter { name: &'static str, reason: String },
    #[error("policy needs at least one arm")]
    NoArms,
    #[error("memory weight index m = {m} invalid for k = {k}")]
    PlayIndex { k: u64, m: u64 },
}

pub(crate) fn hyper(name: &'static str, reason: impl Into<String>) -> PolicyError {
    PolicyError::Hyperparameter {
        name,
        reason: reason.into(),
    }
}

pub trait Policy: Send {
    fn name(&self) -> &str;

    fn num_arms(&self) -> usize;

    /// Chooses the arm to play at step `t` (1-based).
    fn select(&mut self, t: u64) -> usize;

    /// Feeds back the realized reward of the played arm.
    fn update(&mut self, arm: usize, reward: f64) -> Result<(), PolicyError>;

    /// Clears all learned state and reseeds the policy's random stream.
    fn reset(&mut self, seed: u64);
}

pub(crate) fn check_feedback(arm: usize, num_arms: usize, reward: f64) -> Result<(), PolicyError> {
    if arm >= num_arms {
        return Err(PolicyError::InvalidArm { arm, num_arms });
    }
    if !(0.0..=1.0).contains(&reward) {
        return Err(PolicyError::InvalidReward(reward));
    }
    Ok(())
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Clairvoyant choice: a max-reward arm, ties broken by smallest delay and
/// then by lowest index.
pub fn oracle_select(outcome: &StepOutcome) -> usize {
    let mut best = 0;
    for (i, o) in outcome.arms.iter().enumerate().skip(1) {
        let b = &outcome.arms[best];
        if o.rho > b.rho || (o.rho == b.rho && o.d < b.d) {
            best = i;
        }
    }
    best
}
