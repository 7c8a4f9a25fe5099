//! Seeded episodes, regret/latency metrics and the benchmark sweeps.
//!
//! An episode couples one policy to one freshly seeded environment. Since the
//! environment owns its own streams, every policy run at the same seed faces
//! the exact same sequence of outcomes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{make_server_bank, EnvError, Environment, ServerConfig, StepOutcome, TaskProfile};
use crate::policies::{
    oracle_select, DiscountedUcb, Policy, PolicyError, Sisyphus, Thompson, UniformRandom,
};
use crate::seeding;

pub const DEFAULT_HORIZON: u64 = 5000;
pub const DEFAULT_RUNS: usize = 50;
pub const DEFAULT_LATENCY_CAP: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("prefix length {upto} outside 1..={len}")]
    Prefix { upto: usize, len: usize },
}

/// A policy and its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolicySpec {
    Ssph { alpha: f64, sigma: f64 },
    Ts,
    Dts { discount: f64 },
    Dots { discount: f64 },
    Ducb { gamma: f64, xi: f64 },
    Oracle,
    Random,
}

impl PolicySpec {
    pub const DEFAULT_SSPH: Self = Self::Ssph {
        alpha: 0.6,
        sigma: 0.1,
    };
    pub const DEFAULT_DTS: Self = Self::Dts { discount: 0.8 };
    pub const DEFAULT_DOTS: Self = Self::Dots { discount: 0.7 };
    pub const DEFAULT_DUCB: Self = Self::Ducb {
        gamma: 0.5,
        xi: 0.5,
    };

    /// SSPH followed by the four baselines, with their default settings.
    pub fn benchmark_set() -> Vec<Self> {
        vec![
            Self::DEFAULT_SSPH,
            Self::Ts,
            Self::DEFAULT_DTS,
            Self::DEFAULT_DOTS,
            Self::DEFAULT_DUCB,
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Ssph { .. } => "SSPH",
            Self::Ts => "TS",
            Self::Dts { .. } => "dTS",
            Self::Dots { .. } => "dOTS",
            Self::Ducb { .. } => "D-UCB",
            Self::Oracle => "oracle",
            Self::Random => "random",
        }
    }

    /// Instantiates the learner; `None` for the oracle, which is not one.
    pub fn build(
        &self,
        num_arms: usize,
        seed: u64,
    ) -> Result<Option<Box<dyn Policy>>, PolicyError> {
        let policy: Box<dyn Policy> = match *self {
            Self::Ssph { alpha, sigma } => Box::new(Sisyphus::new(num_arms, alpha, sigma, seed)?),
            Self::Ts => Box::new(Thompson::classic(num_arms, seed)?),
            Self::Dts { discount } => Box::new(Thompson::new(num_arms, discount, false, seed)?),
            Self::Dots { discount } => Box::new(Thompson::new(num_arms, discount, true, seed)?),
            Self::Ducb { gamma, xi } => Box::new(DiscountedUcb::new(num_arms, gamma, xi)?),
            Self::Random => Box::new(UniformRandom::new(num_arms, seed)?),
            Self::Oracle => return Ok(None),
        };
        Ok(Some(policy))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub horizon: u64,
    pub num_runs: usize,
    pub base_seed: u64,
    pub policy: PolicySpec,
    pub servers: Vec<ServerConfig>,
    pub profile: TaskProfile,
    /// Ceiling applied to delays in the latency metric only.
    pub latency_cap: f64,
}

impl RunConfig {
    /// Reference five-server scenario with the default horizon and run count.
    pub fn paper5(policy: PolicySpec) -> Self {
        Self::with_arms(policy, 5).expect("five arms")
    }

    pub fn with_arms(policy: PolicySpec, num_arms: usize) -> Result<Self, HarnessError> {
        Ok(Self {
            horizon: DEFAULT_HORIZON,
            num_runs: DEFAULT_RUNS,
            base_seed: 0,
            policy,
            servers: make_server_bank(num_arms)?,
            profile: TaskProfile::default(),
            latency_cap: DEFAULT_LATENCY_CAP,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.servers.len()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.horizon < 1 {
            return Err(HarnessError::Config("horizon must be >= 1".into()));
        }
        if self.num_runs < 1 {
            return Err(HarnessError::Config("num_runs must be >= 1".into()));
        }
        if !(self.latency_cap > 0.0) {
            return Err(HarnessError::Config("latency cap must be positive".into()));
        }
        if self.servers.is_empty() {
            return Err(EnvError::NoArms.into());
        }
        self.profile.validate()?;
        for s in &self.servers {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub chosen_arm: usize,
    pub reward: f64,
    pub best_reward: f64,
    /// Uncapped delay of the chosen arm.
    pub delay: f64,
}

/// One episode's time series plus running metrics maintained step by step.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub policy: String,
    pub seed: u64,
    pub latency_cap: f64,
    pub steps: Vec<StepRecord>,
    pub running_regret: Vec<f64>,
    pub running_latency: Vec<f64>,
}

impl RunRecord {
    fn new(policy: &str, seed: u64, latency_cap: f64, horizon: usize) -> Self {
        Self {
            policy: policy.to_string(),
            seed,
            latency_cap,
            steps: Vec::with_capacity(horizon),
            running_regret: Vec::with_capacity(horizon),
            running_latency: Vec::with_capacity(horizon),
        }
    }

    fn push(&mut self, step: StepRecord, regret_sum: &mut f64, latency_sum: &mut f64) {
        *regret_sum += step.best_reward - step.reward;
        *latency_sum += self.capped(step.delay);
        self.steps.push(step);
        let t = self.steps.len() as f64;
        self.running_regret.push(*regret_sum / t);
        self.running_latency.push(*latency_sum / t);
    }

    /// Delay as reported in the latency metric.
    pub fn capped(&self, delay: f64) -> f64 {
        delay.min(self.latency_cap)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn prefix(&self, upto: usize) -> Result<&[StepRecord], HarnessError> {
        if upto == 0 || upto > self.steps.len() {
            return Err(HarnessError::Prefix {
                upto,
                len: self.steps.len(),
            });
        }
        Ok(&self.steps[..upto])
    }

    /// Mean best-minus-chosen reward over the first `upto` steps.
    pub fn normalized_regret(&self, upto: usize) -> Result<f64, HarnessError> {
        let steps = self.prefix(upto)?;
        Ok(steps.iter().map(|s| s.best_reward - s.reward).sum::<f64>() / upto as f64)
    }

    /// Mean capped chosen-arm delay over the first `upto` steps.
    pub fn normalized_latency(&self, upto: usize) -> Result<f64, HarnessError> {
        let steps = self.prefix(upto)?;
        Ok(steps.iter().map(|s| self.capped(s.delay)).sum::<f64>() / upto as f64)
    }

    pub fn final_regret(&self) -> f64 {
        self.running_regret.last().copied().unwrap_or(0.0)
    }

    pub fn final_latency(&self) -> f64 {
        self.running_latency.last().copied().unwrap_or(0.0)
    }
}

fn episode(
    config: &RunConfig,
    seed: u64,
    mut trace: Option<&mut Vec<StepOutcome>>,
) -> Result<RunRecord, HarnessError> {
    config.validate()?;
    let mut env = Environment::new(config.servers.clone(), config.profile, seed)?;
    let mut policy = config.policy.build(config.num_arms(), seed)?;
    let mut record = RunRecord::new(
        config.policy.label(),
        seed,
        config.latency_cap,
        config.horizon as usize,
    );
    let (mut regret_sum, mut latency_sum) = (0.0, 0.0);
    for t in 1..=config.horizon {
        let outcome = env.step()?;
        let arm = match policy.as_mut() {
            Some(p) => p.select(t),
            None => oracle_select(&outcome),
        };
        let chosen = outcome.arms[arm];
        if let Some(p) = policy.as_mut() {
            p.update(arm, chosen.rho)?;
        }
        let step = StepRecord {
            chosen_arm: arm,
            reward: chosen.rho,
            best_reward: outcome.best_reward(),
            delay: chosen.d,
        };
        record.push(step, &mut regret_sum, &mut latency_sum);
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(outcome);
        }
    }
    Ok(record)
}

/// Runs one episode at `seed`.
pub fn run_episode(config: &RunConfig, seed: u64) -> Result<RunRecord, HarnessError> {
    episode(config, seed, None)
}

/// Like [`run_episode`], also returning every all-arm outcome the
/// environment produced.
pub fn run_episode_traced(
    config: &RunConfig,
    seed: u64,
) -> Result<(RunRecord, Vec<StepOutcome>), HarnessError> {
    let mut trace = Vec::with_capacity(config.horizon as usize);
    let record = episode(config, seed, Some(&mut trace))?;
    Ok((record, trace))
}

/// Runs `num_runs` episodes in parallel; episode `i` uses `base_seed + i` and
/// results come back in run order.
pub fn run_batch(config: &RunConfig) -> Result<Vec<RunRecord>, HarnessError> {
    config.validate()?;
    (0..config.num_runs)
        .into_par_iter()
        .map(|i| run_episode(config, seeding::run_seed(config.base_seed, i)))
        .collect()
}

fn mean_var(values: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Mean and population variance of the running metrics at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub mean_regret: Vec<f64>,
    pub var_regret: Vec<f64>,
    pub mean_latency: Vec<f64>,
    pub var_latency: Vec<f64>,
}

impl Aggregate {
    pub fn from_runs(runs: &[RunRecord]) -> Self {
        let len = runs.iter().map(RunRecord::len).min().unwrap_or(0);
        let mut agg = Self {
            mean_regret: Vec::with_capacity(len),
            var_regret: Vec::with_capacity(len),
            mean_latency: Vec::with_capacity(len),
            var_latency: Vec::with_capacity(len),
        };
        for t in 0..len {
            let (m, v) = mean_var(runs.iter().map(|r| r.running_regret[t]));
            agg.mean_regret.push(m);
            agg.var_regret.push(v);
            let (m, v) = mean_var(runs.iter().map(|r| r.running_latency[t]));
            agg.mean_latency.push(m);
            agg.var_latency.push(v);
        }
        agg
    }
}

/// Final-metric statistics of a batch (population standard deviation).
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub policy: String,
    pub runs: usize,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub mean_latency: f64,
    pub std_latency: f64,
}

impl Summary {
    pub fn from_runs(runs: &[RunRecord]) -> Self {
        let (mean_regret, var_r) = mean_var(runs.iter().map(RunRecord::final_regret));
        let (mean_latency, var_l) = mean_var(runs.iter().map(RunRecord::final_latency));
        Self {
            policy: runs.first().map(|r| r.policy.clone()).unwrap_or_default(),
            runs: runs.len(),
            mean_regret,
            std_regret: var_r.sqrt(),
            mean_latency,
            std_latency: var_l.sqrt(),
        }
    }
}

/// Runs every policy on the same seeds; one batch per policy.
pub fn compare(
    policies: &[PolicySpec],
    config: &RunConfig,
) -> Result<Vec<(PolicySpec, Vec<RunRecord>)>, HarnessError> {
    policies
        .iter()
        .map(|&policy| {
            let cfg = RunConfig {
                policy,
                ..config.clone()
            };
            Ok((policy, run_batch(&cfg)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaPoint {
    pub alpha: f64,
    pub summary: Summary,
}

/// SSPH batch per retention rate, exploration width `sigma`.
pub fn sweep_alpha(
    grid: &[f64],
    sigma: f64,
    config: &RunConfig,
) -> Result<Vec<AlphaPoint>, HarnessError> {
    if let Some(&bad) = grid.iter().find(|a| !(0.0..1.0).contains(*a)) {
        return Err(PolicyError::Hyperparameter {
            name: "alpha",
            reason: format!("retention rate must lie in [0, 1), got {bad}"),
        }
        .into());
    }
    grid.iter()
        .map(|&alpha| {
            let cfg = RunConfig {
                policy: PolicySpec::Ssph { alpha, sigma },
                ..config.clone()
            };
            Ok(AlphaPoint {
                alpha,
                summary: Summary::from_runs(&run_batch(&cfg)?),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmCell {
    pub arms: usize,
    pub summary: Summary,
}

/// One batch per (policy, arm count), servers from [`make_server_bank`].
/// Cells are ordered policy-major.
pub fn sweep_arms(
    arm_counts: &[usize],
    policies: &[PolicySpec],
    config: &RunConfig,
) -> Result<Vec<ArmCell>, HarnessError> {
    let mut cells = Vec::with_capacity(arm_counts.len() * policies.len());
    for &policy in policies {
        for &arms in arm_counts {
            let cfg = RunConfig {
                policy,
                servers: make_server_bank(arms)?,
                ..config.clone()
            };
            cells.push(ArmCell {
                arms,
                summary: Summary::from_runs(&run_batch(&cfg)?),
            });
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(policy: PolicySpec) -> RunConfig {
        RunConfig {
            horizon: 400,
            num_runs: 3,
            ..RunConfig::paper5(policy)
        }
    }

    fn synthetic(best: &[f64], got: &[f64], delays: &[f64]) -> RunRecord {
        let mut r = RunRecord::new("x", 0, 10.0, best.len());
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..best.len() {
            let step = StepRecord {
                chosen_arm: 0,
                reward: got[i],
                best_reward: best[i],
                delay: delays[i],
            };
            r.push(step, &mut a, &mut b);
        }
        r
    }

    #[test]
    fn regret_hand_sum() {
        let r = synthetic(&[1.0, 1.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 0.0], &[1.0; 4]);
        assert_eq!(r.normalized_regret(4).unwrap(), 0.5);
        assert_eq!(r.normalized_regret(1).unwrap(), 0.0);
        assert_eq!(
            r.normalized_regret(0),
            Err(HarnessError::Prefix { upto: 0, len: 4 })
        );
        assert!(r.normalized_regret(5).is_err());
    }

    #[test]
    fn regret_extremes() {
        let r = synthetic(&[1.0; 6], &[1.0; 6], &[0.5; 6]);
        assert_eq!(r.normalized_regret(6).unwrap(), 0.0);
        let r = synthetic(&[1.0; 6], &[0.0; 6], &[0.5; 6]);
        assert_eq!(r.normalized_regret(6).unwrap(), 1.0);
    }

    #[test]
    fn latency_means_and_cap() {
        let r = synthetic(&[1.0; 3], &[1.0; 3], &[1.0, 2.0, 3.0]);
        assert_eq!(r.normalized_latency(3).unwrap(), 2.0);
        let r = synthetic(&[1.0; 4], &[1.0; 4], &[1.5; 4]);
        assert_eq!(r.normalized_latency(4).unwrap(), 1.5);
        let r = synthetic(&[1.0; 2], &[0.0; 2], &[f64::INFINITY, 2.0]);
        assert_eq!(r.normalized_latency(2).unwrap(), 6.0);
    }

    #[test]
    fn oracle_has_no_regret() {
        let rec = run_episode(&short(PolicySpec::Oracle), 3).unwrap();
        assert!(rec.running_regret.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn single_arm_has_no_regret() {
        let cfg = RunConfig {
            horizon: 300,
            ..RunConfig::with_arms(PolicySpec::DEFAULT_SSPH, 1).unwrap()
        };
        for p in PolicySpec::benchmark_set() {
            let rec = run_episode(
                &RunConfig {
                    policy: p,
                    ..cfg.clone()
                },
                8,
            )
            .unwrap();
            assert_eq!(rec.final_regret(), 0.0);
        }
    }

    #[test]
    fn running_values_match_recomputation() {
        let rec = run_episode(&short(PolicySpec::DEFAULT_SSPH), 1).unwrap();
        for t in [1, 17, 200, 400] {
            assert!((rec.normalized_regret(t).unwrap() - rec.running_regret[t - 1]).abs() < 1e-12);
            assert!(
                (rec.normalized_latency(t).unwrap() - rec.running_latency[t - 1]).abs() < 1e-12
            );
        }
    }

    #[test]
    fn aggregate_of_one_run_is_that_run() {
        let rec = run_episode(&short(PolicySpec::Ts), 2).unwrap();
        let agg = Aggregate::from_runs(std::slice::from_ref(&rec));
        assert_eq!(agg.mean_regret, rec.running_regret);
        assert_eq!(agg.mean_latency, rec.running_latency);
        assert!(agg.var_regret.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_is_ordered_by_seed() {
        let cfg = short(PolicySpec::DEFAULT_DTS);
        let batch = run_batch(&cfg).unwrap();
        for (i, rec) in batch.iter().enumerate() {
            assert_eq!(rec.seed, i as u64);
            assert_eq!(rec, &run_episode(&cfg, i as u64).unwrap());
        }
    }

    #[test]
    fn single_point_alpha_sweep_matches_batch() {
        let cfg = short(PolicySpec::DEFAULT_SSPH);
        let sweep = sweep_alpha(&[0.6], 0.1, &cfg).unwrap();
        assert_eq!(
            sweep[0].summary,
            Summary::from_runs(&run_batch(&cfg).unwrap())
        );
        assert!(sweep[0].summary.std_regret > 0.0);
        assert!(sweep_alpha(&[0.5, 1.0], 0.1, &cfg).is_err());
    }

    #[test]
    fn one_arm_sweep_is_regret_free() {
        let cfg = RunConfig {
            horizon: 200,
            num_runs: 2,
            ..RunConfig::paper5(PolicySpec::Ts)
        };
        let cells = sweep_arms(&[1], &PolicySpec::benchmark_set(), &cfg).unwrap();
        assert_eq!(cells.len(), 5);
        assert!(cells.iter().all(|c| c.summary.mean_regret == 0.0));
    }

    #[test]
    fn invalid_configs_rejected() {
        let cfg = RunConfig {
            horizon: 0,
            ..short(PolicySpec::Ts)
        };
        assert!(matches!(run_episode(&cfg, 0), Err(HarnessError::Config(_))));
        let cfg = RunConfig {
            num_runs: 0,
            ..short(PolicySpec::Ts)
        };
        assert!(run_batch(&cfg).is_err());
        let cfg = short(PolicySpec::Ssph {
            alpha: 1.0,
            sigma: 0.1,
        });
        assert!(matches!(run_episode(&cfg, 0), Err(HarnessError::Policy(_))));
    }
}
