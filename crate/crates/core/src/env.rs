//! Doubly-stochastic MEC offloading environment.
//!
//! Every server (arm) carries its own load process: the number of connected
//! UEs `v` is redrawn at the start of each epoch, and inside an epoch the
//! number of background offloaders `q` is redrawn every step. Together with a
//! per-step LOS/NLOS blockage draw this yields a delay and a binary reward for
//! every arm at every step, whether or not the arm is played.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("mean epoch duration must be >= 1, got {0}")]
    EpochMean(f64),
    #[error("probability `{name}` must lie in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("offloader count {q} exceeds server capacity {n}")]
    OverCapacity { q: u64, n: u64 },
    #[error("server bank needs at least one arm")]
    NoArms,
    #[error("invalid server parameter `{name}`: {reason}")]
    Server { name: &'static str, reason: String },
    #[error("invalid task parameter `{name}`: {reason}")]
    Task { name: &'static str, reason: String },
}

/// Static parameters of one MEC server.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    /// Probability that an in-range UE is connected to the server.
    pub psi0: f64,
    /// Probability that a connected UE offloads in a given step.
    pub psi1: f64,
    /// UEs in communication range.
    pub w: u64,
    /// Maximum number of concurrent users.
    pub n: u64,
    /// Mean epoch duration in steps.
    pub lambda: f64,
    /// UE-server distance in meters.
    pub r: f64,
    /// Blockage probability.
    pub p_b: f64,
    /// Maximum computing capacity in Hz.
    pub c: f64,
}

fn check_prob(name: &'static str, value: f64) -> Result<(), EnvError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(EnvError::Probability { name, value })
    }
}

impl ServerConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        check_prob("psi0", self.psi0)?;
        check_prob("psi1", self.psi1)?;
        check_prob("p_b", self.p_b)?;
        let server = |name, reason: &str| EnvError::Server {
            name,
            reason: reason.to_string(),
        };
        if self.w < 1 {
            return Err(server("w", "must be >= 1"));
        }
        if self.n < 1 {
            return Err(server("n", "must be >= 1"));
        }
        if !(self.lambda >= 1.0) || !self.lambda.is_finite() {
            return Err(EnvError::EpochMean(self.lambda));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(server("r", "must be positive"));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(server("c", "must be positive"));
        }
        Ok(())
    }
}

/// Task and radio constants shared by all servers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskProfile {
    /// Uplink task size in bytes.
    pub l_u: f64,
    /// Downlink/uplink size ratio.
    pub omega: f64,
    /// CPU cycles per byte.
    pub kappa: f64,
    /// Uplink bandwidth in Hz.
    pub b_u: f64,
    /// Downlink bandwidth in Hz.
    pub b_d: f64,
    /// Reference uplink SINR at 1 m, dB.
    pub p_u_db: f64,
    /// Reference downlink SINR at 1 m, dB.
    pub p_d_db: f64,
    pub gamma_los: f64,
    pub gamma_nlos: f64,
    /// Latency requirement in seconds.
    pub d_max: f64,
    /// Step duration in seconds. Not consumed by the model.
    pub delta: f64,
}

impl Default for TaskProfile {
    fn default() -> Self {
        Self {
            l_u: 20.0e6,
            omega: 1.0,
            kappa: 10.0,
            b_u: 500.0e6,
            b_d: 500.0e6,
            p_u_db: 20.0,
            p_d_db: 40.0,
            gamma_los: 2.0,
            gamma_nlos: 4.0,
            d_max: 1.0,
            delta: 1.0,
        }
    }
}

impl TaskProfile {
    pub fn validate(&self) -> Result<(), EnvError> {
        let task = |name, reason: &str| EnvError::Task {
            name,
            reason: reason.to_string(),
        };
        let positive = [
            ("l_u", self.l_u),
            ("omega", self.omega),
            ("kappa", self.kappa),
            ("b_u", self.b_u),
            ("b_d", self.b_d),
            ("d_max", self.d_max),
            ("delta", self.delta),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(task(name, "must be positive and finite"));
            }
        }
        for (name, v) in [
            ("p_u_db", self.p_u_db),
            ("p_d_db", self.p_d_db),
            ("gamma_los", self.gamma_los),
            ("gamma_nlos", self.gamma_nlos),
        ] {
            if !v.is_finite() {
                return Err(task(name, "must be finite"));
            }
        }
        if self.gamma_los > self.gamma_nlos {
            return Err(task("gamma_los", "must not exceed gamma_nlos"));
        }
        Ok(())
    }

    /// Downlink payload in bytes.
    pub fn l_d(&self) -> f64 {
        self.omega * self.l_u
    }
}

/// The five reference server classes; arm `j` (0-based) uses class `j % 5`.
pub const SERVER_CLASSES: [ServerConfig; 5] = [
    class(0.7, 100.0, 7.0, 0.3, 5.0e9),
    class(0.6, 150.0, 10.0, 0.4, 3.3e9),
    class(0.5, 100.0, 12.0, 0.5, 3.3e9),
    class(0.4, 100.0, 14.0, 0.6, 3.3e9),
    class(0.3, 50.0, 16.0, 0.7, 5.0e9),
];

const fn class(psi0: f64, lambda: f64, r: f64, p_b: f64, c: f64) -> ServerConfig {
    ServerConfig {
        psi0,
        psi1: 0.5,
        w: 100,
        n: 100,
        lambda,
        r,
        p_b,
        c,
    }
}

/// Builds `num_arms` servers by cycling through [`SERVER_CLASSES`].
pub fn make_server_bank(num_arms: usize) -> Result<Vec<ServerConfig>, EnvError> {
    if num_arms == 0 {
        return Err(EnvError::NoArms);
    }
    Ok((0..num_arms)
        .map(|j| SERVER_CLASSES[j % SERVER_CLASSES.len()])
        .collect())
}

/// Draws an epoch length from the geometric law on {1, 2, ...} with mean `lambda`.
pub fn sample_epoch_duration<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64, EnvError> {
    if !(lambda >= 1.0) || !lambda.is_finite() {
        return Err(EnvError::EpochMean(lambda));
    }
    // rand_distr counts failures before the first success (support starts at 0).
    let failures = Geometric::new(1.0 / lambda)
        .map_err(|_| EnvError::EpochMean(lambda))?
        .sample(rng);
    Ok(failures.saturating_add(1))
}

fn binomial<R: Rng + ?Sized>(
    name: &'static str,
    trials: u64,
    p: f64,
    rng: &mut R,
) -> Result<u64, EnvError> {
    check_prob(name, p)?;
    if trials == 0 {
        return Ok(0);
    }
    let dist = Binomial::new(trials, p).map_err(|_| EnvError::Probability { name, value: p })?;
    Ok(dist.sample(rng))
}

/// Number of in-range UEs connected for a new epoch, `Binomial(w, psi0)`.
pub fn sample_connected<R: Rng + ?Sized>(w: u64, psi0: f64, rng: &mut R) -> Result<u64, EnvError> {
    binomial("psi0", w, psi0, rng)
}

/// Number of connected UEs offloading this step, `Binomial(v, psi1)`.
pub fn sample_offloaders<R: Rng + ?Sized>(v: u64, psi1: f64, rng: &mut R) -> Result<u64, EnvError> {
    binomial("psi1", v, psi1, rng)
}

/// Fraction of computing capacity left free: `1 - q/n`.
pub fn availability(q: u64, n: u64) -> Result<f64, EnvError> {
    if q > n {
        return Err(EnvError::OverCapacity { q, n });
    }
    Ok(1.0 - q as f64 / n as f64)
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Uplink plus downlink transmission time in seconds over a Shannon-rate link.
pub fn transmission_delay(profile: &TaskProfile, r: f64, blocked: bool) -> f64 {
    let gamma = if blocked {
        profile.gamma_nlos
    } else {
        profile.gamma_los
    };
    let attenuation = r.powf(-gamma);
    let leg = |bytes: f64, bandwidth: f64, sinr_db: f64| {
        bytes * 8.0 / (bandwidth * (1.0 + db_to_linear(sinr_db) * attenuation).log2())
    };
    leg(profile.l_u, profile.b_u, profile.p_u_db) + leg(profile.l_d(), profile.b_d, profile.p_d_db)
}

/// Processing time in seconds; `f64::INFINITY` when the server is saturated.
pub fn computation_delay(profile: &TaskProfile, c: f64, a: f64) -> f64 {
    if a <= 0.0 {
        return f64::INFINITY;
    }
    profile.kappa * profile.l_u / (c * a)
}

/// What one arm would have produced at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmOutcome {
    /// Background offloaders this step.
    pub q: u64,
    pub a: f64,
    pub blocked: bool,
    pub tau: f64,
    pub eta: f64,
    pub d: f64,
    pub rho: f64,
}

impl ArmOutcome {
    /// Delay and reward for a given availability and channel state. Pure.
    pub fn evaluate(
        profile: &TaskProfile,
        server: &ServerConfig,
        q: u64,
        a: f64,
        blocked: bool,
    ) -> Self {
        let tau = transmission_delay(profile, server.r, blocked);
        let eta = computation_delay(profile, server.c, a);
        let d = tau + eta;
        let rho = if d <= profile.d_max { 1.0 } else { 0.0 };
        Self {
            q,
            a,
            blocked,
            tau,
            eta,
            d,
            rho,
        }
    }
}

/// Counterfactual outcome for every arm at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub arms: Vec<ArmOutcome>,
}

impl StepOutcome {
    pub fn best_reward(&self) -> f64 {
        self.arms.iter().map(|o| o.rho).fold(0.0, f64::max)
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.arms.iter().map(|o| o.rho)
    }
}

/// Dynamic state of one server.
#[derive(Debug, Clone)]
pub struct ServerState {
    /// Steps left in the current epoch, counting the next one.
    pub epoch_remaining: u64,
    /// Connected UEs for the current epoch.
    pub v: u64,
    rng: ChaCha8Rng,
}

impl ServerState {
    fn start_epoch(&mut self, cfg: &ServerConfig) -> Result<(), EnvError> {
        self.epoch_remaining = sample_epoch_duration(cfg.lambda, &mut self.rng)?;
        self.v = sample_connected(cfg.w, cfg.psi0, &mut self.rng)?;
        Ok(())
    }

    /// Overrides the epoch counter, e.g. to force an epoch boundary.
    pub fn set_epoch_remaining(&mut self, steps: u64) {
        self.epoch_remaining = steps.max(1);
    }
}

/// The full environment: configs, task profile and per-server state.
#[derive(Debug, Clone)]
pub struct Environment {
    servers: Vec<ServerConfig>,
    profile: TaskProfile,
    state: Vec<ServerState>,
    steps: u64,
}

impl Environment {
    /// Validates the inputs and opens a first epoch on every server. Each
    /// server draws from its own stream derived from `seed`.
    pub fn new(
        servers: Vec<ServerConfig>,
        profile: TaskProfile,
        seed: u64,
    ) -> Result<Self, EnvError> {
        if servers.is_empty() {
            return Err(EnvError::NoArms);
        }
        profile.validate()?;
        for s in &servers {
            s.validate()?;
        }
        let mut state = Vec::with_capacity(servers.len());
        for (i, cfg) in servers.iter().enumerate() {
            let mut st = ServerState {
                epoch_remaining: 0,
                v: 0,
                rng: seeding::server_stream(seed, i),
            };
            st.start_epoch(cfg)?;
            state.push(st);
        }
        Ok(Self {
            servers,
            profile,
            state,
            steps: 0,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.servers.len()
    }

    pub fn servers(&self) -> &[ServerConfig] {
        &self.servers
    }

    pub fn profile(&self) -> &TaskProfile {
        &self.profile
    }

    pub fn state(&self) -> &[ServerState] {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut [ServerState] {
        &mut self.state
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Advances every server by one step and returns all arms' outcomes.
    ///
    /// Per server, the stream is consumed in a fixed order: `q`, blockage,
    /// then `(duration, v)` if the epoch just ended. Nothing here depends on
    /// which arm a policy plays.
    pub fn step(&mut self) -> Result<StepOutcome, EnvError> {
        let mut arms = Vec::with_capacity(self.servers.len());
        for (cfg, st) in self.servers.iter().zip(self.state.iter_mut()) {
            let q = sample_offloaders(st.v, cfg.psi1, &mut st.rng)?;
            // v <= w is not tied to n, so clamp load at capacity.
            let a = availability(q.min(cfg.n), cfg.n)?;
            let blocked = st.rng.random_bool(cfg.p_b);
            arms.push(ArmOutcome::evaluate(&self.profile, cfg, q, a, blocked));

            st.epoch_remaining -= 1;
            if st.epoch_remaining == 0 {
                st.start_epoch(cfg)?;
            }
        }
        self.steps += 1;
        Ok(StepOutcome { arms })
    }
}
