//! Experiment files: a strict TOML schema, flag overrides, and CSV output.
//!
//! Every key is optional; an empty file resolves to a five-policy comparison
//! on the `paper-5` servers. Unknown keys are rejected before anything runs.
//!
//! ```toml
//! kind = "compare"            # single | compare | alpha-sweep | arm-sweep
//! horizon = 5000
//! runs = 50
//! seed = 0
//! out = "out"
//! latency_cap = 10.0          # seconds, latency metric only
//! preset = "paper-5"
//! arms = 5
//! policy = "SSPH"             # single
//! policies = ["SSPH", "TS", "dTS", "dOTS", "D-UCB"]
//! alpha = 0.6
//! sigma = 0.1
//! dts_discount = 0.8
//! dots_discount = 0.7
//! ducb_gamma = 0.5
//! ducb_xi = 0.5
//! alpha_grid = [0.1, 0.2, 0.3]
//! arm_counts = [5, 10, 15, 20, 25]
//!
//! [task]                      # any subset of TaskProfile fields
//! d_max = 1.0
//!
//! [[server]]                  # replaces the preset; arm j uses entry j mod len
//! psi0 = 0.7
//! psi1 = 0.5
//! w = 100
//! n = 100
//! lambda = 100.0
//! r = 7.0
//! p_b = 0.3
//! c = 5.0e9
//! ```

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{make_server_bank, EnvError, ServerConfig, TaskProfile};
use crate::harness::{
    self, Aggregate, HarnessError, PolicySpec, RunConfig, RunRecord, Summary, DEFAULT_HORIZON,
    DEFAULT_LATENCY_CAP, DEFAULT_RUNS,
};

pub const PRESET_PAPER5: &str = "paper-5";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const TOP_KEYS: &[&str] = &[
    "kind",
    "horizon",
    "runs",
    "seed",
    "out",
    "latency_cap",
    "preset",
    "arms",
    "policy",
    "policies",
    "alpha",
    "sigma",
    "dts_discount",
    "dots_discount",
    "ducb_gamma",
    "ducb_xi",
    "alpha_grid",
    "arm_counts",
    "task",
    "server",
];
const TASK_KEYS: &[&str] = &[
    "l_u",
    "omega",
    "kappa",
    "b_u",
    "b_d",
    "p_u_db",
    "p_d_db",
    "gamma_los",
    "gamma_nlos",
    "d_max",
    "delta",
];
const SERVER_KEYS: &[&str] = &["psi0", "psi1", "w", "n", "lambda", "r", "p_b", "c"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("cannot read {}: {source}", .path.display())]
    Read { path: PathBuf, source: io::Error },
    #[error("syntax error in {}: {message}", .path.display())]
    Syntax { path: PathBuf, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Schema { key: String, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
}

impl ConfigError {
    fn schema(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema {
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("I/O error at {}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("CSV error at {}: {source}", .path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Single,
    Compare,
    AlphaSweep,
    ArmSweep,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Single => "single",
            Self::Compare => "compare",
            Self::AlphaSweep => "alpha-sweep",
            Self::ArmSweep => "arm-sweep",
        })
    }
}

/// On-disk schema. Also used to write back the resolved configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arms: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dts_discount: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dots_discount: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ducb_gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ducb_xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arm_counts: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub server: Option<Vec<ServerConfig>>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub kind: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub horizon: Option<u64>,
    pub runs: Option<usize>,
    pub arms: Option<usize>,
    pub out: Option<PathBuf>,
    pub policy: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub alpha: f64,
    pub sigma: f64,
    pub dts_discount: f64,
    pub dots_discount: f64,
    pub ducb_gamma: f64,
    pub ducb_xi: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            sigma: 0.1,
            dts_discount: 0.8,
            dots_discount: 0.7,
            ducb_gamma: 0.5,
            ducb_xi: 0.5,
        }
    }
}

impl Hyperparameters {
    /// Resolves a policy name (case-insensitive) with these settings.
    pub fn policy(&self, name: &str) -> Option<PolicySpec> {
        Some(match name.to_ascii_lowercase().as_str() {
            "ssph" | "sisyphus" => PolicySpec::Ssph {
                alpha: self.alpha,
                sigma: self.sigma,
            },
            "ts" => PolicySpec::Ts,
            "dts" => PolicySpec::Dts {
                discount: self.dts_discount,
            },
            "dots" => PolicySpec::Dots {
                discount: self.dots_discount,
            },
            "d-ucb" | "ducb" => PolicySpec::Ducb {
                gamma: self.ducb_gamma,
                xi: self.ducb_xi,
            },
            "oracle" => PolicySpec::Oracle,
            "random" => PolicySpec::Random,
            _ => return None,
        })
    }
}

/// Fully resolved and validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub horizon: u64,
    pub runs: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub latency_cap: f64,
    /// `Some` when servers come from a preset, `None` for inline servers.
    pub preset: Option<String>,
    pub servers: Vec<ServerConfig>,
    pub profile: TaskProfile,
    pub hyper: Hyperparameters,
    pub policy: PolicySpec,
    pub policies: Vec<PolicySpec>,
    pub alpha_grid: Vec<f64>,
    pub arm_counts: Vec<usize>,
}

fn default_alpha_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

fn check_keys(table: &toml::Table) -> Result<(), ConfigError> {
    for (key, value) in table {
        if !TOP_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
        match (key.as_str(), value) {
            ("task", toml::Value::Table(t)) => {
                if let Some(k) = t.keys().find(|k| !TASK_KEYS.contains(&k.as_str())) {
                    return Err(ConfigError::UnknownKey(format!("task.{k}")));
                }
            }
            ("server", toml::Value::Array(items)) => {
                for item in items {
                    if let toml::Value::Table(t) = item {
                        if let Some(k) = t.keys().find(|k| !SERVER_KEYS.contains(&k.as_str())) {
                            return Err(ConfigError::UnknownKey(format!("server.{k}")));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Parses the TOML text of an experiment file without resolving it.
pub fn parse_file_config(text: &str, path: &Path) -> Result<FileConfig, ConfigError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })?;
    check_keys(&table)?;
    // Remaining failures are type mismatches; name the first offending key.
    FileConfig::deserialize(table.clone()).map_err(|e| {
        let key = table
            .keys()
            .find(|k| {
                let mut single = toml::Table::new();
                single.insert((*k).clone(), table[k.as_str()].clone());
                FileConfig::deserialize(single).is_err()
            })
            .cloned()
            .unwrap_or_default();
        ConfigError::schema(key, e.message())
    })
}

/// Reads and resolves an experiment file (or defaults when `path` is `None`)
/// and applies the overrides.
pub fn parse_spec(
    path: Option<&Path>,
    overrides: &Overrides,
) -> Result<ExperimentSpec, ConfigError> {
    let file = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| match e.kind() {
                io::ErrorKind::NotFound => ConfigError::MissingFile(p.to_path_buf()),
                _ => ConfigError::Read {
                    path: p.to_path_buf(),
                    source: e,
                },
            })?;
            parse_file_config(&text, p)?
        }
        None => FileConfig::default(),
    };
    resolve(file, overrides)
}

fn in_unit_open(key: &str, v: f64) -> Result<f64, ConfigError> {
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ConfigError::schema(
            key,
            format!("must lie in [0, 1), got {v}"),
        ))
    }
}

fn discount(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(ConfigError::schema(
            key,
            format!("must lie in (0, 1], got {v}"),
        ))
    }
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::schema(
            key,
            format!("must be positive, got {v}"),
        ))
    }
}

fn at_least_one<T: PartialOrd + From<u8> + fmt::Display>(
    key: &str,
    v: T,
) -> Result<T, ConfigError> {
    if v >= T::from(1u8) {
        Ok(v)
    } else {
        Err(ConfigError::schema(key, format!("must be >= 1, got {v}")))
    }
}

fn env_key(prefix: &str, err: &EnvError) -> String {
    match err {
        EnvError::Probability { name, .. }
        | EnvError::Server { name, .. }
        | EnvError::Task { name, .. } => {
            format!("{prefix}.{name}")
        }
        EnvError::EpochMean(_) => format!("{prefix}.lambda"),
        _ => prefix.to_string(),
    }
}

/// Applies defaults and overrides to a parsed file and validates the result.
pub fn resolve(file: FileConfig, o: &Overrides) -> Result<ExperimentSpec, ConfigError> {
    let kind = o.kind.or(file.kind).unwrap_or(ExperimentKind::Compare);
    let horizon = at_least_one(
        "horizon",
        o.horizon.or(file.horizon).unwrap_or(DEFAULT_HORIZON),
    )?;
    let runs = at_least_one("runs", o.runs.or(file.runs).unwrap_or(DEFAULT_RUNS))?;
    let seed = o.seed.or(file.seed).unwrap_or(0);
    let out = o
        .out
        .clone()
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("out"));
    let latency_cap = positive(
        "latency_cap",
        file.latency_cap.unwrap_or(DEFAULT_LATENCY_CAP),
    )?;

    let d = Hyperparameters::default();
    let hyper = Hyperparameters {
        alpha: in_unit_open("alpha", file.alpha.unwrap_or(d.alpha))?,
        sigma: positive("sigma", file.sigma.unwrap_or(d.sigma))?,
        dts_discount: discount("dts_discount", file.dts_discount.unwrap_or(d.dts_discount))?,
        dots_discount: discount(
            "dots_discount",
            file.dots_discount.unwrap_or(d.dots_discount),
        )?,
        ducb_gamma: discount("ducb_gamma", file.ducb_gamma.unwrap_or(d.ducb_gamma))?,
        ducb_xi: positive("ducb_xi", file.ducb_xi.unwrap_or(d.ducb_xi))?,
    };

    let profile = file.task.unwrap_or_default();
    profile
        .validate()
        .map_err(|e| ConfigError::schema(env_key("task", &e), e.to_string()))?;

    let arms = o.arms.or(file.arms);
    if let Some(a) = arms {
        at_least_one("arms", a)?;
    }
    let (preset, servers) = match file.server {
        Some(list) => {
            if file.preset.is_some() {
                return Err(ConfigError::schema(
                    "preset",
                    "cannot be combined with [[server]] entries",
                ));
            }
            if list.is_empty() {
                return Err(ConfigError::schema(
                    "server",
                    "at least one server is required",
                ));
            }
            for s in &list {
                s.validate()
                    .map_err(|e| ConfigError::schema(env_key("server", &e), e.to_string()))?;
            }
            let n = arms.unwrap_or(list.len());
            (None, (0..n).map(|j| list[j % list.len()]).collect())
        }
        None => {
            let preset = file.preset.unwrap_or_else(|| PRESET_PAPER5.to_string());
            if preset != PRESET_PAPER5 {
                return Err(ConfigError::schema(
                    "preset",
                    format!("unknown preset `{preset}`"),
                ));
            }
            let bank = make_server_bank(arms.unwrap_or(5))
                .map_err(|e| ConfigError::schema("arms", e.to_string()))?;
            (Some(preset), bank)
        }
    };

    let lookup = |key: &str, name: &str| {
        hyper
            .policy(name)
            .ok_or_else(|| ConfigError::schema(key, format!("unknown policy `{name}`")))
    };
    let policy = lookup(
        "policy",
        o.policy
            .as_deref()
            .or(file.policy.as_deref())
            .unwrap_or("SSPH"),
    )?;
    let policies = match &file.policies {
        Some(names) if names.is_empty() => {
            return Err(ConfigError::schema("policies", "must not be empty"))
        }
        Some(names) => names
            .iter()
            .map(|n| lookup("policies", n))
            .collect::<Result<Vec<_>, _>>()?,
        None => PolicySpec::benchmark_set()
            .into_iter()
            .map(|p| hyper.policy(p.label()).expect("benchmark policy"))
            .collect(),
    };

    let alpha_grid = file.alpha_grid.unwrap_or_else(default_alpha_grid);
    if alpha_grid.is_empty() {
        return Err(ConfigError::schema("alpha_grid", "must not be empty"));
    }
    for &a in &alpha_grid {
        in_unit_open("alpha_grid", a)?;
    }
    let arm_counts = file.arm_counts.unwrap_or_else(|| vec![5, 10, 15, 20, 25]);
    if arm_counts.is_empty() {
        return Err(ConfigError::schema("arm_counts", "must not be empty"));
    }
    for &n in &arm_counts {
        at_least_one("arm_counts", n)?;
    }
    if kind == ExperimentKind::ArmSweep && preset.is_none() {
        return Err(ConfigError::schema(
            "server",
            "arm-sweep builds its servers from the paper-5 preset",
        ));
    }

    Ok(ExperimentSpec {
        kind,
        horizon,
        runs,
        seed,
        out,
        latency_cap,
        preset,
        servers,
        profile,
        hyper,
        policy,
        policies,
        alpha_grid,
        arm_counts,
    })
}

impl ExperimentSpec {
    pub fn num_arms(&self) -> usize {
        self.servers.len()
    }

    pub fn run_config(&self, policy: PolicySpec) -> RunConfig {
        RunConfig {
            horizon: self.horizon,
            num_runs: self.runs,
            base_seed: self.seed,
            policy,
            servers: self.servers.clone(),
            profile: self.profile,
            latency_cap: self.latency_cap,
        }
    }

    /// The resolved configuration in file form; re-parses to `self`.
    pub fn to_file_config(&self) -> FileConfig {
        let inline = self.preset.is_none();
        FileConfig {
            kind: Some(self.kind),
            horizon: Some(self.horizon),
            runs: Some(self.runs),
            seed: Some(self.seed),
            out: Some(self.out.clone()),
            latency_cap: Some(self.latency_cap),
            preset: self.preset.clone(),
            arms: Some(self.num_arms()),
            policy: Some(self.policy.label().to_string()),
            policies: Some(
                self.policies
                    .iter()
                    .map(|p| p.label().to_string())
                    .collect(),
            ),
            alpha: Some(self.hyper.alpha),
            sigma: Some(self.hyper.sigma),
            dts_discount: Some(self.hyper.dts_discount),
            dots_discount: Some(self.hyper.dots_discount),
            ducb_gamma: Some(self.hyper.ducb_gamma),
            ducb_xi: Some(self.hyper.ducb_xi),
            alpha_grid: Some(self.alpha_grid.clone()),
            arm_counts: Some(self.arm_counts.clone()),
            task: Some(self.profile),
            server: inline.then(|| self.servers.clone()),
        }
    }

    /// Text of the `meta.toml` file: provenance comments plus the resolved
    /// configuration.
    pub fn meta_text(&self) -> String {
        let body = toml::to_string(&self.to_file_config()).expect("config serializes");
        format!(
            "# mec-bandit {VERSION}\n# kind: {}\n# base seed: {} (run i uses seed + i)\n# latency cap: {} s\n{body}",
            self.kind, self.seed, self.latency_cap
        )
    }
}

/// Files written by one experiment, staged and committed together.
struct Outputs {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
        })
    }

    fn stage(&mut self, name: &str) -> (PathBuf, PathBuf) {
        let final_path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.partial"));
        self.staged.push((tmp.clone(), final_path.clone()));
        (tmp, final_path)
    }

    fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), RunError> {
        let (tmp, _) = self.stage(name);
        let csv_err = |source| RunError::Csv {
            path: tmp.clone(),
            source,
        };
        let mut w = csv::Writer::from_path(&tmp).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|source| RunError::Io {
            path: tmp.clone(),
            source,
        })?;
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<(), RunError> {
        let (tmp, _) = self.stage(name);
        let mut f = fs::File::create(&tmp).map_err(|source| RunError::Io {
            path: tmp.clone(),
            source,
        })?;
        f.write_all(text.as_bytes()).map_err(|source| RunError::Io {
            path: tmp.clone(),
            source,
        })
    }

    fn commit(mut self) -> Result<Vec<PathBuf>, RunError> {
        let staged = std::mem::take(&mut self.staged);
        let mut written = Vec::new();
        for (tmp, path) in &staged {
            if let Err(source) = fs::rename(tmp, path) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                self.staged = staged.clone();
                return Err(RunError::Io {
                    path: path.clone(),
                    source,
                });
            }
            written.push(path.clone());
        }
        Ok(written)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn timeseries_rows<'a>(
    batches: &'a [(PolicySpec, Vec<RunRecord>)],
) -> impl Iterator<Item = Vec<String>> + 'a {
    batches.iter().flat_map(|(_, runs)| {
        runs.iter().enumerate().flat_map(|(run, rec)| {
            rec.steps.iter().enumerate().map(move |(i, s)| {
                vec![
                    run.to_string(),
                    (i + 1).to_string(),
                    rec.policy.clone(),
                    s.chosen_arm.to_string(),
                    num(s.reward),
                    num(s.best_reward),
                    num(rec.capped(s.delay)),
                    num(rec.running_regret[i]),
                    num(rec.running_latency[i]),
                ]
            })
        })
    })
}

fn summary_row(s: &Summary) -> Vec<String> {
    vec![
        s.policy.clone(),
        s.runs.to_string(),
        num(s.mean_regret),
        num(s.std_regret),
        num(s.mean_latency),
        num(s.std_latency),
    ]
}

pub const TIMESERIES_HEADER: &[&str] = &[
    "run",
    "t",
    "policy",
    "chosen_arm",
    "reward",
    "best_reward",
    "delay_s",
    "running_regret",
    "running_latency_s",
];
pub const SUMMARY_HEADER: &[&str] = &[
    "policy",
    "runs",
    "mean_regret",
    "stdev_regret",
    "mean_latency_s",
    "stdev_latency_s",
];
pub const ALPHA_SWEEP_HEADER: &[&str] = &[
    "alpha",
    "runs",
    "mean_regret",
    "stdev_regret",
    "mean_latency_s",
    "stdev_latency_s",
];
pub const ARM_SWEEP_HEADER: &[&str] = &[
    "policy",
    "arms",
    "runs",
    "mean_regret",
    "stdev_regret",
    "mean_latency_s",
    "stdev_latency_s",
];

/// What an experiment produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summaries: Vec<Summary>,
    pub lines: Vec<String>,
}

/// Runs the experiment and writes its CSV files and `meta.toml` into the
/// output directory. Nothing is left behind on failure.
pub fn run_and_emit(spec: &ExperimentSpec) -> Result<Report, RunError> {
    let mut out = Outputs::new(&spec.out)?;
    let mut summaries = Vec::new();
    let mut lines = Vec::new();
    match spec.kind {
        ExperimentKind::Single | ExperimentKind::Compare => {
            let policies = if spec.kind == ExperimentKind::Single {
                vec![spec.policy]
            } else {
                spec.policies.clone()
            };
            let batches = harness::compare(&policies, &spec.run_config(spec.policy))?;
            out.csv(
                "timeseries.csv",
                TIMESERIES_HEADER,
                timeseries_rows(&batches),
            )?;
            for (_, runs) in &batches {
                let s = Summary::from_runs(runs);
                let agg = Aggregate::from_runs(runs);
                let last = agg.var_regret.len().saturating_sub(1);
                lines.push(format!(
                    "{:<7} regret {:.4} (sd {:.4}, var@T {:.2e})  latency {:.3} s (sd {:.3})",
                    s.policy,
                    s.mean_regret,
                    s.std_regret,
                    agg.var_regret.get(last).copied().unwrap_or(0.0),
                    s.mean_latency,
                    s.std_latency
                ));
                summaries.push(s);
            }
            out.csv(
                "summary.csv",
                SUMMARY_HEADER,
                summaries.iter().map(summary_row),
            )?;
        }
        ExperimentKind::AlphaSweep => {
            let points = harness::sweep_alpha(
                &spec.alpha_grid,
                spec.hyper.sigma,
                &spec.run_config(spec.policy),
            )?;
            let rows = points.iter().map(|p| {
                let s = &p.summary;
                vec![
                    num(p.alpha),
                    s.runs.to_string(),
                    num(s.mean_regret),
                    num(s.std_regret),
                    num(s.mean_latency),
                    num(s.std_latency),
                ]
            });
            out.csv("sweep.csv", ALPHA_SWEEP_HEADER, rows)?;
            for p in &points {
                lines.push(format!(
                    "alpha {:<4} regret {:.4} (sd {:.4})",
                    p.alpha, p.summary.mean_regret, p.summary.std_regret
                ));
            }
            summaries.extend(points.into_iter().map(|p| p.summary));
        }
        ExperimentKind::ArmSweep => {
            let cells = harness::sweep_arms(
                &spec.arm_counts,
                &spec.policies,
                &spec.run_config(spec.policy),
            )?;
            let rows = cells.iter().map(|c| {
                let s = &c.summary;
                vec![
                    s.policy.clone(),
                    c.arms.to_string(),
                    s.runs.to_string(),
                    num(s.mean_regret),
                    num(s.std_regret),
                    num(s.mean_latency),
                    num(s.std_latency),
                ]
            });
            out.csv("sweep.csv", ARM_SWEEP_HEADER, rows)?;
            for c in &cells {
                lines.push(format!(
                    "{:<7} |S| = {:<3} regret {:.4} (sd {:.4})",
                    c.summary.policy, c.arms, c.summary.mean_regret, c.summary.std_regret
                ));
            }
            summaries.extend(cells.into_iter().map(|c| c.summary));
        }
    }
    out.text("meta.toml", &spec.meta_text())?;
    let files = out.commit()?;
    Ok(Report {
        files,
        summaries,
        lines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentSpec, ConfigError> {
        resolve(
            parse_file_config(text, Path::new("test.toml"))?,
            &Overrides::default(),
        )
    }

    #[test]
    fn empty_file_gives_defaults() {
        let spec = parse("").unwrap();
        assert_eq!(spec.kind, ExperimentKind::Compare);
        assert_eq!(spec.preset.as_deref(), Some(PRESET_PAPER5));
        assert_eq!(spec.servers, make_server_bank(5).unwrap());
        assert_eq!((spec.horizon, spec.runs), (5000, 50));
        assert_eq!(spec.policies, PolicySpec::benchmark_set());
        assert_eq!(spec.policy, PolicySpec::DEFAULT_SSPH);
        assert_eq!(spec.hyper, Hyperparameters::default());
        assert_eq!(spec.alpha_grid.len(), 9);
    }

    #[test]
    fn out_of_range_alpha_names_key() {
        match parse("alpha = 1.2") {
            Err(ConfigError::Schema { key, .. }) => assert_eq!(key, "alpha"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(parse("alpah = 0.5"), Err(ConfigError::UnknownKey(k)) if k == "alpah"));
        assert!(
            matches!(parse("[task]\nbogus = 1"), Err(ConfigError::UnknownKey(k)) if k == "task.bogus")
        );
    }

    #[test]
    fn syntax_and_type_errors_are_distinct() {
        assert!(matches!(
            parse("horizon = "),
            Err(ConfigError::Syntax { .. })
        ));
        match parse("horizon = \"long\"") {
            Err(ConfigError::Schema { key, .. }) => assert_eq!(key, "horizon"),
            other => panic!("{other:?}"),
        }
        assert!(
            matches!(parse("kind = \"fancy\""), Err(ConfigError::Schema { key, .. }) if key == "kind")
        );
        assert!(
            matches!(parse("policies = [\"UCB9\"]"), Err(ConfigError::Schema { key, .. }) if key == "policies")
        );
        assert!(matches!(parse("runs = 0"), Err(ConfigError::Schema { key, .. }) if key == "runs"));
    }

    #[test]
    fn missing_file_reported() {
        let err = parse_spec(
            Some(Path::new("/nonexistent/exp.toml")),
            &Overrides::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::MissingFile(_)));
    }

    #[test]
    fn flag_overrides_file() {
        let file = parse_file_config("arms = 5\nseed = 3", Path::new("x")).unwrap();
        let o = Overrides {
            arms: Some(7),
            seed: Some(9),
            ..Overrides::default()
        };
        let spec = resolve(file, &o).unwrap();
        assert_eq!(spec.num_arms(), 7);
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.servers[5], spec.servers[0]);
        assert_eq!(spec.servers[6], spec.servers[1]);
    }

    #[test]
    fn inline_servers_and_task_overrides() {
        let text = r#"
            kind = "single"
            policy = "dots"
            dots_discount = 0.9
            [task]
            d_max = 2.0
            [[server]]
            psi0 = 0.5
            psi1 = 0.5
            w = 10
            n = 10
            lambda = 20.0
            r = 5.0
            p_b = 0.1
            c = 1.0e9
        "#;
        let spec = parse(text).unwrap();
        assert_eq!(spec.preset, None);
        assert_eq!(spec.num_arms(), 1);
        assert_eq!(spec.profile.d_max, 2.0);
        assert_eq!(spec.profile.l_u, TaskProfile::default().l_u);
        assert_eq!(spec.policy, PolicySpec::Dots { discount: 0.9 });
        let bad = text.replace("p_b = 0.1", "p_b = 1.1");
        assert!(matches!(parse(&bad), Err(ConfigError::Schema { key, .. }) if key == "server.p_b"));
    }

    #[test]
    fn resolved_config_reparses() {
        let spec = parse("kind = \"alpha-sweep\"\nalpha_grid = [0.2, 0.4]\nsigma = 0.05\narms = 3")
            .unwrap();
        let again = parse(&spec.meta_text()).unwrap();
        assert_eq!(spec, again);
    }
}
