use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mec_bandit::experiment::{self, ExperimentKind, Overrides};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "mec-bandit",
    version,
    about = "Bandit server selection benchmarks for MEC offloading"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single policy (see --policy).
    Run(Flags),
    /// Run every configured policy on the same seeds.
    Compare(Flags),
    /// SSPH regret across retention rates.
    SweepAlpha(Flags),
    /// Regret of each policy across arm counts.
    SweepArms(Flags),
    /// Parse and print the resolved configuration without running.
    Validate(Flags),
}

#[derive(Args)]
struct Flags {
    /// Experiment file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    arms: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    policy: Option<String>,
}

impl Flags {
    fn overrides(&self, kind: Option<ExperimentKind>) -> Overrides {
        Overrides {
            kind,
            seed: self.seed,
            horizon: self.horizon,
            runs: self.runs,
            arms: self.arms,
            out: self.out.clone(),
            policy: self.policy.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (flags, kind, dry_run) = match &cli.command {
        Command::Run(f) => (f, Some(ExperimentKind::Single), false),
        Command::Compare(f) => (f, Some(ExperimentKind::Compare), false),
        Command::SweepAlpha(f) => (f, Some(ExperimentKind::AlphaSweep), false),
        Command::SweepArms(f) => (f, Some(ExperimentKind::ArmSweep), false),
        Command::Validate(f) => (f, None, true),
    };

    let spec = match experiment::parse_spec(flags.config.as_deref(), &flags.overrides(kind)) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    if dry_run {
        print!("{}", spec.meta_text());
        return ExitCode::SUCCESS;
    }

    eprintln!(
        "{} experiment: {} arms, T = {}, {} runs, base seed {}",
        spec.kind,
        spec.num_arms(),
        spec.horizon,
        spec.runs,
        spec.seed
    );
    match experiment::run_and_emit(&spec) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
