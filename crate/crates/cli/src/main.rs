//! `stabiliser`: generate trajectories, simulate the device, detect events,
//! tune the lock threshold and sweep parameters. Writes CSV only.
//!
//! Exit codes: 0 success, 2 invalid flags or config, 3 I/O failure,
//! 4 pipeline error, 5 infeasible tuning target.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "stabiliser", version, about = "Cable torso stabiliser simulator")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files (created if missing).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Seed for synthetic marker jitter; overrides the config value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic trajectory CSV.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Run trajectory -> cable -> filter -> device for every anchor.
    Simulate(InputArgs),
    /// Run the configured detector on every anchor's filtered cable velocity.
    Detect {
        #[command(flatten)]
        input: InputArgs,
        /// Override the configured detector mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Solve one mechanism parameter for a target lock velocity.
    Tune(TuneArgs),
    /// Evaluate the built-in scenario suite over a parameter grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Trajectory CSV (`t,x,y,z`); falls back to `io.input` in the config.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Velocity,
    Fall,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FreeArg {
    FRetain,
    MFly,
    RFly,
}

#[derive(Debug, Args)]
pub struct CommonGen {
    /// Tracked body point at rest, `x,y,z` metres (default from config).
    #[arg(long, value_parser = parse_vec3)]
    pub start: Option<[f64; 3]>,
    #[arg(long, default_value_t = 250.0)]
    pub rate: f64,
    /// Uniform marker jitter amplitude, metres (seeded; default from config).
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Output file name inside the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GenerateKind {
    /// Minimum-jerk lean out, hold and back.
    Lean {
        /// Lean excursion, metres.
        #[arg(long)]
        amplitude: f64,
        /// Duration of each stroke, seconds.
        #[arg(long)]
        duration: f64,
        #[arg(long, default_value_t = 0.5)]
        hold: f64,
        /// `radial` (along the first anchor's cable) or `x,y,z`.
        #[arg(long, default_value = "radial")]
        direction: String,
        #[command(flatten)]
        common: CommonGen,
    },
    /// Forward surge followed by a backward recovery along the first cable.
    Fall {
        /// Peak forward surge speed, m/s.
        #[arg(long)]
        dip: f64,
        /// Surge start, seconds.
        #[arg(long)]
        onset: f64,
        /// Peak recovery speed, m/s (defaults to 0.9 x dip).
        #[arg(long)]
        recoil: Option<f64>,
        #[arg(long, default_value_t = 0.25)]
        dip_duration: f64,
        #[arg(long, default_value_t = 0.25)]
        recoil_duration: f64,
        #[arg(long, default_value_t = 1.5)]
        settle: f64,
        #[command(flatten)]
        common: CommonGen,
    },
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Target lock velocity, m/s.
    #[arg(long, allow_hyphen_values = true)]
    pub v_star: f64,
    #[arg(long, value_enum, default_value = "f-retain")]
    pub free: FreeArg,
    /// Also evaluate the built-in suite and write `tune_summary.csv`.
    #[arg(long)]
    pub summary: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    pub f_retain: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub m_fly: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub r_fly: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub window: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub v_lock: Vec<f64>,
    /// Target lock velocities; each is solved into an f_retain value.
    #[arg(long, value_delimiter = ',')]
    pub v_star: Vec<f64>,
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got '{s}'"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|e| format!("'{p}': {e}"))?;
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
