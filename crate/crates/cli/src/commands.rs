use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use stabiliser_core::device::{self, ModeChange};
use stabiliser_core::motion::{self, ColumnMap, FallProfile, LeanProfile, MotionError, Trajectory};
use stabiliser_core::signal::{self, DetectorMode, EventKind};
use stabiliser_core::tuning::{self, FreeParam, SweepGrid, TuneTarget};
use stabiliser_core::Vec3;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::{Cli, Command, CommonGen, FreeArg, GenerateKind, ModeArg, SweepArgs, TuneArgs};

struct Context {
    config: RunConfig,
    out_dir: PathBuf,
    seed: u64,
}

impl Context {
    fn create(&self, name: impl AsRef<Path>) -> Result<BufWriter<File>, CliError> {
        let path = self.out_dir.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    fn input(&self, flag: &Option<PathBuf>) -> Result<Trajectory, CliError> {
        let path = flag
            .as_ref()
            .or(self.config.io.input.as_ref())
            .ok_or_else(|| CliError::Config("no input trajectory given (--input or io.input)".into()))?;
        let traj = motion::load_trajectory(path, &ColumnMap::default()).map_err(|e| match e {
            MotionError::Io(e) => CliError::Io(format!("{}: {e}", path.display())),
            other => CliError::from(other),
        })?;
        Ok(traj.with_jitter(self.config.jitter_m, self.seed)?)
    }
}

/// m/s to cm/s for console summaries.
fn cm(x: f64) -> f64 {
    100.0 * x
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| config.io.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let ctx = Context {
        seed: cli.seed.unwrap_or(config.seed),
        config,
        out_dir,
    };
    match cli.command {
        Command::Generate { kind } => generate(&ctx, kind),
        Command::Simulate(input) => simulate(&ctx, &input.input),
        Command::Detect { input, mode } => detect(&ctx, &input.input, mode),
        Command::Tune(args) => tune(&ctx, &args),
        Command::Sweep(args) => sweep(&ctx, &args),
    }
}

fn flag_error(e: MotionError) -> CliError {
    match e {
        MotionError::InvalidProfile(m) | MotionError::InvalidAnchor(m) => CliError::Config(m),
        other => other.into(),
    }
}

fn generate(ctx: &Context, kind: GenerateKind) -> Result<(), CliError> {
    let anchor = ctx.config.primary_anchor().anchor;
    let (traj, common, default_name) = match kind {
        GenerateKind::Lean {
            amplitude,
            duration,
            hold,
            direction,
            common,
        } => {
            let start = common.start.map_or(ctx.config.start_m, Vec3::from);
            let direction = if direction == "radial" {
                motion::radial_direction(&anchor, start).map_err(flag_error)?
            } else {
                let v = crate::parse_vec3(&direction).map_err(CliError::Config)?;
                Vec3::from(v)
                    .normalized()
                    .ok_or_else(|| CliError::Config("direction must be non-zero".into()))?
            };
            let profile = LeanProfile {
                direction,
                amplitude,
                duration,
                hold,
            };
            let traj = motion::gen_lean(&profile, &anchor, start, common.rate).map_err(flag_error)?;
            (traj, common, "lean.csv")
        }
        GenerateKind::Fall {
            dip,
            onset,
            recoil,
            dip_duration,
            recoil_duration,
            settle,
            common,
        } => {
            let start = common.start.map_or(ctx.config.start_m, Vec3::from);
            let profile = FallProfile {
                onset,
                dip_speed: dip,
                recoil_speed: recoil.unwrap_or(0.9 * dip),
                dip_duration,
                recoil_duration,
                settle,
            };
            let traj = motion::gen_fall(&profile, &anchor, start, common.rate).map_err(flag_error)?;
            (traj, common, "fall.csv")
        }
    };
    write_generated(ctx, traj, &common, default_name)
}

fn write_generated(ctx: &Context, traj: Trajectory, common: &CommonGen, default_name: &str) -> Result<(), CliError> {
    let jitter = common.jitter.unwrap_or(ctx.config.jitter_m);
    let traj = traj.with_jitter(jitter, ctx.seed).map_err(flag_error)?;
    let name = common.output.clone().unwrap_or_else(|| PathBuf::from(default_name));
    let out = ctx.create(&name)?;
    motion::write_trajectory(&traj, out)?;

    println!(
        "wrote {} ({} samples, {:.3} s, peak body speed {:.2} cm/s)",
        ctx.out_dir.join(&name).display(),
        traj.len(),
        traj.duration(),
        cm(traj.peak_speed())
    );
    for a in &ctx.config.anchors {
        let cable = motion::trajectory_to_cable(&traj, &a.anchor)?;
        println!("  {}: peak payout {:.2} cm", a.name, cm(cable.excursion()));
    }
    Ok(())
}

fn simulate(ctx: &Context, input: &Option<PathBuf>) -> Result<(), CliError> {
    let traj = ctx.input(input)?;
    let p = &ctx.config.device;
    for a in &ctx.config.anchors {
        let run = tuning::run_pipeline(&traj, &a.anchor, ctx.config.sg, p)?;
        let sim = &run.simulation;
        sim.write_trace(ctx.create(format!("trace_{}.csv", a.name))?)?;
        sim.write_events(ctx.create(format!("events_{}.csv", a.name))?)?;
        let peak_v = run.velocity.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{}: {} LOCK, {} RESET, max payout {:.2} cm, peak cable velocity {:.1} cm/s, lock threshold {:.1} cm/s",
            a.name,
            sim.count(ModeChange::Lock),
            sim.count(ModeChange::Reset),
            cm(sim.max_payout()),
            cm(peak_v),
            cm(device::threshold_velocity(p))
        );
    }
    Ok(())
}

fn detect(ctx: &Context, input: &Option<PathBuf>, mode: Option<ModeArg>) -> Result<(), CliError> {
    let traj = ctx.input(input)?;
    let mut spec = ctx.config.detector;
    if let Some(m) = mode {
        spec.mode = match m {
            ModeArg::Velocity => DetectorMode::VelocityThreshold,
            ModeArg::Fall => DetectorMode::FallSignature,
        };
    }
    for a in &ctx.config.anchors {
        let cable = motion::trajectory_to_cable(&traj, &a.anchor)?;
        let events = signal::detect_series(&cable, ctx.config.sg, &spec)?;
        signal::write_detections(&events, ctx.create(format!("detections_{}.csv", a.name))?)?;
        let locks: Vec<String> = events
            .iter()
            .filter(|e| e.kind == EventKind::LockTrigger)
            .map(|e| format!("{:.3} s ({:.1} cm/s)", e.t, cm(e.magnitude)))
            .collect();
        println!(
            "{}: {} events, lock triggers at [{}]",
            a.name,
            events.len(),
            locks.join(", ")
        );
    }
    Ok(())
}

fn free_param(arg: FreeArg) -> FreeParam {
    match arg {
        FreeArg::FRetain => FreeParam::FRetain,
        FreeArg::MFly => FreeParam::MFly,
        FreeArg::RFly => FreeParam::RFly,
    }
}

fn builtin_suite(ctx: &Context) -> Result<Vec<tuning::Scenario>, CliError> {
    let anchor = ctx.config.primary_anchor().anchor;
    Ok(tuning::standard_suite(
        &anchor,
        ctx.config.start_m,
        motion::CANONICAL_RATE_HZ,
        ctx.config.jitter_m,
        ctx.seed,
    )?)
}

fn tune(ctx: &Context, args: &TuneArgs) -> Result<(), CliError> {
    let target = TuneTarget {
        v_star: args.v_star,
        free: free_param(args.free),
    };
    let solved = tuning::solve_retention(&target, &ctx.config.device)?;
    let mut config = ctx.config.clone();
    config.device = solved;
    let path = ctx.out_dir.join("tuned.toml");
    fs::write(&path, config.to_toml()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    println!(
        "v* = {:.1} cm/s: f_retain = {:.6} N, m_fly = {:.6} kg, r_fly = {:.6} m -> {}",
        cm(args.v_star),
        solved.f_retain,
        solved.m_fly,
        solved.r_fly,
        path.display()
    );

    if args.summary {
        let suite = builtin_suite(ctx)?;
        let rows = tuning::sweep(&SweepGrid::default(), &suite, &solved, &config.detector, config.sg)?;
        tuning::write_summary(&rows, ctx.create("tune_summary.csv")?)?;
        print_rows(&rows);
    }
    Ok(())
}

fn sweep(ctx: &Context, args: &SweepArgs) -> Result<(), CliError> {
    let base = ctx.config.device;
    let mut f_retain = args.f_retain.clone();
    for &v in &args.v_star {
        f_retain.push(tuning::solve_retention(&TuneTarget::retention(v), &base)?.f_retain);
    }
    let grid = SweepGrid {
        f_retain,
        m_fly: args.m_fly.clone(),
        r_fly: args.r_fly.clone(),
        window: args.window.clone(),
        v_lock: args.v_lock.clone(),
    };
    let suite = builtin_suite(ctx)?;
    let rows = tuning::sweep(&grid, &suite, &base, &ctx.config.detector, ctx.config.sg).map_err(|e| match e {
        tuning::TuningError::Signal(s) => CliError::Config(s.to_string()),
        tuning::TuningError::Device(d) => CliError::Config(d.to_string()),
        other => other.into(),
    })?;
    tuning::write_summary(&rows, ctx.create("sweep.csv")?)?;
    print_rows(&rows);
    Ok(())
}

fn print_rows(rows: &[tuning::SweepRow]) {
    let fmt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{:.0}%", 100.0 * v));
    for r in rows {
        println!(
            "point {}: v* {:.1} cm/s, false positives {}, misses {}, median latency {}",
            r.grid_point,
            cm(r.summary.v_star),
            fmt(r.summary.fp_rate),
            fmt(r.summary.miss_rate),
            r.summary
                .median_latency
                .map_or_else(|| "n/a".to_string(), |l| format!("{:.0} ms", 1e3 * l))
        );
    }
}
