//! Inverse design of the lock threshold and scenario-suite evaluation.
//!
//! The quasi-static lock criterion `m w^2 r = F` inverts in closed form for
//! any one of the flyweight mass, flyweight radius or magnet breakaway force,
//! so a target lock velocity maps directly to a parameter value. Suites of
//! labelled trajectories then measure how a parameter set trades false locks
//! during everyday leaning against missed falls.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{self, DeviceError, DeviceParams, ModeChange, Simulation};
use crate::geometry::Vec3;
use crate::motion::{self, AnchorConfig, CableSeries, FallProfile, LeanProfile, MotionError, Trajectory};
use crate::signal::{self, DetectorSpec, EventKind, SgSpec, SignalError};

#[derive(Debug, Error)]
pub enum TuningError {
    #[error("infeasible target: {0}")]
    InfeasibleTarget(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TuningError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParam {
    #[default]
    FRetain,
    MFly,
    RFly,
}

/// Desired lock velocity with the one parameter allowed to move; every other
/// mechanism constant is held at its current value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneTarget {
    pub v_star: f64,
    pub free: FreeParam,
}

impl TuneTarget {
    pub fn retention(v_star: f64) -> Self {
        Self {
            v_star,
            free: FreeParam::FRetain,
        }
    }
}

/// Returns `p` with the free parameter set so that the lock threshold equals
/// `target.v_star`.
pub fn solve_retention(target: &TuneTarget, p: &DeviceParams) -> Result<DeviceParams> {
    p.validate()?;
    let v = target.v_star;
    if !(v.is_finite() && v > 0.0) {
        return Err(TuningError::InfeasibleTarget(format!("target velocity {v} m/s must be positive")));
    }
    let omega = v / p.r_capstan;
    let omega_sq = omega * omega;
    let mut out = *p;
    let (name, value) = match target.free {
        FreeParam::FRetain => {
            out.f_retain = p.m_fly * p.r_fly * omega_sq;
            ("f_retain", out.f_retain)
        }
        FreeParam::MFly => {
            out.m_fly = p.f_retain / (p.r_fly * omega_sq);
            ("m_fly", out.m_fly)
        }
        FreeParam::RFly => {
            out.r_fly = p.f_retain / (p.m_fly * omega_sq);
            ("r_fly", out.r_fly)
        }
    };
    if !(value.is_finite() && value > 0.0) {
        return Err(TuningError::InfeasibleTarget(format!("{name} would be {value}")));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truth {
    /// Everyday movement: must not lock.
    Adl,
    /// Fall episode starting at `onset` seconds: must lock.
    Fall { onset: f64 },
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub trajectory: Trajectory,
    pub anchor: AnchorConfig,
    pub truth: Truth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub scenario_id: String,
    pub locked: bool,
    pub lock_time: Option<f64>,
    pub max_payout: f64,
    pub false_positive: bool,
    pub miss: bool,
    /// Lock time minus ground-truth fall onset.
    pub latency: Option<f64>,
    /// First detector lock trigger, if any.
    pub detector_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSummary {
    pub adl_count: usize,
    pub fall_count: usize,
    /// `None` when the suite has no ADL scenarios.
    pub fp_rate: Option<f64>,
    /// `None` when the suite has no fall scenarios.
    pub miss_rate: Option<f64>,
    pub median_latency: Option<f64>,
    pub detector_fp_rate: Option<f64>,
    pub detector_miss_rate: Option<f64>,
    pub v_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub reports: Vec<ScenarioReport>,
    pub summary: SuiteSummary,
}

/// Intermediate and final products of driving the device with a trajectory.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub cable: CableSeries,
    /// SG-smoothed cable velocity that drives the device.
    pub velocity: Vec<f64>,
    pub simulation: Simulation,
}

/// Geometry, SG smoothing of cable length, differentiation, device model.
pub fn run_pipeline(traj: &Trajectory, anchor: &AnchorConfig, sg: SgSpec, p: &DeviceParams) -> Result<PipelineRun> {
    let cable = motion::trajectory_to_cable(traj, anchor)?;
    let velocity = signal::filtered_velocity(&cable, sg)?;
    let simulation = device::simulate(&velocity, cable.sample_rate, cable.t0, p)?;
    Ok(PipelineRun {
        cable,
        velocity,
        simulation,
    })
}

/// Runs geometry, smoothing, the device model and the detector on one scenario.
pub fn evaluate_scenario(sc: &Scenario, p: &DeviceParams, det: &DetectorSpec, sg: SgSpec) -> Result<ScenarioReport> {
    let PipelineRun {
        cable,
        velocity,
        simulation: sim,
    } = run_pipeline(&sc.trajectory, &sc.anchor, sg, p)?;
    let detections = signal::detect(&velocity, cable.sample_rate, det)?;

    let lock_time = sim.first(ModeChange::Lock);
    let locked = lock_time.is_some();
    let (false_positive, miss, latency) = match sc.truth {
        Truth::Adl => (locked, false, None),
        Truth::Fall { onset } => (false, !locked, lock_time.map(|t| t - onset)),
    };
    Ok(ScenarioReport {
        scenario_id: sc.id.clone(),
        locked,
        lock_time,
        max_payout: sim.max_payout(),
        false_positive,
        miss,
        latency,
        detector_time: detections
            .iter()
            .find(|e| e.kind == EventKind::LockTrigger)
            .map(|e| e.t + cable.t0),
    })
}

fn rate(count: usize, of: usize) -> Option<f64> {
    (of > 0).then(|| count as f64 / of as f64)
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

fn summarize(suite: &[Scenario], reports: &[ScenarioReport], p: &DeviceParams) -> SuiteSummary {
    let is_adl = |sc: &Scenario| matches!(sc.truth, Truth::Adl);
    let adl_count = suite.iter().filter(|s| is_adl(s)).count();
    let fall_count = suite.len() - adl_count;
    let fp = reports.iter().filter(|r| r.false_positive).count();
    let misses = reports.iter().filter(|r| r.miss).count();
    let det_fp = suite
        .iter()
        .zip(reports)
        .filter(|(s, r)| is_adl(s) && r.detector_time.is_some())
        .count();
    let det_miss = suite
        .iter()
        .zip(reports)
        .filter(|(s, r)| !is_adl(s) && r.detector_time.is_none())
        .count();
    SuiteSummary {
        adl_count,
        fall_count,
        fp_rate: rate(fp, adl_count),
        miss_rate: rate(misses, fall_count),
        median_latency: median(reports.iter().filter_map(|r| r.latency).collect()),
        detector_fp_rate: rate(det_fp, adl_count),
        detector_miss_rate: rate(det_miss, fall_count),
        v_star: device::threshold_velocity(p),
    }
}

/// Evaluates every scenario (in parallel) and summarises the suite. Reports
/// come back in suite order.
pub fn evaluate_suite(suite: &[Scenario], p: &DeviceParams, det: &DetectorSpec, sg: SgSpec) -> Result<SuiteReport> {
    p.validate()?;
    det.validate()?;
    sg.validate()?;
    let reports = suite
        .par_iter()
        .map(|sc| evaluate_scenario(sc, p, det, sg))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(suite, &reports, p);
    Ok(SuiteReport { reports, summary })
}

/// Values to sweep per axis. An empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub f_retain: Vec<f64>,
    pub m_fly: Vec<f64>,
    pub r_fly: Vec<f64>,
    pub window: Vec<usize>,
    pub v_lock: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub grid_point: usize,
    pub params: DeviceParams,
    pub sg: SgSpec,
    pub detector: DetectorSpec,
    pub summary: SuiteSummary,
}

fn axis<T: Copy>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

/// Expands the grid in lexicographic order (f_retain outermost, v_lock
/// innermost) and evaluates the suite at every point.
pub fn sweep(
    grid: &SweepGrid,
    suite: &[Scenario],
    base: &DeviceParams,
    det: &DetectorSpec,
    sg: SgSpec,
) -> Result<Vec<SweepRow>> {
    let mut points = Vec::new();
    for &f_retain in &axis(&grid.f_retain, base.f_retain) {
        for &m_fly in &axis(&grid.m_fly, base.m_fly) {
            for &r_fly in &axis(&grid.r_fly, base.r_fly) {
                for &window in &axis(&grid.window, sg.window) {
                    for &v_lock in &axis(&grid.v_lock, det.v_lock) {
                        let params = DeviceParams {
                            f_retain,
                            m_fly,
                            r_fly,
                            ..*base
                        };
                        let sg = SgSpec { window, ..sg };
                        let detector = DetectorSpec { v_lock, ..*det };
                        points.push((params, sg, detector));
                    }
                }
            }
        }
    }
    points
        .into_par_iter()
        .enumerate()
        .map(|(grid_point, (params, sg, detector))| {
            let report = evaluate_suite(suite, &params, &detector, sg)?;
            Ok(SweepRow {
                grid_point,
                params,
                sg,
                detector,
                summary: report.summary,
            })
        })
        .collect()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// Writes `grid_point,fp_rate,miss_rate,median_latency_s,v_star_mps`;
/// undefined rates are written as `NA`.
pub fn write_summary<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(["grid_point", "fp_rate", "miss_rate", "median_latency_s", "v_star_mps"])?;
    for r in rows {
        w.write_record([
            r.grid_point.to_string(),
            fmt_opt(r.summary.fp_rate),
            fmt_opt(r.summary.miss_rate),
            fmt_opt(r.summary.median_latency),
            r.summary.v_star.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Ten radial leans (peak speed at most 0.6 m/s) and ten falls (forward
/// surge 1.0 to 1.45 m/s, onset at 1 s), optionally with seeded marker jitter.
pub fn standard_suite(anchor: &AnchorConfig, start_pos: Vec3, rate: f64, jitter: f64, seed: u64) -> Result<Vec<Scenario>> {
    let radial = motion::radial_direction(anchor, start_pos)?;
    let mut suite = Vec::with_capacity(20);
    for i in 0..10 {
        let amplitude = 0.30 + 0.03 * i as f64;
        let profile = LeanProfile {
            direction: radial,
            amplitude,
            duration: (amplitude * 1.875 / 0.6).max(1.0),
            hold: 0.5,
        };
        let traj = motion::gen_lean(&profile, anchor, start_pos, rate)?.with_jitter(jitter, seed.wrapping_add(i))?;
        suite.push(Scenario {
            id: format!("lean_{i:02}"),
            trajectory: traj,
            anchor: *anchor,
            truth: Truth::Adl,
        });
    }
    for i in 0..10 {
        let dip = 1.0 + 0.05 * i as f64;
        let profile = FallProfile {
            onset: 1.0,
            dip_speed: dip,
            recoil_speed: 0.9 * dip,
            ..FallProfile::default()
        };
        let traj = motion::gen_fall(&profile, anchor, start_pos, rate)?.with_jitter(jitter, seed.wrapping_add(100 + i))?;
        suite.push(Scenario {
            id: format!("fall_{i:02}"),
            trajectory: traj,
            anchor: *anchor,
            truth: Truth::Fall { onset: profile.onset },
        });
    }
    Ok(suite)
}
