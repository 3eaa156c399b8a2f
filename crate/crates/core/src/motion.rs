//! Body-anchor trajectories and their conversion to cable length.
//!
//! A [`Trajectory`] is a uniformly sampled track of the point on the vest where
//! the cable attaches. The cable itself is modelled as a straight segment
//! between a fixed device anchor on the wheelchair and that point, so cable
//! length is a plain Euclidean distance and cable velocity its time derivative.
//!
//! Synthetic trajectories come in two families: minimum-jerk out/hold/return
//! leans standing in for reaching movements, and half-sine velocity lobes
//! (forward surge, backward recovery) standing in for an incipient fall.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::signal::finite_difference;

/// Canonical motion-capture frame rate, Hz.
pub const CANONICAL_RATE_HZ: f64 = 250.0;

/// Maximum deviation of any sample interval from `1 / sample_rate`, seconds.
pub const SPACING_TOLERANCE_S: f64 = 1e-9;

/// Largest accepted distance between the tracked point and the cable attachment.
pub const MAX_BODY_OFFSET_M: f64 = 0.5;

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("time is not strictly increasing at sample {index}")]
    NonMonotonicTime { index: usize },
    #[error("sample interval at sample {index} deviates from 1/{rate} s")]
    NonUniformSampling { index: usize, rate: f64 },
    #[error("trajectory needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid anchor configuration: {0}")]
    InvalidAnchor(String),
    #[error("invalid cable series: {0}")]
    InvalidCableSeries(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MotionError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub pos: Vec3,
}

/// Uniformly sampled body-anchor positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    sample_rate: f64,
    samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new(sample_rate: f64, samples: Vec<Sample>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(MotionError::NonFiniteInput("sample_rate"));
        }
        if samples.len() < 2 {
            return Err(MotionError::TooFewSamples(samples.len()));
        }
        let dt = 1.0 / sample_rate;
        for (i, s) in samples.iter().enumerate() {
            if !s.t.is_finite() || !s.pos.is_finite() {
                return Err(MotionError::NonFiniteInput("sample"));
            }
            if i == 0 {
                continue;
            }
            let step = s.t - samples[i - 1].t;
            if step <= 0.0 {
                return Err(MotionError::NonMonotonicTime { index: i });
            }
            if (step - dt).abs() > SPACING_TOLERANCE_S {
                return Err(MotionError::NonUniformSampling {
                    index: i,
                    rate: sample_rate,
                });
            }
        }
        Ok(Self {
            sample_rate,
            samples,
        })
    }

    /// Builds a trajectory at `sample_rate` starting at t = 0 from positions.
    pub fn from_positions(sample_rate: f64, positions: impl IntoIterator<Item = Vec3>) -> Result<Self> {
        let samples = positions
            .into_iter()
            .enumerate()
            .map(|(i, pos)| Sample {
                t: i as f64 / sample_rate,
                pos,
            })
            .collect();
        Self::new(sample_rate, samples)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn duration(&self) -> f64 {
        self.samples[self.samples.len() - 1].t - self.samples[0].t
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.samples.iter().map(|s| s.pos)
    }

    /// Largest finite-difference speed of the body anchor, m/s.
    pub fn peak_speed(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].pos - w[0].pos).norm() * self.sample_rate)
            .fold(0.0, f64::max)
    }

    /// Same trajectory with every coordinate displaced by an independent
    /// uniform draw in `[-amplitude, amplitude]`. Seeded and reproducible.
    pub fn with_jitter(&self, amplitude: f64, seed: u64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(MotionError::NonFiniteInput("jitter amplitude"));
        }
        if amplitude == 0.0 {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || rng.gen_range(-amplitude..=amplitude);
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                t: s.t,
                pos: s.pos + Vec3::new(draw(), draw(), draw()),
            })
            .collect();
        Ok(Self {
            sample_rate: self.sample_rate,
            samples,
        })
    }
}

/// Where one cable runs: from a fixed point on the wheelchair to an
/// attachment on the vest, given relative to the tracked body point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    #[serde(rename = "device_anchor_m")]
    pub device_anchor: Vec3,
    #[serde(rename = "body_anchor_offset_m", default)]
    pub body_anchor_offset: Vec3,
}

impl AnchorConfig {
    pub fn new(device_anchor: Vec3, body_anchor_offset: Vec3) -> Result<Self> {
        let anchor = Self {
            device_anchor,
            body_anchor_offset,
        };
        anchor.validate()?;
        Ok(anchor)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.device_anchor.is_finite() || !self.body_anchor_offset.is_finite() {
            return Err(MotionError::InvalidAnchor("non-finite coordinate".into()));
        }
        if self.body_anchor_offset.norm() >= MAX_BODY_OFFSET_M {
            return Err(MotionError::InvalidAnchor(format!(
                "body anchor offset {:.3} m is not below {MAX_BODY_OFFSET_M} m",
                self.body_anchor_offset.norm()
            )));
        }
        Ok(())
    }

    /// Cable attachment point for a tracked body position.
    pub fn attachment(&self, body_pos: Vec3) -> Vec3 {
        body_pos + self.body_anchor_offset
    }
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            device_anchor: Vec3::ZERO,
            body_anchor_offset: Vec3::ZERO,
        }
    }
}

/// Out-hold-return lean along a fixed direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeanProfile {
    pub direction: Vec3,
    pub amplitude: f64,
    pub duration: f64,
    pub hold: f64,
}

impl LeanProfile {
    pub fn validate(&self) -> Result<()> {
        if !self.direction.is_finite() || (self.direction.norm() - 1.0).abs() > 1e-9 {
            return Err(MotionError::InvalidProfile("direction must be a unit vector".into()));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(MotionError::InvalidProfile("amplitude must be > 0".into()));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(MotionError::InvalidProfile("duration must be > 0".into()));
        }
        if !(self.hold.is_finite() && self.hold >= 0.0) {
            return Err(MotionError::InvalidProfile("hold must be >= 0".into()));
        }
        Ok(())
    }

    /// Peak anchor speed of the minimum-jerk stroke.
    pub fn peak_speed(&self) -> f64 {
        1.875 * self.amplitude / self.duration
    }

    pub fn total_duration(&self) -> f64 {
        2.0 * self.duration + self.hold
    }
}

/// Forward surge followed by a backward recovery, both as half-sine velocity
/// lobes along the cable's radial direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallProfile {
    pub onset: f64,
    pub dip_speed: f64,
    pub recoil_speed: f64,
    pub dip_duration: f64,
    pub recoil_duration: f64,
    /// Rest appended after the recoil lobe, seconds.
    pub settle: f64,
}

impl Default for FallProfile {
    fn default() -> Self {
        Self {
            onset: 1.0,
            dip_speed: 1.0,
            recoil_speed: 0.9,
            dip_duration: 0.25,
            recoil_duration: 0.25,
            settle: 1.5,
        }
    }
}

impl FallProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dip_speed", self.dip_speed),
            ("recoil_speed", self.recoil_speed),
            ("dip_duration", self.dip_duration),
            ("recoil_duration", self.recoil_duration),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(MotionError::InvalidProfile(format!("{name} must be > 0")));
            }
        }
        if !(self.onset.is_finite() && self.onset >= 0.0) {
            return Err(MotionError::InvalidProfile("onset must be >= 0".into()));
        }
        if !(self.settle.is_finite() && self.settle >= 0.0) {
            return Err(MotionError::InvalidProfile("settle must be >= 0".into()));
        }
        if self.recoil_excursion() > self.dip_excursion() {
            return Err(MotionError::InvalidProfile(
                "recoil would retract past the starting position".into(),
            ));
        }
        Ok(())
    }

    /// Radial displacement accumulated over the forward lobe.
    pub fn dip_excursion(&self) -> f64 {
        2.0 * self.dip_speed * self.dip_duration / PI
    }

    pub fn recoil_excursion(&self) -> f64 {
        2.0 * self.recoil_speed * self.recoil_duration / PI
    }

    pub fn total_duration(&self) -> f64 {
        self.onset + self.dip_duration + self.recoil_duration + self.settle
    }

    /// Radial displacement from the start position at time `t`.
    fn displacement(&self, t: f64) -> f64 {
        let dip_end = self.onset + self.dip_duration;
        let recoil_end = dip_end + self.recoil_duration;
        if t <= self.onset {
            0.0
        } else if t < dip_end {
            let phase = PI * (t - self.onset) / self.dip_duration;
            self.dip_speed * self.dip_duration / PI * (1.0 - phase.cos())
        } else if t < recoil_end {
            let phase = PI * (t - dip_end) / self.recoil_duration;
            self.dip_excursion() - self.recoil_speed * self.recoil_duration / PI * (1.0 - phase.cos())
        } else {
            self.dip_excursion() - self.recoil_excursion()
        }
    }
}

/// Minimum-jerk position fraction, 0 at `tau = 0` and 1 at `tau = 1`.
pub fn minimum_jerk(tau: f64) -> f64 {
    let tau = tau.clamp(0.0, 1.0);
    let t3 = tau * tau * tau;
    t3 * (10.0 - 15.0 * tau + 6.0 * tau * tau)
}

/// Cable length and payout velocity (positive = extension).
#[derive(Debug, Clone, PartialEq)]
pub struct CableSeries {
    pub sample_rate: f64,
    pub t0: f64,
    pub length: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl CableSeries {
    pub fn new(sample_rate: f64, t0: f64, length: Vec<f64>, velocity: Vec<f64>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) || !t0.is_finite() {
            return Err(MotionError::NonFiniteInput("cable series timing"));
        }
        if length.len() != velocity.len() {
            return Err(MotionError::InvalidCableSeries(format!(
                "{} lengths but {} velocities",
                length.len(),
                velocity.len()
            )));
        }
        if let Some(i) = length.iter().position(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(MotionError::InvalidCableSeries(format!(
                "length[{i}] = {} is not a finite non-negative value",
                length[i]
            )));
        }
        Ok(Self {
            sample_rate,
            t0,
            length,
            velocity,
        })
    }

    pub fn len(&self) -> usize {
        self.length.len()
    }

    pub fn is_empty(&self) -> bool {
        self.length.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    /// Largest minus smallest cable length.
    pub fn excursion(&self) -> f64 {
        let (lo, hi) = self
            .length
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| (lo.min(l), hi.max(l)));
        if self.length.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(out);
        w.write_record(["t", "length_m", "velocity_mps"])?;
        for (i, (l, v)) in self.length.iter().zip(&self.velocity).enumerate() {
            w.write_record([self.time(i).to_string(), l.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Straight-line cable length between the device anchor and the attachment
/// point for `body_pos`.
pub fn cable_length(anchor: &AnchorConfig, body_pos: Vec3) -> Result<f64> {
    if !body_pos.is_finite() || !anchor.device_anchor.is_finite() || !anchor.body_anchor_offset.is_finite() {
        return Err(MotionError::NonFiniteInput("cable geometry"));
    }
    Ok((anchor.attachment(body_pos) - anchor.device_anchor).norm())
}

/// Cable length per sample plus unfiltered central-difference velocity.
pub fn trajectory_to_cable(traj: &Trajectory, anchor: &AnchorConfig) -> Result<CableSeries> {
    let length = traj
        .positions()
        .map(|p| cable_length(anchor, p))
        .collect::<Result<Vec<_>>>()?;
    let velocity = finite_difference(&length, traj.sample_rate());
    CableSeries::new(traj.sample_rate(), traj.start_time(), length, velocity)
}

fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(MotionError::InvalidProfile("sample rate must be > 0".into()))
    }
}

fn sample_count(duration: f64, rate: f64) -> usize {
    (duration * rate).round() as usize + 1
}

/// Minimum-jerk lean: out over `duration`, hold, back over `duration`.
pub fn gen_lean(profile: &LeanProfile, anchor: &AnchorConfig, start_pos: Vec3, rate: f64) -> Result<Trajectory> {
    profile.validate()?;
    anchor.validate()?;
    check_rate(rate)?;
    if !start_pos.is_finite() {
        return Err(MotionError::NonFiniteInput("start position"));
    }
    let d = profile.duration;
    let back = d + profile.hold;
    let n = sample_count(profile.total_duration(), rate);
    let positions = (0..n).map(|i| {
        let t = i as f64 / rate;
        let s = if t < d {
            minimum_jerk(t / d)
        } else if t <= back {
            1.0
        } else {
            1.0 - minimum_jerk((t - back) / d)
        };
        start_pos + profile.direction * (profile.amplitude * s)
    });
    Trajectory::from_positions(rate, positions)
}

/// Radial unit vector from the device anchor through the attachment point.
pub fn radial_direction(anchor: &AnchorConfig, body_pos: Vec3) -> Result<Vec3> {
    (anchor.attachment(body_pos) - anchor.device_anchor)
        .normalized()
        .ok_or_else(|| MotionError::InvalidProfile("attachment coincides with device anchor".into()))
}

/// Incipient-fall episode along the cable's radial direction.
pub fn gen_fall(profile: &FallProfile, anchor: &AnchorConfig, start_pos: Vec3, rate: f64) -> Result<Trajectory> {
    profile.validate()?;
    anchor.validate()?;
    check_rate(rate)?;
    if !start_pos.is_finite() {
        return Err(MotionError::NonFiniteInput("start position"));
    }
    let dir = radial_direction(anchor, start_pos)?;
    let n = sample_count(profile.total_duration(), rate);
    let positions = (0..n).map(|i| start_pos + dir * profile.displacement(i as f64 / rate));
    Trajectory::from_positions(rate, positions)
}

/// Maps the four trajectory roles onto CSV header names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub t: String,
    pub x: String,
    pub y: String,
    pub z: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            t: "t".into(),
            x: "x".into(),
            y: "y".into(),
            z: "z".into(),
        }
    }
}

impl ColumnMap {
    /// Builds a map from `header name -> role` pairs; roles not mentioned keep
    /// their default header. Unknown roles are rejected.
    pub fn from_names(names: &HashMap<String, String>) -> Result<Self> {
        let mut map = Self::default();
        for (name, role) in names {
            let slot = match role.as_str() {
                "t" => &mut map.t,
                "x" => &mut map.x,
                "y" => &mut map.y,
                "z" => &mut map.z,
                other => return Err(MotionError::MissingColumn(format!("unknown role '{other}'"))),
            };
            *slot = name.clone();
        }
        Ok(map)
    }
}

/// Sample rate implied by the time column, snapped to 1 µHz so that rates
/// written as exact decimals reload bit-identically.
fn infer_rate(times: &[f64]) -> f64 {
    let span = times[times.len() - 1] - times[0];
    let rate = (times.len() - 1) as f64 / span;
    (rate * 1e6).round() / 1e6
}

pub fn read_trajectory<R: Read>(input: R, columns: &ColumnMap) -> Result<Trajectory> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MotionError::MissingColumn(name.to_string()))
    };
    let idx = [find(&columns.t)?, find(&columns.x)?, find(&columns.y)?, find(&columns.z)?];

    let mut times = Vec::new();
    let mut positions = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut vals = [0.0; 4];
        for (v, &col) in vals.iter_mut().zip(&idx) {
            let field = record.get(col).ok_or_else(|| MotionError::Parse {
                line,
                message: "short row".into(),
            })?;
            *v = field.parse().map_err(|e| MotionError::Parse {
                line,
                message: format!("'{field}': {e}"),
            })?;
        }
        times.push(vals[0]);
        positions.push(Vec3::new(vals[1], vals[2], vals[3]));
    }

    if times.len() < 2 {
        return Err(MotionError::TooFewSamples(times.len()));
    }
    if let Some(i) = (1..times.len()).find(|&i| times[i] <= times[i - 1]) {
        return Err(MotionError::NonMonotonicTime { index: i });
    }
    let rate = infer_rate(&times);
    let samples = times
        .into_iter()
        .zip(positions)
        .map(|(t, pos)| Sample { t, pos })
        .collect();
    Trajectory::new(rate, samples)
}

pub fn load_trajectory(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<Trajectory> {
    read_trajectory(File::open(path)?, columns)
}

/// Writes `t,x,y,z` with shortest round-trip decimal formatting.
pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(["t", "x", "y", "z"])?;
    for s in traj.samples() {
        w.write_record([s.t.to_string(), s.pos.x.to_string(), s.pos.y.to_string(), s.pos.z.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trajectory(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    write_trajectory(traj, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin_anchor() -> AnchorConfig {
        AnchorConfig::default()
    }

    fn x_lean(amplitude: f64, duration: f64, hold: f64) -> LeanProfile {
        LeanProfile {
            direction: Vec3::new(1.0, 0.0, 0.0),
            amplitude,
            duration,
            hold,
        }
    }

    #[test]
    fn three_row_csv_at_4ms_is_250hz() {
        let csv = "t,x,y,z\n0,0,0,0\n0.004,0.1,0,0\n0.008,0.2,0,0\n";
        let traj = read_trajectory(csv.as_bytes(), &ColumnMap::default()).unwrap();
        assert_eq!(traj.sample_rate(), 250.0);
        assert_eq!(traj.len(), 3);
    }

    #[test]
    fn duplicated_timestamp_is_non_monotonic() {
        let csv = "t,x,y,z\n0,0,0,0\n0.004,0,0,0\n0.004,0,0,0\n";
        let err = read_trajectory(csv.as_bytes(), &ColumnMap::default()).unwrap_err();
        assert!(matches!(err, MotionError::NonMonotonicTime { index: 2 }));
    }

    #[test]
    fn ingestion_errors() {
        let cols = ColumnMap::default();
        let missing = read_trajectory("t,x,y\n0,0,0\n".as_bytes(), &cols).unwrap_err();
        assert!(matches!(missing, MotionError::MissingColumn(c) if c == "z"));

        let short = read_trajectory("t,x,y,z\n0,0,0,0\n".as_bytes(), &cols).unwrap_err();
        assert!(matches!(short, MotionError::TooFewSamples(1)));

        let uneven = "t,x,y,z\n0,0,0,0\n0.004,0,0,0\n0.009,0,0,0\n";
        let err = read_trajectory(uneven.as_bytes(), &cols).unwrap_err();
        assert!(matches!(err, MotionError::NonUniformSampling { .. }));

        let junk = read_trajectory("t,x,y,z\n0,0,0,0\n0.004,a,0,0\n".as_bytes(), &cols).unwrap_err();
        assert!(matches!(junk, MotionError::Parse { .. }));
    }

    #[test]
    fn column_map_renames_roles() {
        let csv = "time,px,py,pz,extra\n0,1,2,3,9\n0.01,1,2,3,9\n";
        let names: HashMap<String, String> = [("time", "t"), ("px", "x"), ("py", "y"), ("pz", "z")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let traj = read_trajectory(csv.as_bytes(), &ColumnMap::from_names(&names).unwrap()).unwrap();
        assert_eq!(traj.sample_rate(), 100.0);
        assert_eq!(traj.samples()[1].pos, Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn cable_length_examples() {
        let a = origin_anchor();
        assert_eq!(cable_length(&a, Vec3::new(0.6, 0.0, 0.0)).unwrap(), 0.6);
        assert_eq!(cable_length(&a, Vec3::ZERO).unwrap(), 0.0);
        // 3-4-5 triangle, checked against an independent hypot evaluation.
        let l = cable_length(&a, Vec3::new(0.3, 0.4, 0.0)).unwrap();
        assert!((l - 0.3f64.hypot(0.4)).abs() < 1e-15);
        assert!((l - 0.5).abs() < 1e-15);
        assert!(matches!(
            cable_length(&a, Vec3::new(f64::NAN, 0.0, 0.0)),
            Err(MotionError::NonFiniteInput(_))
        ));
    }

    #[test]
    fn offset_is_applied_to_body_point() {
        let a = AnchorConfig::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.1, 0.0)).unwrap();
        let l = cable_length(&a, Vec3::new(0.0, 0.2, 0.0)).unwrap();
        assert!((l - 0.3).abs() < 1e-15);
        assert!(AnchorConfig::new(Vec3::ZERO, Vec3::new(0.5, 0.0, 0.0)).is_err());
    }

    #[test]
    fn stationary_trajectory_has_zero_velocity() {
        let traj = Trajectory::from_positions(250.0, std::iter::repeat_n(Vec3::new(0.4, 0.1, 0.2), 50)).unwrap();
        let cable = trajectory_to_cable(&traj, &origin_anchor()).unwrap();
        assert!(cable.velocity.iter().all(|&v| v == 0.0));
        assert!(cable.length.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn radial_recession_at_constant_speed() {
        let traj = Trajectory::from_positions(250.0, (0..100).map(|i| Vec3::new(0.3 + 0.5 * i as f64 / 250.0, 0.0, 0.0))).unwrap();
        let cable = trajectory_to_cable(&traj, &origin_anchor()).unwrap();
        for v in &cable.velocity[1..99] {
            assert!((v - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn tangential_motion_changes_no_cable_length() {
        let r = 0.55;
        let omega = 1.3;
        let traj = Trajectory::from_positions(
            250.0,
            (0..500).map(|i| {
                let a = omega * i as f64 / 250.0;
                Vec3::new(r * a.cos(), r * a.sin(), 0.0)
            }),
        )
        .unwrap();
        let cable = trajectory_to_cable(&traj, &origin_anchor()).unwrap();
        assert!(cable.velocity.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn lean_peak_speed_matches_minimum_jerk_factor() {
        // Brute-force peak of the analytic minimum-jerk derivative 30 tau^2 (1 - tau)^2.
        let peak_factor = (0..=100_000)
            .map(|i| {
                let tau = i as f64 / 100_000.0;
                30.0 * tau * tau * (1.0 - tau) * (1.0 - tau)
            })
            .fold(0.0, f64::max);
        assert!((peak_factor - 1.875).abs() < 1e-9);

        let profile = x_lean(0.60, 2.0, 0.5);
        assert!((profile.peak_speed() - 0.5625).abs() < 1e-12);
        let traj = gen_lean(&profile, &origin_anchor(), Vec3::new(0.3, 0.0, 0.0), 1000.0).unwrap();
        assert!((traj.peak_speed() - 0.5625).abs() < 1e-5);
        assert!(traj.peak_speed() < 0.8);
    }

    #[test]
    fn lean_profile_validation() {
        let a = origin_anchor();
        let start = Vec3::new(0.3, 0.0, 0.0);
        assert!(matches!(gen_lean(&x_lean(0.0, 2.0, 0.0), &a, start, 250.0), Err(MotionError::InvalidProfile(_))));
        assert!(matches!(gen_lean(&x_lean(0.5, 0.0, 0.0), &a, start, 250.0), Err(MotionError::InvalidProfile(_))));
        let mut skew = x_lean(0.5, 1.0, 0.0);
        skew.direction = Vec3::new(1.0, 1.0, 0.0);
        assert!(matches!(gen_lean(&skew, &a, start, 250.0), Err(MotionError::InvalidProfile(_))));
        assert!(gen_lean(&x_lean(0.5, 1.0, 0.0), &a, start, 0.0).is_err());
    }

    #[test]
    fn radial_lean_pays_out_its_amplitude() {
        let cable = trajectory_to_cable(
            &gen_lean(&x_lean(0.58, 2.0, 0.5), &origin_anchor(), Vec3::new(0.3, 0.0, 0.0), 250.0).unwrap(),
            &origin_anchor(),
        )
        .unwrap();
        assert!((cable.excursion() - 0.58).abs() < 1e-6);
        let first = cable.length[0];
        assert!((cable.length[cable.len() - 1] - first).abs() < 1e-12);
    }

    #[test]
    fn fall_lobes_reach_their_peaks() {
        let profile = FallProfile {
            onset: 0.5,
            ..FallProfile::default()
        };
        let a = origin_anchor();
        let cable = trajectory_to_cable(&gen_fall(&profile, &a, Vec3::new(0.4, 0.0, 0.0), 250.0).unwrap(), &a).unwrap();
        let vmax = cable.velocity.iter().cloned().fold(f64::MIN, f64::max);
        let vmin = cable.velocity.iter().cloned().fold(f64::MAX, f64::min);
        assert!((vmax - 1.0).abs() < 1e-3, "{vmax}");
        assert!((vmin + 0.9).abs() < 1e-3, "{vmin}");
        assert!(cable.length.iter().all(|&l| l >= 0.4 - 1e-12));
    }

    #[test]
    fn symmetric_fall_returns_to_start() {
        let profile = FallProfile {
            onset: 0.2,
            dip_speed: 0.8,
            recoil_speed: 0.8,
            dip_duration: 0.3,
            recoil_duration: 0.3,
            settle: 0.2,
        };
        let start = Vec3::new(0.0, 0.5, 0.2);
        let traj = gen_fall(&profile, &origin_anchor(), start, 250.0).unwrap();
        let end = traj.samples()[traj.len() - 1].pos;
        assert!((end - start).norm() < 1e-12);
    }

    #[test]
    fn fall_profile_validation() {
        let a = origin_anchor();
        let start = Vec3::new(0.4, 0.0, 0.0);
        let bad = [
            FallProfile { dip_speed: 0.0, ..FallProfile::default() },
            FallProfile { recoil_speed: -1.0, ..FallProfile::default() },
            FallProfile { onset: -0.1, ..FallProfile::default() },
            FallProfile { dip_duration: 0.0, ..FallProfile::default() },
            FallProfile { recoil_speed: 2.0, ..FallProfile::default() },
        ];
        for p in bad {
            assert!(matches!(gen_fall(&p, &a, start, 250.0), Err(MotionError::InvalidProfile(_))), "{p:?}");
        }
        assert!(gen_fall(&FallProfile::default(), &a, Vec3::ZERO, 250.0).is_err());
    }

    #[test]
    fn jitter_is_seeded() {
        let traj = gen_lean(&x_lean(0.3, 1.0, 0.0), &origin_anchor(), Vec3::new(0.3, 0.0, 0.0), 250.0).unwrap();
        let a = traj.with_jitter(0.001, 7).unwrap();
        let b = traj.with_jitter(0.001, 7).unwrap();
        let c = traj.with_jitter(0.001, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.samples().iter().zip(traj.samples()).all(|(p, q)| (p.pos - q.pos).x.abs() <= 0.001));
        assert_eq!(traj.with_jitter(0.0, 1).unwrap(), traj);
    }

    #[test]
    fn cable_series_rejects_bad_input() {
        assert!(CableSeries::new(250.0, 0.0, vec![0.1, 0.2], vec![0.0]).is_err());
        assert!(CableSeries::new(250.0, 0.0, vec![0.1, -0.2], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn cable_series_csv_header() {
        let s = CableSeries::new(250.0, 0.0, vec![0.5, 0.5], vec![0.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t,length_m,velocity_mps\n0,0.5,0\n0.004,0.5,0\n");
    }
}
