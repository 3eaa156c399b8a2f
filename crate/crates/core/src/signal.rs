//! Smoothing, differentiation and event detection on cable series.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::CableSeries;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("series of {len} samples is shorter than the required {required}")]
    SeriesTooShort { len: usize, required: usize },
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SignalError> = std::result::Result<T, E>;

/// Savitzky-Golay window and polynomial order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgSpec {
    pub window: usize,
    pub order: usize,
}

impl Default for SgSpec {
    /// 31 samples is 124 ms at 250 Hz: short enough to keep 250 ms fall lobes.
    fn default() -> Self {
        Self { window: 31, order: 3 }
    }
}

impl SgSpec {
    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(SignalError::InvalidSpec("order must be >= 1".into()));
        }
        if self.window.is_multiple_of(2) {
            return Err(SignalError::InvalidSpec(format!("window {} is not odd", self.window)));
        }
        if self.window < self.order + 2 {
            return Err(SignalError::InvalidSpec(format!(
                "window {} must be at least order + 2 = {}",
                self.window,
                self.order + 2
            )));
        }
        Ok(())
    }

    pub fn half_width(&self) -> usize {
        self.window / 2
    }
}

/// Precomputed least-squares weights, one set per evaluation position inside
/// the window. The centre set is used for interior samples; the others give
/// the one-sided fits at the two ends of the series.
#[derive(Debug, Clone)]
pub struct SavitzkyGolay {
    spec: SgSpec,
    weights: Vec<Vec<f64>>,
}

impl SavitzkyGolay {
    pub fn new(spec: SgSpec) -> Result<Self> {
        spec.validate()?;
        let w = spec.window;
        let h = spec.half_width() as f64;
        let cols = spec.order + 1;
        // Abscissae scaled to [-1, 1] to keep the normal equations well conditioned.
        let xs: Vec<f64> = (0..w).map(|j| (j as f64 - h) / h).collect();
        let vander = DMatrix::from_fn(w, cols, |r, c| xs[r].powi(c as i32));
        let gram = vander.transpose() * &vander;
        let chol = gram
            .cholesky()
            .ok_or_else(|| SignalError::InvalidSpec("singular fitting matrix".into()))?;
        let weights = xs
            .iter()
            .map(|&xe| {
                let basis = DVector::from_fn(cols, |c, _| xe.powi(c as i32));
                let z = chol.solve(&basis);
                (&vander * z).iter().copied().collect()
            })
            .collect();
        Ok(Self { spec, weights })
    }

    pub fn spec(&self) -> SgSpec {
        self.spec
    }

    pub fn apply(&self, series: &[f64]) -> Result<Vec<f64>> {
        let w = self.spec.window;
        let h = self.spec.half_width();
        let n = series.len();
        if n < w {
            return Err(SignalError::SeriesTooShort { len: n, required: w });
        }
        let dot = |start: usize, weights: &[f64]| -> f64 {
            series[start..start + w].iter().zip(weights).map(|(x, c)| x * c).sum()
        };
        let out = (0..n)
            .map(|i| {
                if i < h {
                    dot(0, &self.weights[i])
                } else if i + h >= n {
                    dot(n - w, &self.weights[i + w - n])
                } else {
                    dot(i - h, &self.weights[h])
                }
            })
            .collect();
        Ok(out)
    }
}

/// Savitzky-Golay smoothing of a whole series.
pub fn sg_filter(series: &[f64], spec: SgSpec) -> Result<Vec<f64>> {
    SavitzkyGolay::new(spec)?.apply(series)
}

/// Derivative by central differences, second-order one-sided at the ends.
/// Accepts any length; two samples give a single forward difference.
pub(crate) fn finite_difference(series: &[f64], rate: f64) -> Vec<f64> {
    let n = series.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        2 => {
            let d = (series[1] - series[0]) * rate;
            vec![d, d]
        }
        _ => {
            let half = 0.5 * rate;
            let mut out = Vec::with_capacity(n);
            out.push((4.0 * (series[1] - series[0]) - (series[2] - series[0])) * half);
            out.extend(series.windows(3).map(|w| (w[2] - w[0]) * half));
            out.push((4.0 * (series[n - 1] - series[n - 2]) - (series[n - 1] - series[n - 3])) * half);
            out
        }
    }
}

pub fn differentiate(series: &[f64], rate: f64) -> Result<Vec<f64>> {
    if series.len() < 3 {
        return Err(SignalError::SeriesTooShort {
            len: series.len(),
            required: 3,
        });
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(SignalError::InvalidSpec("rate must be > 0".into()));
    }
    Ok(finite_difference(series, rate))
}

/// Cable velocity from SG-smoothed cable length.
pub fn filtered_velocity(cable: &CableSeries, sg: SgSpec) -> Result<Vec<f64>> {
    let smooth = sg_filter(&cable.length, sg)?;
    differentiate(&smooth, cable.sample_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorMode {
    VelocityThreshold,
    FallSignature,
}

/// Which cable direction counts as the forward surge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    #[default]
    Payout,
    Retract,
}

impl Polarity {
    fn sign(self) -> f64 {
        match self {
            Polarity::Payout => 1.0,
            Polarity::Retract => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Payout => Polarity::Retract,
            Polarity::Retract => Polarity::Payout,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSpec {
    pub mode: DetectorMode,
    #[serde(rename = "v_lock_mps")]
    pub v_lock: f64,
    #[serde(rename = "dip_min_mps")]
    pub dip_min: f64,
    #[serde(rename = "recoil_min_mps")]
    pub recoil_min: f64,
    #[serde(rename = "pair_window_s")]
    pub pair_window: f64,
    #[serde(rename = "refractory_s")]
    pub refractory: f64,
    #[serde(default)]
    pub polarity: Polarity,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            mode: DetectorMode::VelocityThreshold,
            v_lock: 0.9,
            dip_min: 0.9,
            recoil_min: 0.5,
            pair_window: 0.5,
            refractory: 1.0,
            polarity: Polarity::Payout,
        }
    }
}

impl DetectorSpec {
    /// Threshold used to replay the bench prototype, which locked near 62.8 cm/s.
    pub fn prototype() -> Self {
        Self {
            v_lock: 0.628,
            ..Self::default()
        }
    }

    pub fn fall_signature() -> Self {
        Self {
            mode: DetectorMode::FallSignature,
            ..Self::default()
        }
    }

    /// Same detector watching the opposite cable direction.
    pub fn mirrored(&self) -> Self {
        Self {
            polarity: self.polarity.flipped(),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_lock", self.v_lock),
            ("dip_min", self.dip_min),
            ("recoil_min", self.recoil_min),
            ("pair_window", self.pair_window),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SignalError::InvalidSpec(format!("{name} must be > 0")));
            }
        }
        if !(self.refractory.is_finite() && self.refractory >= 0.0) {
            return Err(SignalError::InvalidSpec("refractory must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    LockTrigger,
    SignatureDip,
    SignatureRecoil,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::LockTrigger => "LockTrigger",
            EventKind::SignatureDip => "SignatureDip",
            EventKind::SignatureRecoil => "SignatureRecoil",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEvent {
    pub t: f64,
    pub kind: EventKind,
    /// Signed cable velocity at the event sample, m/s.
    pub magnitude: f64,
}

/// Runs the detector over a velocity series sampled at `rate`, with sample 0
/// at t = 0.
///
/// `VelocityThreshold` fires on any sample at or above `v_lock` once the
/// refractory period since the previous trigger has elapsed. `FallSignature`
/// reports the rising edge of each forward surge as a dip; a backward edge at
/// or beyond `-recoil_min` within `pair_window` of a dip fires the lock, and
/// an unpaired one is reported as a bare recoil.
pub fn detect(velocity: &[f64], rate: f64, spec: &DetectorSpec) -> Result<Vec<DetectionEvent>> {
    spec.validate()?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(SignalError::InvalidSpec("rate must be > 0".into()));
    }
    let sign = spec.polarity.sign();
    let time = |i: usize| i as f64 / rate;
    let mut events = Vec::new();

    match spec.mode {
        DetectorMode::VelocityThreshold => {
            let mut last: Option<f64> = None;
            for (i, &v) in velocity.iter().enumerate() {
                let t = time(i);
                if sign * v >= spec.v_lock && last.is_none_or(|l| t - l >= spec.refractory) {
                    events.push(DetectionEvent {
                        t,
                        kind: EventKind::LockTrigger,
                        magnitude: v,
                    });
                    last = Some(t);
                }
            }
        }
        DetectorMode::FallSignature => {
            let mut prev: Option<f64> = None;
            let mut last_dip: Option<f64> = None;
            let mut quiet_until = f64::NEG_INFINITY;
            for (i, &v) in velocity.iter().enumerate() {
                let t = time(i);
                let s = sign * v;
                let rising = s >= spec.dip_min && prev.is_none_or(|p| p < spec.dip_min);
                let falling = s <= -spec.recoil_min && prev.is_none_or(|p| p > -spec.recoil_min);
                prev = Some(s);
                if t < quiet_until {
                    continue;
                }
                if rising {
                    events.push(DetectionEvent {
                        t,
                        kind: EventKind::SignatureDip,
                        magnitude: v,
                    });
                    last_dip = Some(t);
                } else if falling {
                    let paired = last_dip.is_some_and(|d| t - d <= spec.pair_window);
                    let kind = if paired {
                        last_dip = None;
                        quiet_until = t + spec.refractory;
                        EventKind::LockTrigger
                    } else {
                        EventKind::SignatureRecoil
                    };
                    events.push(DetectionEvent { t, kind, magnitude: v });
                }
            }
        }
    }
    Ok(events)
}

/// Smooths, differentiates and runs the detector on a cable series, with
/// event times on the series' own clock.
pub fn detect_series(cable: &CableSeries, sg: SgSpec, spec: &DetectorSpec) -> Result<Vec<DetectionEvent>> {
    let velocity = filtered_velocity(cable, sg)?;
    let mut events = detect(&velocity, cable.sample_rate, spec)?;
    for e in &mut events {
        e.t += cable.t0;
    }
    Ok(events)
}

pub fn write_detections<W: Write>(events: &[DetectionEvent], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(["t", "kind", "magnitude_mps"])?;
    for e in events {
        w.write_record([e.t.to_string(), e.kind.to_string(), e.magnitude.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
