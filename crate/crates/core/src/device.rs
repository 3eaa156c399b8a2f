//! The stabiliser mechanism as a fixed-step state machine.
//!
//! Cable is wound on a capstan held taut by a coil spring. Two flyweights on
//! the capstan are held inward by magnets; once the centrifugal pull on a
//! flyweight reaches the magnet breakaway force they snap out and couple the
//! capstan to a locking plate. From then on payout stretches a stiffening
//! blocking spring until it reaches full travel, where payout stops. The lock
//! releases once the blocking spring has relaxed and the user is no longer
//! pulling.
//!
//! The user's torso drives the cable kinematically: each step takes the
//! commanded cable velocity as given and the device only decides how much of
//! it becomes payout.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::CableSeries;

/// Minimum cable travel the device must offer before locking is required.
pub const MIN_TRAVEL_M: f64 = 0.60;

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("capstan radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("spring extension {x} m outside [0, {max}] m")]
    ExtensionOutOfRange { x: f64, max: f64 },
    #[error("time step must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("state invariant violated: {0}")]
    StateInvariantViolation(String),
    #[error("invalid device parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite cable velocity command")]
    NonFiniteInput,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DeviceError> = std::result::Result<T, E>;

/// Mechanism constants. Serialized key names carry their units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceParams {
    #[serde(rename = "r_capstan_m")]
    pub r_capstan: f64,
    /// Coil spring torsional stiffness.
    #[serde(rename = "k_coil_nm_per_rad")]
    pub k_coil: f64,
    /// Coil spring torque at zero payout.
    #[serde(rename = "tau0_coil_nm")]
    pub tau0_coil: f64,
    /// Mass of one flyweight.
    #[serde(rename = "m_fly_kg")]
    pub m_fly: f64,
    /// Flyweight centre-of-mass radius at engagement.
    #[serde(rename = "r_fly_m")]
    pub r_fly: f64,
    /// Radial magnet breakaway force on one seated flyweight.
    #[serde(rename = "f_retain_n")]
    pub f_retain: f64,
    pub n_fly: u32,
    #[serde(rename = "k1_block_n_per_m")]
    pub k1_block: f64,
    #[serde(rename = "k3_block_n_per_m3")]
    pub k3_block: f64,
    #[serde(rename = "x_block_max_m")]
    pub x_block_max: f64,
    /// Cable travel capacity.
    #[serde(rename = "l_max_m")]
    pub l_max: f64,
    #[serde(rename = "eps_tension_n")]
    pub eps_tension: f64,
}

impl Default for DeviceParams {
    /// Lock at 0.9 m/s cable speed; about 270 N of blocking force at 8 cm.
    fn default() -> Self {
        Self {
            r_capstan: 0.015,
            k_coil: 0.001,
            tau0_coil: 0.015,
            m_fly: 0.01,
            r_fly: 0.02,
            f_retain: 0.72,
            n_fly: 2,
            k1_block: 200.0,
            k3_block: 5e5,
            x_block_max: 0.08,
            l_max: 0.65,
            eps_tension: 0.5,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_capstan", self.r_capstan),
            ("k_coil", self.k_coil),
            ("m_fly", self.m_fly),
            ("r_fly", self.r_fly),
            ("f_retain", self.f_retain),
            ("k1_block", self.k1_block),
            ("x_block_max", self.x_block_max),
            ("l_max", self.l_max),
            ("eps_tension", self.eps_tension),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(DeviceError::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [("tau0_coil", self.tau0_coil), ("k3_block", self.k3_block)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DeviceError::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.l_max < MIN_TRAVEL_M {
            return Err(DeviceError::InvalidParams(format!(
                "cable travel {} m is below the required {MIN_TRAVEL_M} m",
                self.l_max
            )));
        }
        if self.n_fly != 2 {
            return Err(DeviceError::InvalidParams(format!("expected 2 flyweights, got {}", self.n_fly)));
        }
        Ok(())
    }

    /// Cable tension from the coil spring alone at a given capstan payout.
    pub fn coil_tension(&self, payout: f64) -> f64 {
        (self.tau0_coil + self.k_coil * payout / self.r_capstan) / self.r_capstan
    }
}

pub fn capstan_omega(v: f64, r_capstan: f64) -> Result<f64> {
    if r_capstan.is_nan() || r_capstan <= 0.0 {
        return Err(DeviceError::NonPositiveRadius(r_capstan));
    }
    Ok(v / r_capstan)
}

/// Whether the flyweights break away from their magnets at capstan speed
/// `omega`. The mechanism only engages on payout, so non-positive speeds
/// never lock.
pub fn lock_condition(omega: f64, p: &DeviceParams) -> bool {
    omega > 0.0 && p.m_fly * omega * omega * p.r_fly >= p.f_retain
}

/// Cable speed at which [`lock_condition`] first holds.
pub fn threshold_velocity(p: &DeviceParams) -> f64 {
    p.r_capstan * (p.f_retain / (p.m_fly * p.r_fly)).sqrt()
}

/// Nonlinear blocking spring force, `k1 x + k3 x^3`.
pub fn blocking_force(x: f64, p: &DeviceParams) -> Result<f64> {
    if !(0.0..=p.x_block_max).contains(&x) {
        return Err(DeviceError::ExtensionOutOfRange { x, max: p.x_block_max });
    }
    Ok(p.k1_block * x + p.k3_block * x * x * x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Transparent,
    Locked,
}

impl Mode {
    pub fn code(self) -> &'static str {
        match self {
            Mode::Transparent => "T",
            Mode::Locked => "L",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeChange {
    Lock,
    Reset,
}

impl fmt::Display for ModeChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeChange::Lock => "LOCK",
            ModeChange::Reset => "RESET",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeEvent {
    pub t: f64,
    pub change: ModeChange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInput {
    /// Cable velocity imposed by the user, payout positive.
    pub v_cable_cmd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    pub mode: Mode,
    /// Cable payout.
    pub l: f64,
    /// Capstan angular velocity over the last step, payout positive.
    pub omega: f64,
    /// Blocking spring extension.
    pub x_block: f64,
    pub t: f64,
    /// Cable payout rate over the last step.
    pub payout_rate: f64,
    pub events: Vec<ModeEvent>,
    origin: f64,
    ticks: u64,
}

impl DeviceState {
    /// Fully retracted, unlocked and at rest at time `t0`.
    pub fn at_rest(t0: f64) -> Self {
        Self {
            mode: Mode::Transparent,
            l: 0.0,
            omega: 0.0,
            x_block: 0.0,
            t: t0,
            payout_rate: 0.0,
            events: Vec::new(),
            origin: t0,
            ticks: 0,
        }
    }

    /// Cable tension: coil spring on the capstan's own payout plus the
    /// blocking spring while locked.
    pub fn tension(&self, p: &DeviceParams) -> f64 {
        let spring = p.k1_block * self.x_block + p.k3_block * self.x_block.powi(3);
        p.coil_tension(self.l - self.x_block) + spring
    }

    fn check(&self, p: &DeviceParams) -> Result<()> {
        let violation = |msg: String| Err(DeviceError::StateInvariantViolation(msg));
        if !(self.l.is_finite() && (0.0..=p.l_max).contains(&self.l)) {
            return violation(format!("payout {} outside [0, {}]", self.l, p.l_max));
        }
        if !(0.0..=p.x_block_max).contains(&self.x_block) {
            return violation(format!("spring extension {} outside [0, {}]", self.x_block, p.x_block_max));
        }
        if self.mode == Mode::Transparent && self.x_block != 0.0 {
            return violation("spring extended while transparent".into());
        }
        if self.x_block > self.l {
            return violation("spring extension exceeds payout".into());
        }
        Ok(())
    }
}

/// Advances the device by one step of length `dt` under a commanded cable
/// velocity. The returned state is at `t + dt`.
pub fn step(mut state: DeviceState, input: StepInput, p: &DeviceParams, dt: f64) -> Result<DeviceState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DeviceError::InvalidDt(dt));
    }
    let v = input.v_cable_cmd;
    if !v.is_finite() {
        return Err(DeviceError::NonFiniteInput);
    }
    state.check(p)?;

    state.ticks += 1;
    state.t = state.origin + state.ticks as f64 * dt;
    let l_before = state.l;

    match state.mode {
        Mode::Transparent => {
            state.l = (state.l + v * dt).clamp(0.0, p.l_max);
            state.payout_rate = (state.l - l_before) / dt;
            state.omega = capstan_omega(v, p.r_capstan)?;
            if lock_condition(state.omega, p) {
                state.mode = Mode::Locked;
                state.x_block = 0.0;
                state.events.push(ModeEvent {
                    t: state.t,
                    change: ModeChange::Lock,
                });
            }
        }
        Mode::Locked => {
            if v > 0.0 {
                let spring_room = p.x_block_max - state.x_block;
                let travel_room = p.l_max - state.l;
                let requested = v * dt;
                if requested >= spring_room.min(travel_room) {
                    if spring_room <= travel_room {
                        state.x_block = p.x_block_max;
                        state.l += spring_room;
                    } else {
                        state.x_block += travel_room;
                        state.l = p.l_max;
                    }
                } else {
                    state.x_block += requested;
                    state.l += requested;
                }
            } else {
                let relax = (v * dt).max(-state.x_block);
                state.x_block += relax;
                state.l = (state.l + relax).max(0.0);
            }
            state.payout_rate = (state.l - l_before) / dt;
            state.omega = capstan_omega(state.payout_rate, p.r_capstan)?;
            if state.x_block == 0.0 && v <= 0.0 {
                state.mode = Mode::Transparent;
                state.events.push(ModeEvent {
                    t: state.t,
                    change: ModeChange::Reset,
                });
            }
        }
    }
    Ok(state)
}

/// One row of a simulation trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub length: f64,
    /// Actual payout rate over the step ending at `t`.
    pub velocity: f64,
    /// Commanded cable velocity over that step.
    pub v_cmd: f64,
    pub omega: f64,
    pub mode: Mode,
    pub x_block: f64,
    pub tension: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub trace: Vec<TraceRow>,
    pub events: Vec<ModeEvent>,
}

impl Simulation {
    pub fn count(&self, change: ModeChange) -> usize {
        self.events.iter().filter(|e| e.change == change).count()
    }

    pub fn first(&self, change: ModeChange) -> Option<f64> {
        self.events.iter().find(|e| e.change == change).map(|e| e.t)
    }

    pub fn max_payout(&self) -> f64 {
        self.trace.iter().map(|r| r.length).fold(0.0, f64::max)
    }

    pub fn write_trace<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(out);
        w.write_record(["t", "length_m", "velocity_mps", "mode", "x_block_m", "tension_N"])?;
        for r in &self.trace {
            w.write_record([
                format!("{:.6}", r.t),
                r.length.to_string(),
                r.velocity.to_string(),
                r.mode.code().to_string(),
                r.x_block.to_string(),
                r.tension.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_events<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(out);
        w.write_record(["t", "event"])?;
        for e in &self.events {
            w.write_record([format!("{:.6}", e.t), e.change.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn row(state: &DeviceState, v_cmd: f64, p: &DeviceParams) -> TraceRow {
    TraceRow {
        t: state.t,
        length: state.l,
        velocity: state.payout_rate,
        v_cmd,
        omega: state.omega,
        mode: state.mode,
        x_block: state.x_block,
        tension: state.tension(p),
    }
}

/// Folds [`step`] over a commanded velocity series. Sample `i` drives the
/// interval from `t0 + i/rate` to the next sample, so the trace has one row
/// per sample with the device at rest in the first.
pub fn simulate(velocity: &[f64], rate: f64, t0: f64, p: &DeviceParams) -> Result<Simulation> {
    p.validate()?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(DeviceError::InvalidDt(1.0 / rate));
    }
    let dt = 1.0 / rate;
    let mut state = DeviceState::at_rest(t0);
    let mut trace = Vec::with_capacity(velocity.len());
    if velocity.is_empty() {
        return Ok(Simulation { trace, events: Vec::new() });
    }
    trace.push(row(&state, 0.0, p));
    for &v in &velocity[..velocity.len() - 1] {
        state = step(state, StepInput { v_cable_cmd: v }, p, dt)?;
        trace.push(row(&state, v, p));
    }
    Ok(Simulation {
        trace,
        events: state.events,
    })
}

/// Drives the device with a cable series' own (unfiltered) velocity.
pub fn simulate_cable(cable: &CableSeries, p: &DeviceParams) -> Result<Simulation> {
    simulate(&cable.velocity, cable.sample_rate, cable.t0, p)
}
