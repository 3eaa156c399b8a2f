use std::fmt;

use stabiliser_core::device::DeviceError;
use stabiliser_core::motion::MotionError;
use stabiliser_core::signal::SignalError;
use stabiliser_core::tuning::TuningError;

/// Failure classes, each with a fixed process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or an invalid configuration (exit 2).
    Config(String),
    /// A file could not be read or written (exit 3).
    Io(String),
    /// The data or the model rejected the run (exit 4).
    Pipeline(String),
    /// No parameter value achieves the requested threshold (exit 5).
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Pipeline(_) => 4,
            CliError::Infeasible(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Pipeline(m) => write!(f, "pipeline error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible target: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<MotionError> for CliError {
    fn from(e: MotionError) -> Self {
        match e {
            MotionError::Io(e) => CliError::Io(e.to_string()),
            MotionError::Csv(e) if e.is_io_error() => CliError::Io(e.to_string()),
            other => CliError::Pipeline(other.to_string()),
        }
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::Io(e) => CliError::Io(e.to_string()),
            SignalError::Csv(e) => CliError::Io(e.to_string()),
            other => CliError::Pipeline(other.to_string()),
        }
    }
}

impl From<DeviceError> for CliError {
    fn from(e: DeviceError) -> Self {
        match e {
            DeviceError::Io(e) => CliError::Io(e.to_string()),
            DeviceError::Csv(e) => CliError::Io(e.to_string()),
            other => CliError::Pipeline(other.to_string()),
        }
    }
}

impl From<TuningError> for CliError {
    fn from(e: TuningError) -> Self {
        match e {
            TuningError::InfeasibleTarget(m) => CliError::Infeasible(m),
            TuningError::Motion(e) => e.into(),
            TuningError::Signal(e) => e.into(),
            TuningError::Device(e) => e.into(),
            TuningError::Csv(e) => CliError::Io(e.to_string()),
            TuningError::Io(e) => CliError::Io(e.to_string()),
        }
    }
}
