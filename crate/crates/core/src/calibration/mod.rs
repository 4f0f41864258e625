//! Fitting models to imported observations.
//!
//! Discrepancy is the RMSE between a simulated trajectory, linearly
//! interpolated to the observation times, and the observed values, with
//! uniform weights over every observed `(entity, time)` point.

mod fit;
mod observations;

use thiserror::Error;

use crate::compiler::CompileError;
use crate::engine::{EngineError, TimeSeries};

pub use fit::{recommend_parameters, EntityField, FitConfig, FitResult, InteractionField, ParamPath, TraceEntry};
pub use observations::{import_observations, ImportedObservations, ObservationSeries, OBSERVATION_HEADER};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("observation CSV header must be `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("line {line}, field {field}: {message}")]
    Row { line: u64, field: String, message: String },
    #[error("reading observation CSV: {0}")]
    Csv(String),
    #[error("invalid observations: {0}")]
    InvalidObservations(String),
    #[error("observed entity `{0}` is not in the simulation")]
    MissingEntity(String),
    #[error("observation time {time} is outside the simulated range [{start}, {end}]")]
    TimeOutOfRange { time: f64, start: f64, end: f64 },
    #[error("no observations to compare against")]
    NoObservations,
    #[error("parameter path `{0}` is malformed")]
    BadPath(String),
    #[error("parameter `{0}` has no value in the model")]
    UnknownParameter(String),
    #[error("fit budget must be at least 1")]
    ZeroBudget,
    #[error("compiling the starting model: {0}")]
    Compile(#[from] CompileError),
    #[error("simulating the starting model: {0}")]
    Engine(#[from] EngineError),
}

impl From<csv::Error> for CalibrationError {
    fn from(e: csv::Error) -> Self {
        CalibrationError::Csv(e.to_string())
    }
}

/// Simulated value of one series at time `t` by linear interpolation.
fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let idx = times.partition_point(|x| *x < t);
    if idx < times.len() && times[idx] == t {
        return values[idx];
    }
    let (t0, t1) = (times[idx - 1], times[idx]);
    let w = (t - t0) / (t1 - t0);
    values[idx - 1] + w * (values[idx] - values[idx - 1])
}

/// Root-mean-square error between `sim` and every observed point of `obs`.
pub fn discrepancy(sim: &TimeSeries, obs: &ObservationSeries) -> Result<f64, CalibrationError> {
    let (start, end) = match (sim.times.first(), sim.times.last()) {
        (Some(s), Some(e)) => (*s, *e),
        _ => return Err(CalibrationError::NoObservations),
    };
    let mut sum = 0.0;
    let mut count = 0usize;
    for (entity, t, observed) in obs.points() {
        let values = sim
            .series
            .get(entity)
            .ok_or_else(|| CalibrationError::MissingEntity(entity.to_string()))?;
        if !(start..=end).contains(&t) {
            return Err(CalibrationError::TimeOutOfRange { time: t, start, end });
        }
        let err = interpolate(&sim.times, values, t) - observed;
        sum += err * err;
        count += 1;
    }
    if count == 0 {
        return Err(CalibrationError::NoObservations);
    }
    Ok((sum / count as f64).sqrt())
}
