//! Execution of compiled reaction systems.
//!
//! Two engines share one [`SimulationSpec`]: a seeded tau-leaping stepper
//! ([`run_stochastic`]) and a fixed-step RK4 integrator of the mean-field
//! equations ([`run_ode`]). Both record onto the same step grid, so their
//! outputs line up point for point.

mod network;
mod ode;
mod tau_leap;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::{SimulationSpec, SpecError};

pub use network::Network;
pub use ode::run_ode;
pub use tau_leap::run_stochastic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    #[default]
    Stochastic,
    Ode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub seed: Option<u64>,
    pub engine: EngineKind,
    pub dt: f64,
}

/// Population trajectories aligned on a shared time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub series: BTreeMap<String, Vec<f64>>,
    pub meta: SeriesMeta,
}

impl TimeSeries {
    pub fn final_value(&self, entity: &str) -> Option<f64> {
        self.series.get(entity).and_then(|v| v.last().copied())
    }

    pub fn initial_value(&self, entity: &str) -> Option<f64> {
        self.series.get(entity).and_then(|v| v.first().copied())
    }

    /// Value of `entity` at the recorded time closest to `t`.
    pub fn value_near(&self, entity: &str, t: f64) -> Option<f64> {
        let idx = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        self.series.get(entity).map(|v| v[idx])
    }
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub duration: f64,
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    /// Record every n-th step; the final step is always recorded.
    #[serde(default = "default_stride")]
    pub record_every: usize,
}

impl RunConfig {
    pub fn new(duration: f64, dt: f64) -> Self {
        Self {
            duration,
            dt,
            seed: 0,
            record_every: 1,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_every = stride;
        self
    }

    pub fn check(&self) -> Result<(), EngineError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(EngineError::InvalidConfig(format!(
                "duration {} must be > 0",
                self.duration
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(EngineError::InvalidConfig(format!("dt {} must be > 0", self.dt)));
        }
        if self.dt > self.duration {
            return Err(EngineError::InvalidConfig(format!(
                "dt {} exceeds duration {}",
                self.dt, self.duration
            )));
        }
        if self.record_every == 0 {
            return Err(EngineError::InvalidConfig("record_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps; the last step lands at or just past `duration`.
    pub fn steps(&self) -> usize {
        let ratio = self.duration / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        }
    }

    fn records(&self, step: usize, total: usize) -> bool {
        step.is_multiple_of(self.record_every) || step == total
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(#[from] SpecError),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("propensity overflow at step {step}")]
    Overflow { step: usize },
}

/// Pointwise mean of `n_runs` stochastic runs seeded `seed, seed + 1, ...`.
///
/// Members run in parallel; the sum is taken in seed order so the result
/// does not depend on scheduling.
pub fn ensemble_mean(spec: &SimulationSpec, config: &RunConfig, n_runs: usize) -> Result<TimeSeries, EngineError> {
    if n_runs == 0 {
        return Err(EngineError::InvalidConfig("ensemble needs at least one run".into()));
    }
    let runs: Vec<TimeSeries> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let member = RunConfig {
                seed: config.seed.wrapping_add(i),
                ..config.clone()
            };
            run_stochastic(spec, &member)
        })
        .collect::<Result<_, _>>()?;
    Ok(mean_of(&runs))
}

pub(crate) fn mean_of(runs: &[TimeSeries]) -> TimeSeries {
    let first = &runs[0];
    let mut series: BTreeMap<String, Vec<f64>> = first
        .series
        .iter()
        .map(|(k, v)| (k.clone(), vec![0.0; v.len()]))
        .collect();
    for run in runs {
        for (k, acc) in series.iter_mut() {
            for (a, x) in acc.iter_mut().zip(&run.series[k]) {
                *a += x;
            }
        }
    }
    let n = runs.len() as f64;
    for acc in series.values_mut() {
        for a in acc.iter_mut() {
            *a /= n;
        }
    }
    TimeSeries {
        times: first.times.clone(),
        series,
        meta: first.meta.clone(),
    }
}

/// Runs one engine; `runs > 1` averages a stochastic ensemble.
pub fn simulate(
    spec: &SimulationSpec,
    config: &RunConfig,
    engine: EngineKind,
    runs: usize,
) -> Result<TimeSeries, EngineError> {
    match engine {
        EngineKind::Ode => run_ode(spec, config),
        EngineKind::Stochastic if runs <= 1 => run_stochastic(spec, config),
        EngineKind::Stochastic => ensemble_mean(spec, config, runs),
    }
}
