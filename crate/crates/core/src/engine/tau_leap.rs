//! Fixed-step tau-leaping.
//!
//! Each step draws, for every reaction, a Poisson count with mean
//! `propensity(state) * dt` using the state at the start of the step. Counts
//! are applied in reaction order; a reaction that would push a population
//! below zero has its count truncated to what the population can supply.
//!
//! The random source is ChaCha8 seeded from the run seed, so a given
//! (spec, config) pair always yields the same trajectory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::compiler::SimulationSpec;

use super::network::{Network, Recorder};
use super::{EngineError, EngineKind, RunConfig, SeriesMeta, TimeSeries};

/// Above this expected count per step the run is treated as diverged.
const MAX_EVENTS_PER_STEP: f64 = 1e15;

pub fn run_stochastic(spec: &SimulationSpec, config: &RunConfig) -> Result<TimeSeries, EngineError> {
    config.check()?;
    let net = Network::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let steps = config.steps();

    let mut state: Vec<i64> = net.initial().iter().map(|x| x.round() as i64).collect();
    let mut view: Vec<f64> = state.iter().map(|&x| x as f64).collect();
    let mut counts = vec![0u64; net.len()];
    let mut rec = Recorder::new(view.len(), steps / config.record_every + 2);
    rec.push(0.0, &view);

    for step in 1..=steps {
        for (r, count) in counts.iter_mut().enumerate() {
            let mean = net.propensity(r, &view) * config.dt;
            if !mean.is_finite() {
                return Err(EngineError::NonFinite { step });
            }
            if mean > MAX_EVENTS_PER_STEP {
                return Err(EngineError::Overflow { step });
            }
            *count = if mean > 0.0 {
                Poisson::new(mean)
                    .map_err(|_| EngineError::Overflow { step })?
                    .sample(&mut rng) as u64
            } else {
                0
            };
        }

        for (r, &drawn) in counts.iter().enumerate() {
            let mut k = drawn as i64;
            for &(i, d) in net.deltas(r) {
                if d < 0 {
                    k = k.min(state[i] / -d);
                }
            }
            for &(i, d) in net.deltas(r) {
                state[i] = state[i]
                    .checked_add(d.checked_mul(k).ok_or(EngineError::Overflow { step })?)
                    .ok_or(EngineError::Overflow { step })?;
            }
        }

        for (v, &s) in view.iter_mut().zip(&state) {
            *v = s as f64;
        }
        if config.records(step, steps) {
            rec.push(step as f64 * config.dt, &view);
        }
    }

    Ok(rec.finish(
        net.names(),
        SeriesMeta {
            seed: Some(config.seed),
            engine: EngineKind::Stochastic,
            dt: config.dt,
        },
    ))
}
