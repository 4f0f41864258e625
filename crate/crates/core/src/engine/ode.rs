//! Classical fourth-order Runge-Kutta on the mean-field equations.

use crate::compiler::SimulationSpec;

use super::network::{Network, Recorder};
use super::{EngineError, EngineKind, RunConfig, SeriesMeta, TimeSeries};

/// Integrates `dN/dt = sum(delta * propensity(N))` at fixed step `dt`.
///
/// After each step populations are clamped at zero, which only matters
/// when a step is too coarse for a fast decay.
pub fn run_ode(spec: &SimulationSpec, config: &RunConfig) -> Result<TimeSeries, EngineError> {
    config.check()?;
    let net = Network::new(spec)?;
    let steps = config.steps();
    let h = config.dt;
    let n = net.initial().len();

    let mut y = net.initial().to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut rec = Recorder::new(n, steps / config.record_every + 2);
    rec.push(0.0, &y);

    for step in 1..=steps {
        net.derivative(&y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        net.derivative(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        net.derivative(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        net.derivative(&tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if !y[i].is_finite() {
                return Err(EngineError::NonFinite { step });
            }
            y[i] = y[i].max(0.0);
        }
        if config.records(step, steps) {
            rec.push(step as f64 * h, &y);
        }
    }

    Ok(rec.finish(
        net.names(),
        SeriesMeta {
            seed: None,
            engine: EngineKind::Ode,
            dt: h,
        },
    ))
}
