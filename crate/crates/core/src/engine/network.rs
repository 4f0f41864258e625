use crate::compiler::{Propensity, SimulationSpec};

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Law {
    Linear { i: usize, rate: f64 },
    Logistic { i: usize, rate: f64, capacity: f64 },
    MassAction { i: usize, j: usize, rate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
struct IndexedReaction {
    law: Law,
    deltas: Vec<(usize, i64)>,
}

/// A [`SimulationSpec`] resolved to population indices for fast evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    names: Vec<String>,
    initial: Vec<f64>,
    reactions: Vec<IndexedReaction>,
}

impl Network {
    pub fn new(spec: &SimulationSpec) -> Result<Self, EngineError> {
        spec.check()?;
        let index = |e: &str| spec.population_index(e).expect("checked by SimulationSpec::check");
        let reactions = spec
            .reactions
            .iter()
            .map(|r| {
                let law = match &r.propensity {
                    Propensity::Linear { entity, rate } => Law::Linear {
                        i: index(entity),
                        rate: *rate,
                    },
                    Propensity::LogisticBirth { entity, rate, capacity } => Law::Logistic {
                        i: index(entity),
                        rate: *rate,
                        capacity: *capacity,
                    },
                    Propensity::MassAction { first, second, rate } => Law::MassAction {
                        i: index(first),
                        j: index(second),
                        rate: *rate,
                    },
                };
                let deltas = r
                    .deltas
                    .iter()
                    .filter(|(_, d)| **d != 0)
                    .map(|(e, d)| (index(e), *d))
                    .collect();
                IndexedReaction { law, deltas }
            })
            .collect();
        Ok(Self {
            names: spec.populations.iter().map(|p| p.entity_id.clone()).collect(),
            initial: spec.populations.iter().map(|p| p.initial_population).collect(),
            reactions,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn len(&self) -> usize {
        self.reactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reactions.is_empty()
    }

    /// Propensity of reaction `r`. Negative populations are read as zero.
    pub fn propensity(&self, r: usize, state: &[f64]) -> f64 {
        let n = |i: usize| state[i].max(0.0);
        match self.reactions[r].law {
            Law::Linear { i, rate } => rate * n(i),
            Law::Logistic { i, rate, capacity } => rate * n(i) * (1.0 - n(i) / capacity).max(0.0),
            Law::MassAction { i, j, rate } => rate * n(i) * n(j),
        }
    }

    pub fn deltas(&self, r: usize) -> &[(usize, i64)] {
        &self.reactions[r].deltas
    }

    /// Mean-field right-hand side: `dN/dt = sum over reactions of delta * propensity`.
    pub fn derivative(&self, state: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for r in 0..self.reactions.len() {
            let a = self.propensity(r, state);
            for &(i, d) in &self.reactions[r].deltas {
                out[i] += d as f64 * a;
            }
        }
    }
}

pub(super) struct Recorder {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl Recorder {
    pub(super) fn new(width: usize, capacity: usize) -> Self {
        Self {
            times: Vec::with_capacity(capacity),
            values: vec![Vec::with_capacity(capacity); width],
        }
    }

    pub(super) fn push(&mut self, t: f64, state: &[f64]) {
        self.times.push(t);
        for (col, x) in self.values.iter_mut().zip(state) {
            col.push(*x);
        }
    }

    pub(super) fn finish(self, names: &[String], meta: super::SeriesMeta) -> super::TimeSeries {
        super::TimeSeries {
            times: self.times,
            series: names.iter().cloned().zip(self.values).collect(),
            meta,
        }
    }
}
