//! Derivative-free parameter recommendation.
//!
//! Coordinate pattern search with multiplicative probes: each free
//! parameter in turn is tried at `x * (1 + step)` and `x * (1 - step)`; the
//! first improving probe is accepted. A round with no improvement halves
//! the step. The objective is the discrepancy of the ODE trajectory, so the
//! search is deterministic.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compiler::compile;
use crate::engine::{run_ode, RunConfig};
use crate::model::{ConceptualModel, RelationKey, RelationKind};

use super::{discrepancy, CalibrationError, ObservationSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityField {
    InitialPopulation,
    BirthRate,
    DeathRate,
    CarryingCapacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InteractionField {
    Rate,
    Efficiency,
}

/// A tunable number in a model.
///
/// Text form: `<field>@<entity>` for entity parameters (`birth_rate@kudzu`)
/// and `<field>@<source>:<kind>:<target>` for interaction parameters
/// (`rate@bug:consumes:kudzu`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamPath {
    Entity { entity: String, field: EntityField },
    Interaction { key: RelationKey, field: InteractionField },
}

impl ParamPath {
    pub fn entity(entity: &str, field: EntityField) -> Self {
        ParamPath::Entity {
            entity: entity.to_string(),
            field,
        }
    }

    pub fn interaction(source: &str, kind: RelationKind, target: &str, field: InteractionField) -> Self {
        ParamPath::Interaction {
            key: RelationKey {
                source: source.to_string(),
                target: target.to_string(),
                kind,
            },
            field,
        }
    }

    pub fn get(&self, model: &ConceptualModel) -> Option<f64> {
        match self {
            ParamPath::Entity { entity, field } => {
                let p = model.entity_params.get(entity)?;
                match field {
                    EntityField::InitialPopulation => Some(p.initial_population),
                    EntityField::BirthRate => p.birth_rate,
                    EntityField::DeathRate => p.death_rate,
                    EntityField::CarryingCapacity => p.carrying_capacity,
                }
            }
            ParamPath::Interaction { key, field } => {
                let p = model.interaction(key)?;
                match field {
                    InteractionField::Rate => Some(p.rate),
                    InteractionField::Efficiency => p.efficiency,
                }
            }
        }
    }

    /// Overwrites an existing value; returns false if the path has no value.
    pub fn set(&self, model: &mut ConceptualModel, value: f64) -> bool {
        match self {
            ParamPath::Entity { entity, field } => {
                let Some(p) = model.entity_params.get_mut(entity) else {
                    return false;
                };
                let slot = match field {
                    EntityField::InitialPopulation => {
                        p.initial_population = value;
                        return true;
                    }
                    EntityField::BirthRate => &mut p.birth_rate,
                    EntityField::DeathRate => &mut p.death_rate,
                    EntityField::CarryingCapacity => &mut p.carrying_capacity,
                };
                match slot {
                    Some(v) => {
                        *v = value;
                        true
                    }
                    None => false,
                }
            }
            ParamPath::Interaction { key, field } => {
                let Some(p) = model.interaction_mut(key) else {
                    return false;
                };
                match field {
                    InteractionField::Rate => {
                        p.rate = value;
                        true
                    }
                    InteractionField::Efficiency => match &mut p.efficiency {
                        Some(v) => {
                            *v = value;
                            true
                        }
                        None => false,
                    },
                }
            }
        }
    }
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamPath::Entity { entity, field } => {
                let name = match field {
                    EntityField::InitialPopulation => "initial_population",
                    EntityField::BirthRate => "birth_rate",
                    EntityField::DeathRate => "death_rate",
                    EntityField::CarryingCapacity => "carrying_capacity",
                };
                write!(f, "{name}@{entity}")
            }
            ParamPath::Interaction { key, field } => {
                let name = match field {
                    InteractionField::Rate => "rate",
                    InteractionField::Efficiency => "efficiency",
                };
                write!(f, "{name}@{key}")
            }
        }
    }
}

impl FromStr for ParamPath {
    type Err = CalibrationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CalibrationError::BadPath(s.to_string());
        let (field, target) = s.split_once('@').ok_or_else(bad)?;
        if target.is_empty() {
            return Err(bad());
        }
        let parts: Vec<&str> = target.split(':').collect();
        match parts.as_slice() {
            [entity] => {
                let field = match field {
                    "initial_population" => EntityField::InitialPopulation,
                    "birth_rate" => EntityField::BirthRate,
                    "death_rate" => EntityField::DeathRate,
                    "carrying_capacity" => EntityField::CarryingCapacity,
                    _ => return Err(bad()),
                };
                Ok(ParamPath::entity(entity, field))
            }
            [source, kind, target] if !source.is_empty() && !target.is_empty() => {
                let kind = RelationKind::parse(kind).ok_or_else(bad)?;
                let field = match field {
                    "rate" => InteractionField::Rate,
                    "efficiency" => InteractionField::Efficiency,
                    _ => return Err(bad()),
                };
                Ok(ParamPath::interaction(source, kind, target, field))
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for ParamPath {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ParamPath {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Maximum number of objective evaluations, including the starting point.
    pub budget: usize,
    /// Integration step of the ODE runs behind the objective.
    #[serde(default = "FitConfig::default_dt")]
    pub dt: f64,
    #[serde(default = "FitConfig::default_initial_step")]
    pub initial_step: f64,
    #[serde(default = "FitConfig::default_min_step")]
    pub min_step: f64,
}

impl FitConfig {
    fn default_dt() -> f64 {
        0.01
    }

    fn default_initial_step() -> f64 {
        0.5
    }

    fn default_min_step() -> f64 {
        1e-3
    }

    pub fn with_budget(budget: usize) -> Self {
        Self {
            budget,
            dt: Self::default_dt(),
            initial_step: Self::default_initial_step(),
            min_step: Self::default_min_step(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub params: BTreeMap<String, f64>,
    /// `null` in JSON when the probe failed to simulate.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub initial_params: BTreeMap<String, f64>,
    pub best_params: BTreeMap<String, f64>,
    pub initial_discrepancy: f64,
    pub best_discrepancy: f64,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
}

impl FitResult {
    pub fn improved(&self) -> bool {
        self.best_discrepancy < self.initial_discrepancy
    }
}

struct Objective<'a> {
    base: &'a ConceptualModel,
    obs: &'a ObservationSeries,
    free: &'a [ParamPath],
    run: RunConfig,
}

impl Objective<'_> {
    fn evaluate(&self, values: &[f64]) -> Result<f64, CalibrationError> {
        let mut model = self.base.clone();
        for (path, v) in self.free.iter().zip(values) {
            path.set(&mut model, *v);
        }
        let spec = compile(&model)?.spec;
        let sim = run_ode(&spec, &self.run)?;
        discrepancy(&sim, self.obs)
    }

    fn named(&self, values: &[f64]) -> BTreeMap<String, f64> {
        self.free
            .iter()
            .map(|p| p.to_string())
            .zip(values.iter().copied())
            .collect()
    }
}

/// Recommends values for `free` that reduce the discrepancy between the
/// model's ODE trajectory and `obs`. The input model is not modified.
///
/// Probes that fail to compile or simulate score `+inf` and the search moves on.
pub fn recommend_parameters(
    model: &ConceptualModel,
    obs: &ObservationSeries,
    free: &[ParamPath],
    config: &FitConfig,
) -> Result<FitResult, CalibrationError> {
    if config.budget == 0 {
        return Err(CalibrationError::ZeroBudget);
    }
    obs.check()?;
    let horizon = match obs.times.last() {
        Some(t) if *t > 0.0 => *t,
        Some(_) => {
            return Err(CalibrationError::InvalidObservations(
                "observations must extend past t = 0".into(),
            ))
        }
        None => return Err(CalibrationError::NoObservations),
    };
    if obs.times[0] < 0.0 {
        return Err(CalibrationError::InvalidObservations(
            "observation times must be >= 0".into(),
        ));
    }
    let start: Vec<f64> = free
        .iter()
        .map(|p| {
            p.get(model)
                .ok_or_else(|| CalibrationError::UnknownParameter(p.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let objective = Objective {
        base: model,
        obs,
        free,
        run: RunConfig::new(horizon, config.dt.min(horizon)),
    };

    let initial = objective.evaluate(&start)?;
    let mut trace = vec![TraceEntry {
        params: objective.named(&start),
        discrepancy: initial,
    }];
    let mut evaluations = 1;
    let mut current = start.clone();
    let mut best = initial;
    let mut step = config.initial_step;

    'search: while step >= config.min_step && best > 0.0 {
        let mut improved = false;
        for i in 0..free.len() {
            for factor in [1.0 + step, 1.0 - step] {
                if evaluations >= config.budget {
                    break 'search;
                }
                let mut probe = current.clone();
                probe[i] *= factor;
                let score = objective.evaluate(&probe).unwrap_or(f64::INFINITY);
                evaluations += 1;
                trace.push(TraceEntry {
                    params: objective.named(&probe),
                    discrepancy: score,
                });
                if score < best {
                    best = score;
                    current = probe;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }

    Ok(FitResult {
        initial_params: objective.named(&start),
        best_params: objective.named(&current),
        initial_discrepancy: initial,
        best_discrepancy: best,
        evaluations,
        trace,
    })
}
