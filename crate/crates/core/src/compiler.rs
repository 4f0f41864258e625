//! Turns a conceptual model into an executable reaction system.
//!
//! Every biotic entity becomes a population with a birth and a death
//! reaction; each relation adds encounter reactions with mass-action
//! propensities. The same [`SimulationSpec`] drives both engines.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_model, ConceptualModel, EntityKind, EntityParameters, RelationKind, ValidationReport};
use crate::trait_store::{derive_params, TraitStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    ExponentialGrowth,
    LogisticGrowth,
    PredatorPrey,
    CompetitiveExclusion,
    Generalized,
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Archetype::ExponentialGrowth => "exponential_growth",
            Archetype::LogisticGrowth => "logistic_growth",
            Archetype::PredatorPrey => "predator_prey",
            Archetype::CompetitiveExclusion => "competitive_exclusion",
            Archetype::Generalized => "generalized",
        })
    }
}

/// Rate law of a reaction as a function of the population state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Propensity {
    /// `rate * N`
    Linear { entity: String, rate: f64 },
    /// `rate * N * max(0, 1 - N / capacity)`
    LogisticBirth { entity: String, rate: f64, capacity: f64 },
    /// `rate * N_first * N_second`
    MassAction { first: String, second: String, rate: f64 },
}

impl Propensity {
    pub fn entities(&self) -> Vec<&str> {
        match self {
            Propensity::Linear { entity, .. } | Propensity::LogisticBirth { entity, .. } => vec![entity],
            Propensity::MassAction { first, second, .. } => vec![first, second],
        }
    }

    pub fn rate(&self) -> f64 {
        match self {
            Propensity::Linear { rate, .. }
            | Propensity::LogisticBirth { rate, .. }
            | Propensity::MassAction { rate, .. } => *rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    pub label: String,
    pub propensity: Propensity,
    /// Population change per firing, keyed by entity id.
    pub deltas: BTreeMap<String, i64>,
}

impl Reaction {
    fn new(label: String, propensity: Propensity, entity: &str, delta: i64) -> Self {
        Self {
            label,
            propensity,
            deltas: BTreeMap::from([(entity.to_string(), delta)]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub entity_id: String,
    pub initial_population: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub populations: Vec<Population>,
    pub reactions: Vec<Reaction>,
    pub archetype: Archetype,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("reaction `{reaction}` references unlisted population `{entity}`")]
    UnknownPopulation { reaction: String, entity: String },
    #[error("reaction `{0}` changes no population")]
    NoDeltas(String),
    #[error("mass-action reaction `{0}` must reference two distinct populations")]
    MassActionArity(String),
    #[error("reaction `{0}` has a negative or non-finite coefficient")]
    BadCoefficient(String),
    #[error("population `{0}` has a negative or non-finite initial value")]
    BadInitial(String),
    #[error("population `{0}` is listed more than once")]
    DuplicatePopulation(String),
}

impl SimulationSpec {
    pub fn population_index(&self, entity: &str) -> Option<usize> {
        self.populations.iter().position(|p| p.entity_id == entity)
    }

    /// Checks the structural invariants the engines rely on. Non-negative,
    /// finite coefficients make every propensity non-negative on
    /// non-negative states.
    pub fn check(&self) -> Result<(), SpecError> {
        for (i, p) in self.populations.iter().enumerate() {
            if !(p.initial_population.is_finite() && p.initial_population >= 0.0) {
                return Err(SpecError::BadInitial(p.entity_id.clone()));
            }
            if self.populations[..i].iter().any(|q| q.entity_id == p.entity_id) {
                return Err(SpecError::DuplicatePopulation(p.entity_id.clone()));
            }
        }
        for r in &self.reactions {
            for e in r
                .propensity
                .entities()
                .into_iter()
                .chain(r.deltas.keys().map(String::as_str))
            {
                if self.population_index(e).is_none() {
                    return Err(SpecError::UnknownPopulation {
                        reaction: r.label.clone(),
                        entity: e.to_string(),
                    });
                }
            }
            if r.deltas.values().all(|d| *d == 0) {
                return Err(SpecError::NoDeltas(r.label.clone()));
            }
            let rate_ok = r.propensity.rate().is_finite() && r.propensity.rate() >= 0.0;
            let capacity_ok = match &r.propensity {
                Propensity::LogisticBirth { capacity, .. } => capacity.is_finite() && *capacity > 0.0,
                _ => true,
            };
            if !rate_ok || !capacity_ok {
                return Err(SpecError::BadCoefficient(r.label.clone()));
            }
            if let Propensity::MassAction { first, second, .. } = &r.propensity {
                if first == second {
                    return Err(SpecError::MassActionArity(r.label.clone()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compiled {
    pub spec: SimulationSpec,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("model is invalid: {0}")]
    Invalid(ValidationReport),
    #[error("entity `{entity}` is missing {field}")]
    MissingParameters { entity: String, field: &'static str },
    #[error("resource `{resource}` consumed by `{consumer}` has no carrying_capacity")]
    MissingResourceCapacity { resource: String, consumer: String },
}

/// Structural archetype of a valid model. The first matching rule wins:
///
/// 1. one biotic entity, no relations, no carrying capacity: exponential growth
/// 2. one biotic entity that has a carrying capacity or only `consumes_resource`
///    relations: logistic growth
/// 3. two biotic entities joined by a single `consumes`: predator-prey
/// 4. two biotic entities joined only by `competes_with`, or both consuming one
///    shared resource: competitive exclusion
/// 5. anything else: generalized
pub fn classify_archetype(model: &ConceptualModel) -> Result<Archetype, ValidationReport> {
    let report = validate_model(model);
    if !report.is_valid() {
        return Err(report);
    }
    let biotic: Vec<&str> = model.biotic_entities().map(|e| e.id.as_str()).collect();
    let rels = &model.relations;

    if biotic.len() == 1 {
        let has_capacity = model
            .entity_params
            .get(biotic[0])
            .and_then(|p| p.carrying_capacity)
            .is_some();
        if rels.is_empty() && !has_capacity {
            return Ok(Archetype::ExponentialGrowth);
        }
        let only_resources = rels.iter().all(|r| r.kind == RelationKind::ConsumesResource);
        if only_resources && (has_capacity || !rels.is_empty()) {
            return Ok(Archetype::LogisticGrowth);
        }
        return Ok(Archetype::Generalized);
    }

    if biotic.len() == 2 {
        if rels.len() == 1 && rels[0].kind == RelationKind::Consumes {
            return Ok(Archetype::PredatorPrey);
        }
        if !rels.is_empty() && rels.iter().all(|r| r.kind == RelationKind::CompetesWith) {
            return Ok(Archetype::CompetitiveExclusion);
        }
        if rels.len() == 2
            && rels.iter().all(|r| r.kind == RelationKind::ConsumesResource)
            && rels[0].source != rels[1].source
            && rels[0].target == rels[1].target
        {
            return Ok(Archetype::CompetitiveExclusion);
        }
    }

    Ok(Archetype::Generalized)
}

/// Compiles a valid, fully parameterized model into a reaction system.
///
/// Relations without interaction parameters compile with rate 0 and emit a
/// warning; `consumes` without an efficiency gets efficiency 0 likewise.
pub fn compile(model: &ConceptualModel) -> Result<Compiled, CompileError> {
    let archetype = classify_archetype(model).map_err(CompileError::Invalid)?;
    let mut warnings = Vec::new();

    let mut populations = Vec::new();
    let mut params: BTreeMap<&str, (&EntityParameters, f64, f64)> = BTreeMap::new();
    for e in model.biotic_entities() {
        let p = model
            .entity_params
            .get(&e.id)
            .ok_or_else(|| CompileError::MissingParameters {
                entity: e.id.clone(),
                field: "entity parameters",
            })?;
        let birth = p.birth_rate.ok_or_else(|| CompileError::MissingParameters {
            entity: e.id.clone(),
            field: "birth_rate",
        })?;
        let death = p.death_rate.ok_or_else(|| CompileError::MissingParameters {
            entity: e.id.clone(),
            field: "death_rate",
        })?;
        params.insert(e.id.as_str(), (p, birth, death));
        populations.push(Population {
            entity_id: e.id.clone(),
            initial_population: p.initial_population,
        });
    }

    // Resource-bounded consumers take their capacity from the resources they draw on.
    let mut resource_capacity: BTreeMap<&str, f64> = BTreeMap::new();
    for r in model
        .relations
        .iter()
        .filter(|r| r.kind == RelationKind::ConsumesResource)
    {
        let k = model
            .entity_params
            .get(&r.target)
            .and_then(|p| p.carrying_capacity)
            .ok_or_else(|| CompileError::MissingResourceCapacity {
                resource: r.target.clone(),
                consumer: r.source.clone(),
            })?;
        *resource_capacity.entry(r.source.as_str()).or_insert(0.0) += k;
    }

    let mut reactions = Vec::new();
    for e in model.biotic_entities() {
        let (p, birth, death) = params[e.id.as_str()];
        let capacity = resource_capacity.get(e.id.as_str()).copied().or(p.carrying_capacity);
        let birth_law = match capacity {
            Some(capacity) => Propensity::LogisticBirth {
                entity: e.id.clone(),
                rate: birth,
                capacity,
            },
            None => Propensity::Linear {
                entity: e.id.clone(),
                rate: birth,
            },
        };
        reactions.push(Reaction::new(format!("birth:{}", e.id), birth_law, &e.id, 1));
        reactions.push(Reaction::new(
            format!("death:{}", e.id),
            Propensity::Linear {
                entity: e.id.clone(),
                rate: death,
            },
            &e.id,
            -1,
        ));
    }

    for r in &model.relations {
        if r.kind == RelationKind::ConsumesResource {
            continue;
        }
        let key = r.key();
        let (rate, efficiency) = match model.interaction(&key) {
            Some(ip) => (ip.rate, ip.efficiency),
            None => {
                warnings.push(Warning {
                    subject: key.to_string(),
                    message: format!("relation {key} has no interaction parameters; rate defaults to 0"),
                });
                (0.0, Some(0.0))
            }
        };
        let mass_action = |rate: f64| Propensity::MassAction {
            first: r.source.clone(),
            second: r.target.clone(),
            rate,
        };
        match r.kind {
            RelationKind::Consumes => {
                let efficiency = efficiency.unwrap_or_else(|| {
                    warnings.push(Warning {
                        subject: key.to_string(),
                        message: format!("relation {key} has no efficiency; predator births default to 0"),
                    });
                    0.0
                });
                reactions.push(Reaction::new(
                    format!("predation:{key}"),
                    mass_action(rate),
                    &r.target,
                    -1,
                ));
                reactions.push(Reaction::new(
                    format!("predator_birth:{key}"),
                    mass_action(efficiency * rate),
                    &r.source,
                    1,
                ));
            }
            RelationKind::Inhibits => {
                reactions.push(Reaction::new(
                    format!("inhibition:{key}"),
                    mass_action(rate),
                    &r.target,
                    -1,
                ));
            }
            RelationKind::Enhances => {
                reactions.push(Reaction::new(
                    format!("enhancement:{key}"),
                    mass_action(rate),
                    &r.target,
                    1,
                ));
            }
            RelationKind::CompetesWith => {
                reactions.push(Reaction::new(
                    format!("competition:{key}:{}", r.source),
                    mass_action(rate),
                    &r.source,
                    -1,
                ));
                reactions.push(Reaction::new(
                    format!("competition:{key}:{}", r.target),
                    mass_action(rate),
                    &r.target,
                    -1,
                ));
            }
            RelationKind::ConsumesResource => unreachable!(),
        }
    }

    for w in &warnings {
        tracing::warn!(subject = %w.subject, "{}", w.message);
    }

    Ok(Compiled {
        spec: SimulationSpec {
            populations,
            reactions,
            archetype,
        },
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spawned {
    pub model: ConceptualModel,
    pub warnings: Vec<Warning>,
}

/// Fills missing birth/death rates of species-linked biotic entities from the
/// trait store. Values already present are never overwritten.
pub fn spawn_defaults(model: &ConceptualModel, store: &TraitStore) -> Spawned {
    let mut out = model.clone();
    let mut warnings = Vec::new();
    for e in model.entities.iter().filter(|e| e.kind == EntityKind::Biotic) {
        let Some(species) = &e.species_ref else { continue };
        let needs_fill = out
            .entity_params
            .get(&e.id)
            .is_none_or(|p| p.birth_rate.is_none() || p.death_rate.is_none());
        if !needs_fill {
            continue;
        }
        let Some(record) = store.get(species) else {
            warnings.push(Warning {
                subject: e.id.clone(),
                message: format!("species `{species}` of entity `{}` is not in the trait store", e.id),
            });
            continue;
        };
        let rates = derive_params(record);
        let p = out.entity_params.entry(e.id.clone()).or_default();
        p.birth_rate.get_or_insert(rates.birth_rate);
        p.death_rate.get_or_insert(rates.death_rate);
    }
    Spawned { model: out, warnings }
}

/// Seeds defaults from the trait store, then compiles.
pub fn compile_seeded(model: &ConceptualModel, store: &TraitStore) -> Result<Compiled, CompileError> {
    let Spawned { model, warnings } = spawn_defaults(model, store);
    let mut compiled = compile(&model)?;
    let mut all = warnings;
    all.append(&mut compiled.warnings);
    compiled.warnings = all;
    Ok(compiled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Entity, InteractionParameters, Relation};
    use crate::trait_store::TraitRecord;

    fn single(k: Option<f64>) -> ConceptualModel {
        let mut m = ConceptualModel::new("one", "One");
        m.entities.push(Entity::biotic("rabbit", "Rabbit"));
        let mut p = EntityParameters::new(100.0, 0.2, 0.1);
        p.carrying_capacity = k;
        m.entity_params.insert("rabbit".into(), p);
        m
    }

    fn predator_prey() -> ConceptualModel {
        let mut m = ConceptualModel::new("pp", "Predator-prey");
        m.entities.push(Entity::biotic("hare", "Hare"));
        m.entities.push(Entity::biotic("lynx", "Lynx"));
        let r = Relation::new("lynx", RelationKind::Consumes, "hare");
        m.interaction_params
            .push(InteractionParameters::new(&r, 0.01).with_efficiency(0.5));
        m.relations.push(r);
        m.entity_params
            .insert("hare".into(), EntityParameters::new(500.0, 1.0, 0.0));
        m.entity_params
            .insert("lynx".into(), EntityParameters::new(50.0, 0.0, 0.5));
        m
    }

    #[test]
    fn exponential_rule() {
        assert_eq!(classify_archetype(&single(None)).unwrap(), Archetype::ExponentialGrowth);
    }

    #[test]
    fn logistic_rule() {
        assert_eq!(
            classify_archetype(&single(Some(1000.0))).unwrap(),
            Archetype::LogisticGrowth
        );

        let mut m = single(None);
        m.entities.push(Entity::abiotic("grass", "Grass"));
        m.entity_params.insert(
            "grass".into(),
            EntityParameters {
                carrying_capacity: Some(800.0),
                ..Default::default()
            },
        );
        m.relations
            .push(Relation::new("rabbit", RelationKind::ConsumesResource, "grass"));
        assert_eq!(classify_archetype(&m).unwrap(), Archetype::LogisticGrowth);
    }

    #[test]
    fn predator_prey_rule() {
        assert_eq!(classify_archetype(&predator_prey()).unwrap(), Archetype::PredatorPrey);
    }

    #[test]
    fn competition_rules() {
        let mut m = ConceptualModel::new("c", "c");
        m.entities.push(Entity::biotic("a", "A"));
        m.entities.push(Entity::biotic("b", "B"));
        m.relations.push(Relation::new("a", RelationKind::CompetesWith, "b"));
        assert_eq!(classify_archetype(&m).unwrap(), Archetype::CompetitiveExclusion);

        let mut m = ConceptualModel::new("c", "c");
        m.entities.push(Entity::biotic("a", "A"));
        m.entities.push(Entity::biotic("b", "B"));
        m.entities.push(Entity::abiotic("food", "Food"));
        m.relations
            .push(Relation::new("a", RelationKind::ConsumesResource, "food"));
        m.relations
            .push(Relation::new("b", RelationKind::ConsumesResource, "food"));
        assert_eq!(classify_archetype(&m).unwrap(), Archetype::CompetitiveExclusion);
    }

    #[test]
    fn invalid_model_is_rejected_with_report() {
        let mut m = single(None);
        m.relations
            .push(Relation::new("rabbit", RelationKind::Consumes, "ghost"));
        let report = classify_archetype(&m).unwrap_err();
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(compile(&m), Err(CompileError::Invalid(_))));
    }

    #[test]
    fn exponential_compiles_to_birth_and_death() {
        let c = compile(&single(None)).unwrap();
        assert_eq!(c.spec.reactions.len(), 2);
        assert_eq!(
            c.spec.reactions[0].propensity,
            Propensity::Linear {
                entity: "rabbit".into(),
                rate: 0.2
            }
        );
        assert_eq!(
            c.spec.reactions[1].propensity,
            Propensity::Linear {
                entity: "rabbit".into(),
                rate: 0.1
            }
        );
        assert_eq!(c.spec.reactions[1].deltas["rabbit"], -1);
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn predator_prey_compiles_to_six_reactions() {
        let c = compile(&predator_prey()).unwrap();
        assert_eq!(c.spec.archetype, Archetype::PredatorPrey);
        assert_eq!(c.spec.reactions.len(), 6);
        let predation = &c.spec.reactions[4];
        assert_eq!(predation.deltas, BTreeMap::from([("hare".to_string(), -1)]));
        assert_eq!(predation.propensity.rate(), 0.01);
        let predator_birth = &c.spec.reactions[5];
        assert_eq!(predator_birth.deltas, BTreeMap::from([("lynx".to_string(), 1)]));
        assert_eq!(predator_birth.propensity.rate(), 0.005);
        c.spec.check().unwrap();
    }

    #[test]
    fn missing_interaction_defaults_to_inert_with_warning() {
        let mut m = predator_prey();
        m.interaction_params.clear();
        let c = compile(&m).unwrap();
        assert_eq!(c.spec.reactions.len(), 6);
        assert_eq!(c.spec.reactions[4].propensity.rate(), 0.0);
        assert_eq!(c.spec.reactions[5].propensity.rate(), 0.0);
        assert_eq!(c.warnings.len(), 1);
        assert_eq!(c.warnings[0].subject, "lynx:consumes:hare");
    }

    #[test]
    fn missing_parameters_name_the_entity() {
        let mut m = predator_prey();
        m.entity_params.remove("lynx");
        match compile(&m) {
            Err(CompileError::MissingParameters { entity, .. }) => assert_eq!(entity, "lynx"),
            other => panic!("unexpected {other:?}"),
        }
        let mut m = predator_prey();
        m.entity_params.get_mut("hare").unwrap().death_rate = None;
        match compile(&m) {
            Err(CompileError::MissingParameters { entity, field }) => {
                assert_eq!(entity, "hare");
                assert_eq!(field, "death_rate");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn resource_sets_logistic_capacity() {
        let mut m = single(None);
        m.entities.push(Entity::abiotic("grass", "Grass"));
        m.relations
            .push(Relation::new("rabbit", RelationKind::ConsumesResource, "grass"));
        assert!(matches!(compile(&m), Err(CompileError::MissingResourceCapacity { .. })));
        m.entity_params.insert(
            "grass".into(),
            EntityParameters {
                carrying_capacity: Some(800.0),
                ..Default::default()
            },
        );
        let c = compile(&m).unwrap();
        assert_eq!(c.spec.populations.len(), 1);
        assert_eq!(
            c.spec.reactions[0].propensity,
            Propensity::LogisticBirth {
                entity: "rabbit".into(),
                rate: 0.2,
                capacity: 800.0
            }
        );
    }

    fn kudzu_store() -> TraitStore {
        let mut s = TraitStore::new();
        s.insert(TraitRecord {
            species_id: "pueraria_montana".into(),
            common_name: "Kudzu".into(),
            lifespan: 5.0,
            body_mass: 1000.0,
            offspring_count: 4.0,
            reproductive_maturity: 1.0,
        })
        .unwrap();
        s
    }

    #[test]
    fn spawn_fills_missing_rates() {
        let mut m = ConceptualModel::new("k", "k");
        m.entities
            .push(Entity::biotic("kudzu", "Kudzu").with_species("pueraria_montana"));
        m.entity_params.insert(
            "kudzu".into(),
            EntityParameters {
                initial_population: 50.0,
                ..Default::default()
            },
        );
        let s = spawn_defaults(&m, &kudzu_store());
        assert!(s.warnings.is_empty());
        let p = &s.model.entity_params["kudzu"];
        assert_eq!(p.death_rate, Some(0.2));
        assert_eq!(p.birth_rate, Some(1.0));
        assert_eq!(p.initial_population, 50.0);
    }

    #[test]
    fn spawn_never_overwrites() {
        let mut m = ConceptualModel::new("k", "k");
        m.entities
            .push(Entity::biotic("kudzu", "Kudzu").with_species("pueraria_montana"));
        m.entity_params
            .insert("kudzu".into(), EntityParameters::new(50.0, 0.7, 0.3));
        assert_eq!(spawn_defaults(&m, &kudzu_store()).model, m);

        // Partially filled: only the missing rate is seeded.
        m.entity_params.get_mut("kudzu").unwrap().death_rate = None;
        let p = &spawn_defaults(&m, &kudzu_store()).model.entity_params["kudzu"];
        assert_eq!(p.birth_rate, Some(0.7));
        assert_eq!(p.death_rate, Some(0.2));
    }

    #[test]
    fn spawn_unknown_species_warns() {
        let mut m = ConceptualModel::new("k", "k");
        m.entities.push(Entity::biotic("bug", "Bug").with_species("unknown_sp"));
        m.entities.push(Entity::biotic("tree", "Tree"));
        let s = spawn_defaults(&m, &kudzu_store());
        assert_eq!(s.model, m);
        assert_eq!(s.warnings.len(), 1);
        assert_eq!(s.warnings[0].subject, "bug");
    }
}
