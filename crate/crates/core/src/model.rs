//! Conceptual-model language.
//!
//! A [`ConceptualModel`] is a typed graph: entities (populations and
//! resources) joined by relations, plus the numeric parameters the
//! simulation compiler needs. The JSON form produced by serde here is the
//! shared document format used by the library, the HTTP service and the UI;
//! unknown fields are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Biotic,
    Abiotic,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub id: String,
    pub name: String,
    pub kind: EntityKind,
    /// Canonical species id in the trait store. Only biotic entities may carry one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species_ref: Option<String>,
}

impl Entity {
    pub fn biotic(id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            kind: EntityKind::Biotic,
            species_ref: None,
        }
    }

    pub fn abiotic(id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            kind: EntityKind::Abiotic,
            species_ref: None,
        }
    }

    pub fn with_species(mut self, species_id: impl Into<String>) -> Self {
        self.species_ref = Some(species_id.into());
        self
    }

    pub fn is_biotic(&self) -> bool {
        self.kind == EntityKind::Biotic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    /// Source eats target (predator → prey).
    Consumes,
    /// Source raises the target's death rate.
    Inhibits,
    /// Source raises the target's birth rate.
    Enhances,
    /// Mutual harm between two biotic entities.
    CompetesWith,
    /// Source draws on an abiotic resource that bounds its growth.
    ConsumesResource,
}

impl RelationKind {
    pub const ALL: [RelationKind; 5] = [
        RelationKind::Consumes,
        RelationKind::Inhibits,
        RelationKind::Enhances,
        RelationKind::CompetesWith,
        RelationKind::ConsumesResource,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::Consumes => "consumes",
            RelationKind::Inhibits => "inhibits",
            RelationKind::Enhances => "enhances",
            RelationKind::CompetesWith => "competes_with",
            RelationKind::ConsumesResource => "consumes_resource",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relation {
    pub source: String,
    pub target: String,
    pub kind: RelationKind,
}

impl Relation {
    pub fn new(source: impl Into<String>, kind: RelationKind, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            kind,
        }
    }

    pub fn key(&self) -> RelationKey {
        RelationKey {
            source: self.source.clone(),
            target: self.target.clone(),
            kind: self.kind,
        }
    }
}

/// Identifies a relation (and its interaction parameters) by endpoints and kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationKey {
    pub source: String,
    pub target: String,
    pub kind: RelationKind,
}

impl fmt::Display for RelationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.source, self.kind, self.target)
    }
}

/// Per-entity demographic parameters.
///
/// Birth and death rates are optional so that a model can be saved before
/// they are seeded from the trait store; compilation requires both.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityParameters {
    #[serde(default)]
    pub initial_population: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub birth_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub death_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrying_capacity: Option<f64>,
}

impl EntityParameters {
    pub fn new(initial_population: f64, birth_rate: f64, death_rate: f64) -> Self {
        Self {
            initial_population,
            birth_rate: Some(birth_rate),
            death_rate: Some(death_rate),
            carrying_capacity: None,
        }
    }

    pub fn with_capacity(mut self, k: f64) -> Self {
        self.carrying_capacity = Some(k);
        self
    }
}

/// Interaction coefficients for one relation, keyed by (source, target, kind).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionParameters {
    pub source: String,
    pub target: String,
    pub kind: RelationKind,
    pub rate: f64,
    /// Fraction of consumed prey converted into consumer births; read only for `consumes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
}

impl InteractionParameters {
    pub fn new(relation: &Relation, rate: f64) -> Self {
        Self {
            source: relation.source.clone(),
            target: relation.target.clone(),
            kind: relation.kind,
            rate,
            efficiency: None,
        }
    }

    pub fn with_efficiency(mut self, e: f64) -> Self {
        self.efficiency = Some(e);
        self
    }

    pub fn key(&self) -> RelationKey {
        RelationKey {
            source: self.source.clone(),
            target: self.target.clone(),
            kind: self.kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lineage {
    pub parent_id: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptualModel {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub entities: Vec<Entity>,
    #[serde(default)]
    pub relations: Vec<Relation>,
    #[serde(default)]
    pub entity_params: BTreeMap<String, EntityParameters>,
    #[serde(default)]
    pub interaction_params: Vec<InteractionParameters>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lineage: Option<Lineage>,
}

impl ConceptualModel {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn biotic_entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(|e| e.is_biotic())
    }

    pub fn interaction(&self, key: &RelationKey) -> Option<&InteractionParameters> {
        self.interaction_params
            .iter()
            .find(|p| p.source == key.source && p.target == key.target && p.kind == key.kind)
    }

    pub fn interaction_mut(&mut self, key: &RelationKey) -> Option<&mut InteractionParameters> {
        self.interaction_params
            .iter_mut()
            .find(|p| p.source == key.source && p.target == key.target && p.kind == key.kind)
    }

    /// Copy with the list-valued parts sorted into a canonical order and the
    /// identity fields cleared. Two models are structurally equal when their
    /// canonical forms are equal.
    pub fn canonical(&self) -> ConceptualModel {
        let mut m = self.clone();
        m.id.clear();
        m.lineage = None;
        m.entities.sort_by(|a, b| a.id.cmp(&b.id));
        m.relations.sort();
        m.interaction_params.sort_by_key(|p| p.key());
        m
    }

    pub fn structurally_eq(&self, other: &ConceptualModel) -> bool {
        self.canonical() == other.canonical()
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    DuplicateEntityId,
    AbioticSpeciesRef,
    UnknownEntity,
    SelfRelation,
    DuplicateRelation,
    ResourceTargetNotAbiotic,
    CompetitorNotBiotic,
    InteractionEndpointNotBiotic,
    ParamsForUnknownEntity,
    InvalidEntityParameter,
    InteractionForUnknownRelation,
    DuplicateInteraction,
    InvalidInteractionParameter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    /// Entity id or relation key (`source:kind:target`) the violation concerns.
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, rule: Rule, subject: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            rule,
            subject: subject.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("model is valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}", v.message)?;
        }
        Ok(())
    }
}

fn non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

/// Checks every structural and numeric invariant of a model.
///
/// Violations are reported in a fixed order (entities, relations, entity
/// parameters, interaction parameters) so the report is a pure function of
/// the input. Missing birth/death rates are not violations here: they may
/// be filled later from the trait store, and compilation checks them.
pub fn validate_model(model: &ConceptualModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut kinds: BTreeMap<&str, EntityKind> = BTreeMap::new();

    for e in &model.entities {
        if kinds.insert(e.id.as_str(), e.kind).is_some() {
            report.push(
                Rule::DuplicateEntityId,
                &e.id,
                format!("entity id `{}` is used more than once", e.id),
            );
        }
        if e.kind == EntityKind::Abiotic && e.species_ref.is_some() {
            report.push(
                Rule::AbioticSpeciesRef,
                &e.id,
                format!("abiotic entity `{}` cannot carry a species_ref", e.id),
            );
        }
    }

    let mut seen_relations = BTreeSet::new();
    for r in &model.relations {
        let key = r.key();
        let subject = key.to_string();
        let mut endpoints_known = true;
        for endpoint in [&r.source, &r.target] {
            if !kinds.contains_key(endpoint.as_str()) {
                endpoints_known = false;
                report.push(
                    Rule::UnknownEntity,
                    endpoint,
                    format!("relation {subject} references unknown entity `{endpoint}`"),
                );
            }
        }
        if r.source == r.target {
            report.push(
                Rule::SelfRelation,
                &subject,
                format!("relation {subject} links `{}` to itself", r.source),
            );
        }
        if !seen_relations.insert(key.clone()) {
            report.push(
                Rule::DuplicateRelation,
                &subject,
                format!("relation {subject} is declared more than once"),
            );
        }
        if !endpoints_known {
            continue;
        }
        let src = kinds[r.source.as_str()];
        let tgt = kinds[r.target.as_str()];
        match r.kind {
            RelationKind::ConsumesResource => {
                if tgt != EntityKind::Abiotic {
                    report.push(
                        Rule::ResourceTargetNotAbiotic,
                        &subject,
                        format!("consumes_resource target `{}` must be abiotic", r.target),
                    );
                }
                if src != EntityKind::Biotic {
                    report.push(
                        Rule::InteractionEndpointNotBiotic,
                        &subject,
                        format!("consumes_resource source `{}` must be biotic", r.source),
                    );
                }
            }
            RelationKind::CompetesWith => {
                if src != EntityKind::Biotic || tgt != EntityKind::Biotic {
                    report.push(
                        Rule::CompetitorNotBiotic,
                        &subject,
                        format!(
                            "competes_with requires both `{}` and `{}` to be biotic",
                            r.source, r.target
                        ),
                    );
                }
            }
            RelationKind::Consumes | RelationKind::Inhibits | RelationKind::Enhances => {
                if src != EntityKind::Biotic || tgt != EntityKind::Biotic {
                    report.push(
                        Rule::InteractionEndpointNotBiotic,
                        &subject,
                        format!(
                            "{} requires both `{}` and `{}` to be biotic",
                            r.kind, r.source, r.target
                        ),
                    );
                }
            }
        }
    }

    for (id, p) in &model.entity_params {
        if !kinds.contains_key(id.as_str()) {
            report.push(
                Rule::ParamsForUnknownEntity,
                id,
                format!("parameters given for unknown entity `{id}`"),
            );
        }
        let mut check = |field: &str, value: f64, ok: bool| {
            if !ok {
                report.push(
                    Rule::InvalidEntityParameter,
                    id,
                    format!("{field} of `{id}` is {value}, expected a finite value in range"),
                );
            }
        };
        check(
            "initial_population",
            p.initial_population,
            non_negative(p.initial_population),
        );
        if let Some(b) = p.birth_rate {
            check("birth_rate", b, non_negative(b));
        }
        if let Some(d) = p.death_rate {
            check("death_rate", d, non_negative(d));
        }
        if let Some(k) = p.carrying_capacity {
            check("carrying_capacity", k, k.is_finite() && k > 0.0);
        }
    }

    let mut seen_interactions = BTreeSet::new();
    for p in &model.interaction_params {
        let key = p.key();
        let subject = key.to_string();
        if !seen_relations.contains(&key) {
            report.push(
                Rule::InteractionForUnknownRelation,
                &subject,
                format!("interaction parameters given for undeclared relation {subject}"),
            );
        }
        if !seen_interactions.insert(key) {
            report.push(
                Rule::DuplicateInteraction,
                &subject,
                format!("interaction parameters for {subject} given more than once"),
            );
        }
        if !non_negative(p.rate) {
            report.push(
                Rule::InvalidInteractionParameter,
                &subject,
                format!("rate of {subject} is {}, expected finite and >= 0", p.rate),
            );
        }
        if let Some(e) = p.efficiency {
            if !(e.is_finite() && (0.0..=1.0).contains(&e)) {
                report.push(
                    Rule::InvalidInteractionParameter,
                    &subject,
                    format!("efficiency of {subject} is {e}, expected within [0, 1]"),
                );
            }
        }
    }

    report
}

// ---------------------------------------------------------------------------
// Complexity
// ---------------------------------------------------------------------------

/// Size of a model as a count of graph nodes and links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityScore {
    pub nodes: usize,
    pub links: usize,
    pub total: usize,
}

pub fn complexity(model: &ConceptualModel) -> ComplexityScore {
    let nodes = model.entities.len();
    let links = model.relations.len();
    ComplexityScore {
        nodes,
        links,
        total: nodes + links,
    }
}
