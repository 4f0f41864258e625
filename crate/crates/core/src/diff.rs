//! Structural differences between two models, used by copy/revise.
//!
//! Entities are matched by id, relations by `(source, target, kind)`.
//! Identity fields (`id`, `lineage`) are never part of a delta.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{ConceptualModel, Entity, EntityParameters, InteractionParameters, Relation, RelationKey};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelDelta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub added_entities: Vec<Entity>,
    pub removed_entities: Vec<String>,
    /// Entities whose id survives but whose name, kind or species_ref changed.
    pub changed_entities: Vec<Entity>,
    pub added_relations: Vec<Relation>,
    pub removed_relations: Vec<Relation>,
    /// `None` removes the entry.
    pub entity_params: BTreeMap<String, Option<EntityParameters>>,
    pub set_interactions: Vec<InteractionParameters>,
    pub removed_interactions: Vec<Relation>,
}

impl ModelDelta {
    pub fn is_empty(&self) -> bool {
        self == &ModelDelta::default()
    }
}

pub fn diff_models(a: &ConceptualModel, b: &ConceptualModel) -> ModelDelta {
    let mut delta = ModelDelta::default();
    if a.name != b.name {
        delta.name = Some(b.name.clone());
    }
    if a.description != b.description {
        delta.description = Some(b.description.clone());
    }

    let a_entities: BTreeMap<&str, &Entity> = a.entities.iter().map(|e| (e.id.as_str(), e)).collect();
    let b_entities: BTreeMap<&str, &Entity> = b.entities.iter().map(|e| (e.id.as_str(), e)).collect();
    for e in &b.entities {
        match a_entities.get(e.id.as_str()) {
            None => delta.added_entities.push(e.clone()),
            Some(old) if *old != e => delta.changed_entities.push(e.clone()),
            Some(_) => {}
        }
    }
    delta.removed_entities = a
        .entities
        .iter()
        .filter(|e| !b_entities.contains_key(e.id.as_str()))
        .map(|e| e.id.clone())
        .collect();

    let a_rel: BTreeSet<&Relation> = a.relations.iter().collect();
    let b_rel: BTreeSet<&Relation> = b.relations.iter().collect();
    delta.added_relations = b.relations.iter().filter(|r| !a_rel.contains(r)).cloned().collect();
    delta.removed_relations = a.relations.iter().filter(|r| !b_rel.contains(r)).cloned().collect();

    for (id, p) in &b.entity_params {
        if a.entity_params.get(id) != Some(p) {
            delta.entity_params.insert(id.clone(), Some(p.clone()));
        }
    }
    for id in a.entity_params.keys() {
        if !b.entity_params.contains_key(id) {
            delta.entity_params.insert(id.clone(), None);
        }
    }

    let a_int: BTreeMap<RelationKey, &InteractionParameters> =
        a.interaction_params.iter().map(|p| (p.key(), p)).collect();
    let b_int: BTreeMap<RelationKey, &InteractionParameters> =
        b.interaction_params.iter().map(|p| (p.key(), p)).collect();
    for (key, p) in &b_int {
        if a_int.get(key) != Some(p) {
            delta.set_interactions.push((*p).clone());
        }
    }
    for key in a_int.keys() {
        if !b_int.contains_key(key) {
            delta.removed_interactions.push(Relation {
                source: key.source.clone(),
                target: key.target.clone(),
                kind: key.kind,
            });
        }
    }

    delta
}

/// Applies `delta` to a copy of `model`. The result keeps `model`'s id and lineage.
pub fn apply_delta(model: &ConceptualModel, delta: &ModelDelta) -> ConceptualModel {
    let mut out = model.clone();
    if let Some(name) = &delta.name {
        out.name = name.clone();
    }
    if let Some(description) = &delta.description {
        out.description = description.clone();
    }

    let removed: BTreeSet<&str> = delta.removed_entities.iter().map(String::as_str).collect();
    out.entities.retain(|e| !removed.contains(e.id.as_str()));
    for changed in &delta.changed_entities {
        if let Some(slot) = out.entities.iter_mut().find(|e| e.id == changed.id) {
            *slot = changed.clone();
        }
    }
    out.entities.extend(delta.added_entities.iter().cloned());

    let removed: BTreeSet<&Relation> = delta.removed_relations.iter().collect();
    out.relations.retain(|r| !removed.contains(r));
    out.relations.extend(delta.added_relations.iter().cloned());

    for (id, p) in &delta.entity_params {
        match p {
            Some(p) => {
                out.entity_params.insert(id.clone(), p.clone());
            }
            None => {
                out.entity_params.remove(id);
            }
        }
    }

    let removed: BTreeSet<RelationKey> = delta.removed_interactions.iter().map(Relation::key).collect();
    out.interaction_params.retain(|p| !removed.contains(&p.key()));
    for p in &delta.set_interactions {
        match out.interaction_mut(&p.key()) {
            Some(slot) => *slot = p.clone(),
            None => out.interaction_params.push(p.clone()),
        }
    }

    out
}
