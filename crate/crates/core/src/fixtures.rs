//! Reference models: one per archetype plus the kudzu invasion scenario.
//!
//! Used by tests, the acceptance suite and the CLI's `example` output.

use crate::model::{ConceptualModel, Entity, EntityParameters, InteractionParameters, Relation, RelationKind};

/// One population with linear birth and death.
pub fn exponential(n0: f64, birth: f64, death: f64) -> ConceptualModel {
    let mut m = ConceptualModel::new("exponential", "Exponential growth");
    m.description = "A single population with unbounded growth".into();
    m.entities.push(Entity::biotic("rabbit", "Rabbit"));
    m.entity_params
        .insert("rabbit".into(), EntityParameters::new(n0, birth, death));
    m
}

/// One population with logistic birth and no deaths, so `r = birth`.
pub fn logistic(n0: f64, r: f64, k: f64) -> ConceptualModel {
    let mut m = ConceptualModel::new("logistic", "Logistic growth");
    m.description = "A single population saturating at its carrying capacity".into();
    m.entities.push(Entity::biotic("deer", "Deer"));
    m.entity_params
        .insert("deer".into(), EntityParameters::new(n0, r, 0.0).with_capacity(k));
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LotkaVolterra {
    pub prey0: f64,
    pub predator0: f64,
    /// Prey per-capita birth rate.
    pub prey_birth: f64,
    /// Predator per-capita death rate.
    pub predator_death: f64,
    /// Encounter coefficient.
    pub predation: f64,
    /// Conversion efficiency.
    pub efficiency: f64,
}

impl Default for LotkaVolterra {
    /// Equilibrium at (500, 500); the default start (1000, 500) orbits it
    /// with period close to `2π / sqrt(prey_birth * predator_death)`.
    fn default() -> Self {
        Self {
            prey0: 1000.0,
            predator0: 500.0,
            prey_birth: 1.0,
            predator_death: 0.5,
            predation: 0.002,
            efficiency: 0.5,
        }
    }
}

impl LotkaVolterra {
    /// `V(x, y) = eβx - d ln x + βy - b ln y`, constant along exact orbits.
    pub fn invariant(&self, prey: f64, predator: f64) -> f64 {
        let eb = self.efficiency * self.predation;
        eb * prey - self.predator_death * prey.ln() + self.predation * predator - self.prey_birth * predator.ln()
    }
}

pub fn predator_prey(p: LotkaVolterra) -> ConceptualModel {
    let mut m = ConceptualModel::new("predator-prey", "Predator-prey");
    m.description = "Lynx eat hares".into();
    m.entities.push(Entity::biotic("hare", "Snowshoe hare"));
    m.entities.push(Entity::biotic("lynx", "Canada lynx"));
    let r = Relation::new("lynx", RelationKind::Consumes, "hare");
    m.interaction_params
        .push(InteractionParameters::new(&r, p.predation).with_efficiency(p.efficiency));
    m.relations.push(r);
    m.entity_params
        .insert("hare".into(), EntityParameters::new(p.prey0, p.prey_birth, 0.0));
    m.entity_params
        .insert("lynx".into(), EntityParameters::new(p.predator0, 0.0, p.predator_death));
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Competition {
    pub n1: f64,
    pub n2: f64,
    pub r1: f64,
    pub r2: f64,
    pub k1: f64,
    pub k2: f64,
    /// Symmetric encounter coefficient of the `competes_with` relation.
    pub beta: f64,
}

impl Competition {
    /// Standard-form competition coefficients `(a12, a21)`: with zero death
    /// rates the compiled system is `dN1/dt = r1 N1 (1 - (N1 + a12 N2) / K1)`
    /// and symmetrically for species 2.
    pub fn coefficients(&self) -> (f64, f64) {
        (self.beta * self.k1 / self.r1, self.beta * self.k2 / self.r2)
    }
}

impl Default for Competition {
    /// a12 = 0.25, a21 = 1.5: species 1 excludes species 2.
    fn default() -> Self {
        Self {
            n1: 500.0,
            n2: 500.0,
            r1: 4.0,
            r2: 1.0 / 3.0,
            k1: 1000.0,
            k2: 500.0,
            beta: 0.001,
        }
    }
}

pub fn competition(c: Competition) -> ConceptualModel {
    let mut m = ConceptualModel::new("competition", "Competitive exclusion");
    m.description = "Two grazers competing for the same pasture".into();
    m.entities.push(Entity::biotic("red", "Red squirrel"));
    m.entities.push(Entity::biotic("grey", "Grey squirrel"));
    let r = Relation::new("red", RelationKind::CompetesWith, "grey");
    m.interaction_params.push(InteractionParameters::new(&r, c.beta));
    m.relations.push(r);
    m.entity_params
        .insert("red".into(), EntityParameters::new(c.n1, c.r1, 0.0).with_capacity(c.k1));
    m.entity_params.insert(
        "grey".into(),
        EntityParameters::new(c.n2, c.r2, 0.0).with_capacity(c.k2),
    );
    m
}

/// Kudzu smothers American hornbeam; an introduced kudzu bug eats kudzu.
///
/// With `bug_rate > 0` kudzu is pulled down toward `d_bug / (e * bug_rate)`
/// and the hornbeam's net growth stays positive.
pub fn kudzu(bug_rate: f64) -> ConceptualModel {
    let mut m = ConceptualModel::new("kudzu", "Kudzu and the kudzu bug");
    m.description = "Invasive kudzu, a biological control agent, and a native tree".into();
    m.entities
        .push(Entity::biotic("hornbeam", "American hornbeam").with_species("carpinus_caroliniana"));
    m.entities
        .push(Entity::biotic("kudzu", "Kudzu").with_species("pueraria_montana"));
    m.entities
        .push(Entity::biotic("kudzu-bug", "Kudzu bug").with_species("megacopta_cribraria"));
    let inhibits = Relation::new("kudzu", RelationKind::Inhibits, "hornbeam");
    let consumes = Relation::new("kudzu-bug", RelationKind::Consumes, "kudzu");
    m.interaction_params.push(InteractionParameters::new(&inhibits, 1e-5));
    m.interaction_params
        .push(InteractionParameters::new(&consumes, bug_rate).with_efficiency(0.5));
    m.relations.push(inhibits);
    m.relations.push(consumes);
    m.entity_params.insert(
        "hornbeam".into(),
        EntityParameters::new(300.0, 0.05, 0.02).with_capacity(500.0),
    );
    m.entity_params.insert(
        "kudzu".into(),
        EntityParameters::new(2000.0, 1.0, 0.1).with_capacity(5000.0),
    );
    m.entity_params
        .insert("kudzu-bug".into(), EntityParameters::new(100.0, 0.0, 0.3));
    m
}
