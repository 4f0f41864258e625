//! Core of the VERA modeling workbench.
//!
//! A learner writes a [`ConceptualModel`](model::ConceptualModel): entities,
//! typed relations and parameters. The [`compiler`] turns it into a
//! reaction system, the [`engine`] runs that system stochastically or as
//! mean-field ODEs, and [`calibration`] recommends parameter changes that
//! bring simulated trajectories closer to imported observations.
//! Species traits from the [`trait_store`] seed default rates, and the
//! [`library`] keeps models and their copy lineage on disk.

pub mod calibration;
pub mod compiler;
pub mod diff;
pub mod engine;
pub mod fixtures;
pub mod library;
pub mod model;
pub mod trait_store;

pub use calibration::{
    discrepancy, import_observations, recommend_parameters, FitConfig, FitResult, ObservationSeries, ParamPath,
};
pub use compiler::{classify_archetype, compile, compile_seeded, spawn_defaults, Archetype, Compiled, SimulationSpec};
pub use diff::{apply_delta, diff_models, ModelDelta};
pub use engine::{ensemble_mean, run_ode, run_stochastic, simulate, EngineKind, RunConfig, TimeSeries};
pub use library::{Library, LibraryError, StoredModel};
pub use model::{complexity, validate_model, ComplexityScore, ConceptualModel, ValidationReport};
pub use trait_store::{derive_params, TraitRecord, TraitStore};
