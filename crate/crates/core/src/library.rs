//! Durable model library with copy lineage.
//!
//! Layout under the library root:
//!
//! ```text
//! models/<id>.json   one StoredModel per file
//! index.json         summaries of every stored model
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place, so
//! readers only ever see complete records. The index is rebuilt from the
//! model files when the library is opened. Writes are serialized through an
//! internal lock; reads take no lock.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Duration, DurationRound, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{complexity, validate_model, ComplexityScore, ConceptualModel, Lineage, ValidationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredModel {
    pub model: ConceptualModel,
    pub created_at: DateTime<Utc>,
    pub revised_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lineage: Option<String>,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub id: String,
    pub name: String,
    pub tags: Vec<String>,
    pub created_at: DateTime<Utc>,
    pub revised_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lineage: Option<String>,
    pub complexity: ComplexityScore,
}

impl From<&StoredModel> for ModelSummary {
    fn from(s: &StoredModel) -> Self {
        Self {
            id: s.model.id.clone(),
            name: s.model.name.clone(),
            tags: s.tags.clone(),
            created_at: s.created_at,
            revised_at: s.revised_at,
            lineage: s.lineage.clone(),
            complexity: complexity(&s.model),
        }
    }
}

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("model `{0}` not found")]
    NotFound(String),
    #[error("model `{0}` already exists")]
    AlreadyExists(String),
    #[error("model is invalid: {0}")]
    Invalid(ValidationReport),
    #[error("`{0}` is not a usable model id (letters, digits, `-`, `_`, `.`; not starting with `.`)")]
    BadId(String),
    #[error("model id `{body}` does not match `{path}`")]
    IdMismatch { path: String, body: String },
    #[error("lineage of `{id}`: {reason}")]
    Lineage { id: String, reason: String },
    #[error("library I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("library record is corrupt: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

pub struct Library {
    root: PathBuf,
    writer: Mutex<DateTime<Utc>>,
}

impl Library {
    /// Opens (creating if needed) a library rooted at `root`.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, LibraryError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("models"))?;
        let lib = Self {
            root,
            writer: Mutex::new(DateTime::<Utc>::MIN_UTC),
        };
        let stored = lib.scan()?;
        let last = stored
            .iter()
            .map(|s| s.revised_at)
            .max()
            .unwrap_or(DateTime::<Utc>::MIN_UTC);
        *lib.writer.lock().expect("library lock poisoned") = last;
        lib.write_index(&stored)?;
        Ok(lib)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn model_path(&self, id: &str) -> PathBuf {
        self.root.join("models").join(format!("{id}.json"))
    }

    fn scan(&self) -> Result<Vec<StoredModel>, LibraryError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("models"))? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let stored: StoredModel = serde_json::from_slice(&fs::read(&path)?)?;
            out.push(stored);
        }
        Ok(out)
    }

    fn write_index(&self, stored: &[StoredModel]) -> Result<(), LibraryError> {
        let mut summaries: Vec<ModelSummary> = stored.iter().map(ModelSummary::from).collect();
        sort_newest_first(&mut summaries);
        write_atomic(&self.root.join("index.json"), &serde_json::to_vec_pretty(&summaries)?)
    }

    fn read_index(&self) -> Result<Vec<ModelSummary>, LibraryError> {
        Ok(serde_json::from_slice(&fs::read(self.root.join("index.json"))?)?)
    }

    pub fn contains(&self, id: &str) -> bool {
        is_valid_id(id) && self.model_path(id).exists()
    }

    pub fn load(&self, id: &str) -> Result<StoredModel, LibraryError> {
        if !is_valid_id(id) {
            return Err(LibraryError::NotFound(id.to_string()));
        }
        match fs::read(self.model_path(id)) {
            Ok(bytes) => Ok(serde_json::from_slice(&bytes)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(LibraryError::NotFound(id.to_string())),
            Err(e) => Err(e.into()),
        }
    }

    /// Summaries sorted by `revised_at`, newest first. `filter` keeps models
    /// whose name or any tag contains it, ignoring case.
    pub fn list(&self, filter: Option<&str>) -> Result<Vec<ModelSummary>, LibraryError> {
        let mut all = self.read_index()?;
        if let Some(f) = filter.map(str::to_lowercase).filter(|f| !f.is_empty()) {
            all.retain(|s| s.name.to_lowercase().contains(&f) || s.tags.iter().any(|t| t.to_lowercase().contains(&f)));
        }
        Ok(all)
    }

    /// Inserts a new model, or revises the stored one with the same id.
    pub fn save(&self, model: &ConceptualModel, tags: Option<Vec<String>>) -> Result<String, LibraryError> {
        self.write(model, tags, WriteMode::Upsert)
    }

    /// Inserts a new model; fails if the id is taken.
    pub fn create(&self, model: &ConceptualModel, tags: Vec<String>) -> Result<String, LibraryError> {
        self.write(model, Some(tags), WriteMode::Create)
    }

    /// Revises an existing model. Tags are kept when `tags` is `None`.
    pub fn update(&self, id: &str, model: &ConceptualModel, tags: Option<Vec<String>>) -> Result<String, LibraryError> {
        if model.id != id {
            return Err(LibraryError::IdMismatch {
                path: id.to_string(),
                body: model.id.clone(),
            });
        }
        self.write(model, tags, WriteMode::Update)
    }

    /// Deep-copies `id` under a fresh id whose lineage points at `id`.
    pub fn copy(&self, id: &str, new_name: &str) -> Result<String, LibraryError> {
        let source = self.load(id)?;
        let mut model = source.model.clone();
        model.name = new_name.to_string();
        model.lineage = Some(Lineage {
            parent_id: id.to_string(),
        });
        let guard = self.writer.lock().expect("library lock poisoned");
        let mut n = 1;
        model.id = loop {
            let candidate = format!("{id}-copy-{n}");
            if !self.model_path(&candidate).exists() {
                break candidate;
            }
            n += 1;
        };
        self.write_locked(guard, &model, Some(source.tags), WriteMode::Create)
    }

    fn write(
        &self,
        model: &ConceptualModel,
        tags: Option<Vec<String>>,
        mode: WriteMode,
    ) -> Result<String, LibraryError> {
        let guard = self.writer.lock().expect("library lock poisoned");
        self.write_locked(guard, model, tags, mode)
    }

    fn write_locked(
        &self,
        mut last_stamp: std::sync::MutexGuard<'_, DateTime<Utc>>,
        model: &ConceptualModel,
        tags: Option<Vec<String>>,
        mode: WriteMode,
    ) -> Result<String, LibraryError> {
        if !is_valid_id(&model.id) {
            return Err(LibraryError::BadId(model.id.clone()));
        }
        let report = validate_model(model);
        if !report.is_valid() {
            return Err(LibraryError::Invalid(report));
        }
        let existing = match self.load(&model.id) {
            Ok(s) => Some(s),
            Err(LibraryError::NotFound(_)) => None,
            Err(e) => return Err(e),
        };
        match (mode, &existing) {
            (WriteMode::Create, Some(_)) => return Err(LibraryError::AlreadyExists(model.id.clone())),
            (WriteMode::Update, None) => return Err(LibraryError::NotFound(model.id.clone())),
            _ => {}
        }
        let lineage = model.lineage.as_ref().map(|l| l.parent_id.clone());
        if let Some(parent) = &lineage {
            self.check_lineage(&model.id, parent)?;
        }

        let now = Utc::now()
            .duration_trunc(Duration::microseconds(1))
            .expect("timestamp in range");
        let stamp = now.max(*last_stamp + Duration::microseconds(1));
        let stored = StoredModel {
            model: model.clone(),
            created_at: existing.as_ref().map_or(stamp, |e| e.created_at),
            revised_at: stamp,
            lineage,
            tags: tags.or_else(|| existing.map(|e| e.tags)).unwrap_or_default(),
        };
        write_atomic(&self.model_path(&model.id), &serde_json::to_vec_pretty(&stored)?)?;
        *last_stamp = stamp;

        let mut index = self.read_index()?;
        index.retain(|s| s.id != model.id);
        index.push(ModelSummary::from(&stored));
        sort_newest_first(&mut index);
        write_atomic(&self.root.join("index.json"), &serde_json::to_vec_pretty(&index)?)?;
        Ok(model.id.clone())
    }

    /// The parent must exist and the ancestor chain must not lead back to `id`.
    fn check_lineage(&self, id: &str, parent: &str) -> Result<(), LibraryError> {
        let mut seen = BTreeSet::from([id.to_string()]);
        let mut cursor = Some(parent.to_string());
        while let Some(current) = cursor {
            if !seen.insert(current.clone()) {
                return Err(LibraryError::Lineage {
                    id: id.to_string(),
                    reason: format!("ancestor chain through `{current}` forms a cycle"),
                });
            }
            let stored = match self.load(&current) {
                Ok(s) => s,
                Err(LibraryError::NotFound(_)) if current == parent => {
                    return Err(LibraryError::Lineage {
                        id: id.to_string(),
                        reason: format!("parent `{parent}` is not in the library"),
                    })
                }
                Err(LibraryError::NotFound(_)) => return Ok(()),
                Err(e) => return Err(e),
            };
            cursor = stored.lineage;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WriteMode {
    Create,
    Update,
    Upsert,
}

fn sort_newest_first(summaries: &mut [ModelSummary]) {
    summaries.sort_by(|a, b| b.revised_at.cmp(&a.revised_at).then_with(|| a.id.cmp(&b.id)));
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LibraryError> {
    let dir = path.parent().expect("library paths have a parent");
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::diff_models;
    use crate::model::{Entity, EntityParameters, Relation, RelationKind};

    fn model(id: &str) -> ConceptualModel {
        let mut m = ConceptualModel::new(id, format!("Model {id}"));
        m.entities.push(Entity::biotic("hare", "Hare"));
        m.entities.push(Entity::biotic("lynx", "Lynx"));
        m.relations.push(Relation::new("lynx", RelationKind::Consumes, "hare"));
        m.entity_params
            .insert("hare".into(), EntityParameters::new(100.0, 1.0, 0.1));
        m
    }

    #[test]
    fn save_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let lib = Library::open(dir.path()).unwrap();
        let m = model("pp");
        let id = lib.save(&m, None).unwrap();
        let stored = lib.load(&id).unwrap();
        assert_eq!(stored.model, m);
        assert!(stored.revised_at >= stored.created_at);
        assert!(dir.path().join("models/pp.json").exists());
        assert!(dir.path().join("index.json").exists());
    }

    #[test]
    fn empty_list() {
        let dir = tempfile::tempdir().unwrap();
        assert!(Library::open(dir.path()).unwrap().list(None).unwrap().is_empty());
    }

    #[test]
    fn unknown_id_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let lib = Library::open(dir.path()).unwrap();
        assert!(matches!(lib.load("nope"), Err(LibraryError::NotFound(_))));
        assert!(matches!(lib.load("../etc/passwd"), Err(LibraryError::NotFound(_))));
        assert!(matches!(lib.copy("nope", "x"), Err(LibraryError::NotFound(_))));
    }

    #[test]
    fn invalid_model_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let lib = Library::open(dir.path()).unwrap();
        let mut m = model("bad");
        m.relations.push(Relation::new("hare", RelationKind::Inhibits, "ghost"));
        assert!(matches!(lib.save(&m, None), Err(LibraryError::Invalid(_))));
        assert!(lib.list(None).unwrap().is_empty());
    }

    #[test]
    fn revise_keeps_created_at_and_tags() {
        let dir = tempfile::tempdir().unwrap();
        let lib = Library::open(dir.path()).unwrap();
        let mut m = model("pp");
        lib.create(&m, vec!["ecology".into()]).unwrap();
        let first = lib.load("pp").unwrap();
        m.description = "revised".into();
        lib.update("pp", &m, None).unwrap();
        let second = lib.load("pp").unwrap();
        assert_eq!(second.created_at, first.created_at);
        assert!(second.revised_at > first.revised_at);
        assert_eq!(second.tags, ["ecology"]);
        assert!(matches!(lib.create(&m, vec![]), Err(LibraryError::AlreadyExists(_))));
        assert!(matches!(
            lib.update("other", &m, None),
            Err(LibraryError::IdMismatch { .. })
        ));
    }

    #[test]
    fn copy_is_deep_and_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let lib = Library::open(dir.path()).unwrap();
        lib.save(&model("orig"), None).unwrap();
        let child = lib.copy("orig", "My copy").unwrap();
        let copy = lib.load(&child).unwrap();
        assert_eq!(copy.lineage.as_deref(), Some("orig"));
        assert_eq!(
            copy.model.lineage,
            Some(Lineage {
                parent_id: "orig".into()
            })
        );
        let original = lib.load("orig").unwrap();
        let mut renamed = copy.model.clone();
        renamed.name = original.model.name.clone();
        assert!(diff_models(&original.model, &renamed).is_empty());

        let mut edited = copy.model.clone();
        edited.entities.push(Entity::biotic("owl", "Owl"));
        lib.update(&child, &edited, None).unwrap();
        assert_eq!(lib.load("orig").unwrap(), original);
    }

    #[test]
    fn grandchild_names_child() {
        let dir = tempfile::tempdir().unwrap();
        let lib = Library::open(dir.path()).unwrap();
        lib.save(&model("root"), None).unwrap();
        let child = lib.copy("root", "child").unwrap();
        let grandchild = lib.copy(&child, "grandchild").unwrap();
        assert_eq!(lib.load(&grandchild).unwrap().lineage.as_deref(), Some(child.as_str()));
        assert_ne!(child, grandchild);
    }

    #[test]
    fn lineage_must_exist_and_be_acyclic() {
        let dir = tempfile::tempdir().unwrap();
        let lib = Library::open(dir.path()).unwrap();
        let mut orphan = model("orphan");
        orphan.lineage = Some(Lineage {
            parent_id: "missing".into(),
        });
        assert!(matches!(lib.save(&orphan, None), Err(LibraryError::Lineage { .. })));

        lib.save(&model("a"), None).unwrap();
        let b = lib.copy("a", "b").unwrap();
        let mut a = lib.load("a").unwrap().model;
        a.lineage = Some(Lineage { parent_id: b });
        assert!(matches!(lib.save(&a, None), Err(LibraryError::Lineage { .. })));
    }

    #[test]
    fn survives_reopen_and_rebuilds_index() {
        let dir = tempfile::tempdir().unwrap();
        {
            let lib = Library::open(dir.path()).unwrap();
            lib.save(&model("one"), Some(vec!["t".into()])).unwrap();
            lib.save(&model("two"), None).unwrap();
        }
        fs::remove_file(dir.path().join("index.json")).unwrap();
        let lib = Library::open(dir.path()).unwrap();
        let ids: Vec<_> = lib.list(None).unwrap().into_iter().map(|s| s.id).collect();
        assert_eq!(ids, ["two", "one"]);
        // A later save still gets a later timestamp than anything stored.
        lib.save(&model("three"), None).unwrap();
        assert_eq!(lib.list(None).unwrap()[0].id, "three");
    }

    #[test]
    fn bad_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let lib = Library::open(dir.path()).unwrap();
        for id in ["", "../x", ".hidden", "a/b"] {
            assert!(
                matches!(lib.save(&model(id), None), Err(LibraryError::BadId(_))),
                "{id}"
            );
        }
    }
}
