//! Registered data types and their nested-schema closure.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identifier::{IdentifierError, SchemaId};

/// PID of the schema every `table` field is typed with.
pub const TABLE_SCHEMA_PID: &str = "21.T11969/09e5adeca1fd694098d6";

/// Constructor used when no analytic schema matches.
pub const FALLBACK_CONSTRUCTOR: &str = "data_analysis";

pub fn table_schema_id() -> SchemaId {
    SchemaId::parse_pid(TABLE_SCHEMA_PID).expect("built-in table PID is well-formed")
}

/// What a field holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Target {
    Scalar,
    Uri,
    Table,
    /// An instance of the given schema.
    Nested(SchemaId),
    /// An instance of any schema.
    AnyInstance,
}

impl Target {
    fn from_document(text: &str) -> Result<Self, IdentifierError> {
        match text {
            "scalar" => Ok(Target::Scalar),
            "uri" => Ok(Target::Uri),
            "table" => Ok(Target::Table),
            "instance" => Ok(Target::AnyInstance),
            pid => SchemaId::parse_pid(pid).map(Target::Nested),
        }
    }

    fn to_document(&self) -> String {
        match self {
            Target::Scalar => "scalar".into(),
            Target::Uri => "uri".into(),
            Target::Table => "table".into(),
            Target::AnyInstance => "instance".into(),
            Target::Nested(id) => id.pid_text(),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Nested(id) => write!(f, "nested({id})"),
            other => f.write_str(&other.to_document()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDescriptor {
    pub name: String,
    pub target: Target,
    /// `None` when the schema document carries no property URI.
    pub property_uri: Option<String>,
    pub repeatable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaDef {
    pub id: SchemaId,
    pub constructor_name: String,
    pub label: String,
    fields: Vec<FieldDescriptor>,
}

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("schema document is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid PID in schema document: {0}")]
    Pid(#[from] IdentifierError),
    #[error("schema document has an empty constructor_name")]
    EmptyConstructor,
    #[error("field `{0}` is declared more than once")]
    DuplicateField(String),
    #[error("schema document has a field with an empty name")]
    EmptyFieldName,
}

/// On-disk / on-wire schema document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaDocument {
    pub pid: String,
    pub constructor_name: String,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub fields: Vec<FieldDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldDocument {
    pub name: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property_uri: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeatable: Option<bool>,
}

impl SchemaDef {
    pub fn new(
        id: SchemaId,
        constructor_name: impl Into<String>,
        label: impl Into<String>,
        fields: Vec<FieldDescriptor>,
    ) -> Result<Self, DocumentError> {
        let constructor_name = constructor_name.into();
        if constructor_name.is_empty() {
            return Err(DocumentError::EmptyConstructor);
        }
        let mut seen = HashSet::new();
        for field in &fields {
            if field.name.is_empty() {
                return Err(DocumentError::EmptyFieldName);
            }
            if !seen.insert(field.name.as_str()) {
                return Err(DocumentError::DuplicateField(field.name.clone()));
            }
        }
        Ok(SchemaDef {
            id,
            constructor_name,
            label: label.into(),
            fields,
        })
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, DocumentError> {
        let doc: SchemaDocument = serde_json::from_slice(bytes)?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: SchemaDocument) -> Result<Self, DocumentError> {
        let id = SchemaId::parse_pid(&doc.pid)?;
        let fields = doc
            .fields
            .into_iter()
            .map(|f| {
                let target = Target::from_document(&f.target)?;
                // `has_part` collects every procedure of an analysis.
                let repeatable = f.repeatable.unwrap_or(f.name == "has_part");
                Ok(FieldDescriptor {
                    property_uri: f.property_uri.filter(|u| !u.is_empty()),
                    name: f.name,
                    target,
                    repeatable,
                })
            })
            .collect::<Result<Vec<_>, DocumentError>>()?;
        SchemaDef::new(id, doc.constructor_name, doc.label, fields)
    }

    pub fn to_document(&self) -> SchemaDocument {
        SchemaDocument {
            pid: self.id.pid_text(),
            constructor_name: self.constructor_name.clone(),
            label: self.label.clone(),
            fields: self
                .fields
                .iter()
                .map(|f| FieldDocument {
                    name: f.name.clone(),
                    target: f.target.to_document(),
                    property_uri: f.property_uri.clone(),
                    repeatable: Some(f.repeatable),
                })
                .collect(),
        }
    }

    /// Field descriptors in stored order.
    pub fn list_fields(&self) -> &[FieldDescriptor] {
        &self.fields
    }

    pub fn field(&self, name: &str) -> Option<&FieldDescriptor> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn field_names(&self) -> Vec<String> {
        self.fields.iter().map(|f| f.name.clone()).collect()
    }

    /// Schemata this one references, in field order. `table` fields pull in the
    /// table schema.
    pub fn referenced_ids(&self) -> Vec<SchemaId> {
        let mut out: Vec<SchemaId> = Vec::new();
        for field in &self.fields {
            let id = match &field.target {
                Target::Nested(id) => id.clone(),
                Target::Table => table_schema_id(),
                _ => continue,
            };
            if !out.contains(&id) {
                out.push(id);
            }
        }
        out
    }

    /// Property URI used in JSON-LD contexts; synthesized from the schema URL
    /// when the document lacks one.
    pub fn property_uri(&self, field: &FieldDescriptor) -> String {
        match &field.property_uri {
            Some(uri) => uri.clone(),
            None => {
                log::warn!(
                    "schema `{}` has no property URI for field `{}`; synthesizing one",
                    self.constructor_name,
                    field.name
                );
                format!("{}#{}", self.id.canonical_url(), field.name)
            }
        }
    }
}

/// Something that can supply schema definitions by id.
pub trait SchemaResolver {
    type Error;

    fn resolve(&self, id: &SchemaId) -> Result<Arc<SchemaDef>, Self::Error>;
}

/// In-memory resolver, mostly for tests and pre-fetched catalogues.
#[derive(Debug, Clone, Default)]
pub struct MapResolver {
    defs: HashMap<SchemaId, Arc<SchemaDef>>,
}

impl MapResolver {
    pub fn new(defs: impl IntoIterator<Item = SchemaDef>) -> Self {
        MapResolver {
            defs: defs.into_iter().map(|d| (d.id.clone(), Arc::new(d))).collect(),
        }
    }

    pub fn get(&self, id: &SchemaId) -> Option<Arc<SchemaDef>> {
        self.defs.get(id).cloned()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no schema registered under {0}")]
pub struct NotInMap(pub SchemaId);

impl SchemaResolver for MapResolver {
    type Error = NotInMap;

    fn resolve(&self, id: &SchemaId) -> Result<Arc<SchemaDef>, NotInMap> {
        self.get(id).ok_or_else(|| NotInMap(id.clone()))
    }
}

#[derive(Debug, Error)]
pub enum ClosureError<E> {
    #[error("schema `{referenced_by}` references {id}, which cannot be resolved: {source}")]
    DanglingReference {
        id: SchemaId,
        referenced_by: String,
        source: E,
    },
    #[error("constructor `{name}` is defined by both {first} and {second}")]
    DuplicateConstructor {
        name: String,
        first: String,
        second: String,
    },
}

/// A root schema plus every schema reachable from it, keyed by constructor name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaBundle {
    root: SchemaId,
    members: Arc<IndexMap<String, Arc<SchemaDef>>>,
}

impl SchemaBundle {
    pub fn root_id(&self) -> &SchemaId {
        &self.root
    }

    pub fn root(&self) -> &Arc<SchemaDef> {
        self.by_id(&self.root).expect("root is always a member")
    }

    pub fn get(&self, constructor: &str) -> Option<&Arc<SchemaDef>> {
        self.members.get(constructor)
    }

    pub fn by_id(&self, id: &SchemaId) -> Option<&Arc<SchemaDef>> {
        self.members.values().find(|d| &d.id == id)
    }

    /// Constructor names in resolution (breadth-first) order.
    pub fn constructors(&self) -> impl Iterator<Item = &str> {
        self.members.keys().map(String::as_str)
    }

    pub fn members(&self) -> impl Iterator<Item = &Arc<SchemaDef>> {
        self.members.values()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Resolves every schema reachable from `root`, breadth-first, each id once.
/// Cyclic references are closed over the visited set.
pub fn close_over<R: SchemaResolver>(
    root: Arc<SchemaDef>,
    resolver: &R,
) -> Result<SchemaBundle, ClosureError<R::Error>> {
    let root_id = root.id.clone();
    let mut members: IndexMap<String, Arc<SchemaDef>> = IndexMap::new();
    let mut visited: HashSet<SchemaId> = HashSet::from([root_id.clone()]);
    let mut queue = VecDeque::from([root]);

    while let Some(def) = queue.pop_front() {
        if let Some(existing) = members.get(&def.constructor_name) {
            return Err(ClosureError::DuplicateConstructor {
                name: def.constructor_name.clone(),
                first: existing.id.canonical_url(),
                second: def.id.canonical_url(),
            });
        }
        for id in def.referenced_ids() {
            if !visited.insert(id.clone()) {
                continue;
            }
            let resolved = resolver
                .resolve(&id)
                .map_err(|source| ClosureError::DanglingReference {
                    id: id.clone(),
                    referenced_by: def.constructor_name.clone(),
                    source,
                })?;
            queue.push_back(resolved);
        }
        members.insert(def.constructor_name.clone(), def);
    }

    Ok(SchemaBundle {
        root: root_id,
        members: Arc::new(members),
    })
}

/// The five analytic schemata, in question order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnalyticSchema {
    AlgorithmEvaluation,
    MultilevelAnalysis,
    GroupComparison,
    ClassDiscovery,
    ClassPrediction,
}

impl AnalyticSchema {
    pub const ALL: [AnalyticSchema; 5] = [
        AnalyticSchema::AlgorithmEvaluation,
        AnalyticSchema::MultilevelAnalysis,
        AnalyticSchema::GroupComparison,
        AnalyticSchema::ClassDiscovery,
        AnalyticSchema::ClassPrediction,
    ];

    pub fn constructor_name(self) -> &'static str {
        match self {
            AnalyticSchema::AlgorithmEvaluation => "algorithm_evaluation",
            AnalyticSchema::MultilevelAnalysis => "multilevel_analysis",
            AnalyticSchema::GroupComparison => "group_comparison",
            AnalyticSchema::ClassDiscovery => "class_discovery",
            AnalyticSchema::ClassPrediction => "class_prediction",
        }
    }

    pub fn question(self) -> &'static str {
        match self {
            AnalyticSchema::AlgorithmEvaluation => "Is it a benchmark-based model evaluation?",
            AnalyticSchema::MultilevelAnalysis => "Is it a hierarchical, mixed, or nested model?",
            AnalyticSchema::GroupComparison => "Does it compare means of two or more groups?",
            AnalyticSchema::ClassDiscovery => "Is it clustering?",
            AnalyticSchema::ClassPrediction => "Is it classification, or logistic/ordinal regression?",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suggestion {
    Schema(AnalyticSchema),
    /// Nothing matched; describe the analysis with the generic schema.
    NoSuggestion,
}

/// First "yes" wins, in [`AnalyticSchema::ALL`] order. Missing answers count as "no".
pub fn suggest_schema(answers: &[bool]) -> Suggestion {
    AnalyticSchema::ALL
        .iter()
        .zip(answers)
        .find(|(_, yes)| **yes)
        .map_or(Suggestion::NoSuggestion, |(schema, _)| {
            Suggestion::Schema(*schema)
        })
}
