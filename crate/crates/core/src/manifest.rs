//! Declarative manifests that describe an instance tree.
//!
//! ```yaml
//! schema_url: https://doi.org/21.T11969/feeb33ad3e4440682a4d
//! body:
//!   is_implemented_by: code_url
//!   has_part:
//!     $schema: https://doi.org/21.T11969/b9335ce2c99ed87735a6
//!     label: t-test
//!     has_output:
//!       $type: data_item
//!       source_table:
//!         $table: {columns: [t, df, p], rows: [[-49.98, 58.6, 9.3e-50]]}
//! ```
//!
//! Plain values become scalars, lists become repeated values, and maps are
//! nested instances (`$type` names the constructor, `$schema` loads another
//! bundle for the subtree), URIs (`$uri`) or tables (`$table`). `$type` may be
//! left out when the field's schema already fixes it. JSON manifests are read
//! the same way.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::instance::{FieldValue, Instance, InstanceError, ResultTable, Scalar, TableError};
use crate::schema_model::{SchemaBundle, Target};
use crate::schema_store::{SchemaStore, StoreError};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_url: String,
    #[serde(default)]
    pub body: Option<Value>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest syntax error: {0}")]
    Syntax(String),
    #[error("{pointer}: {message}")]
    Shape { pointer: String, message: String },
    #[error("{pointer}: {source}")]
    Instance {
        pointer: String,
        #[source]
        source: InstanceError,
    },
    #[error("{pointer}: {source}")]
    Table {
        pointer: String,
        #[source]
        source: TableError,
    },
    #[error("{pointer}: {source}")]
    Store {
        pointer: String,
        #[source]
        source: Box<StoreError>,
    },
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        serde_yaml::from_str(text).map_err(|e| ManifestError::Syntax(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Loads the referenced bundles and constructs the instance tree.
    pub fn build(&self, store: &SchemaStore) -> Result<Instance, ManifestError> {
        let bundle = store
            .load_datatype(&self.schema_url)
            .map_err(|source| ManifestError::Store {
                pointer: "/schema_url".into(),
                source: Box::new(source),
            })?;
        let empty = Map::new();
        let body = match &self.body {
            None | Some(Value::Null) => &empty,
            Some(Value::Object(map)) => map,
            Some(_) => return Err(shape("/body", "the body must be a mapping")),
        };
        let root = bundle.root().constructor_name.clone();
        Builder { store }.node(body, &bundle, Some(&root), "/body")
    }
}

fn shape(pointer: &str, message: impl Into<String>) -> ManifestError {
    ManifestError::Shape {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

fn escape(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

struct Builder<'a> {
    store: &'a SchemaStore,
}

impl Builder<'_> {
    fn node(
        &self,
        map: &Map<String, Value>,
        bundle: &SchemaBundle,
        default_ctor: Option<&str>,
        pointer: &str,
    ) -> Result<Instance, ManifestError> {
        let loaded;
        let (bundle, default_ctor) = match map.get("$schema") {
            Some(Value::String(url)) => {
                loaded = self
                    .store
                    .load_datatype(url)
                    .map_err(|source| ManifestError::Store {
                        pointer: format!("{pointer}/$schema"),
                        source: Box::new(source),
                    })?;
                let root = loaded.root().constructor_name.clone();
                (&loaded, Some(root))
            }
            Some(_) => {
                return Err(shape(
                    &format!("{pointer}/$schema"),
                    "`$schema` must be a URL string",
                ))
            }
            None => (bundle, default_ctor.map(String::from)),
        };

        let ctor = match map.get("$type") {
            Some(Value::String(name)) => name.clone(),
            Some(_) => {
                return Err(shape(
                    &format!("{pointer}/$type"),
                    "`$type` must be a constructor name",
                ))
            }
            None => default_ctor.ok_or_else(|| {
                shape(
                    pointer,
                    "cannot tell which schema this mapping instantiates; add `$type`",
                )
            })?,
        };

        let instance =
            Instance::new(bundle, &ctor, Vec::<(String, FieldValue)>::new()).map_err(|source| {
                ManifestError::Instance {
                    pointer: format!("{pointer}/$type"),
                    source,
                }
            })?;
        let schema = instance.schema();

        for (key, raw) in map {
            if let Some(directive) = key.strip_prefix('$') {
                if matches!(directive, "type" | "schema") {
                    continue;
                }
                return Err(shape(
                    &format!("{pointer}/{}", escape(key)),
                    format!("`{key}` is not allowed on an instance mapping"),
                ));
            }
            let field_pointer = format!("{pointer}/{}", escape(key));
            let target = schema.field(key).map(|f| f.target.clone());
            let value = self.value(raw, bundle, target.as_ref(), &field_pointer)?;
            instance
                .set(key, value)
                .map_err(|source| ManifestError::Instance {
                    pointer: field_pointer,
                    source,
                })?;
        }
        Ok(instance)
    }

    fn value(
        &self,
        raw: &Value,
        bundle: &SchemaBundle,
        target: Option<&Target>,
        pointer: &str,
    ) -> Result<FieldValue, ManifestError> {
        match raw {
            Value::Null => Err(shape(pointer, "null is not a value; leave the field out instead")),
            Value::Array(items) => items
                .iter()
                .enumerate()
                .map(|(i, item)| {
                    if item.is_array() {
                        return Err(shape(&format!("{pointer}/{i}"), "lists cannot be nested"));
                    }
                    self.value(item, bundle, target, &format!("{pointer}/{i}"))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(FieldValue::Many),
            Value::Object(map) => {
                if let Some(uri) = map.get("$uri") {
                    return match (uri, map.len()) {
                        (Value::String(u), 1) => Ok(FieldValue::Uri(u.clone())),
                        _ => Err(shape(pointer, "`$uri` must be the only key and hold a string")),
                    };
                }
                if let Some(table) = map.get("$table") {
                    if map.len() != 1 {
                        return Err(shape(pointer, "`$table` must be the only key"));
                    }
                    return self
                        .table(table, &format!("{pointer}/$table"))
                        .map(FieldValue::Table);
                }
                let inferred = match target {
                    Some(Target::Nested(id)) => bundle.by_id(id).map(|d| d.constructor_name.clone()),
                    _ => None,
                };
                self.node(map, bundle, inferred.as_deref(), pointer)
                    .map(FieldValue::Nested)
            }
            scalar => Ok(FieldValue::Scalar(
                to_scalar(scalar).expect("non-container JSON value"),
            )),
        }
    }

    fn table(&self, raw: &Value, pointer: &str) -> Result<ResultTable, ManifestError> {
        let map = raw
            .as_object()
            .ok_or_else(|| shape(pointer, "`$table` must map `columns` and `rows`"))?;
        if let Some(extra) = map.keys().find(|k| *k != "columns" && *k != "rows") {
            return Err(shape(pointer, format!("unexpected table key `{extra}`")));
        }
        let columns = match map.get("columns") {
            Some(Value::Array(cols)) => cols
                .iter()
                .enumerate()
                .map(|(i, c)| match c {
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(shape(
                        &format!("{pointer}/columns/{i}"),
                        "column names must be strings",
                    )),
                })
                .collect::<Result<Vec<_>, _>>()?,
            _ => {
                return Err(shape(
                    &format!("{pointer}/columns"),
                    "expected a list of column names",
                ))
            }
        };
        let rows = match map.get("rows") {
            None => Vec::new(),
            Some(Value::Array(rows)) => rows
                .iter()
                .enumerate()
                .map(|(r, row)| {
                    let row_pointer = format!("{pointer}/rows/{r}");
                    let cells = row
                        .as_array()
                        .ok_or_else(|| shape(&row_pointer, "a row must be a list"))?;
                    cells
                        .iter()
                        .enumerate()
                        .map(|(c, cell)| match cell {
                            Value::Null => Ok(None),
                            Value::Array(_) | Value::Object(_) => Err(shape(
                                &format!("{row_pointer}/{c}"),
                                "cells hold text, numbers, booleans or null",
                            )),
                            scalar => Ok(to_scalar(scalar)),
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?,
            Some(_) => return Err(shape(&format!("{pointer}/rows"), "expected a list of rows")),
        };
        ResultTable::from_rows(columns, rows).map_err(|source| ManifestError::Table {
            pointer: pointer.to_string(),
            source,
        })
    }
}

fn to_scalar(value: &Value) -> Option<Scalar> {
    match value {
        Value::String(s) => Some(Scalar::Text(s.clone())),
        Value::Bool(b) => Some(Scalar::Bool(*b)),
        Value::Number(n) => Some(match n.as_i64() {
            Some(i) => Scalar::Int(i),
            None => Scalar::Float(n.as_f64().unwrap_or(f64::NAN)),
        }),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema_store::StoreConfig;

    fn store() -> SchemaStore {
        SchemaStore::new(StoreConfig::default().offline(true)).unwrap()
    }

    #[test]
    fn builds_nested_tree() {
        let manifest = Manifest::parse(
            r#"
schema_url: https://doi.org/21.T11969/b9335ce2c99ed87735a6
body:
  label: t-test
  executes:
    label: t.test
    part_of:
      $type: software_library
      label: stats
      version_info: "4.3.1"
      part_of: {label: R, version_info: "4.3.1"}
  has_output:
    source_table:
      $table:
        columns: [t, df, p]
        rows: [[-49.98, 58, null]]
  has_input:
    source_url: {$uri: "https://example.org/iris.csv"}
"#,
        )
        .unwrap();
        let inst = manifest.build(&store()).unwrap();
        assert_eq!(inst.constructor_name(), "group_comparison");
        assert_eq!(
            inst.get_path(&["executes", "part_of", "part_of", "label"])
                .unwrap(),
            Some(FieldValue::text("R"))
        );
        match inst.get_path(&["has_output", "source_table"]).unwrap() {
            Some(FieldValue::Table(t)) => {
                assert_eq!(
                    t.rows()[0],
                    vec![Some(Scalar::Float(-49.98)), Some(Scalar::Int(58)), None]
                );
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            inst.get_path(&["has_input", "source_url"]).unwrap(),
            Some(FieldValue::uri("https://example.org/iris.csv"))
        );
    }

    #[test]
    fn json_manifests_and_empty_bodies() {
        let manifest =
            Manifest::parse(r#"{"schema_url": "https://doi.org/21.T11969/feeb33ad3e4440682a4d"}"#).unwrap();
        let inst = manifest.build(&store()).unwrap();
        assert_eq!(inst.constructor_name(), "data_analysis");
        assert_eq!(inst.set_field_count(), 0);
    }

    #[test]
    fn misspelled_field_reports_pointer() {
        let manifest = Manifest::parse(
            "schema_url: https://doi.org/21.T11969/b9335ce2c99ed87735a6\nbody:\n  executes:\n    lable: x\n",
        )
        .unwrap();
        match manifest.build(&store()) {
            Err(ManifestError::Instance {
                pointer,
                source: InstanceError::UnknownField { field, .. },
            }) => {
                assert_eq!(pointer, "/body/executes/lable");
                assert_eq!(field, "lable");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn any_instance_needs_a_type() {
        let manifest = Manifest::parse(
            "schema_url: https://doi.org/21.T11969/feeb33ad3e4440682a4d\nbody:\n  has_part:\n    label: x\n",
        )
        .unwrap();
        assert!(matches!(
            manifest.build(&store()),
            Err(ManifestError::Shape { .. })
        ));
    }

    #[test]
    fn ragged_table() {
        let manifest = Manifest::parse(
            "schema_url: https://doi.org/21.T11969/d967e604ab7a10f29386\nbody:\n  source_table:\n    $table: {columns: [a, b], rows: [[1]]}\n",
        )
        .unwrap();
        assert!(matches!(
            manifest.build(&store()),
            Err(ManifestError::Table {
                source: TableError::RaggedRows { .. },
                ..
            })
        ));
    }

    #[test]
    fn syntax_errors_and_bad_shapes() {
        assert!(matches!(
            Manifest::parse("schema_url: [unclosed"),
            Err(ManifestError::Syntax(_))
        ));
        assert!(matches!(
            Manifest::parse("body: {}"),
            Err(ManifestError::Syntax(_))
        ));
        let manifest = Manifest::parse(
            "schema_url: https://doi.org/21.T11969/46a1dec7e5bb02811b5d\nbody:\n  label: null\n",
        )
        .unwrap();
        assert!(matches!(
            manifest.build(&store()),
            Err(ManifestError::Shape { .. })
        ));
    }
}
