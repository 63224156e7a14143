//! Deterministic JSON-LD output for instance trees.
//!
//! The root node carries one aggregated `@context` mapping every field name in
//! the tree to its property URI. Every node carries `@type`, the canonical URL
//! of its schema. Keys are ordered `@context`, `@type`, then field names
//! lexicographically. Nested instances are embedded without `@id`.
//!
//! Numbers that JSON cannot represent are written as the texts `"NaN"`,
//! `"Inf"` and `"-Inf"`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};
use thiserror::Error;

use crate::instance::{FieldValue, Instance, ResultTable, Scalar};
use crate::schema_model::{table_schema_id, SchemaBundle, SchemaDef, Target};

#[derive(Debug, Error)]
pub enum JsonLdError {
    #[error("term `{term}` maps to both <{first}> and <{second}>")]
    ContextCollision {
        term: String,
        first: String,
        second: String,
    },
    #[error("cannot serialize table: {0}")]
    MissingTableSchema(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a JSON-LD document: {0}")]
    Parse(String),
}

/// A serialized instance tree: the root context plus the root node.
#[derive(Debug, Clone, PartialEq)]
pub struct JsonLdDocument {
    context: BTreeMap<String, String>,
    root: Map<String, Value>,
}

impl JsonLdDocument {
    pub fn context(&self) -> &BTreeMap<String, String> {
        &self.context
    }

    /// Root node without `@context`.
    pub fn root(&self) -> &Map<String, Value> {
        &self.root
    }

    pub fn to_value(&self) -> Value {
        let mut out = Map::new();
        let context: Map<String, Value> = self
            .context
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        out.insert("@context".into(), Value::Object(context));
        out.extend(self.root.clone());
        Value::Object(out)
    }

    /// UTF-8, two-space indentation, LF line endings, trailing newline.
    pub fn to_canonical_string(&self) -> String {
        canonical_text(&self.to_value())
    }

    /// Reads a document back; `@context` must map terms to URI strings.
    pub fn parse(text: &str) -> Result<Self, JsonLdError> {
        let value: Value = serde_json::from_str(text).map_err(|e| JsonLdError::Parse(e.to_string()))?;
        let Value::Object(mut root) = value else {
            return Err(JsonLdError::Parse("top level is not an object".into()));
        };
        let context = match root.shift_remove("@context") {
            Some(Value::Object(map)) => map
                .into_iter()
                .map(|(k, v)| match v {
                    Value::String(uri) => Ok((k, uri)),
                    other => Err(JsonLdError::Parse(format!(
                        "context term `{k}` maps to {other}, expected a URI string"
                    ))),
                })
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(JsonLdError::Parse("`@context` is not an object".into())),
            None => BTreeMap::new(),
        };
        Ok(JsonLdDocument { context, root })
    }
}

pub fn canonical_text(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    text
}

#[derive(Default)]
struct ContextBuilder {
    terms: BTreeMap<String, String>,
}

impl ContextBuilder {
    fn add(&mut self, term: &str, uri: String) -> Result<(), JsonLdError> {
        match self.terms.get(term) {
            Some(existing) if *existing != uri => Err(JsonLdError::ContextCollision {
                term: term.to_string(),
                first: existing.clone(),
                second: uri,
            }),
            Some(_) => Ok(()),
            None => {
                self.terms.insert(term.to_string(), uri);
                Ok(())
            }
        }
    }

    fn add_field(&mut self, schema: &SchemaDef, name: &str) -> Result<(), JsonLdError> {
        let field = schema.field(name).ok_or_else(|| {
            JsonLdError::MissingTableSchema(format!(
                "schema `{}` has no field `{name}`",
                schema.constructor_name
            ))
        })?;
        self.add(name, schema.property_uri(field))
    }
}

pub fn to_jsonld(inst: &Instance) -> Result<JsonLdDocument, JsonLdError> {
    let mut context = ContextBuilder::default();
    let root = instance_node(inst, &mut context)?;
    Ok(JsonLdDocument {
        context: context.terms,
        root,
    })
}

fn instance_node(inst: &Instance, context: &mut ContextBuilder) -> Result<Map<String, Value>, JsonLdError> {
    let schema = inst.schema();
    let bundle = inst.bundle();
    let mut node = Map::new();
    node.insert("@type".into(), Value::String(schema.id.canonical_url()));
    for (name, value) in inst.values() {
        context.add_field(&schema, &name)?;
        node.insert(name, field_value(&value, &bundle, context)?);
    }
    Ok(node)
}

fn field_value(
    value: &FieldValue,
    bundle: &SchemaBundle,
    context: &mut ContextBuilder,
) -> Result<Value, JsonLdError> {
    Ok(match value {
        FieldValue::Scalar(s) => scalar(s),
        FieldValue::Uri(uri) => {
            let mut node = Map::new();
            node.insert("@id".into(), Value::String(uri.clone()));
            Value::Object(node)
        }
        FieldValue::Nested(child) => Value::Object(instance_node(child, context)?),
        FieldValue::Table(table) => {
            let schemas = TableSchemas::from_bundle(bundle)?;
            Value::Object(table_node(table, &schemas, context)?)
        }
        FieldValue::Many(items) => Value::Array(
            items
                .iter()
                .map(|item| field_value(item, bundle, context))
                .collect::<Result<_, _>>()?,
        ),
    })
}

fn scalar(s: &Scalar) -> Value {
    match s {
        Scalar::Text(t) => Value::String(t.clone()),
        Scalar::Int(i) => Value::Number((*i).into()),
        Scalar::Bool(b) => Value::Bool(*b),
        Scalar::Float(f) => match Number::from_f64(*f) {
            Some(n) => Value::Number(n),
            None if f.is_nan() => Value::String("NaN".into()),
            None if *f > 0.0 => Value::String("Inf".into()),
            None => Value::String("-Inf".into()),
        },
    }
}

/// The schemata that type a serialized table and its column and cell nodes.
#[derive(Debug, Clone)]
pub struct TableSchemas {
    pub table: std::sync::Arc<SchemaDef>,
    pub column: std::sync::Arc<SchemaDef>,
    pub cell: std::sync::Arc<SchemaDef>,
}

impl TableSchemas {
    pub fn from_bundle(bundle: &SchemaBundle) -> Result<Self, JsonLdError> {
        let table = bundle
            .by_id(&table_schema_id())
            .ok_or_else(|| JsonLdError::MissingTableSchema(format!("bundle lacks {}", table_schema_id())))?
            .clone();
        let nested = |field: &str| {
            let target = table.field(field).map(|f| &f.target);
            match target {
                Some(Target::Nested(id)) => bundle
                    .by_id(id)
                    .cloned()
                    .ok_or_else(|| JsonLdError::MissingTableSchema(format!("bundle lacks {id}"))),
                _ => Err(JsonLdError::MissingTableSchema(format!(
                    "table schema field `{field}` is not a nested schema"
                ))),
            }
        };
        let column = nested("columns")?;
        let cell = nested("rows")?;
        Ok(TableSchemas { table, column, cell })
    }
}

/// Table node: typed `columns` (label + zero-based index) and `rows`, each row
/// an array of `{column, value}` cell nodes in column order.
pub fn serialize_table(
    table: &ResultTable,
    schemas: &TableSchemas,
) -> Result<(Value, BTreeMap<String, String>), JsonLdError> {
    let mut context = ContextBuilder::default();
    let node = table_node(table, schemas, &mut context)?;
    Ok((Value::Object(node), context.terms))
}

fn table_node(
    table: &ResultTable,
    schemas: &TableSchemas,
    context: &mut ContextBuilder,
) -> Result<Map<String, Value>, JsonLdError> {
    context.add_field(&schemas.table, "columns")?;
    context.add_field(&schemas.table, "rows")?;
    if !table.columns().is_empty() {
        context.add_field(&schemas.column, "index")?;
        context.add_field(&schemas.column, "label")?;
    }
    if table.cell_count() > 0 {
        context.add_field(&schemas.cell, "column")?;
        context.add_field(&schemas.cell, "value")?;
    }

    let column_type = Value::String(schemas.column.id.canonical_url());
    let cell_type = Value::String(schemas.cell.id.canonical_url());

    let columns = table
        .columns()
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut col = Map::new();
            col.insert("@type".into(), column_type.clone());
            col.insert("index".into(), Value::Number(i.into()));
            col.insert("label".into(), Value::String(name.clone()));
            Value::Object(col)
        })
        .collect();
    let rows = table
        .rows()
        .iter()
        .map(|row| {
            Value::Array(
                table
                    .columns()
                    .iter()
                    .zip(row)
                    .map(|(name, cell)| {
                        let mut node = Map::new();
                        node.insert("@type".into(), cell_type.clone());
                        node.insert("column".into(), Value::String(name.clone()));
                        node.insert("value".into(), cell.as_ref().map_or(Value::Null, scalar));
                        Value::Object(node)
                    })
                    .collect(),
            )
        })
        .collect();

    let mut node = Map::new();
    node.insert("@type".into(), Value::String(schemas.table.id.canonical_url()));
    node.insert("columns".into(), Value::Array(columns));
    node.insert("rows".into(), Value::Array(rows));
    Ok(node)
}

pub fn write_document(doc: &JsonLdDocument, path: impl AsRef<Path>) -> Result<(), JsonLdError> {
    let path = path.as_ref();
    fs::write(path, doc.to_canonical_string()).map_err(|source| JsonLdError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_document(path: impl AsRef<Path>) -> Result<JsonLdDocument, JsonLdError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| JsonLdError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    JsonLdDocument::parse(&text)
}
