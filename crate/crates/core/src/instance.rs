//! Mutable, schema-bound instances.
//!
//! An [`Instance`] is a shared handle: cloning it, or reading a nested value
//! back out of a parent, yields the same underlying record, so mutations made
//! through any handle are visible everywhere.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use thiserror::Error;

use crate::schema_model::{table_schema_id, FieldDescriptor, SchemaBundle, SchemaDef, Target};

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Text(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl Scalar {
    pub fn kind(&self) -> &'static str {
        match self {
            Scalar::Text(_) => "text",
            Scalar::Int(_) | Scalar::Float(_) => "number",
            Scalar::Bool(_) => "boolean",
        }
    }
}

impl From<&str> for Scalar {
    fn from(v: &str) -> Self {
        Scalar::Text(v.to_string())
    }
}

impl From<String> for Scalar {
    fn from(v: String) -> Self {
        Scalar::Text(v)
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}

impl From<i32> for Scalar {
    fn from(v: i32) -> Self {
        Scalar::Int(v.into())
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Float(v)
    }
}

impl From<bool> for Scalar {
    fn from(v: bool) -> Self {
        Scalar::Bool(v)
    }
}

/// A table cell; `None` is a missing value.
pub type Cell = Option<Scalar>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("column `{0}` appears more than once")]
    DuplicateColumn(String),
    #[error("column {0} has an empty name")]
    EmptyColumnName(usize),
}

/// Named columns and rows of cells, e.g. a results data frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn from_rows(columns: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self, TableError> {
        let mut seen = HashSet::new();
        for (i, name) in columns.iter().enumerate() {
            if name.is_empty() {
                return Err(TableError::EmptyColumnName(i));
            }
            if !seen.insert(name.as_str()) {
                return Err(TableError::DuplicateColumn(name.clone()));
            }
        }
        if let Some((row, cells)) = rows.iter().enumerate().find(|(_, r)| r.len() != columns.len()) {
            return Err(TableError::RaggedRows {
                row,
                expected: columns.len(),
                found: cells.len(),
            });
        }
        Ok(ResultTable { columns, rows })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn cell_count(&self) -> usize {
        self.rows.len() * self.columns.len()
    }
}

pub fn table_from_rows<S: Into<String>>(
    columns: impl IntoIterator<Item = S>,
    rows: Vec<Vec<Cell>>,
) -> Result<ResultTable, TableError> {
    ResultTable::from_rows(columns.into_iter().map(Into::into).collect(), rows)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Scalar(Scalar),
    Uri(String),
    Nested(Instance),
    Table(ResultTable),
    /// Values of a repeatable field.
    Many(Vec<FieldValue>),
}

impl FieldValue {
    pub fn text(v: impl Into<String>) -> Self {
        FieldValue::Scalar(Scalar::Text(v.into()))
    }

    pub fn uri(v: impl Into<String>) -> Self {
        FieldValue::Uri(v.into())
    }

    pub fn as_instance(&self) -> Option<&Instance> {
        match self {
            FieldValue::Nested(inst) => Some(inst),
            _ => None,
        }
    }

    pub fn as_scalar(&self) -> Option<&Scalar> {
        match self {
            FieldValue::Scalar(s) => Some(s),
            _ => None,
        }
    }

    fn describe(&self) -> String {
        match self {
            FieldValue::Scalar(s) => format!("scalar {}", s.kind()),
            FieldValue::Uri(_) => "uri".into(),
            FieldValue::Nested(inst) => format!("instance of `{}`", inst.constructor_name()),
            FieldValue::Table(_) => "table".into(),
            FieldValue::Many(_) => "list".into(),
        }
    }

    fn instances(&self) -> Vec<&Instance> {
        match self {
            FieldValue::Nested(inst) => vec![inst],
            FieldValue::Many(items) => items.iter().flat_map(FieldValue::instances).collect(),
            _ => Vec::new(),
        }
    }
}

impl<T: Into<Scalar>> From<T> for FieldValue {
    fn from(v: T) -> Self {
        FieldValue::Scalar(v.into())
    }
}

impl From<Instance> for FieldValue {
    fn from(v: Instance) -> Self {
        FieldValue::Nested(v)
    }
}

impl From<ResultTable> for FieldValue {
    fn from(v: ResultTable) -> Self {
        FieldValue::Table(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("no constructor `{name}` in this bundle; available: {}", .available.join(", "))]
    UnknownConstructor { name: String, available: Vec<String> },
    #[error("`{field}` is not a field of `{schema}`; valid fields: {}", .valid.join(", "))]
    UnknownField {
        field: String,
        schema: String,
        valid: Vec<String>,
    },
    #[error("field `{field}` expects {expected}, got {found}")]
    TypeMismatch {
        field: String,
        expected: String,
        found: String,
    },
    #[error("setting `{field}` would make an instance contain itself")]
    CyclicNesting { field: String },
}

struct State {
    bundle: SchemaBundle,
    schema: Arc<SchemaDef>,
    values: BTreeMap<String, FieldValue>,
}

/// Handle to a mutable record bound to one schema.
#[derive(Clone)]
pub struct Instance {
    inner: Arc<RwLock<State>>,
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let state = self.read();
        f.debug_struct("Instance")
            .field("schema", &state.schema.constructor_name)
            .field("values", &state.values)
            .finish()
    }
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        if self.ptr_eq(other) {
            return true;
        }
        let (a, b) = (self.read(), other.read());
        a.schema.id == b.schema.id && a.values == b.values
    }
}

impl Instance {
    /// Instance of `constructor` with `assignments` applied in order.
    pub fn new<K: Into<String>>(
        bundle: &SchemaBundle,
        constructor: &str,
        assignments: impl IntoIterator<Item = (K, FieldValue)>,
    ) -> Result<Instance, InstanceError> {
        let schema = bundle
            .get(constructor)
            .ok_or_else(|| InstanceError::UnknownConstructor {
                name: constructor.to_string(),
                available: bundle.constructors().map(String::from).collect(),
            })?
            .clone();
        let instance = Instance {
            inner: Arc::new(RwLock::new(State {
                bundle: bundle.clone(),
                schema,
                values: BTreeMap::new(),
            })),
        };
        for (name, value) in assignments {
            instance.set(&name.into(), value)?;
        }
        Ok(instance)
    }

    fn read(&self) -> RwLockReadGuard<'_, State> {
        self.inner.read().expect("instance lock poisoned")
    }

    fn write(&self) -> RwLockWriteGuard<'_, State> {
        self.inner.write().expect("instance lock poisoned")
    }

    /// True when both handles refer to the same record.
    pub fn ptr_eq(&self, other: &Instance) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    pub fn schema(&self) -> Arc<SchemaDef> {
        self.read().schema.clone()
    }

    pub fn constructor_name(&self) -> String {
        self.read().schema.constructor_name.clone()
    }

    /// The bundle this instance was constructed from.
    pub fn bundle(&self) -> SchemaBundle {
        self.read().bundle.clone()
    }

    fn descriptor(&self, name: &str) -> Result<FieldDescriptor, InstanceError> {
        let state = self.read();
        state
            .schema
            .field(name)
            .cloned()
            .ok_or_else(|| InstanceError::UnknownField {
                field: name.to_string(),
                schema: state.schema.constructor_name.clone(),
                valid: state.schema.field_names(),
            })
    }

    pub fn set(&self, name: &str, value: impl Into<FieldValue>) -> Result<(), InstanceError> {
        let descriptor = self.descriptor(name)?;
        let value = normalize(&descriptor, value.into())?;
        if value.instances().iter().any(|child| child.reaches(self)) {
            return Err(InstanceError::CyclicNesting {
                field: name.to_string(),
            });
        }
        self.write().values.insert(name.to_string(), value);
        Ok(())
    }

    /// Current value of `name`, or `None` when unset.
    pub fn get(&self, name: &str) -> Result<Option<FieldValue>, InstanceError> {
        self.descriptor(name)?;
        Ok(self.read().values.get(name).cloned())
    }

    /// Removes the value of `name`, returning it.
    pub fn unset(&self, name: &str) -> Result<Option<FieldValue>, InstanceError> {
        self.descriptor(name)?;
        Ok(self.write().values.remove(name))
    }

    /// Follows single nested values along `path`.
    pub fn get_path(&self, path: &[&str]) -> Result<Option<FieldValue>, InstanceError> {
        let Some((last, init)) = path.split_last() else {
            return Ok(Some(FieldValue::Nested(self.clone())));
        };
        let mut current = self.clone();
        for step in init {
            match current.get(step)? {
                Some(FieldValue::Nested(next)) => current = next,
                Some(FieldValue::Many(items)) if items.len() == 1 => match &items[0] {
                    FieldValue::Nested(next) => current = next.clone(),
                    _ => return Ok(None),
                },
                _ => return Ok(None),
            }
        }
        current.get(last)
    }

    /// Snapshot of the set values, keyed by field name in lexicographic order.
    pub fn values(&self) -> BTreeMap<String, FieldValue> {
        self.read().values.clone()
    }

    pub fn set_field_count(&self) -> usize {
        self.read().values.len()
    }

    fn reaches(&self, target: &Instance) -> bool {
        if self.ptr_eq(target) {
            return true;
        }
        let children: Vec<Instance> = self
            .read()
            .values
            .values()
            .flat_map(|v| v.instances().into_iter().cloned().collect::<Vec<_>>())
            .collect();
        children.iter().any(|c| c.reaches(target))
    }
}

pub fn new_instance<K: Into<String>>(
    bundle: &SchemaBundle,
    constructor: &str,
    assignments: impl IntoIterator<Item = (K, FieldValue)>,
) -> Result<Instance, InstanceError> {
    Instance::new(bundle, constructor, assignments)
}

pub fn set_field(inst: &Instance, name: &str, value: FieldValue) -> Result<(), InstanceError> {
    inst.set(name, value)
}

pub fn get_field(inst: &Instance, name: &str) -> Result<Option<FieldValue>, InstanceError> {
    inst.get(name)
}

fn normalize(descriptor: &FieldDescriptor, value: FieldValue) -> Result<FieldValue, InstanceError> {
    match value {
        FieldValue::Many(items) => {
            if !descriptor.repeatable {
                return Err(mismatch(descriptor, "a single value", "list"));
            }
            items
                .into_iter()
                .map(|item| check_single(descriptor, item))
                .collect::<Result<Vec<_>, _>>()
                .map(FieldValue::Many)
        }
        single => {
            let checked = check_single(descriptor, single)?;
            Ok(if descriptor.repeatable {
                FieldValue::Many(vec![checked])
            } else {
                checked
            })
        }
    }
}

fn check_single(descriptor: &FieldDescriptor, value: FieldValue) -> Result<FieldValue, InstanceError> {
    let ok = match (&descriptor.target, &value) {
        (_, FieldValue::Many(_)) => false,
        (Target::Scalar | Target::Uri, FieldValue::Scalar(_) | FieldValue::Uri(_)) => true,
        (Target::Table, FieldValue::Table(_)) => true,
        (Target::Table, FieldValue::Nested(inst)) => inst.schema().id == table_schema_id(),
        (Target::Nested(id), FieldValue::Nested(inst)) => inst.schema().id == *id,
        (Target::AnyInstance, FieldValue::Nested(_)) => true,
        _ => false,
    };
    if ok {
        Ok(value)
    } else {
        Err(mismatch(
            descriptor,
            &expected(&descriptor.target),
            &value.describe(),
        ))
    }
}

fn expected(target: &Target) -> String {
    match target {
        Target::Scalar => "a scalar".into(),
        Target::Uri => "a URI".into(),
        Target::Table => "a table".into(),
        Target::Nested(id) => format!("an instance of {id}"),
        Target::AnyInstance => "an instance".into(),
    }
}

fn mismatch(descriptor: &FieldDescriptor, expected: &str, found: &str) -> InstanceError {
    InstanceError::TypeMismatch {
        field: descriptor.name.clone(),
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema_store::{SchemaStore, StoreConfig};

    fn bundles() -> (SchemaBundle, SchemaBundle) {
        let store = SchemaStore::new(StoreConfig::default().offline(true)).unwrap();
        (
            store
                .load_datatype("https://doi.org/21.T11969/b9335ce2c99ed87735a6")
                .unwrap(),
            store
                .load_datatype("https://doi.org/21.T11969/feeb33ad3e4440682a4d")
                .unwrap(),
        )
    }

    fn results() -> ResultTable {
        table_from_rows(
            ["t", "df", "p"],
            vec![vec![
                Some(Scalar::Float(-49.98618625709594)),
                Some(Scalar::Float(58.60939453226036)),
                Some(Scalar::Float(9.26962758534569e-50)),
            ]],
        )
        .unwrap()
    }

    #[test]
    fn construction_with_nested_component() {
        let (gc, _) = bundles();
        let component = Instance::new(&gc, "component", [("label", "Petal.Length".into())]).unwrap();
        let inst = Instance::new(
            &gc,
            "group_comparison",
            [
                ("label", "t-test Iris petal length setosa vs virginica".into()),
                ("targets", FieldValue::Nested(component)),
            ],
        )
        .unwrap();
        assert_eq!(inst.set_field_count(), 2);
        assert_eq!(
            inst.get_path(&["targets", "label"]).unwrap(),
            Some(FieldValue::text("Petal.Length"))
        );
    }

    #[test]
    fn empty_and_unknown() {
        let (gc, _) = bundles();
        let empty = Instance::new(&gc, "group_comparison", Vec::<(String, FieldValue)>::new()).unwrap();
        assert_eq!(empty.set_field_count(), 0);
        assert_eq!(empty.get("label").unwrap(), None);

        match Instance::new(&gc, "group_comparison", [("bogus_field", "x".into())]) {
            Err(InstanceError::UnknownField { field, valid, .. }) => {
                assert_eq!(field, "bogus_field");
                assert!(valid.contains(&"has_input".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            Instance::new(&gc, "nope", Vec::<(String, FieldValue)>::new()),
            Err(InstanceError::UnknownConstructor { .. })
        ));
        assert!(matches!(
            empty.get("bogus"),
            Err(InstanceError::UnknownField { .. })
        ));
    }

    #[test]
    fn nested_mutation_is_visible_through_parent() {
        let (gc, _) = bundles();
        let input = Instance::new(
            &gc,
            "data_item",
            [
                ("label", "iris".into()),
                ("source_url", FieldValue::uri("https://example.org/iris")),
            ],
        )
        .unwrap();
        let inst = Instance::new(&gc, "group_comparison", [("has_input", input.into())]).unwrap();

        let retrieved = inst.get("has_input").unwrap().unwrap();
        retrieved
            .as_instance()
            .unwrap()
            .set("label", "Iris petal length setosa virginica")
            .unwrap();
        assert_eq!(
            inst.get_path(&["has_input", "label"]).unwrap(),
            Some(FieldValue::text("Iris petal length setosa virginica"))
        );
    }

    #[test]
    fn last_write_wins() {
        let (gc, _) = bundles();
        let inst = Instance::new(&gc, "software", Vec::<(String, FieldValue)>::new()).unwrap();
        inst.set("label", "Python").unwrap();
        inst.set("label", "R").unwrap();
        assert_eq!(inst.get("label").unwrap(), Some(FieldValue::text("R")));
    }

    #[test]
    fn parent_rejects_child_fields() {
        let (gc, _) = bundles();
        let inst = Instance::new(&gc, "group_comparison", Vec::<(String, FieldValue)>::new()).unwrap();
        assert!(matches!(
            inst.set("source_url", FieldValue::uri("x")),
            Err(InstanceError::UnknownField { .. })
        ));
    }

    #[test]
    fn type_checks() {
        let (gc, da) = bundles();
        let inst = Instance::new(&gc, "group_comparison", Vec::<(String, FieldValue)>::new()).unwrap();
        let component = Instance::new(&gc, "component", Vec::<(String, FieldValue)>::new()).unwrap();
        assert!(matches!(
            inst.set("executes", component.clone()),
            Err(InstanceError::TypeMismatch { .. })
        ));
        assert!(matches!(
            inst.set("label", results()),
            Err(InstanceError::TypeMismatch { .. })
        ));
        assert!(matches!(
            inst.set("targets", "text"),
            Err(InstanceError::TypeMismatch { .. })
        ));
        assert!(matches!(
            inst.set("label", FieldValue::Many(vec!["a".into()])),
            Err(InstanceError::TypeMismatch { .. })
        ));
        let item = Instance::new(&gc, "data_item", Vec::<(String, FieldValue)>::new()).unwrap();
        assert!(matches!(
            item.set("source_table", "not a table"),
            Err(InstanceError::TypeMismatch { .. })
        ));
        item.set("source_table", results()).unwrap();

        let analysis = Instance::new(&da, "data_analysis", Vec::<(String, FieldValue)>::new()).unwrap();
        analysis.set("has_part", inst.clone()).unwrap();
        assert_eq!(
            analysis.get("has_part").unwrap(),
            Some(FieldValue::Many(vec![FieldValue::Nested(inst)]))
        );
    }

    #[test]
    fn nesting_cycles_are_rejected() {
        let (_, da) = bundles();
        let a = Instance::new(&da, "data_analysis", Vec::<(String, FieldValue)>::new()).unwrap();
        let b = Instance::new(&da, "data_analysis", [("has_part", a.clone().into())]).unwrap();
        assert!(matches!(
            a.set("has_part", b),
            Err(InstanceError::CyclicNesting { .. })
        ));
        assert!(matches!(
            a.set("has_part", a.clone()),
            Err(InstanceError::CyclicNesting { .. })
        ));
    }

    #[test]
    fn tables() {
        let t = results();
        assert_eq!((t.rows().len(), t.columns().len()), (1, 3));
        let empty = table_from_rows(["t", "df", "p"], vec![]).unwrap();
        assert_eq!(empty.cell_count(), 0);
        assert_eq!(
            table_from_rows(["t", "df", "p"], vec![vec![None, None]]),
            Err(TableError::RaggedRows {
                row: 0,
                expected: 3,
                found: 2
            })
        );
        assert_eq!(
            table_from_rows(["t", "t"], vec![]),
            Err(TableError::DuplicateColumn("t".into()))
        );
        assert_eq!(table_from_rows([""], vec![]), Err(TableError::EmptyColumnName(0)));
    }

    #[test]
    fn no_silent_coercion() {
        let (gc, _) = bundles();
        let inst = Instance::new(&gc, "software", Vec::<(String, FieldValue)>::new()).unwrap();
        inst.set("version_info", "1.5").unwrap();
        assert_eq!(inst.get("version_info").unwrap(), Some(FieldValue::text("1.5")));
        inst.set("version_info", 1.5).unwrap();
        assert_eq!(
            inst.get("version_info").unwrap(),
            Some(FieldValue::Scalar(Scalar::Float(1.5)))
        );
    }
}
