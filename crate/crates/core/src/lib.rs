//! Load registered data-analysis schemata, build mutable instances that
//! describe an analysis, and serialize them to deterministic JSON-LD.
//!
//! ```no_run
//! use dtforge::{to_jsonld, FieldValue, Instance, SchemaStore, StoreConfig};
//!
//! let store = SchemaStore::new(StoreConfig::from_env())?;
//! let gc = store.load_datatype("https://doi.org/21.T11969/b9335ce2c99ed87735a6")?;
//! let test = Instance::new(&gc, "group_comparison", [("label", FieldValue::text("t-test"))])?;
//! println!("{}", to_jsonld(&test)?.to_canonical_string());
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod cli;
pub mod identifier;
pub mod instance;
pub mod jsonld;
pub mod manifest;
pub mod mock_registry;
pub mod schema_model;
pub mod schema_store;
pub mod validate;

pub use identifier::{
    canonicalize, parse_schema_identifier, IdentifierError, Registry, RegistryRouter, SchemaId,
};
pub use instance::{
    get_field, new_instance, set_field, table_from_rows, Cell, FieldValue, Instance, InstanceError,
    ResultTable, Scalar, TableError,
};
pub use jsonld::{
    read_document, serialize_table, to_jsonld, write_document, JsonLdDocument, JsonLdError, TableSchemas,
};
pub use manifest::{Manifest, ManifestError};
pub use schema_model::{
    close_over, suggest_schema, AnalyticSchema, FieldDescriptor, SchemaBundle, SchemaDef, SchemaResolver,
    Suggestion, Target,
};
pub use schema_store::{FetchStats, SchemaStore, StoreConfig, StoreError};
pub use validate::{validate_document, Finding};
