#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dtforge::{table_from_rows, FieldValue, Instance, Scalar, SchemaStore, StoreConfig};
use json_ld::syntax::Parse;
use json_ld::{JsonLdProcessor, Options, RemoteDocument};
use serde_json::Value;

pub const GROUP_COMPARISON_URL: &str = "https://doi.org/21.T11969/b9335ce2c99ed87735a6";
pub const DATA_ANALYSIS_URL: &str = "https://doi.org/21.T11969/feeb33ad3e4440682a4d";
pub const IRIS_URL: &str = "https://archive.ics.uci.edu/dataset/53/iris";

/// Welch t-test on Iris petal length, setosa vs virginica (scipy 1.15.3).
pub const TTEST: [f64; 3] = [-49.98618625709594, 58.60939453226036, 9.26962758534569e-50];

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn example(name: &str) -> PathBuf {
    crate_dir().join("examples").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    crate_dir().join("tests").join("golden").join(name)
}

pub fn schema_dir() -> PathBuf {
    crate_dir().join("schemas")
}

/// Every shipped manifest, paired with its golden output.
pub fn shipped_examples() -> Vec<(PathBuf, PathBuf)> {
    let mut pairs: Vec<_> = std::fs::read_dir(crate_dir().join("examples"))
        .expect("examples dir")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "yaml"))
        .map(|p| {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            (p, golden(&format!("{stem}.jsonld")))
        })
        .collect();
    pairs.sort();
    pairs
}

pub fn offline_store() -> SchemaStore {
    SchemaStore::new(StoreConfig::default().offline(true)).expect("embedded bundle")
}

pub fn dtforge(args: &[&str], offline: bool) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dtforge"));
    cmd.args(args)
        .env_remove("DTFORGE_OFFLINE")
        .env("RUST_LOG", "error");
    if offline {
        cmd.env("DTFORGE_OFFLINE", "1");
    }
    cmd.output().expect("spawn dtforge")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// The Python t-test listing replayed step by step, including the label
/// change made after construction.
pub fn usecase_via_api(store: &SchemaStore) -> Instance {
    let dt_gc = store.load_datatype(GROUP_COMPARISON_URL).unwrap();
    let results = table_from_rows(
        ["t", "df", "p"],
        vec![TTEST.iter().map(|v| Some(Scalar::Float(*v))).collect()],
    )
    .unwrap();

    let python = Instance::new(
        &dt_gc,
        "software",
        [
            ("label", FieldValue::text("Python")),
            ("version_info", FieldValue::text("3.12.5")),
        ],
    )
    .unwrap();
    let scipy = Instance::new(
        &dt_gc,
        "software_library",
        [
            ("label", FieldValue::text("scipy")),
            ("version_info", FieldValue::text("1.15.1")),
            ("part_of", python.into()),
        ],
    )
    .unwrap();
    let method = Instance::new(
        &dt_gc,
        "software_method",
        [
            ("label", FieldValue::text("ttest_ind")),
            (
                "is_implemented_by",
                FieldValue::text("ttest_ind(setosa, virginica, equal_var = False)"),
            ),
            ("part_of", scipy.into()),
        ],
    )
    .unwrap();
    let instance_gc = Instance::new(
        &dt_gc,
        "group_comparison",
        [
            (
                "label",
                FieldValue::text("t-test Iris petal length setosa vs virginica"),
            ),
            ("executes", method.into()),
            (
                "targets",
                Instance::new(
                    &dt_gc,
                    "component",
                    [("label", FieldValue::text("petal length (cm)"))],
                )
                .unwrap()
                .into(),
            ),
            (
                "has_input",
                Instance::new(
                    &dt_gc,
                    "data_item",
                    [
                        ("label", FieldValue::text("iris")),
                        ("source_url", FieldValue::uri(IRIS_URL)),
                    ],
                )
                .unwrap()
                .into(),
            ),
            (
                "has_output",
                Instance::new(&dt_gc, "data_item", [("source_table", results.into())])
                    .unwrap()
                    .into(),
            ),
        ],
    )
    .unwrap();

    let has_input = instance_gc.get("has_input").unwrap().unwrap();
    has_input
        .as_instance()
        .unwrap()
        .set("label", "Iris petal length setosa virginica")
        .unwrap();

    let dt_da = store.load_datatype(DATA_ANALYSIS_URL).unwrap();
    Instance::new(
        &dt_da,
        "data_analysis",
        [
            ("is_implemented_by", FieldValue::text("code_url")),
            ("has_part", instance_gc.into()),
        ],
    )
    .unwrap()
}

/// What an independent JSON-LD 1.1 processor made of a document.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Expansion {
    /// Node objects carrying at least one `@type`.
    pub typed_nodes: usize,
    /// Node objects that are bare `@id` references.
    pub references: usize,
    /// Property values, summed over all nodes.
    pub property_values: usize,
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct CollectWarnings(Vec<String>);

impl<N, W: std::fmt::Display> json_ld::warning::Handler<N, W> for CollectWarnings {
    fn handle(&mut self, _vocabulary: &N, warning: W) {
        self.0.push(warning.to_string());
    }
}

/// Expands `text` with the json-ld crate and tallies the result.
pub fn expand(text: &str) -> Result<Expansion, String> {
    let (json, _) = json_ld::syntax::Value::parse_str(text).map_err(|e| format!("parse: {e:?}"))?;
    let doc = RemoteDocument::new(None, None, json);
    let loader = json_ld::NoLoader;
    let mut warnings = CollectWarnings::default();
    let expanded = futures::executor::block_on(doc.expand_full(
        json_ld::rdf_types::vocabulary::no_vocabulary_mut(),
        &loader,
        Options::default(),
        &mut warnings,
    ))
    .map_err(|e| format!("expansion: {e:?}"))?;

    let mut tally = Expansion {
        warnings: warnings.0,
        ..Default::default()
    };
    for object in expanded.iter() {
        tally_object(object.inner(), &mut tally);
    }
    Ok(tally)
}

fn tally_object(object: &json_ld::Object, tally: &mut Expansion) {
    match object {
        json_ld::Object::Node(node) => {
            if node.types().is_empty() && node.properties().is_empty() {
                tally.references += 1;
            } else {
                tally.typed_nodes += usize::from(!node.types().is_empty());
            }
            for (_, values) in node.properties() {
                for value in values {
                    tally.property_values += 1;
                    tally_object(value.inner(), tally);
                }
            }
        }
        json_ld::Object::List(list) => {
            for item in list.iter() {
                tally_object(item.inner(), tally);
            }
        }
        json_ld::Object::Value(_) => {}
    }
}

/// Warnings other than the one json-ld 0.21 raises for every root-level
/// term: its preliminary key pass runs before the document's own `@context`
/// is applied, so each root key defined there is reported as a malformed IRI.
pub fn unexplained_warnings(text: &str, tally: &Expansion) -> Vec<String> {
    let doc: Value = serde_json::from_str(text).unwrap();
    let defined =
        |key: &str| doc.get(key).is_some() && doc["@context"].get(key).is_some_and(Value::is_string);
    tally
        .warnings
        .iter()
        .filter(|w| {
            let term = w
                .strip_prefix("malformed IRI `")
                .and_then(|r| r.strip_suffix('`'));
            !term.is_some_and(defined)
        })
        .cloned()
        .collect()
}

/// Property values an expansion should keep, counted on the compact JSON:
/// every non-keyword key contributes one value per non-null leaf or node,
/// with nested arrays flattened.
pub fn compact_property_values(value: &Value) -> usize {
    fn values_of(v: &Value) -> usize {
        match v {
            Value::Null => 0,
            Value::Array(items) => items.iter().map(values_of).sum(),
            _ => 1,
        }
    }
    match value {
        Value::Object(map) => map
            .iter()
            .filter(|(k, _)| !k.starts_with('@'))
            .map(|(_, v)| values_of(v) + compact_property_values(v))
            .sum(),
        Value::Array(items) => items.iter().map(compact_property_values).sum(),
        _ => 0,
    }
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub const ANALYTIC_URLS: [(&str, &str); 6] = [
    (
        "algorithm_evaluation",
        "https://doi.org/21.T11969/e8bae1131098a76cfbe6",
    ),
    (
        "multilevel_analysis",
        "https://doi.org/21.T11969/b96644d7451ddd190b65",
    ),
    ("group_comparison", GROUP_COMPARISON_URL),
    (
        "class_discovery",
        "https://doi.org/21.T11969/a26f002dee2d88740c0f",
    ),
    (
        "class_prediction",
        "https://doi.org/21.T11969/5ed4e49e8249b2ce5bd0",
    ),
    ("data_analysis", DATA_ANALYSIS_URL),
];

pub fn analytic_bundles(store: &SchemaStore) -> Vec<dtforge::SchemaBundle> {
    ANALYTIC_URLS
        .iter()
        .map(|(_, url)| store.load_datatype(url).unwrap())
        .collect()
}

pub mod trees {
    use dtforge::{FieldValue, Instance, ResultTable, Scalar, SchemaBundle, Target};
    use rand::seq::SliceRandom;
    use rand::Rng;

    const WORDS: [&str; 8] = [
        "t-test",
        "Petal.Length",
        "ü",
        "a\"quote",
        "tab\there",
        "",
        "日本",
        "x\\y",
    ];

    pub fn scalar(rng: &mut impl Rng) -> Scalar {
        match rng.gen_range(0..6) {
            0 => Scalar::Text(WORDS.choose(rng).unwrap().to_string()),
            1 => Scalar::Text(
                (0..rng.gen_range(0..12))
                    .map(|_| rng.gen_range(' '..='~'))
                    .collect(),
            ),
            2 => Scalar::Int(rng.gen()),
            3 => Scalar::Float(rng.gen_range(-1e6..1e6)),
            4 => Scalar::Float(
                *[
                    f64::NAN,
                    f64::INFINITY,
                    f64::NEG_INFINITY,
                    0.0,
                    -0.0,
                    5e-324,
                    1e300,
                ]
                .choose(rng)
                .unwrap(),
            ),
            _ => Scalar::Bool(rng.gen()),
        }
    }

    pub fn table(rng: &mut impl Rng) -> ResultTable {
        let columns: Vec<String> = (0..rng.gen_range(0..5)).map(|i| format!("c{i}")).collect();
        let rows = (0..rng.gen_range(0..4))
            .map(|_| {
                columns
                    .iter()
                    .map(|_| rng.gen_bool(0.8).then(|| scalar(rng)))
                    .collect()
            })
            .collect();
        ResultTable::from_rows(columns, rows).unwrap()
    }

    /// A random instance of `ctor`. Nested fields recurse while `depth` lasts;
    /// `has_part`-style fields draw their children from `pool`.
    pub fn instance(
        rng: &mut impl Rng,
        bundle: &SchemaBundle,
        ctor: &str,
        pool: &[SchemaBundle],
        depth: u32,
    ) -> Instance {
        let inst = Instance::new(bundle, ctor, Vec::<(String, FieldValue)>::new()).unwrap();
        let fields = bundle.get(ctor).unwrap().list_fields().to_vec();
        for field in fields {
            if !rng.gen_bool(0.6) {
                continue;
            }
            let count = if field.repeatable { rng.gen_range(1..4) } else { 1 };
            let mut values = Vec::new();
            for _ in 0..count {
                let value = match &field.target {
                    Target::Scalar => FieldValue::Scalar(scalar(rng)),
                    Target::Uri => FieldValue::Uri(format!("https://example.org/data/{}", rng.gen::<u16>())),
                    Target::Table => FieldValue::Table(table(rng)),
                    Target::Nested(id) if depth > 0 => {
                        let child = bundle.by_id(id).unwrap().constructor_name.clone();
                        FieldValue::Nested(instance(rng, bundle, &child, pool, depth - 1))
                    }
                    Target::AnyInstance if depth > 0 => {
                        let other = pool.choose(rng).unwrap();
                        let root = other.root().constructor_name.clone();
                        FieldValue::Nested(instance(rng, other, &root, pool, depth - 1))
                    }
                    _ => continue,
                };
                values.push(value);
            }
            match values.len() {
                0 => {}
                1 if !field.repeatable || rng.gen_bool(0.5) => {
                    inst.set(&field.name, values.pop().unwrap()).unwrap()
                }
                _ => inst.set(&field.name, FieldValue::Many(values)).unwrap(),
            }
        }
        inst
    }
}

pub mod strategies {
    use dtforge::{table_from_rows, ResultTable, Scalar};
    use proptest::prelude::*;

    /// Scalars without NaN, so that `==` is meaningful.
    pub fn scalar() -> impl Strategy<Value = Scalar> {
        prop_oneof![
            any::<String>().prop_map(Scalar::Text),
            any::<i64>().prop_map(Scalar::Int),
            any::<f64>()
                .prop_filter("NaN never equals itself", |f| !f.is_nan())
                .prop_map(Scalar::Float),
            any::<bool>().prop_map(Scalar::Bool),
        ]
    }

    pub fn result_table() -> impl Strategy<Value = ResultTable> {
        (0usize..5, 0usize..4).prop_flat_map(|(cols, rows)| {
            proptest::collection::vec(
                proptest::collection::vec(proptest::option::of(scalar()), cols),
                rows,
            )
            .prop_map(move |rows| table_from_rows((0..cols).map(|i| format!("col {i}")), rows).unwrap())
        })
    }
}
