//! Consumer-side checks for emitted JSON-LD documents.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde_json::{Map, Value};

use crate::schema_model::table_schema_id;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    /// Stable finding code, e.g. `context-closure`.
    pub code: &'static str,
    /// JSON pointer to the offending location.
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pointer = if self.pointer.is_empty() {
            "/"
        } else {
            &self.pointer
        };
        write!(f, "{} at {}: {}", self.code, pointer, self.message)
    }
}

/// Checks context closure, node typing and table arity. `known_types` holds the
/// canonical URLs of every acceptable `@type`.
pub fn validate_document(doc: &Value, known_types: &HashSet<String>) -> Vec<Finding> {
    let mut findings = Vec::new();
    let Value::Object(root) = doc else {
        findings.push(Finding {
            code: "document-shape",
            pointer: String::new(),
            message: "top level is not a JSON object".into(),
        });
        return findings;
    };

    let mut context_terms = BTreeSet::new();
    match root.get("@context") {
        Some(Value::Object(ctx)) => {
            for (term, uri) in ctx {
                if !uri.is_string() {
                    findings.push(Finding {
                        code: "context-shape",
                        pointer: format!("/@context/{}", escape(term)),
                        message: format!("term `{term}` does not map to a URI string"),
                    });
                }
                context_terms.insert(term.clone());
            }
        }
        Some(_) => findings.push(Finding {
            code: "context-shape",
            pointer: "/@context".into(),
            message: "`@context` is not an object".into(),
        }),
        None => findings.push(Finding {
            code: "context-shape",
            pointer: String::new(),
            message: "document has no `@context`".into(),
        }),
    }

    let mut walker = Walker {
        known_types,
        table_type: table_schema_id().canonical_url(),
        context_terms: &context_terms,
        used_terms: BTreeSet::new(),
        findings,
    };
    walker.node(root, "");

    let unused: Vec<String> = context_terms.difference(&walker.used_terms).cloned().collect();
    for term in unused {
        walker.findings.push(Finding {
            code: "context-closure",
            pointer: format!("/@context/{}", escape(&term)),
            message: format!("term `{term}` is never used in the body"),
        });
    }
    walker.findings
}

fn escape(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

struct Walker<'a> {
    known_types: &'a HashSet<String>,
    table_type: String,
    context_terms: &'a BTreeSet<String>,
    used_terms: BTreeSet<String>,
    findings: Vec<Finding>,
}

impl Walker<'_> {
    fn node(&mut self, node: &Map<String, Value>, pointer: &str) {
        if node.len() == 1 && node.contains_key("@id") {
            return;
        }
        match node.get("@type") {
            Some(Value::String(t)) if self.known_types.contains(t) => {}
            Some(Value::String(t)) => self.findings.push(Finding {
                code: "unknown-type",
                pointer: format!("{pointer}/@type"),
                message: format!("`{t}` is not a known schema"),
            }),
            Some(_) => self.findings.push(Finding {
                code: "unknown-type",
                pointer: format!("{pointer}/@type"),
                message: "`@type` must be a single URL string".into(),
            }),
            None => self.findings.push(Finding {
                code: "missing-type",
                pointer: pointer.to_string(),
                message: "node has no `@type`".into(),
            }),
        }
        if node.get("@type").and_then(Value::as_str) == Some(self.table_type.as_str()) {
            self.table(node, pointer);
        }
        for (key, value) in node {
            if key.starts_with('@') {
                continue;
            }
            let child_pointer = format!("{pointer}/{}", escape(key));
            self.used_terms.insert(key.clone());
            if !self.context_terms.contains(key) {
                self.findings.push(Finding {
                    code: "context-closure",
                    pointer: child_pointer.clone(),
                    message: format!("key `{key}` has no `@context` entry"),
                });
            }
            self.value(value, &child_pointer);
        }
    }

    fn value(&mut self, value: &Value, pointer: &str) {
        match value {
            Value::Object(map) => self.node(map, pointer),
            Value::Array(items) => {
                for (i, item) in items.iter().enumerate() {
                    self.value(item, &format!("{pointer}/{i}"));
                }
            }
            _ => {}
        }
    }

    fn table(&mut self, node: &Map<String, Value>, pointer: &str) {
        let mut arity = |ptr: String, message: String| {
            self.findings.push(Finding {
                code: "table-arity",
                pointer: ptr,
                message,
            })
        };
        let Some(Value::Array(columns)) = node.get("columns") else {
            arity(format!("{pointer}/columns"), "table has no `columns` list".into());
            return;
        };
        let names: Vec<Option<&str>> = columns
            .iter()
            .map(|c| c.get("label").and_then(Value::as_str))
            .collect();
        let Some(Value::Array(rows)) = node.get("rows") else {
            arity(format!("{pointer}/rows"), "table has no `rows` list".into());
            return;
        };
        for (r, row) in rows.iter().enumerate() {
            let row_pointer = format!("{pointer}/rows/{r}");
            let Some(cells) = row.as_array() else {
                arity(row_pointer, "row is not a list".into());
                continue;
            };
            if cells.len() != columns.len() {
                arity(
                    row_pointer,
                    format!(
                        "row has {} cells, table has {} columns",
                        cells.len(),
                        columns.len()
                    ),
                );
                continue;
            }
            for (c, cell) in cells.iter().enumerate() {
                let column = cell.get("column").and_then(Value::as_str);
                if column != names[c] {
                    arity(
                        format!("{row_pointer}/{c}"),
                        format!("cell belongs to column {column:?}, expected {:?}", names[c]),
                    );
                }
            }
        }
    }
}
