//! `dtforge` command line.
//!
//! Exit codes: 0 ok, 2 usage or parse error, 3 schema resolution failure,
//! 4 instance construction error, 5 i/o error, 6 validation findings.

use std::collections::HashSet;
use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::identifier::Registry;
use crate::jsonld::{to_jsonld, write_document, JsonLdError};
use crate::manifest::{Manifest, ManifestError};
use crate::schema_model::{
    suggest_schema, AnalyticSchema, SchemaBundle, Suggestion, Target, FALLBACK_CONSTRUCTOR,
};
use crate::schema_store::{SchemaStore, StoreConfig, StoreError};
use crate::validate::validate_document;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOLUTION: i32 = 3;
pub const EXIT_INSTANCE: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_FINDINGS: i32 = 6;

#[derive(Debug, Parser)]
#[command(
    name = "dtforge",
    version,
    about = "Build JSON-LD descriptions of data analyses from registered schemata"
)]
struct Cli {
    /// Never contact a registry (also enabled by DTFORGE_OFFLINE=1).
    #[arg(long, global = true)]
    offline: bool,

    /// Directory of `<suffix>.json` schema documents replacing the built-in set.
    #[arg(long, global = true, value_name = "PATH")]
    bundle_dir: Option<PathBuf>,

    /// Cache fetched schema documents in this directory.
    #[arg(long, global = true, value_name = "PATH")]
    cache_dir: Option<PathBuf>,

    /// Override a registry endpoint, e.g. `epic=http://127.0.0.1:8080`.
    #[arg(long = "registry", global = true, value_name = "TAG=URL", value_parser = parse_endpoint)]
    registries: Vec<(Registry, String)>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the fields of a schema and of every schema nested in it.
    ShowFields { url: String },
    /// Suggest an analytic schema from five yes/no answers.
    Suggest {
        /// Five characters of y/n, one per question, e.g. `nnynn`.
        #[arg(long)]
        answers: Option<String>,
    },
    /// Build a JSON-LD document from a manifest.
    Build {
        manifest: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check a JSON-LD document for context closure, typing and table arity.
    Validate { file: PathBuf },
}

fn parse_endpoint(text: &str) -> Result<(Registry, String), String> {
    let (tag, url) = text
        .split_once('=')
        .ok_or_else(|| format!("expected TAG=URL, got `{text}`"))?;
    let registry: Registry = tag.parse().map_err(|_| format!("unknown registry `{tag}`"))?;
    if url.is_empty() {
        return Err("empty registry URL".into());
    }
    Ok((registry, url.to_string()))
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    input: &'a mut dyn BufRead,
}

/// Runs the CLI and returns the process exit code. `offline_env` is the value
/// of `DTFORGE_OFFLINE`.
pub fn run<I, T>(
    args: I,
    offline_env: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
    input: &mut dyn BufRead,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
            return code;
        }
    };

    let mut config = StoreConfig::default();
    config.apply_offline_env(offline_env);
    if cli.offline {
        config.offline = true;
    }
    config.bundle_dir = cli.bundle_dir.clone();
    config.cache_dir = cli.cache_dir.clone();
    for (registry, url) in &cli.registries {
        config.registry_endpoints.insert(*registry, url.clone());
    }

    let mut io = Io { out, err, input };
    let result = SchemaStore::new(config)
        .map_err(store_failure)
        .and_then(|store| match &cli.command {
            Command::ShowFields { url } => show_fields(&store, url, &mut io),
            Command::Suggest { answers } => suggest(&store, answers.as_deref(), &mut io),
            Command::Build { manifest, output } => build(&store, manifest, output, &mut io),
            Command::Validate { file } => validate(&store, file, &mut io),
        });
    match result {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            let _ = writeln!(io.err, "error: {message}");
            code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl std::fmt::Display) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

fn store_failure(e: StoreError) -> Failure {
    let code = match e.root_cause() {
        StoreError::Identifier(_) => EXIT_USAGE,
        _ => EXIT_RESOLUTION,
    };
    fail(code, e)
}

fn show_fields(store: &SchemaStore, url: &str, io: &mut Io<'_>) -> Result<i32, Failure> {
    let bundle = store.load_datatype(url).map_err(store_failure)?;
    write_field_listing(&bundle, io.out).map_err(|e| fail(EXIT_IO, e))?;
    Ok(EXIT_OK)
}

fn write_field_listing(bundle: &SchemaBundle, out: &mut dyn Write) -> std::io::Result<()> {
    for def in bundle.members() {
        let marker = if &def.id == bundle.root_id() {
            " (root)"
        } else {
            ""
        };
        writeln!(out, "{}  <{}>{marker}", def.constructor_name, def.id)?;
        if def.list_fields().is_empty() {
            writeln!(out, "  (no fields)")?;
        }
        for field in def.list_fields() {
            let target = match &field.target {
                Target::Nested(id) => match bundle.by_id(id) {
                    Some(nested) => format!("{} <{id}>", nested.constructor_name),
                    None => format!("<{id}>"),
                },
                other => other.to_string(),
            };
            let repeat = if field.repeatable { ", repeatable" } else { "" };
            writeln!(out, "  {}: {target}{repeat}", field.name)?;
        }
    }
    Ok(())
}

fn parse_answers(text: &str) -> Result<Vec<bool>, Failure> {
    let answers: Vec<bool> = text
        .chars()
        .map(|c| match c.to_ascii_lowercase() {
            'y' => Ok(true),
            'n' => Ok(false),
            other => Err(fail(EXIT_USAGE, format!("answer `{other}` is not y or n"))),
        })
        .collect::<Result<_, _>>()?;
    if answers.len() != AnalyticSchema::ALL.len() {
        return Err(fail(
            EXIT_USAGE,
            format!(
                "expected {} answers, got {}",
                AnalyticSchema::ALL.len(),
                answers.len()
            ),
        ));
    }
    Ok(answers)
}

fn prompt_answers(io: &mut Io<'_>) -> Result<Vec<bool>, Failure> {
    let mut answers = Vec::new();
    for schema in AnalyticSchema::ALL {
        loop {
            write!(io.err, "{} [y/n] ", schema.question()).map_err(|e| fail(EXIT_IO, e))?;
            io.err.flush().map_err(|e| fail(EXIT_IO, e))?;
            let mut line = String::new();
            let read = io.input.read_line(&mut line).map_err(|e| fail(EXIT_IO, e))?;
            if read == 0 {
                return Err(fail(EXIT_USAGE, "input ended before all questions were answered"));
            }
            match line.trim().to_ascii_lowercase().as_str() {
                "y" | "yes" => break answers.push(true),
                "n" | "no" => break answers.push(false),
                _ => writeln!(io.err, "please answer y or n").map_err(|e| fail(EXIT_IO, e))?,
            }
        }
        if answers.last() == Some(&true) {
            break;
        }
    }
    Ok(answers)
}

fn suggest(store: &SchemaStore, answers: Option<&str>, io: &mut Io<'_>) -> Result<i32, Failure> {
    let answers = match answers {
        Some(text) => parse_answers(text)?,
        None => prompt_answers(io)?,
    };
    let url_of = |name: &str| {
        store
            .static_by_constructor(name)
            .map(|d| d.id.canonical_url())
            .unwrap_or_else(|| "(not bundled)".into())
    };
    let written = match suggest_schema(&answers) {
        Suggestion::Schema(schema) => {
            let name = schema.constructor_name();
            writeln!(io.out, "{name} {}", url_of(name))
        }
        Suggestion::NoSuggestion => writeln!(
            io.out,
            "no analytic schema matches; describe the analysis with {FALLBACK_CONSTRUCTOR} {}",
            url_of(FALLBACK_CONSTRUCTOR)
        ),
    };
    written.map_err(|e| fail(EXIT_IO, e))?;
    Ok(EXIT_OK)
}

fn manifest_failure(e: ManifestError) -> Failure {
    match e {
        ManifestError::Io { .. } => fail(EXIT_IO, e),
        ManifestError::Syntax(_) | ManifestError::Shape { .. } => fail(EXIT_USAGE, e),
        ManifestError::Instance { .. } | ManifestError::Table { .. } => fail(EXIT_INSTANCE, e),
        ManifestError::Store { ref source, .. } => {
            let code = match source.root_cause() {
                StoreError::Identifier(_) => EXIT_USAGE,
                _ => EXIT_RESOLUTION,
            };
            fail(code, e)
        }
    }
}

fn build(store: &SchemaStore, manifest: &PathBuf, output: &PathBuf, io: &mut Io<'_>) -> Result<i32, Failure> {
    let manifest = Manifest::read(manifest).map_err(manifest_failure)?;
    let instance = manifest.build(store).map_err(manifest_failure)?;
    let doc = to_jsonld(&instance).map_err(|e| match e {
        JsonLdError::Io { .. } => fail(EXIT_IO, e),
        other => fail(EXIT_INSTANCE, other),
    })?;
    write_document(&doc, output).map_err(|e| fail(EXIT_IO, e))?;
    writeln!(io.out, "wrote {}", output.display()).map_err(|e| fail(EXIT_IO, e))?;
    Ok(EXIT_OK)
}

/// Canonical URLs of every bundled schema.
pub fn known_types(store: &SchemaStore) -> HashSet<String> {
    store
        .static_schemas()
        .iter()
        .map(|d| d.id.canonical_url())
        .collect()
}

fn validate(store: &SchemaStore, file: &PathBuf, io: &mut Io<'_>) -> Result<i32, Failure> {
    let text =
        std::fs::read_to_string(file).map_err(|e| fail(EXIT_IO, format!("{}: {e}", file.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", file.display())))?;
    let findings = validate_document(&value, &known_types(store));
    let write = |io: &mut Io<'_>| -> std::io::Result<()> {
        if findings.is_empty() {
            writeln!(io.out, "ok: {}", file.display())
        } else {
            for finding in &findings {
                writeln!(io.out, "{finding}")?;
            }
            writeln!(io.out, "{} finding(s) in {}", findings.len(), file.display())
        }
    };
    write(io).map_err(|e| fail(EXIT_IO, e))?;
    Ok(if findings.is_empty() {
        EXIT_OK
    } else {
        EXIT_FINDINGS
    })
}
