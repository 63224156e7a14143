//! Schema lookup: bundled static documents first, then the session cache, then
//! the owning registry.
//!
//! Static documents are stored one per file as `<suffix>.json`. Remote
//! registries are asked with `GET <base>/<prefix>/<suffix>` (ePIC) or
//! `GET <base>/template/<suffix>` (ORKG). Each id is fetched remotely at most
//! once per [`SchemaStore`]; failures are remembered as well.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use thiserror::Error;

use crate::identifier::{IdentifierError, Registry, RegistryRouter, SchemaId};
use crate::schema_model::{close_over, ClosureError, SchemaBundle, SchemaDef, SchemaResolver};

pub const OFFLINE_ENV: &str = "DTFORGE_OFFLINE";

const EMBEDDED: &[(&str, &str)] = &[
    (
        "feeb33ad3e4440682a4d",
        include_str!("../schemas/feeb33ad3e4440682a4d.json"),
    ),
    (
        "b9335ce2c99ed87735a6",
        include_str!("../schemas/b9335ce2c99ed87735a6.json"),
    ),
    (
        "e8bae1131098a76cfbe6",
        include_str!("../schemas/e8bae1131098a76cfbe6.json"),
    ),
    (
        "b96644d7451ddd190b65",
        include_str!("../schemas/b96644d7451ddd190b65.json"),
    ),
    (
        "a26f002dee2d88740c0f",
        include_str!("../schemas/a26f002dee2d88740c0f.json"),
    ),
    (
        "5ed4e49e8249b2ce5bd0",
        include_str!("../schemas/5ed4e49e8249b2ce5bd0.json"),
    ),
    (
        "5a7585353a5e79329143",
        include_str!("../schemas/5a7585353a5e79329143.json"),
    ),
    (
        "e78c63d724b4e1ffe481",
        include_str!("../schemas/e78c63d724b4e1ffe481.json"),
    ),
    (
        "46a1dec7e5bb02811b5d",
        include_str!("../schemas/46a1dec7e5bb02811b5d.json"),
    ),
    (
        "f7b76f5fcac2ad01d324",
        include_str!("../schemas/f7b76f5fcac2ad01d324.json"),
    ),
    (
        "d967e604ab7a10f29386",
        include_str!("../schemas/d967e604ab7a10f29386.json"),
    ),
    (
        "09e5adeca1fd694098d6",
        include_str!("../schemas/09e5adeca1fd694098d6.json"),
    ),
    (
        "6fd4badb02bb0bccfdcc",
        include_str!("../schemas/6fd4badb02bb0bccfdcc.json"),
    ),
    (
        "9fbca824618e3ddca538",
        include_str!("../schemas/9fbca824618e3ddca538.json"),
    ),
];

/// True for the usual spellings of an enabled flag (`1`, `true`, `yes`, `on`).
pub fn flag_enabled(value: &str) -> bool {
    matches!(
        value.trim().to_ascii_lowercase().as_str(),
        "1" | "true" | "yes" | "on"
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreConfig {
    /// Directory of `<suffix>.json` documents; `None` uses the embedded set.
    pub bundle_dir: Option<PathBuf>,
    /// Optional on-disk cache for remotely fetched documents.
    pub cache_dir: Option<PathBuf>,
    pub offline: bool,
    pub registry_endpoints: BTreeMap<Registry, String>,
    pub timeout: Duration,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            bundle_dir: None,
            cache_dir: None,
            offline: false,
            registry_endpoints: BTreeMap::from([
                (
                    Registry::Epic,
                    "https://typeregistry.lab.pidconsortium.net/objects".to_string(),
                ),
                (Registry::Orkg, "https://orkg.org/api".to_string()),
            ]),
            timeout: Duration::from_secs(20),
        }
    }
}

impl StoreConfig {
    /// Defaults, with `DTFORGE_OFFLINE` applied.
    pub fn from_env() -> Self {
        let mut config = StoreConfig::default();
        config.apply_offline_env(std::env::var(OFFLINE_ENV).ok().as_deref());
        config
    }

    /// Forces offline mode when `value` is an enabled flag. Never turns it off.
    pub fn apply_offline_env(&mut self, value: Option<&str>) {
        if value.is_some_and(flag_enabled) {
            self.offline = true;
        }
    }

    pub fn offline(mut self, offline: bool) -> Self {
        self.offline = offline;
        self
    }

    pub fn with_endpoint(mut self, registry: Registry, base_url: impl Into<String>) -> Self {
        self.registry_endpoints.insert(registry, base_url.into());
        self
    }

    pub fn with_bundle_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.bundle_dir = Some(dir.into());
        self
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FetchStats {
    pub static_hits: u64,
    pub cache_hits: u64,
    pub remote_fetches: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemoteFailure {
    Transport,
    MalformedDocument,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error(transparent)]
    Identifier(#[from] IdentifierError),
    #[error("schema {id} (suffix `{suffix}`) was not found")]
    SchemaNotFound { id: SchemaId, suffix: String },
    #[error("schema {id} (suffix `{suffix}`) is not bundled and network access is disabled")]
    NetworkDisabled { id: SchemaId, suffix: String },
    #[error("{}", remote_message(.id, .kind, .message))]
    RemoteError {
        id: SchemaId,
        kind: RemoteFailure,
        message: String,
    },
    #[error("no endpoint configured for registry `{0}`")]
    NoEndpoint(Registry),
    #[error("schema `{referenced_by}` references {id}, which cannot be resolved: {reason}")]
    DanglingReference {
        id: SchemaId,
        referenced_by: String,
        reason: Box<StoreError>,
    },
    #[error("constructor `{name}` is defined by both {first} and {second}")]
    DuplicateConstructor {
        name: String,
        first: String,
        second: String,
    },
    #[error("invalid static schema bundle: {0}")]
    StaticBundle(String),
}

fn remote_message(id: &SchemaId, kind: &RemoteFailure, message: &str) -> String {
    match kind {
        RemoteFailure::Transport => format!("fetching {id} failed (transport): {message}"),
        RemoteFailure::MalformedDocument => {
            format!("fetching {id} failed (malformed schema document): {message}")
        }
    }
}

impl StoreError {
    /// Innermost cause, looking through dangling references.
    pub fn root_cause(&self) -> &StoreError {
        match self {
            StoreError::DanglingReference { reason, .. } => reason.root_cause(),
            other => other,
        }
    }
}

impl From<ClosureError<StoreError>> for StoreError {
    fn from(err: ClosureError<StoreError>) -> Self {
        match err {
            ClosureError::DanglingReference {
                id,
                referenced_by,
                source,
            } => StoreError::DanglingReference {
                id,
                referenced_by,
                reason: Box::new(source),
            },
            ClosureError::DuplicateConstructor { name, first, second } => {
                StoreError::DuplicateConstructor { name, first, second }
            }
        }
    }
}

/// Translates a registry response body into a schema definition.
pub trait PayloadAdapter: Send + Sync {
    fn decode(&self, id: &SchemaId, body: &[u8]) -> Result<SchemaDef, String>;
}

/// Accepts the crate's own schema document format.
#[derive(Debug, Clone, Copy, Default)]
pub struct NativeDocumentAdapter;

impl PayloadAdapter for NativeDocumentAdapter {
    fn decode(&self, id: &SchemaId, body: &[u8]) -> Result<SchemaDef, String> {
        let def = SchemaDef::from_json(body).map_err(|e| e.to_string())?;
        if &def.id != id {
            return Err(format!("document describes {}, not {id}", def.id));
        }
        Ok(def)
    }
}

type Slot = Arc<Mutex<Option<Result<Arc<SchemaDef>, StoreError>>>>;

#[derive(Default)]
struct Counters {
    static_hits: AtomicU64,
    cache_hits: AtomicU64,
    remote_fetches: AtomicU64,
}

/// Schema source for one session.
pub struct SchemaStore {
    config: StoreConfig,
    router: RegistryRouter,
    static_docs: HashMap<String, Arc<SchemaDef>>,
    adapters: HashMap<Registry, Box<dyn PayloadAdapter>>,
    session: Mutex<HashMap<SchemaId, Slot>>,
    counters: Counters,
}

impl std::fmt::Debug for SchemaStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SchemaStore")
            .field("config", &self.config)
            .field("static_docs", &self.static_docs.len())
            .field("stats", &self.stats())
            .finish()
    }
}

impl SchemaStore {
    pub fn new(config: StoreConfig) -> Result<Self, StoreError> {
        let static_docs = match &config.bundle_dir {
            None => load_embedded()?,
            Some(dir) => load_bundle_dir(dir)?,
        };
        let adapters: HashMap<Registry, Box<dyn PayloadAdapter>> = Registry::ALL
            .iter()
            .map(|r| (*r, Box::new(NativeDocumentAdapter) as Box<dyn PayloadAdapter>))
            .collect();
        Ok(SchemaStore {
            config,
            router: RegistryRouter::default(),
            static_docs,
            adapters,
            session: Mutex::new(HashMap::new()),
            counters: Counters::default(),
        })
    }

    pub fn with_adapter(mut self, registry: Registry, adapter: impl PayloadAdapter + 'static) -> Self {
        self.adapters.insert(registry, Box::new(adapter));
        self
    }

    pub fn with_router(mut self, router: RegistryRouter) -> Self {
        self.router = router;
        self
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn stats(&self) -> FetchStats {
        FetchStats {
            static_hits: self.counters.static_hits.load(Ordering::SeqCst),
            cache_hits: self.counters.cache_hits.load(Ordering::SeqCst),
            remote_fetches: self.counters.remote_fetches.load(Ordering::SeqCst),
        }
    }

    /// Bundled schemata, sorted by constructor name.
    pub fn static_schemas(&self) -> Vec<Arc<SchemaDef>> {
        let mut defs: Vec<_> = self.static_docs.values().cloned().collect();
        defs.sort_by(|a, b| a.constructor_name.cmp(&b.constructor_name));
        defs
    }

    pub fn static_by_constructor(&self, name: &str) -> Option<Arc<SchemaDef>> {
        self.static_docs
            .values()
            .find(|d| d.constructor_name == name)
            .cloned()
    }

    fn static_lookup(&self, id: &SchemaId) -> Option<Arc<SchemaDef>> {
        self.static_docs
            .get(id.suffix())
            .filter(|def| &def.id == id)
            .cloned()
    }

    pub fn get_schema(&self, id: &SchemaId) -> Result<Arc<SchemaDef>, StoreError> {
        if let Some(def) = self.static_lookup(id) {
            self.counters.static_hits.fetch_add(1, Ordering::SeqCst);
            return Ok(def);
        }

        let slot = self
            .session
            .lock()
            .expect("session lock poisoned")
            .entry(id.clone())
            .or_default()
            .clone();
        let mut entry = slot.lock().expect("session slot poisoned");
        if let Some(result) = entry.as_ref() {
            self.counters.cache_hits.fetch_add(1, Ordering::SeqCst);
            return result.clone();
        }

        if let Some(def) = self.read_disk_cache(id) {
            self.counters.cache_hits.fetch_add(1, Ordering::SeqCst);
            let def = Arc::new(def);
            *entry = Some(Ok(def.clone()));
            return Ok(def);
        }

        if self.config.offline {
            return Err(StoreError::NetworkDisabled {
                id: id.clone(),
                suffix: id.suffix().to_string(),
            });
        }

        let result = self.fetch_remote(id).map(Arc::new);
        if let Ok(def) = &result {
            self.write_disk_cache(def);
        }
        *entry = Some(result.clone());
        result
    }

    /// Parses `url`, fetches its schema and closes over every nested schema.
    pub fn load_datatype(&self, url: &str) -> Result<SchemaBundle, StoreError> {
        let id = self.router.parse(url)?;
        let root = self.get_schema(&id)?;
        Ok(close_over(root, self)?)
    }

    fn request_url(&self, id: &SchemaId) -> Result<String, StoreError> {
        let base = self
            .config
            .registry_endpoints
            .get(&id.registry())
            .ok_or(StoreError::NoEndpoint(id.registry()))?
            .trim_end_matches('/');
        Ok(match id.registry() {
            Registry::Epic => format!("{base}/{}/{}", id.prefix(), id.suffix()),
            Registry::Orkg => format!("{base}/template/{}", id.suffix()),
        })
    }

    fn fetch_remote(&self, id: &SchemaId) -> Result<SchemaDef, StoreError> {
        let url = self.request_url(id)?;
        let transport = |message: String| StoreError::RemoteError {
            id: id.clone(),
            kind: RemoteFailure::Transport,
            message,
        };

        let mut builder = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(self.config.timeout));
        if is_loopback(&url) {
            builder = builder.proxy(None);
        }
        let agent: ureq::Agent = builder.build().into();

        self.counters.remote_fetches.fetch_add(1, Ordering::SeqCst);
        log::debug!("fetching {id} from {url}");
        let mut response = agent
            .get(&url)
            .header("Accept", "application/json")
            .call()
            .map_err(|e| transport(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 404 {
            return Err(StoreError::SchemaNotFound {
                id: id.clone(),
                suffix: id.suffix().to_string(),
            });
        }
        if !(200..300).contains(&status) {
            return Err(transport(format!("HTTP {status} from {url}")));
        }
        let body = response
            .body_mut()
            .read_to_vec()
            .map_err(|e| transport(e.to_string()))?;
        let adapter = self
            .adapters
            .get(&id.registry())
            .ok_or(StoreError::NoEndpoint(id.registry()))?;
        adapter
            .decode(id, &body)
            .map_err(|message| StoreError::RemoteError {
                id: id.clone(),
                kind: RemoteFailure::MalformedDocument,
                message,
            })
    }

    fn cache_path(&self, id: &SchemaId) -> Option<PathBuf> {
        let dir = self.config.cache_dir.as_ref()?;
        let name = id.suffix().replace('%', "%25").replace('/', "%2F");
        Some(dir.join(format!("{name}.json")))
    }

    fn read_disk_cache(&self, id: &SchemaId) -> Option<SchemaDef> {
        let path = self.cache_path(id)?;
        let bytes = fs::read(&path).ok()?;
        match SchemaDef::from_json(&bytes) {
            Ok(def) if &def.id == id => Some(def),
            Ok(_) => None,
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {}: {e}", path.display());
                None
            }
        }
    }

    fn write_disk_cache(&self, def: &SchemaDef) {
        let Some(path) = self.cache_path(&def.id) else {
            return;
        };
        let write = || -> std::io::Result<()> {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            let mut text = serde_json::to_string_pretty(&def.to_document())?;
            text.push('\n');
            fs::write(&path, text)
        };
        if let Err(e) = write() {
            log::warn!("could not cache {} at {}: {e}", def.id, path.display());
        }
    }
}

impl SchemaResolver for SchemaStore {
    type Error = StoreError;

    fn resolve(&self, id: &SchemaId) -> Result<Arc<SchemaDef>, StoreError> {
        self.get_schema(id)
    }
}

fn is_loopback(url: &str) -> bool {
    url::Url::parse(url)
        .ok()
        .and_then(|u| {
            u.host().map(|h| match h {
                url::Host::Domain(d) => d.eq_ignore_ascii_case("localhost"),
                url::Host::Ipv4(ip) => ip.is_loopback(),
                url::Host::Ipv6(ip) => ip.is_loopback(),
            })
        })
        .unwrap_or(false)
}

fn load_embedded() -> Result<HashMap<String, Arc<SchemaDef>>, StoreError> {
    EMBEDDED
        .iter()
        .map(|(suffix, text)| parse_static(suffix, text.as_bytes(), Path::new("<embedded>")))
        .collect()
}

fn load_bundle_dir(dir: &Path) -> Result<HashMap<String, Arc<SchemaDef>>, StoreError> {
    let entries =
        fs::read_dir(dir).map_err(|e| StoreError::StaticBundle(format!("{}: {e}", dir.display())))?;
    let mut docs = HashMap::new();
    for entry in entries {
        let path = entry
            .map_err(|e| StoreError::StaticBundle(format!("{}: {e}", dir.display())))?
            .path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let Some(suffix) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let bytes =
            fs::read(&path).map_err(|e| StoreError::StaticBundle(format!("{}: {e}", path.display())))?;
        let (suffix, def) = parse_static(suffix, &bytes, &path)?;
        docs.insert(suffix, def);
    }
    Ok(docs)
}

fn parse_static(suffix: &str, bytes: &[u8], origin: &Path) -> Result<(String, Arc<SchemaDef>), StoreError> {
    let def = SchemaDef::from_json(bytes)
        .map_err(|e| StoreError::StaticBundle(format!("{} ({suffix}): {e}", origin.display())))?;
    if def.id.suffix() != suffix {
        return Err(StoreError::StaticBundle(format!(
            "{}: file `{suffix}.json` holds schema {}",
            origin.display(),
            def.id
        )));
    }
    Ok((suffix.to_string(), Arc::new(def)))
}

/// One-shot lookup with a fresh session.
pub fn get_schema(id: &SchemaId, config: StoreConfig) -> Result<Arc<SchemaDef>, StoreError> {
    SchemaStore::new(config)?.get_schema(id)
}

/// One-shot `load_datatype` with a fresh session.
pub fn load_datatype(url: &str, config: StoreConfig) -> Result<SchemaBundle, StoreError> {
    SchemaStore::new(config)?.load_datatype(url)
}
