//! Schema identifiers and registry routing.
//!
//! A schema is addressed by a URL such as `https://doi.org/21.T11969/b9335ce2c99ed87735a6`.
//! The host selects the owning registry; the path carries the handle prefix and
//! the registry-local suffix.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;
use url::Url;

/// A data type registry the crate knows how to talk to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Registry {
    /// Handle-based ePIC type registry.
    Epic,
    /// ORKG templates.
    Orkg,
}

impl Registry {
    pub const ALL: [Registry; 2] = [Registry::Epic, Registry::Orkg];

    pub fn tag(self) -> &'static str {
        match self {
            Registry::Epic => "epic",
            Registry::Orkg => "orkg",
        }
    }
}

impl fmt::Display for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Registry {
    type Err = IdentifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "epic" => Ok(Registry::Epic),
            "orkg" => Ok(Registry::Orkg),
            _ => Err(IdentifierError::UnknownRegistry {
                input: s.to_string(),
                host: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentifierError {
    #[error("malformed schema identifier `{input}`: {reason}")]
    Malformed { input: String, reason: String },
    #[error("no registry is known for host `{host}` (in `{input}`)")]
    UnknownRegistry { input: String, host: String },
}

impl IdentifierError {
    fn malformed(input: &str, reason: impl Into<String>) -> Self {
        IdentifierError::Malformed {
            input: input.to_string(),
            reason: reason.into(),
        }
    }
}

/// Parsed persistent identifier of a schema.
///
/// ORKG identifiers have an empty prefix; the suffix is the template id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchemaId {
    registry: Registry,
    prefix: String,
    suffix: String,
}

impl SchemaId {
    /// Builds an ePIC handle id. Both parts must be non-empty.
    pub fn epic(prefix: impl Into<String>, suffix: impl Into<String>) -> Result<Self, IdentifierError> {
        let prefix = prefix.into();
        let suffix = suffix.into();
        if prefix.is_empty() || suffix.is_empty() {
            return Err(IdentifierError::malformed(
                &format!("{prefix}/{suffix}"),
                "handle prefix and suffix must both be non-empty",
            ));
        }
        Ok(SchemaId {
            registry: Registry::Epic,
            prefix,
            suffix,
        })
    }

    /// Builds an ORKG template id.
    pub fn orkg(template: impl Into<String>) -> Result<Self, IdentifierError> {
        let suffix = template.into();
        if suffix.is_empty() || suffix.contains('/') {
            return Err(IdentifierError::malformed(&suffix, "invalid ORKG template id"));
        }
        Ok(SchemaId {
            registry: Registry::Orkg,
            prefix: String::new(),
            suffix,
        })
    }

    pub fn registry(&self) -> Registry {
        self.registry
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn suffix(&self) -> &str {
        &self.suffix
    }

    /// Canonical URL form; parsing it yields `self` again.
    pub fn canonical_url(&self) -> String {
        match self.registry {
            Registry::Epic => format!("https://doi.org/{}/{}", self.prefix, self.suffix),
            Registry::Orkg => format!("https://orkg.org/template/{}", self.suffix),
        }
    }

    /// The form [`SchemaId::parse_pid`] reads back: a bare handle for ePIC,
    /// the template URL for ORKG.
    pub fn pid_text(&self) -> String {
        match self.registry {
            Registry::Epic => format!("{}/{}", self.prefix, self.suffix),
            Registry::Orkg => self.canonical_url(),
        }
    }

    /// Parses a PID as written inside schema documents: either a full URL or a
    /// bare `prefix/suffix` handle, which is taken to be an ePIC handle.
    pub fn parse_pid(text: &str) -> Result<Self, IdentifierError> {
        let trimmed = text.trim();
        if trimmed.contains("://") {
            return parse_schema_identifier(trimmed);
        }
        match trimmed.trim_end_matches('/').split_once('/') {
            Some((prefix, suffix)) => SchemaId::epic(prefix, suffix)
                .map_err(|_| IdentifierError::malformed(text, "expected `<prefix>/<suffix>`")),
            None => Err(IdentifierError::malformed(
                text,
                "expected `<prefix>/<suffix>` or a URL",
            )),
        }
    }
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_url())
    }
}

/// Host to registry routing table.
#[derive(Debug, Clone)]
pub struct RegistryRouter {
    routes: Vec<(String, Registry)>,
}

impl Default for RegistryRouter {
    fn default() -> Self {
        RegistryRouter {
            routes: vec![
                ("doi.org".into(), Registry::Epic),
                ("dx.doi.org".into(), Registry::Epic),
                ("hdl.handle.net".into(), Registry::Epic),
                ("orkg.org".into(), Registry::Orkg),
                ("www.orkg.org".into(), Registry::Orkg),
                ("incubating.orkg.org".into(), Registry::Orkg),
            ],
        }
    }
}

impl RegistryRouter {
    pub fn empty() -> Self {
        RegistryRouter { routes: Vec::new() }
    }

    /// Adds (or replaces) the route for `host`. Host matching is case-insensitive.
    pub fn with_route(mut self, host: &str, registry: Registry) -> Self {
        let host = host.to_ascii_lowercase();
        self.routes.retain(|(h, _)| *h != host);
        self.routes.push((host, registry));
        self
    }

    pub fn registry_for_host(&self, host: &str) -> Option<Registry> {
        let host = host.to_ascii_lowercase();
        self.routes.iter().find(|(h, _)| *h == host).map(|(_, r)| *r)
    }

    pub fn parse(&self, input: &str) -> Result<SchemaId, IdentifierError> {
        let text = input.trim();
        if text.is_empty() {
            return Err(IdentifierError::malformed(input, "empty identifier"));
        }
        let url = Url::parse(text).map_err(|e| IdentifierError::malformed(input, e.to_string()))?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(IdentifierError::malformed(
                input,
                format!("unsupported scheme `{}`", url.scheme()),
            ));
        }
        let host = match url.host_str() {
            Some(h) if !h.is_empty() => h,
            _ => return Err(IdentifierError::malformed(input, "missing host")),
        };
        if url.query().is_some() || url.fragment().is_some() {
            return Err(IdentifierError::malformed(
                input,
                "query strings and fragments are not part of a schema identifier",
            ));
        }
        let registry = self
            .registry_for_host(host)
            .ok_or_else(|| IdentifierError::UnknownRegistry {
                input: input.to_string(),
                host: host.to_string(),
            })?;

        let path = url.path().trim_start_matches('/').trim_end_matches('/');
        match registry {
            Registry::Epic => {
                let (prefix, suffix) = path.split_once('/').ok_or_else(|| {
                    IdentifierError::malformed(input, "expected a `<prefix>/<suffix>` handle path")
                })?;
                if prefix.is_empty() || suffix.is_empty() {
                    return Err(IdentifierError::malformed(input, "empty handle prefix or suffix"));
                }
                Ok(SchemaId {
                    registry,
                    prefix: prefix.to_string(),
                    suffix: suffix.to_string(),
                })
            }
            Registry::Orkg => {
                let mut segments = path.split('/');
                match (segments.next(), segments.next(), segments.next()) {
                    (Some("template" | "templates"), Some(id), None) if !id.is_empty() => SchemaId::orkg(id)
                        .map_err(|_| IdentifierError::malformed(input, "invalid ORKG template id")),
                    _ => Err(IdentifierError::malformed(
                        input,
                        "expected an ORKG template path `/template/<id>`",
                    )),
                }
            }
        }
    }
}

/// Parses a schema URL with the built-in routing table.
pub fn parse_schema_identifier(url: &str) -> Result<SchemaId, IdentifierError> {
    RegistryRouter::default().parse(url)
}

pub fn canonicalize(id: &SchemaId) -> String {
    id.canonical_url()
}
