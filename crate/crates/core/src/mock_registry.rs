//! In-process HTTP registry double for tests.
//!
//! Serves `GET /<prefix>/<suffix>` (and `GET /template/<suffix>`) from
//! `<doc_dir>/<suffix>.json`: 200 with the file bytes, 404 when absent, 500 for
//! suffixes listed in `fail_suffixes`. Every request is logged, failures
//! included. Binds to loopback only.

use std::collections::HashSet;
use std::io::Cursor;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, SystemTime};

use thiserror::Error;
use tiny_http::{Header, Request, Response, Server};

#[derive(Debug, Clone, Default)]
pub struct MockSpec {
    pub doc_dir: PathBuf,
    pub fail_suffixes: HashSet<String>,
    pub latency: Option<Duration>,
}

impl MockSpec {
    pub fn new(doc_dir: impl Into<PathBuf>) -> Self {
        MockSpec {
            doc_dir: doc_dir.into(),
            ..Default::default()
        }
    }

    pub fn failing(mut self, suffix: impl Into<String>) -> Self {
        self.fail_suffixes.insert(suffix.into());
        self
    }

    pub fn latency(mut self, latency: Duration) -> Self {
        self.latency = Some(latency);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hit {
    pub suffix: String,
    pub status: u16,
    pub at: SystemTime,
}

#[derive(Debug, Error)]
pub enum MockError {
    #[error("document directory {0} does not exist")]
    DocDir(PathBuf),
    #[error("cannot bind mock registry: {0}")]
    BindError(String),
}

pub struct MockRegistry {
    server: Arc<Server>,
    addr: SocketAddr,
    hit_log: Arc<Mutex<Vec<Hit>>>,
    acceptor: Option<JoinHandle<()>>,
}

impl std::fmt::Debug for MockRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockRegistry").field("addr", &self.addr).finish()
    }
}

impl MockRegistry {
    pub fn start(spec: MockSpec) -> Result<Self, MockError> {
        if !spec.doc_dir.is_dir() {
            return Err(MockError::DocDir(spec.doc_dir));
        }
        let server = Server::http("127.0.0.1:0").map_err(|e| MockError::BindError(e.to_string()))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| MockError::BindError("not an IP listener".into()))?;
        let server = Arc::new(server);
        let hit_log = Arc::new(Mutex::new(Vec::new()));
        let spec = Arc::new(spec);

        let acceptor = {
            let server = server.clone();
            let hit_log = hit_log.clone();
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    let spec = spec.clone();
                    let hit_log = hit_log.clone();
                    std::thread::spawn(move || serve(request, &spec, &hit_log));
                }
            })
        };

        Ok(MockRegistry {
            server,
            addr,
            hit_log,
            acceptor: Some(acceptor),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL to put into the store's registry endpoints.
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Requests served so far for `suffix`.
    pub fn hits(&self, suffix: &str) -> usize {
        self.hit_log
            .lock()
            .expect("hit log poisoned")
            .iter()
            .filter(|h| h.suffix == suffix)
            .count()
    }

    pub fn hit_log(&self) -> Vec<Hit> {
        self.hit_log.lock().expect("hit log poisoned").clone()
    }

    pub fn total_hits(&self) -> usize {
        self.hit_log.lock().expect("hit log poisoned").len()
    }
}

impl Drop for MockRegistry {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(handle) = self.acceptor.take() {
            let _ = handle.join();
        }
    }
}

/// Everything after the first path segment, without query string.
fn suffix_of(url: &str) -> String {
    let path = url.split(['?', '#']).next().unwrap_or("");
    let path = path.trim_start_matches('/');
    match path.split_once('/') {
        Some((_, rest)) => rest.trim_end_matches('/').to_string(),
        None => path.to_string(),
    }
}

fn serve(request: Request, spec: &MockSpec, hit_log: &Mutex<Vec<Hit>>) {
    if let Some(latency) = spec.latency {
        std::thread::sleep(latency);
    }
    let suffix = suffix_of(request.url());
    let body = if *request.method() != tiny_http::Method::Get {
        Err(405)
    } else if spec.fail_suffixes.contains(&suffix) {
        Err(500)
    } else if suffix.is_empty() || suffix.contains('/') || suffix.contains("..") {
        Err(404)
    } else {
        std::fs::read(spec.doc_dir.join(format!("{suffix}.json"))).map_err(|_| 404)
    };
    let status = match &body {
        Ok(_) => 200,
        Err(code) => *code,
    };
    hit_log.lock().expect("hit log poisoned").push(Hit {
        suffix,
        status,
        at: SystemTime::now(),
    });

    let json = Header::from_bytes("Content-Type", "application/json").expect("static header");
    let response = match body {
        Ok(bytes) => Response::new(
            200.into(),
            vec![json],
            Cursor::new(bytes.clone()),
            Some(bytes.len()),
            None,
        ),
        Err(code) => {
            let text = format!("{{\"status\": {code}}}").into_bytes();
            let len = text.len();
            Response::new(code.into(), vec![json], Cursor::new(text), Some(len), None)
        }
    };
    if let Err(e) = request.respond(response) {
        log::debug!("mock registry: client went away: {e}");
    }
}
