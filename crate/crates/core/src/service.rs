//! Operator-facing scoring: one domain in, a verdict plus every feature
//! the model consumed out.
//!
//! The HTTP service exposes a single POST route `/score` with JSON bodies.
//! Scoring is stateless per request over a frozen model + registrant index
//! snapshot; a reload (writer) excludes readers, who answer 503 rather
//! than block.

use std::io::Read;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bundle::FORMAT_VERSION;
use crate::domain::{extract_features, DomainName};
use crate::error::{Error, Result};
use crate::nn::fusion::FusionModel;
use crate::similarity::RegistrantIndex;

/// Environment variable overriding the CLI listen address.
pub const LISTEN_ENV: &str = "REGRISK_LISTEN";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub domain: String,
}

/// The verdict together with the evidence it was derived from. Field names
/// are part of the wire contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub normalized_domain: String,
    /// "benign" or "suspicious".
    pub label: String,
    pub p_suspicious: f64,
    pub similarity_score: f64,
    pub matched_registrant: Option<String>,
    pub length: u32,
    pub digit_count: u32,
    pub special_char_count: u32,
    pub format_version: u32,
}

/// A frozen model + registrant index, scoring one domain at a time.
pub struct Scorer {
    pub model: FusionModel,
    pub index: RegistrantIndex,
}

impl Scorer {
    pub fn new(model: FusionModel, index: RegistrantIndex) -> Self {
        Scorer { model, index }
    }

    pub fn score(&self, raw_domain: &str) -> Result<ScoreResponse> {
        let domain = DomainName::normalize(raw_domain, false)?;
        let sim = self.index.best_match(&domain, self.model.similarity_mode);
        let features = extract_features(&domain, sim.score);
        let verdict = self.model.predict(&domain, &features)?;
        Ok(ScoreResponse {
            normalized_domain: domain.as_str().to_string(),
            label: verdict.label.to_string(),
            p_suspicious: verdict.p_suspicious,
            similarity_score: features.similarity_score,
            matched_registrant: sim.matched_registrant.map(|d| d.as_str().to_string()),
            length: features.length,
            digit_count: features.digit_count,
            special_char_count: features.special_char_count,
            format_version: FORMAT_VERSION,
        })
    }
}

type Snapshot = Arc<RwLock<Arc<Scorer>>>;

/// A bound but not yet serving HTTP scorer.
pub struct ScoreServer {
    server: Arc<tiny_http::Server>,
    state: Snapshot,
}

/// A serving HTTP scorer; `stop` unblocks and joins the workers.
pub struct RunningServer {
    server: Arc<tiny_http::Server>,
    workers: Vec<std::thread::JoinHandle<()>>,
    addr: SocketAddr,
}

impl ScoreServer {
    pub fn bind(scorer: Scorer, addr: &str) -> Result<Self> {
        let server = tiny_http::Server::http(addr)
            .map_err(|e| Error::Io(std::io::Error::other(format!("bind {addr}: {e}"))))?;
        Ok(ScoreServer {
            server: Arc::new(server),
            state: Arc::new(RwLock::new(Arc::new(scorer))),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.server
            .server_addr()
            .to_ip()
            .expect("http listener has an IP address")
    }

    /// Spawn `workers` serving threads and return the running handle.
    pub fn start(self, workers: usize) -> RunningServer {
        let addr = self.local_addr();
        let handles = (0..workers.max(1))
            .map(|_| {
                let server = Arc::clone(&self.server);
                let state = Arc::clone(&self.state);
                std::thread::spawn(move || worker_loop(&server, &state))
            })
            .collect();
        RunningServer {
            server: self.server,
            workers: handles,
            addr,
        }
    }
}

impl RunningServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Block until the listener shuts down.
    pub fn join(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }

    pub fn stop(self) {
        // unblock() releases a single thread stuck in recv()
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers {
            let _ = w.join();
        }
    }
}

fn worker_loop(server: &tiny_http::Server, state: &Snapshot) {
    while let Ok(request) = server.recv() {
        handle_request(request, state);
    }
}

fn json_response(status: u32, body: String) -> tiny_http::Response<std::io::Cursor<Vec<u8>>> {
    let header =
        tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).unwrap();
    tiny_http::Response::from_string(body)
        .with_status_code(status)
        .with_header(header)
}

fn error_body(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

fn handle_request(mut request: tiny_http::Request, state: &Snapshot) {
    let started = Instant::now();
    let method = request.method().to_string();
    let url = request.url().to_string();

    let (status, body) = route(&mut request, state);
    let elapsed = started.elapsed();
    eprintln!(
        "{} {} -> {} in {}us",
        method,
        url,
        status,
        elapsed.as_micros()
    );
    let _ = request.respond(json_response(status, body));
}

fn route(request: &mut tiny_http::Request, state: &Snapshot) -> (u32, String) {
    if request.url() != "/score" {
        return (404, error_body("unknown path; POST /score"));
    }
    if *request.method() != tiny_http::Method::Post {
        return (405, error_body("method not allowed; POST /score"));
    }
    let mut body = String::new();
    if let Err(e) = request.as_reader().take(1 << 20).read_to_string(&mut body) {
        return (400, error_body(&format!("unreadable body: {e}")));
    }
    let req: ScoreRequest = match serde_json::from_str(&body) {
        Ok(r) => r,
        Err(e) => return (400, error_body(&format!("bad request body: {e}"))),
    };
    // A reload in progress (writer held) answers 503 instead of blocking.
    let scorer = match state.try_read() {
        Ok(guard) => Arc::clone(&guard),
        Err(std::sync::TryLockError::WouldBlock) => {
            return (503, error_body("index rebuild in progress"))
        }
        Err(std::sync::TryLockError::Poisoned(_)) => {
            return (500, error_body("server state poisoned"))
        }
    };
    match scorer.score(&req.domain) {
        Ok(resp) => (
            200,
            serde_json::to_string(&resp).expect("response serializes"),
        ),
        Err(e @ (Error::EmptyDomain | Error::InvalidDomain(_))) => {
            (400, error_body(&e.to_string()))
        }
        Err(e) => (500, error_body(&e.to_string())),
    }
}
