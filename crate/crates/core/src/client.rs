//! Chat-completions client for summary generation and clarity judging.
//!
//! Endpoint and key come from `RTM_LLM_ENDPOINT` and `RTM_LLM_KEY`. Every
//! call is appended to an audit log keyed by a digest of the request, so a
//! run can be replayed offline with [`ReplayClient`].

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Condvar, LazyLock, Mutex};
use std::time::{Duration, Instant};

use base64::Engine as _;
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::ingest::{Pipeline, Summary};
use crate::util::sha256_hex;

pub const ENDPOINT_VAR: &str = "RTM_LLM_ENDPOINT";
pub const KEY_VAR: &str = "RTM_LLM_KEY";
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("no endpoint configured (set {ENDPOINT_VAR})")]
    MissingEndpoint,
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("server error {status} after {attempts} attempts")]
    Server { status: u16, attempts: u32 },
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { message: String, attempts: u32 },
    #[error("request rejected with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cannot read image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("no clarity score in judge response: {0:?}")]
    UnparseableScore(String),
    #[error("audit log: {0}")]
    Audit(#[from] io::Error),
    #[error("request {0} not found in audit log")]
    NotInAudit(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub model: String,
    pub pipeline: Pipeline,
    pub prompt: String,
    pub images: Vec<PathBuf>,
    pub temperature: f64,
    pub max_retries: u32,
    #[serde(with = "duration_ms")]
    pub timeout: Duration,
    /// Free-form label copied into the audit record, such as a day key.
    pub tag: Option<String>,
}

impl GenerationRequest {
    pub fn new(model: impl Into<String>, pipeline: Pipeline, prompt: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            pipeline,
            prompt: prompt.into(),
            images: Vec::new(),
            temperature: 0.0,
            max_retries: 3,
            timeout: Duration::from_secs(120),
            tag: None,
        }
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        if !self.images.is_empty() && self.pipeline != Pipeline::ImageBased {
            return Err(ClientError::InvalidRequest(format!(
                "images attached to a {} request; only image_based requests carry images",
                self.pipeline
            )));
        }
        Ok(())
    }

    /// Stable identity of the request content, independent of credentials,
    /// retry policy and image file locations.
    pub fn digest(&self) -> Result<String, ClientError> {
        let images = self
            .images
            .iter()
            .map(|p| read_image(p).map(|bytes| sha256_hex(&bytes)))
            .collect::<Result<Vec<_>, _>>()?;
        let canonical = json!({
            "model": self.model,
            "pipeline": self.pipeline,
            "prompt": self.prompt,
            "images": images,
            "temperature": self.temperature,
        });
        Ok(sha256_hex(canonical.to_string().as_bytes()))
    }
}

mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

fn read_image(path: &Path) -> Result<Vec<u8>, ClientError> {
    std::fs::read(path).map_err(|source| ClientError::Image { path: path.to_path_buf(), source })
}

fn mime_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("svg") => "image/svg+xml",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        _ => "image/png",
    }
}

/// Generated text plus how many retries it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub text: String,
    pub retries: u32,
}

/// Anything that turns a request into text: the HTTP client or a replay.
pub trait Generator: Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<Generation, ClientError>;
}

#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub endpoint: String,
    pub api_key: String,
    pub max_in_flight: usize,
    /// First retry delay; doubles per attempt, plus up to the same again in jitter.
    pub backoff_base: Duration,
}

impl ClientConfig {
    /// Reads the two environment variables. A missing or empty key is an
    /// auth failure.
    pub fn from_env() -> Result<Self, ClientError> {
        let key = std::env::var(KEY_VAR).unwrap_or_default();
        let endpoint = std::env::var(ENDPOINT_VAR).unwrap_or_default();
        Self::new(endpoint, key)
    }

    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Result<Self, ClientError> {
        let api_key = api_key.into();
        let endpoint = endpoint.into();
        if api_key.trim().is_empty() {
            return Err(ClientError::AuthFailure(format!("{KEY_VAR} is not set")));
        }
        if endpoint.trim().is_empty() {
            return Err(ClientError::MissingEndpoint);
        }
        Ok(Self { endpoint, api_key, max_in_flight: DEFAULT_MAX_IN_FLIGHT, backoff_base: Duration::from_millis(500) })
    }
}

/// Counting semaphore for the in-flight limit.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slot lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("slot lock");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slot lock") += 1;
        self.0.cv.notify_one();
    }
}

/// One line of `audit.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub request_digest: String,
    pub model: String,
    pub pipeline: Pipeline,
    pub tag: Option<String>,
    pub attempts: u32,
    pub retries: u32,
    pub statuses: Vec<u16>,
    pub elapsed_ms: u64,
    pub response: Option<String>,
    pub error: Option<String>,
}

/// Append-only structured log shared across threads.
pub struct AuditLog {
    file: Mutex<File>,
}

impl AuditLog {
    pub fn open(path: &Path) -> io::Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file: Mutex::new(file) })
    }

    pub fn append(&self, record: &AuditRecord) -> io::Result<()> {
        let mut line = serde_json::to_string(record).map_err(io::Error::other)?;
        line.push('\n');
        let mut f = self.file.lock().expect("audit lock");
        f.write_all(line.as_bytes())?;
        f.flush()
    }
}

pub fn read_audit(path: &Path) -> io::Result<Vec<AuditRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub struct HttpClient {
    config: ClientConfig,
    slots: Slots,
    audit: Option<AuditLog>,
}

enum Attempt {
    Done(String),
    Retry(ClientError),
    Fail(ClientError),
}

impl HttpClient {
    pub fn new(config: ClientConfig, audit: Option<AuditLog>) -> Self {
        let slots = Slots { free: Mutex::new(config.max_in_flight.max(1)), cv: Condvar::new() };
        Self { config, slots, audit }
    }

    fn body(&self, req: &GenerationRequest) -> Result<Json, ClientError> {
        let content = if req.images.is_empty() {
            Json::String(req.prompt.clone())
        } else {
            let mut parts = vec![json!({"type": "text", "text": req.prompt})];
            for path in &req.images {
                let data = base64::engine::general_purpose::STANDARD.encode(read_image(path)?);
                parts.push(json!({
                    "type": "image_url",
                    "image_url": {"url": format!("data:{};base64,{data}", mime_type(path))},
                }));
            }
            Json::Array(parts)
        };
        Ok(json!({
            "model": req.model,
            "temperature": req.temperature,
            "messages": [{"role": "user", "content": content}],
        }))
    }

    fn attempt(&self, body: &Json, timeout: Duration, attempt: u32, statuses: &mut Vec<u16>) -> Attempt {
        let _slot = self.slots.acquire();
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let sent = agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(body);
        let attempts = attempt + 1;
        let mut resp = match sent {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(ClientError::Timeout { attempts }),
            Err(e) => return Attempt::Retry(ClientError::Transport { message: e.to_string(), attempts }),
        };
        let status = resp.status().as_u16();
        statuses.push(status);
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(ClientError::Timeout { attempts }),
            Err(e) => return Attempt::Retry(ClientError::Transport { message: e.to_string(), attempts }),
        };
        match status {
            200..=299 => match parse_completion(&text) {
                Ok(content) => Attempt::Done(content),
                Err(e) => Attempt::Fail(e),
            },
            401 | 403 => Attempt::Fail(ClientError::AuthFailure(format!("endpoint returned {status}"))),
            429 => Attempt::Retry(ClientError::RateLimited { attempts }),
            500..=599 => Attempt::Retry(ClientError::Server { status, attempts }),
            _ => Attempt::Fail(ClientError::Rejected { status, body: text.chars().take(500).collect() }),
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.config.backoff_base.saturating_mul(1 << attempt.min(16));
        let jitter = rand::rng().random_range(0..=base.as_millis().max(1) as u64);
        base + Duration::from_millis(jitter)
    }
}

impl Generator for HttpClient {
    fn generate(&self, req: &GenerationRequest) -> Result<Generation, ClientError> {
        req.validate()?;
        let digest = req.digest()?;
        let body = self.body(req)?;
        let started = Instant::now();
        let mut statuses = Vec::new();
        let mut attempt = 0;
        let outcome = loop {
            match self.attempt(&body, req.timeout, attempt, &mut statuses) {
                Attempt::Done(text) => break Ok(text),
                Attempt::Fail(e) => break Err(e),
                Attempt::Retry(e) if attempt >= req.max_retries => break Err(e),
                Attempt::Retry(e) => {
                    let wait = self.backoff(attempt);
                    log::warn!("attempt {} failed ({e}); retrying in {wait:?}", attempt + 1);
                    std::thread::sleep(wait);
                    attempt += 1;
                }
            }
        };
        if let Some(audit) = &self.audit {
            audit.append(&AuditRecord {
                request_digest: digest,
                model: req.model.clone(),
                pipeline: req.pipeline,
                tag: req.tag.clone(),
                attempts: attempt + 1,
                retries: attempt,
                statuses,
                elapsed_ms: started.elapsed().as_millis() as u64,
                response: outcome.as_ref().ok().cloned(),
                error: outcome.as_ref().err().map(ToString::to_string),
            })?;
        }
        outcome.map(|text| Generation { text, retries: attempt })
    }
}

fn parse_completion(body: &str) -> Result<String, ClientError> {
    let v: Json = serde_json::from_str(body).map_err(|e| ClientError::MalformedResponse(format!("not JSON: {e}")))?;
    let content = v
        .pointer("/choices/0/message/content")
        .ok_or_else(|| ClientError::MalformedResponse("missing choices[0].message.content".into()))?;
    match content {
        Json::String(s) => Ok(s.clone()),
        // Some servers return content as a list of text parts.
        Json::Array(parts) => Ok(parts.iter().filter_map(|p| p.get("text").and_then(Json::as_str)).collect()),
        other => Err(ClientError::MalformedResponse(format!("unexpected content {other}"))),
    }
}

/// Serves responses recorded in an audit log; never touches the network.
pub struct ReplayClient {
    responses: HashMap<String, String>,
}

impl ReplayClient {
    pub fn from_records(records: &[AuditRecord]) -> Self {
        // Later successful records win, matching append order.
        let responses = records
            .iter()
            .filter_map(|r| r.response.clone().map(|text| (r.request_digest.clone(), text)))
            .collect();
        Self { responses }
    }

    pub fn open(path: &Path) -> io::Result<Self> {
        Ok(Self::from_records(&read_audit(path)?))
    }
}

impl Generator for ReplayClient {
    fn generate(&self, req: &GenerationRequest) -> Result<Generation, ClientError> {
        req.validate()?;
        let digest = req.digest()?;
        self.responses
            .get(&digest)
            .map(|text| Generation { text: text.clone(), retries: 0 })
            .ok_or(ClientError::NotInAudit(digest))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarityScore {
    pub score: u8,
    pub rationale: String,
}

pub const JUDGE_PROMPT: &str = "\
You are reviewing a clinical remote-monitoring summary written for a physician.
Rate its clarity, meaning coherence, readability and professional tone, on a 1-5 Likert scale
where 1 is very poor and 5 is excellent. Do not judge factual accuracy.
Reply with a line of the form \"Score: N\" followed by a one-sentence rationale.

Summary:
";

static SCORE_LABELLED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bscore\b\s*[:=]?\s*([1-5])\b").unwrap());
static SCORE_FRACTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([1-5])\s*/\s*5\b").unwrap());
static SCORE_BARE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([1-5])\b").unwrap());

/// First 1–5 score in a judge reply: a labelled score, then `N/5`, then a
/// lone digit.
pub fn parse_score(text: &str) -> Option<u8> {
    [&*SCORE_LABELLED, &*SCORE_FRACTION, &*SCORE_BARE]
        .iter()
        .find_map(|re| re.captures(text))
        .and_then(|c| c[1].parse().ok())
}

/// Asks `judge_model` for a clarity score, retrying once on an unparseable
/// reply.
pub fn judge_clarity(gen: &dyn Generator, summary: &Summary, judge_model: &str) -> Result<ClarityScore, ClientError> {
    let mut req = GenerationRequest::new(judge_model, summary.pipeline, format!("{JUDGE_PROMPT}{}", summary.text));
    req.tag = Some(format!("judge:{}:{}:{}", summary.patient_id, summary.date, summary.pipeline));
    let mut last = String::new();
    for _ in 0..2 {
        let reply = gen.generate(&req)?.text;
        if let Some(score) = parse_score(&reply) {
            return Ok(ClarityScore { score, rationale: reply.trim().to_string() });
        }
        last = reply;
    }
    Err(ClientError::UnparseableScore(last))
}

/// Scripted local HTTP server speaking just enough HTTP/1.1 for the client.
#[cfg(any(test, feature = "stub-server"))]
pub mod stub {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::{TcpListener, TcpStream};
    use std::sync::{Arc, Mutex};
    use std::thread;
    use std::time::Duration;

    use serde_json::json;

    #[derive(Debug, Clone)]
    pub struct StubResponse {
        pub status: u16,
        pub body: String,
        pub delay: Duration,
    }

    impl StubResponse {
        /// A 200 chat-completions reply carrying `text`.
        pub fn chat(text: &str) -> Self {
            let body = json!({
                "id": "stub",
                "object": "chat.completion",
                "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
            });
            Self { status: 200, body: body.to_string(), delay: Duration::ZERO }
        }

        pub fn status(status: u16) -> Self {
            Self { status, body: json!({"error": {"message": "stub"}}).to_string(), delay: Duration::ZERO }
        }

        pub fn delayed(mut self, delay: Duration) -> Self {
            self.delay = delay;
            self
        }
    }

    /// Replies with the scripted responses in order, repeating the last.
    pub struct StubServer {
        pub url: String,
        requests: Arc<Mutex<Vec<String>>>,
    }

    impl StubServer {
        pub fn start(script: Vec<StubResponse>) -> Self {
            assert!(!script.is_empty(), "stub needs at least one response");
            let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub");
            let url = format!("http://{}/v1/chat/completions", listener.local_addr().expect("addr"));
            let requests = Arc::new(Mutex::new(Vec::new()));
            let seen = Arc::clone(&requests);
            thread::spawn(move || {
                let mut served = 0usize;
                for stream in listener.incoming() {
                    let Ok(stream) = stream else { continue };
                    let resp = script[served.min(script.len() - 1)].clone();
                    served += 1;
                    let seen = Arc::clone(&seen);
                    thread::spawn(move || {
                        let _ = serve(stream, &resp, &seen);
                    });
                }
            });
            Self { url, requests }
        }

        /// Request bodies received so far.
        pub fn requests(&self) -> Vec<String> {
            self.requests.lock().expect("stub lock").clone()
        }
    }

    fn serve(stream: TcpStream, resp: &StubResponse, seen: &Mutex<Vec<String>>) -> std::io::Result<()> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut len = 0usize;
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line)? == 0 {
                return Ok(());
            }
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0; len];
        reader.read_exact(&mut body)?;
        seen.lock().expect("stub lock").push(String::from_utf8_lossy(&body).into_owned());
        thread::sleep(resp.delay);
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            resp.status,
            resp.body.len(),
            resp.body
        )?;
        stream.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::stub::{StubResponse, StubServer};
    use super::*;

    fn client(server: &StubServer, audit: Option<AuditLog>) -> HttpClient {
        let mut cfg = ClientConfig::new(&server.url, "test-key").unwrap();
        cfg.backoff_base = Duration::from_millis(1);
        HttpClient::new(cfg, audit)
    }

    fn request(prompt: &str) -> GenerationRequest {
        let mut r = GenerationRequest::new("stub-model", Pipeline::StatBased, prompt);
        r.timeout = Duration::from_secs(5);
        r
    }

    #[test]
    fn echo_stub_returns_fixture() {
        let server = StubServer::start(vec![StubResponse::chat("fixture summary")]);
        let out = client(&server, None).generate(&request("hello")).unwrap();
        assert_eq!(out, Generation { text: "fixture summary".into(), retries: 0 });
        let sent: Json = serde_json::from_str(&server.requests()[0]).unwrap();
        assert_eq!(sent["model"], "stub-model");
        assert_eq!(sent["temperature"], 0.0);
        assert_eq!(sent["messages"][0]["content"], "hello");
    }

    #[test]
    fn retries_after_rate_limits_and_logs() {
        let dir = tempfile::tempdir().unwrap();
        let audit_path = dir.path().join("audit.jsonl");
        let server = StubServer::start(vec![
            StubResponse::status(429),
            StubResponse::status(429),
            StubResponse::status(429),
            StubResponse::chat("ok"),
        ]);
        let c = client(&server, Some(AuditLog::open(&audit_path).unwrap()));
        let out = c.generate(&request("p")).unwrap();
        assert_eq!(out.retries, 3);
        let records = read_audit(&audit_path).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].retries, 3);
        assert_eq!(records[0].statuses, vec![429, 429, 429, 200]);
    }

    #[test]
    fn rate_limit_exhausts_retries() {
        let server = StubServer::start(vec![StubResponse::status(429)]);
        let mut req = request("p");
        req.max_retries = 2;
        let err = client(&server, None).generate(&req).unwrap_err();
        assert!(matches!(err, ClientError::RateLimited { attempts: 3 }), "{err}");
    }

    #[test]
    fn timeout_is_reported() {
        let server = StubServer::start(vec![StubResponse::chat("late").delayed(Duration::from_millis(800))]);
        let mut req = request("p");
        req.timeout = Duration::from_millis(100);
        req.max_retries = 0;
        let err = client(&server, None).generate(&req).unwrap_err();
        assert!(matches!(err, ClientError::Timeout { .. }), "{err}");
    }

    #[test]
    fn malformed_and_auth_errors() {
        let server = StubServer::start(vec![StubResponse { status: 200, body: "{}".into(), delay: Duration::ZERO }]);
        assert!(matches!(client(&server, None).generate(&request("p")), Err(ClientError::MalformedResponse(_))));
        let server = StubServer::start(vec![StubResponse::status(401)]);
        assert!(matches!(client(&server, None).generate(&request("p")), Err(ClientError::AuthFailure(_))));
    }

    #[test]
    fn missing_key_fails_before_network() {
        assert!(matches!(ClientConfig::new("http://127.0.0.1:9", ""), Err(ClientError::AuthFailure(_))));
    }

    #[test]
    fn images_only_for_image_pipeline() {
        let mut req = request("p");
        req.images.push(PathBuf::from("x.svg"));
        assert!(matches!(req.validate(), Err(ClientError::InvalidRequest(_))));
    }

    #[test]
    fn image_parts_are_data_urls() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("hr.svg");
        std::fs::write(&img, "<svg/>").unwrap();
        let server = StubServer::start(vec![StubResponse::chat("ok")]);
        let mut req = request("look");
        req.pipeline = Pipeline::ImageBased;
        req.images.push(img);
        client(&server, None).generate(&req).unwrap();
        let sent: Json = serde_json::from_str(&server.requests()[0]).unwrap();
        let url = sent["messages"][0]["content"][1]["image_url"]["url"].as_str().unwrap();
        assert_eq!(url, "data:image/svg+xml;base64,PHN2Zy8+");
    }

    #[test]
    fn replay_reproduces_without_network() {
        let dir = tempfile::tempdir().unwrap();
        let audit_path = dir.path().join("audit.jsonl");
        let server = StubServer::start(vec![StubResponse::chat("first"), StubResponse::chat("second")]);
        let live = client(&server, Some(AuditLog::open(&audit_path).unwrap()));
        let a = live.generate(&request("a")).unwrap().text;
        let b = live.generate(&request("b")).unwrap().text;
        let replay = ReplayClient::open(&audit_path).unwrap();
        assert_eq!(replay.generate(&request("a")).unwrap().text, a);
        assert_eq!(replay.generate(&request("b")).unwrap().text, b);
        assert!(matches!(replay.generate(&request("c")), Err(ClientError::NotInAudit(_))));
    }

    fn summary() -> Summary {
        Summary {
            patient_id: "p".into(),
            date: chrono::NaiveDate::from_ymd_opt(2019, 6, 11).unwrap(),
            pipeline: Pipeline::StatBased,
            text: "Heart rate normal.".into(),
        }
    }

    #[test]
    fn judge_parses_scores() {
        for (reply, expected) in [("Score: 4", 4), ("5/5 - very clear", 5)] {
            let server = StubServer::start(vec![StubResponse::chat(reply)]);
            let s = judge_clarity(&client(&server, None), &summary(), "judge").unwrap();
            assert_eq!(s.score, expected);
        }
    }

    #[test]
    fn judge_retries_once_then_fails() {
        let server = StubServer::start(vec![StubResponse::chat("great summary")]);
        let err = judge_clarity(&client(&server, None), &summary(), "judge").unwrap_err();
        assert!(matches!(err, ClientError::UnparseableScore(_)));
        assert_eq!(server.requests().len(), 2);
    }

    #[test]
    fn score_parsing_prefers_labels() {
        assert_eq!(parse_score("Out of 5 options, Score: 3"), Some(3));
        assert_eq!(parse_score("I'd give it 2."), Some(2));
        assert_eq!(parse_score("Score: 9"), None);
        assert_eq!(parse_score("no digits"), None);
    }
}
