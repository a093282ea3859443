//! Open-ended LLM annotation client.
//!
//! A request carries an opaque audio reference plus the segmented transcript
//! and an instruction text that asks for five fields per segment without
//! offering any emotion vocabulary. Responses are validated per segment:
//! one bad annotation is dropped and recorded, the rest survive.
//!
//! Transports are pluggable. [`FixtureTransport`] replays a recorded
//! response file; `HttpTransport` (feature `http`) posts the request to a
//! provider-agnostic endpoint with bounded retries.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::model::{CorpusEmotion, EmotionClass, Entries, SegmentAnnotation, SegmentRecord};

/// Default instruction text, versioned by [`INSTRUCTIONS_VERSION`].
const INSTRUCTIONS: &str = include_str!("../data/annotation_instructions.txt");

pub const INSTRUCTIONS_VERSION: &str = "open-ended-v1";

/// Environment variable holding the bearer credential for live requests.
pub const CREDENTIAL_ENV: &str = "PATHOSCOPE_API_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub segment_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRequest {
    pub audio_ref: String,
    pub segments: Vec<TranscriptSegment>,
    pub instructions: String,
}

impl AnnotationRequest {
    pub fn contains(&self, segment_id: &str) -> bool {
        self.segments.iter().any(|s| s.segment_id == segment_id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

/// Category names that must never appear in instructions, lower-cased.
fn forbidden_terms() -> Vec<String> {
    EmotionClass::ALL
        .iter()
        .map(|c| c.name().to_string())
        .chain(CorpusEmotion::ALL.iter().map(|c| c.name().to_lowercase()))
        .collect()
}

/// Whole-word, case-insensitive occurrences of any closed-set category name.
pub fn enumerated_categories(text: &str) -> Vec<String> {
    let forbidden = forbidden_terms();
    let mut hits: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .map(str::to_lowercase)
        .filter(|w| forbidden.contains(w))
        .collect();
    hits.sort();
    hits.dedup();
    hits
}

pub fn default_instructions() -> &'static str {
    INSTRUCTIONS
}

pub fn build_request(audio_ref: &str, segments: &[SegmentRecord]) -> Result<AnnotationRequest> {
    build_request_with(audio_ref, segments, INSTRUCTIONS)
}

/// Like [`build_request`] with a replacement instruction text. The text must
/// still be open-ended.
pub fn build_request_with(
    audio_ref: &str,
    segments: &[SegmentRecord],
    instructions: &str,
) -> Result<AnnotationRequest> {
    if segments.is_empty() {
        return Err(Error::input("build_request: no segments"));
    }
    let hits = enumerated_categories(instructions);
    if !hits.is_empty() {
        return Err(Error::input(format!(
            "instructions enumerate emotion categories: {}",
            hits.join(", ")
        )));
    }
    let mut seen = HashSet::new();
    for s in segments {
        if !seen.insert(s.segment_id.as_str()) {
            return Err(Error::input(format!("duplicate segment_id {}", s.segment_id)));
        }
    }
    Ok(AnnotationRequest {
        audio_ref: audio_ref.to_string(),
        segments: segments
            .iter()
            .map(|s| TranscriptSegment {
                segment_id: s.segment_id.clone(),
                start_s: s.start_s,
                end_s: s.end_s,
                text: s.transcript.clone(),
            })
            .collect(),
        instructions: instructions.to_string(),
    })
}

/// A segment whose annotation failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedAnnotation {
    pub segment_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct AnnotationResponse {
    pub annotations: BTreeMap<String, SegmentAnnotation>,
    #[serde(skip)]
    pub rejected: Vec<RejectedAnnotation>,
}

impl AnnotationResponse {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("response serializes")
    }

    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }
}

#[derive(Deserialize)]
struct RawResponse {
    annotations: Entries<Value>,
}

/// Validates a raw response payload.
///
/// With a request, every returned id must belong to it. Out-of-range or
/// malformed entries land in [`AnnotationResponse::rejected`].
pub fn parse_response(raw: &str, request: Option<&AnnotationRequest>) -> Result<AnnotationResponse> {
    let doc: RawResponse =
        serde_json::from_str(raw).map_err(|e| Error::Protocol(format!("unparseable payload: {e}")))?;
    let mut out = AnnotationResponse::default();
    for (id, value) in doc.annotations.0 {
        if let Some(req) = request {
            if !req.contains(&id) {
                return Err(Error::Protocol(format!("unknown segment_id {id:?} in response")));
            }
        }
        if out.annotations.contains_key(&id) || out.rejected.iter().any(|r| r.segment_id == id) {
            return Err(Error::Protocol(format!("duplicate segment_id {id:?} in response")));
        }
        match serde_json::from_value::<SegmentAnnotation>(value) {
            Ok(ann) => {
                out.annotations.insert(id, ann);
            }
            Err(e) => {
                log::warn!("W003 degraded_annotation segment_id={id} reason={e}");
                out.rejected.push(RejectedAnnotation {
                    segment_id: id,
                    reason: e.to_string(),
                });
            }
        }
    }
    out.rejected.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn once() -> Self {
        RetryPolicy {
            max_attempts: 1,
            base_delay: Duration::ZERO,
        }
    }

    /// Wait before attempt `attempt` (0-based); doubles each time.
    pub fn delay_before(&self, attempt: u32) -> Duration {
        if attempt == 0 {
            Duration::ZERO
        } else {
            self.base_delay.saturating_mul(1 << (attempt - 1).min(16))
        }
    }
}

/// Delivers a request and returns the raw response payload.
pub trait Transport: Send + Sync {
    fn send(&self, request: &AnnotationRequest) -> Result<String>;

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::once()
    }
}

/// Replays a recorded response file verbatim.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    path: PathBuf,
}

impl FixtureTransport {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        FixtureTransport { path: path.into() }
    }
}

impl Transport for FixtureTransport {
    fn send(&self, _request: &AnnotationRequest) -> Result<String> {
        std::fs::read_to_string(&self.path).map_err(|e| Error::input(format!("fixture {}: {e}", self.path.display())))
    }
}

/// Sends the request and validates the payload, retrying transport failures
/// and malformed payloads according to the transport's policy.
pub fn annotate(request: &AnnotationRequest, transport: &dyn Transport) -> Result<AnnotationResponse> {
    let policy = transport.retry_policy();
    let attempts = policy.max_attempts.max(1);
    let mut last = None;
    for attempt in 0..attempts {
        let wait = policy.delay_before(attempt);
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
        let outcome = transport
            .send(request)
            .and_then(|raw| parse_response(&raw, Some(request)));
        match outcome {
            Ok(resp) => return Ok(resp),
            Err(e @ (Error::Transport(_) | Error::Protocol(_))) => {
                log::warn!("W004 annotate_attempt_failed attempt={} error={e}", attempt + 1);
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    let last = last.expect("at least one attempt");
    if attempts == 1 {
        return Err(last);
    }
    Err(Error::Transport(format!("giving up after {attempts} attempts: {last}")))
}

/// One request per segment, for corpora of independent utterances.
///
/// At most `parallelism` requests are in flight. Segments whose request
/// fails are recorded as rejected rather than aborting the batch.
pub fn annotate_each(
    items: &[(String, SegmentRecord)],
    transport: &dyn Transport,
    parallelism: usize,
) -> Result<AnnotationResponse> {
    let run = |(audio_ref, seg): &(String, SegmentRecord)| {
        let outcome = build_request(audio_ref, std::slice::from_ref(seg)).and_then(|req| annotate(&req, transport));
        (seg.segment_id.clone(), outcome)
    };
    let results = bounded_map(items, parallelism.max(1), run)?;

    let mut out = AnnotationResponse::default();
    for (id, outcome) in results {
        match outcome {
            Ok(resp) => {
                out.annotations.extend(resp.annotations);
                out.rejected.extend(resp.rejected);
            }
            Err(e) => {
                log::warn!("W003 degraded_annotation segment_id={id} reason={e}");
                out.rejected.push(RejectedAnnotation {
                    segment_id: id,
                    reason: e.to_string(),
                });
            }
        }
    }
    out.rejected.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));
    Ok(out)
}

fn bounded_map<I, T, F>(items: &[I], parallelism: usize, f: F) -> Result<Vec<T>>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallelism > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| Error::Transport(format!("cannot start worker pool: {e}")))?;
        return Ok(pool.install(|| exec::map_slice(ExecMode::Parallel, items, f)));
    }
    let _ = parallelism;
    Ok(exec::map_slice(ExecMode::Sequential, items, f))
}

#[cfg(feature = "http")]
pub use http::HttpTransport;

#[cfg(feature = "http")]
mod http {
    use super::*;

    /// HTTPS POST of the request JSON with a bearer credential.
    #[derive(Debug, Clone)]
    pub struct HttpTransport {
        endpoint: String,
        token: String,
        policy: RetryPolicy,
        timeout: Duration,
    }

    impl HttpTransport {
        pub fn new(endpoint: impl Into<String>, token: impl Into<String>) -> Self {
            HttpTransport {
                endpoint: endpoint.into(),
                token: token.into(),
                policy: RetryPolicy::default(),
                timeout: Duration::from_secs(300),
            }
        }

        /// Reads the credential from [`CREDENTIAL_ENV`].
        pub fn from_env(endpoint: impl Into<String>) -> Result<Self> {
            let token =
                std::env::var(CREDENTIAL_ENV).map_err(|_| Error::input(format!("{CREDENTIAL_ENV} is not set")))?;
            Ok(Self::new(endpoint, token))
        }

        pub fn with_retry(mut self, policy: RetryPolicy) -> Self {
            self.policy = policy;
            self
        }

        pub fn with_timeout(mut self, timeout: Duration) -> Self {
            self.timeout = timeout;
            self
        }
    }

    impl Transport for HttpTransport {
        fn send(&self, request: &AnnotationRequest) -> Result<String> {
            let agent: ureq::Agent = ureq::Agent::config_builder()
                .timeout_global(Some(self.timeout))
                .build()
                .into();
            let mut resp = agent
                .post(&self.endpoint)
                .header("Authorization", &format!("Bearer {}", self.token))
                .header("Content-Type", "application/json")
                .send(request.to_json())
                .map_err(|e| Error::Transport(format!("POST {}: {e}", self.endpoint)))?;
            resp.body_mut()
                .read_to_string()
                .map_err(|e| Error::Transport(format!("reading response body: {e}")))
        }

        fn retry_policy(&self) -> RetryPolicy {
            self.policy
        }
    }
}
