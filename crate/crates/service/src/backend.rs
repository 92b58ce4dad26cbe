//! Social backend reached over HTTP.
//!
//! Request: `POST {endpoint}` with `{"context": "..."}`.
//! Response: `{"text": "...", "safety": "safe" | "potentially_unsafe"}`.

use std::time::{Duration, Instant};

use persuasion_core::social::{BackendError, Candidate, Safety, SocialBackend};
use serde::{Deserialize, Serialize};

#[derive(Serialize)]
struct Request<'a> {
    context: &'a str,
}

#[derive(Deserialize)]
struct Reply {
    text: String,
    safety: Safety,
}

pub struct HttpSocialBackend {
    agent: ureq::Agent,
    endpoint: String,
    max_in_flight: usize,
}

impl HttpSocialBackend {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, max_in_flight: usize) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { agent, endpoint: endpoint.into(), max_in_flight: max_in_flight.max(1) }
    }
}

impl SocialBackend for HttpSocialBackend {
    fn generate(&self, context: &str) -> Result<Candidate, BackendError> {
        let started = Instant::now();
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(Request { context })
            .map_err(|e| BackendError(e.to_string()))?;
        let reply: Reply = resp.body_mut().read_json().map_err(|e| BackendError(e.to_string()))?;
        Ok(Candidate { text: reply.text, safety: reply.safety, latency: started.elapsed() })
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }
}
