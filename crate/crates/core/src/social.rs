//! Social replies from an external open-domain chatbot, with unsafe outputs dropped.

use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Utterance;

pub const DEFAULT_MAX_TURNS: usize = 8;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Safety {
    Safe,
    PotentiallyUnsafe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub text: String,
    pub safety: Safety,
    pub latency: Duration,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("social backend error: {0}")]
pub struct BackendError(pub String);

pub trait SocialBackend: Send + Sync + 'static {
    fn generate(&self, context: &str) -> Result<Candidate, BackendError>;

    /// Maximum number of concurrent `generate` calls the backend accepts.
    fn max_in_flight(&self) -> usize {
        4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclineReason {
    None,
    Unsafe,
    BackendError,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocialResult {
    pub reply: Option<String>,
    pub declined_reason: DeclineReason,
}

impl SocialResult {
    fn declined(reason: DeclineReason) -> Self {
        Self { reply: None, declined_reason: reason }
    }
}

/// The last `max_turns` history entries as role-prefixed lines, oldest first.
pub fn compose_context(history: &[Utterance], max_turns: usize) -> String {
    let start = history.len().saturating_sub(max_turns);
    crate::corpus::render_history(&history[start..])
}

struct InFlight {
    cap: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(self: &Arc<Self>, deadline: Instant) -> Option<Permit> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.cap {
            let now = Instant::now();
            if now >= deadline {
                return None;
            }
            used = self.freed.wait_timeout(used, deadline - now).unwrap_or_else(|e| e.into_inner()).0;
        }
        *used += 1;
        Some(Permit(Arc::clone(self)))
    }
}

struct Permit(Arc<InFlight>);

impl Drop for Permit {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        self.0.freed.notify_one();
    }
}

/// Wraps a backend with a context window, a timeout and the backend's in-flight cap.
#[derive(Clone)]
pub struct SocialResponder {
    backend: Arc<dyn SocialBackend>,
    timeout: Duration,
    max_turns: usize,
    in_flight: Arc<InFlight>,
}

impl SocialResponder {
    pub fn new(backend: Arc<dyn SocialBackend>, timeout: Duration, max_turns: usize) -> Self {
        let cap = backend.max_in_flight().max(1);
        Self {
            backend,
            timeout,
            max_turns: max_turns.max(1),
            in_flight: Arc::new(InFlight { cap, used: Mutex::new(0), freed: Condvar::new() }),
        }
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// One generation attempt. Never fails: every problem becomes a declined result.
    pub fn respond(&self, history: &[Utterance]) -> SocialResult {
        let deadline = Instant::now() + self.timeout;
        let Some(permit) = self.in_flight.acquire(deadline) else {
            return SocialResult::declined(DeclineReason::Timeout);
        };
        let context = compose_context(history, self.max_turns);
        let backend = Arc::clone(&self.backend);
        let (tx, rx) = mpsc::channel();
        let spawned = thread::Builder::new().name("social-backend".into()).spawn(move || {
            let result = backend.generate(&context);
            drop(permit);
            let _ = tx.send(result);
        });
        if spawned.is_err() {
            return SocialResult::declined(DeclineReason::BackendError);
        }
        let remaining = deadline.saturating_duration_since(Instant::now());
        match rx.recv_timeout(remaining) {
            Ok(Ok(c)) if c.text.trim().is_empty() => SocialResult::declined(DeclineReason::BackendError),
            Ok(Ok(c)) => match c.safety {
                Safety::Safe => SocialResult { reply: Some(c.text.trim().to_string()), declined_reason: DeclineReason::None },
                Safety::PotentiallyUnsafe => SocialResult::declined(DeclineReason::Unsafe),
            },
            Ok(Err(e)) => {
                log::debug!("{e}");
                SocialResult::declined(DeclineReason::BackendError)
            }
            Err(mpsc::RecvTimeoutError::Timeout) => SocialResult::declined(DeclineReason::Timeout),
            Err(mpsc::RecvTimeoutError::Disconnected) => SocialResult::declined(DeclineReason::BackendError),
        }
    }
}

pub fn respond(history: &[Utterance], backend: Arc<dyn SocialBackend>, timeout: Duration) -> SocialResult {
    SocialResponder::new(backend, timeout, DEFAULT_MAX_TURNS).respond(history)
}

/// Deterministic backend for tests and offline demos.
///
/// Replies with the first rule whose keyword occurs in the last context line, else the
/// default reply. Contexts containing a flagged keyword are marked potentially unsafe.
#[derive(Debug, Clone)]
pub struct CannedSocialBackend {
    pub rules: Vec<(String, String)>,
    pub default_reply: String,
    pub unsafe_keywords: Vec<String>,
    pub delay: Duration,
}

impl Default for CannedSocialBackend {
    fn default() -> Self {
        Self {
            rules: vec![
                ("how are you".into(), "I'm terrific!".into()),
                ("agree".into(), "I agree.".into()),
                ("heard of".into(), "That's great!".into()),
            ],
            default_reply: "That's a really good point.".into(),
            unsafe_keywords: vec!["war".into()],
            delay: Duration::ZERO,
        }
    }
}

impl SocialBackend for CannedSocialBackend {
    fn generate(&self, context: &str) -> Result<Candidate, BackendError> {
        if !self.delay.is_zero() {
            thread::sleep(self.delay);
        }
        let last = context.lines().last().unwrap_or("").to_lowercase();
        let text = self
            .rules
            .iter()
            .find(|(k, _)| last.contains(k.as_str()))
            .map_or(self.default_reply.clone(), |(_, r)| r.clone());
        let flagged = self.unsafe_keywords.iter().any(|k| {
            last.split(|c: char| !c.is_alphanumeric()).any(|w| w == k.as_str())
        });
        Ok(Candidate {
            text,
            safety: if flagged { Safety::PotentiallyUnsafe } else { Safety::Safe },
            latency: self.delay,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acts::Side;

    struct Fixed(Result<Candidate, BackendError>, Duration);
    impl SocialBackend for Fixed {
        fn generate(&self, _: &str) -> Result<Candidate, BackendError> {
            thread::sleep(self.1);
            self.0.clone()
        }
        fn max_in_flight(&self) -> usize {
            1
        }
    }

    fn cand(text: &str, safety: Safety) -> Result<Candidate, BackendError> {
        Ok(Candidate { text: text.into(), safety, latency: Duration::ZERO })
    }

    fn history(n: usize) -> Vec<Utterance> {
        (0..n)
            .map(|i| Utterance::new(if i % 2 == 0 { Side::Persuader } else { Side::Persuadee }, format!("line {i}")))
            .collect()
    }

    #[test]
    fn context_windows() {
        assert_eq!(compose_context(&[], 8), "");
        let ctx = compose_context(&history(12), 8);
        let lines: Vec<_> = ctx.lines().collect();
        assert_eq!(lines.len(), 8);
        assert_eq!(lines[0], "PERSUADER: line 4");
        assert_eq!(lines[7], "PERSUADEE: line 11");
    }

    #[test]
    fn safe_reply_passes() {
        let r = respond(&history(2), Arc::new(Fixed(cand("I'm terrific!", Safety::Safe), Duration::ZERO)), DEFAULT_TIMEOUT);
        assert_eq!(r.reply.as_deref(), Some("I'm terrific!"));
        assert_eq!(r.declined_reason, DeclineReason::None);
    }

    #[test]
    fn unsafe_reply_is_dropped() {
        let r = respond(&history(2), Arc::new(Fixed(cand("bad", Safety::PotentiallyUnsafe), Duration::ZERO)), DEFAULT_TIMEOUT);
        assert_eq!(r, SocialResult { reply: None, declined_reason: DeclineReason::Unsafe });
    }

    #[test]
    fn backend_error_declines() {
        let r = respond(&[], Arc::new(Fixed(Err(BackendError("down".into())), Duration::ZERO)), DEFAULT_TIMEOUT);
        assert_eq!(r.declined_reason, DeclineReason::BackendError);
    }

    #[test]
    fn slow_backend_times_out_promptly() {
        let backend = Arc::new(Fixed(cand("late", Safety::Safe), Duration::from_millis(500)));
        let start = Instant::now();
        let r = respond(&[], backend, Duration::from_millis(50));
        assert_eq!(r.declined_reason, DeclineReason::Timeout);
        assert!(start.elapsed() < Duration::from_millis(400));
    }

    #[test]
    fn in_flight_cap_is_enforced() {
        let backend = Arc::new(Fixed(cand("ok", Safety::Safe), Duration::from_millis(300)));
        let responder = SocialResponder::new(backend, Duration::from_millis(100), 8);
        // the first call times out but its worker still holds the only permit
        assert_eq!(responder.respond(&[]).declined_reason, DeclineReason::Timeout);
        let start = Instant::now();
        assert_eq!(responder.respond(&[]).declined_reason, DeclineReason::Timeout);
        assert!(start.elapsed() < Duration::from_millis(250));
    }

    #[test]
    fn canned_backend_rules() {
        let b = CannedSocialBackend::default();
        assert_eq!(b.generate("PERSUADEE: Hi! I'm good, how are you?").unwrap().text, "I'm terrific!");
        assert_eq!(b.generate("PERSUADEE: The war is awful").unwrap().safety, Safety::PotentiallyUnsafe);
        assert_eq!(b.generate("PERSUADEE: software is fun").unwrap().safety, Safety::Safe);
    }
}
