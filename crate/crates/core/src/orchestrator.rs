//! The per-turn pipeline: classify, route, respond, push the agenda, concatenate.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acts::{self, DialogueActLabel, Side};
use crate::agenda::{Agenda, AgendaState};
use crate::classifier::ActClassifier;
use crate::corpus::{segment_sentences, to_record, AnnotatedConversation, ResponseSource, Sentence, Turn, TurnMeta, Utterance};
use crate::dispatcher::{Dispatcher, RouteDecision};
use crate::embedding::EmbeddingProvider;
use crate::pusher::{build_model_input, derive_seed, generate_strategy_utterance, ConditionalLm, GenerationConfig};
use crate::qa::{self, QaIndex};
use crate::social::SocialResponder;

pub const DEFAULT_MIN_USER_TURNS: usize = 7;
pub const DEFAULT_MAX_USER_TURNS: usize = 10;

/// Agenda text for turns after the closing act has been emitted.
pub const POLITE_CLOSURES: [&str; 3] = [
    "Thank you again for chatting with me.",
    "It was a pleasure talking with you today.",
    "Thanks so much for your time, take care!",
];

const FALLBACK_AGENDA_TEXT: &str = "Thank you for chatting with me.";

#[derive(Debug, Error, PartialEq)]
pub enum OrchestratorError {
    #[error("session has ended")]
    SessionEnded,
    #[error("session already received the maximum of {0} user messages")]
    TurnLimit(usize),
    #[error("message is empty")]
    EmptyMessage,
    #[error("subsystem unavailable: {0}")]
    Unavailable(String),
    #[error("invalid orchestrator config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    ClosingEmitted,
    Ended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorConfig {
    pub min_user_turns: usize,
    pub max_user_turns: usize,
    pub generation: GenerationConfig,
    /// Mixed into session ids and per-turn decoding seeds.
    pub seed: u64,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            min_user_turns: DEFAULT_MIN_USER_TURNS,
            max_user_turns: DEFAULT_MAX_USER_TURNS,
            generation: GenerationConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemTurn {
    pub response_part: Option<String>,
    pub response_source: ResponseSource,
    pub agenda_part: String,
    pub agenda_act: DialogueActLabel,
    pub full_text: String,
    /// Number of user messages answered before this turn; the opening turn is 0.
    pub turn_number: usize,
}

impl SystemTurn {
    fn new(response: Option<(String, ResponseSource)>, agenda_part: String, agenda_act: DialogueActLabel, turn_number: usize) -> Self {
        let (response_part, response_source) = match response {
            Some((text, source)) => (Some(text), source),
            None => (None, ResponseSource::None),
        };
        let full_text = match &response_part {
            Some(r) => format!("{r} {agenda_part}"),
            None => agenda_part.clone(),
        };
        Self { response_part, response_source, agenda_part, agenda_act, full_text, turn_number }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub role: Side,
    pub text: String,
    pub timestamp_ms: u64,
}

/// Live conversation state. One request at a time may mutate a session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    pub id: String,
    pub history: Vec<HistoryEntry>,
    pub agenda_state: AgendaState,
    pub user_turns: usize,
    pub status: SessionStatus,
    pub previous_act: DialogueActLabel,
    pub system_turns: Vec<SystemTurn>,
    #[serde(skip)]
    turns: Vec<Turn>,
    #[serde(skip)]
    record: Option<AnnotatedConversation>,
}

impl Session {
    pub fn utterances(&self) -> Vec<Utterance> {
        self.history.iter().map(|h| Utterance::new(h.role, h.text.clone())).collect()
    }

    /// The conversation so far in corpus form, with per-turn metadata.
    pub fn conversation(&self) -> AnnotatedConversation {
        AnnotatedConversation { id: self.id.clone(), turns: self.turns.clone() }
    }

    pub fn can_accept_message(&self, max_user_turns: usize) -> bool {
        self.status != SessionStatus::Ended && self.user_turns < max_user_turns
    }

    fn push(&mut self, role: Side, text: &str, sentences: Vec<Sentence>, meta: TurnMeta) {
        self.history.push(HistoryEntry { role, text: text.to_string(), timestamp_ms: now_ms() });
        let index = self.turns.len();
        self.turns.push(Turn { role, sentences, index, meta });
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn labelled(text: &str, act: &DialogueActLabel) -> Vec<Sentence> {
    let mut out: Vec<Sentence> = segment_sentences(text)
        .into_iter()
        .map(|s| Sentence { text: s.to_string(), act: act.clone() })
        .collect();
    if out.is_empty() {
        out.push(Sentence { text: text.trim().to_string(), act: act.clone() });
    }
    out
}

/// The factual responder: an index plus the provider it was built with.
#[derive(Clone)]
pub struct FactualResponder {
    pub index: Arc<QaIndex>,
    pub provider: Arc<dyn EmbeddingProvider>,
}

pub struct Components {
    /// Classifies user sentences for routing.
    pub classifier: Arc<dyn ActClassifier>,
    pub dispatcher: Dispatcher,
    pub factual: Option<FactualResponder>,
    pub social: Option<SocialResponder>,
    pub model: Arc<dyn ConditionalLm>,
    pub agenda: Agenda,
}

pub struct Orchestrator {
    parts: Components,
    config: OrchestratorConfig,
    sessions_started: AtomicU64,
}

impl Orchestrator {
    pub fn new(parts: Components, config: OrchestratorConfig) -> Result<Self, OrchestratorError> {
        if config.min_user_turns > config.max_user_turns || config.max_user_turns == 0 {
            return Err(OrchestratorError::BadConfig(format!(
                "turn limits min {} max {}",
                config.min_user_turns, config.max_user_turns
            )));
        }
        crate::pusher::decode::validate(&config.generation)
            .map_err(|e| OrchestratorError::BadConfig(e.to_string()))?;
        Ok(Self { parts, config, sessions_started: AtomicU64::new(0) })
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    /// Checks that every loaded subsystem answers.
    pub fn health(&self) -> Result<(), OrchestratorError> {
        if self.parts.model.vocab().len() <= 4 {
            return Err(OrchestratorError::Unavailable("conditional model has an empty vocabulary".into()));
        }
        if self.parts.classifier.label_inventory().is_empty() {
            return Err(OrchestratorError::Unavailable("classifier has no labels".into()));
        }
        if let Some(f) = &self.parts.factual {
            if f.provider.signature() != f.index.provider_signature {
                return Err(OrchestratorError::Unavailable("embedding provider does not match the QA index".into()));
            }
        }
        Ok(())
    }

    pub fn start_session(&self) -> Result<(Session, SystemTurn), OrchestratorError> {
        self.health()?;
        let n = self.sessions_started.fetch_add(1, Ordering::Relaxed);
        let id = format!("s-{:016x}", derive_seed(&[self.config.seed, n]));
        let mut session = Session {
            id,
            history: Vec::new(),
            agenda_state: AgendaState::new(self.parts.agenda.clone()),
            user_turns: 0,
            status: SessionStatus::Active,
            previous_act: DialogueActLabel::none(),
            system_turns: Vec::new(),
            turns: Vec::new(),
            record: None,
        };
        let act = session.agenda_state.next_act().expect("agendas are non-empty");
        let turn = self.agenda_turn(&mut session, act, None);
        Ok((session, turn))
    }

    pub fn handle_user_message(&self, session: &mut Session, text: &str) -> Result<SystemTurn, OrchestratorError> {
        if session.status == SessionStatus::Ended {
            return Err(OrchestratorError::SessionEnded);
        }
        if session.user_turns >= self.config.max_user_turns {
            return Err(OrchestratorError::TurnLimit(self.config.max_user_turns));
        }
        let text = text.trim();
        if text.is_empty() {
            return Err(OrchestratorError::EmptyMessage);
        }
        let context = session.utterances();
        let classified = self.classify(text, &context);
        let route = self.parts.dispatcher.route(text, &classified);
        let sentences = classified.iter().map(|(s, a)| Sentence { text: s.clone(), act: a.clone() }).collect();
        session.push(Side::Persuadee, text, sentences, TurnMeta { route: Some(route.to_meta()), ..Default::default() });
        session.user_turns += 1;

        if session.status == SessionStatus::ClosingEmitted {
            let closure = POLITE_CLOSURES[(session.user_turns - 1) % POLITE_CLOSURES.len()].to_string();
            return Ok(self.finish_turn(session, None, closure, DialogueActLabel::none()));
        }

        let response = self.respond(&route, session);
        let turns_left = self.config.max_user_turns - session.user_turns + 1;
        let act = if turns_left == 1 {
            session.agenda_state.force_closing()
        } else {
            session.agenda_state.next_act_within(turns_left)
        };
        match act {
            Some(act) => Ok(self.agenda_turn(session, act, response)),
            None => {
                session.status = SessionStatus::ClosingEmitted;
                let closure = POLITE_CLOSURES[0].to_string();
                Ok(self.finish_turn(session, response, closure, DialogueActLabel::none()))
            }
        }
    }

    /// Ends the session and returns its record. Ending twice returns the same record.
    pub fn end_session(&self, session: &mut Session) -> AnnotatedConversation {
        if let Some(record) = &session.record {
            return record.clone();
        }
        session.status = SessionStatus::Ended;
        let record = session.conversation();
        session.record = Some(record.clone());
        record
    }

    fn classify(&self, text: &str, context: &[Utterance]) -> Vec<(String, DialogueActLabel)> {
        let mut sentences = segment_sentences(text);
        if sentences.is_empty() {
            sentences.push(text);
        }
        sentences
            .into_iter()
            .map(|s| {
                let act = match self.parts.classifier.classify(s, Some(context)) {
                    Ok((label, _)) => label,
                    Err(e) => {
                        log::debug!("classification failed: {e}");
                        DialogueActLabel::persuadee(acts::OTHER)
                    }
                };
                (s.to_string(), act)
            })
            .collect()
    }

    fn respond(&self, route: &RouteDecision, session: &Session) -> Option<(String, ResponseSource)> {
        let mut factual_declined = false;
        if route.invoke_factual {
            let answer = match (&self.parts.factual, route.factual_query()) {
                (Some(f), Some(q)) => qa::answer(&f.index, &q, f.provider.as_ref()).unwrap_or_else(|e| {
                    log::warn!("factual lookup failed: {e}");
                    None
                }),
                _ => None,
            };
            match answer {
                Some(a) => return Some((a.answer, ResponseSource::Factual)),
                None => factual_declined = true,
            }
        }
        if route.invoke_social || (factual_declined && route.social_fallback) {
            if let Some(social) = &self.parts.social {
                if let Some(reply) = social.respond(&session.utterances()).reply {
                    return Some((reply, ResponseSource::Social));
                }
            }
        }
        None
    }

    fn agenda_turn(&self, session: &mut Session, act: DialogueActLabel, response: Option<(String, ResponseSource)>) -> SystemTurn {
        let injected = response.as_ref().map(|(text, _)| text.as_str());
        let input = build_model_input(&session.utterances(), &session.previous_act, &act, injected);
        let seed = derive_seed(&[self.config.seed, fnv(&session.id), session.user_turns as u64]);
        let generated = generate_strategy_utterance(self.parts.model.as_ref(), &input, &self.config.generation.with_seed(seed));
        let agenda_part = match generated {
            Ok(text) => text,
            Err(e) => {
                log::debug!("generation failed for {}: {e}", act.name);
                acts::strategy_example(&act.name).unwrap_or(FALLBACK_AGENDA_TEXT).to_string()
            }
        };
        if act.name == acts::CLOSING {
            session.status = SessionStatus::ClosingEmitted;
        }
        session.previous_act = act.clone();
        self.finish_turn(session, response, agenda_part, act)
    }

    fn finish_turn(
        &self,
        session: &mut Session,
        response: Option<(String, ResponseSource)>,
        agenda_part: String,
        act: DialogueActLabel,
    ) -> SystemTurn {
        let turn = SystemTurn::new(response, agenda_part, act, session.user_turns);
        let other = DialogueActLabel::persuader(acts::OTHER);
        let mut sentences = turn.response_part.as_deref().map_or_else(Vec::new, |r| labelled(r, &other));
        sentences.extend(labelled(&turn.agenda_part, if turn.agenda_act.is_none() { &other } else { &turn.agenda_act }));
        let meta = TurnMeta {
            route: None,
            response_source: Some(turn.response_source),
            agenda_act: Some(turn.agenda_act.name.clone()),
        };
        session.push(Side::Persuader, &turn.full_text, sentences, meta);
        session.system_turns.push(turn.clone());
        turn
    }
}

fn fnv(text: &str) -> u64 {
    crate::embedding::fnv1a(text.as_bytes())
}

/// Appends one record line to a line-delimited record file.
pub fn append_record(path: impl AsRef<Path>, record: &AnnotatedConversation) -> std::io::Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(file, "{}", to_record(record))?;
    file.flush()
}
