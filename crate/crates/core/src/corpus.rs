//! Annotated persuasion conversations: loading, splitting and training-instance construction.
//!
//! The on-disk format is one JSON object per line:
//!
//! ```text
//! {"id":"c1","turns":[{"role":"persuader","sentences":[{"text":"Hello!","act":"greeting"}]}]}
//! ```
//!
//! Session records written by the orchestrator use the same format with optional per-turn
//! `route`, `response_source` and `agenda_act` fields, so they load with [`load_corpus`] too.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acts::{ActInventory, DialogueActLabel, Side};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: conversation {id:?} has no turns")]
    EmptyConversation { line: usize, id: String },
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("cannot split an empty corpus")]
    EmptyCorpus,
    #[error("corpus of {0} conversations is too small for three non-empty parts")]
    TooSmall(usize),
    #[error("duplicate conversation id {0:?}")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    pub act: DialogueActLabel,
}

/// Where the response part of a system turn came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseSource {
    Factual,
    Social,
    None,
}

/// Routing summary stored with a persisted user turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteMeta {
    pub invoke_factual: bool,
    pub invoke_social: bool,
    pub trigger: String,
    pub matched_act: String,
}

/// Optional per-turn metadata carried by session records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TurnMeta {
    pub route: Option<RouteMeta>,
    pub response_source: Option<ResponseSource>,
    pub agenda_act: Option<String>,
}

impl TurnMeta {
    fn is_empty(&self) -> bool {
        self.route.is_none() && self.response_source.is_none() && self.agenda_act.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub role: Side,
    pub sentences: Vec<Sentence>,
    pub index: usize,
    pub meta: TurnMeta,
}

impl Turn {
    /// Space-joined sentence texts.
    pub fn text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedConversation {
    pub id: String,
    pub turns: Vec<Turn>,
}

impl AnnotatedConversation {
    /// True when roles alternate starting with the persuader.
    pub fn alternates(&self) -> bool {
        self.turns.iter().enumerate().all(|(i, t)| {
            let expected = if i % 2 == 0 { Side::Persuader } else { Side::Persuadee };
            t.role == expected
        })
    }

    pub fn persuader_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.role == Side::Persuader)
    }

    pub fn sentences(&self) -> impl Iterator<Item = (&Turn, &Sentence)> {
        self.turns
            .iter()
            .flat_map(|t| t.sentences.iter().map(move |s| (t, s)))
    }
}

/// One line of dialogue history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub role: Side,
    pub text: String,
}

impl Utterance {
    pub fn new(role: Side, text: impl Into<String>) -> Self {
        Self { role, text: text.into() }
    }
}

/// Renders history as `ROLE: text` lines joined by newlines.
pub fn render_history(history: &[Utterance]) -> String {
    history
        .iter()
        .map(|u| format!("{}: {}", u.role.role_prefix(), u.text))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub history: Vec<Utterance>,
    pub previous_act: DialogueActLabel,
    pub planned_act: DialogueActLabel,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<AnnotatedConversation>,
    pub validation: Vec<AnnotatedConversation>,
    pub test: Vec<AnnotatedConversation>,
    pub seed: u64,
}

/// Result of [`load_corpus`].
#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub conversations: Vec<AnnotatedConversation>,
    /// Number of sentences whose act string was unknown and mapped to `other`.
    pub unknown_label_warnings: usize,
    /// Ids of conversations whose roles do not alternate starting with the persuader.
    pub role_deviations: Vec<String>,
}

// Wire records.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConversation {
    id: String,
    turns: Vec<RawTurn>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTurn {
    role: Side,
    sentences: Vec<RawSentence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    route: Option<RouteMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    response_source: Option<ResponseSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    agenda_act: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSentence {
    text: String,
    act: String,
}

/// Parses one conversation record. `line` is only used for error messages.
pub fn parse_record(
    json: &str,
    line: usize,
    inventory: &ActInventory,
) -> Result<(AnnotatedConversation, usize), CorpusError> {
    let raw: RawConversation = serde_json::from_str(json).map_err(|e| CorpusError::Malformed {
        line,
        message: e.to_string(),
    })?;
    if raw.turns.is_empty() {
        return Err(CorpusError::EmptyConversation { line, id: raw.id });
    }
    let mut unknown = 0;
    let mut turns = Vec::with_capacity(raw.turns.len());
    for (index, rt) in raw.turns.into_iter().enumerate() {
        if rt.sentences.is_empty() {
            return Err(CorpusError::Malformed {
                line,
                message: format!("turn {index} has no sentences"),
            });
        }
        let mut sentences = Vec::with_capacity(rt.sentences.len());
        for rs in rt.sentences {
            let text = rs.text.trim();
            if text.is_empty() {
                return Err(CorpusError::Malformed {
                    line,
                    message: format!("turn {index} has an empty sentence"),
                });
            }
            let (act, known) = inventory.resolve(&rs.act, rt.role);
            if !known {
                unknown += 1;
            }
            sentences.push(Sentence { text: text.to_string(), act });
        }
        turns.push(Turn {
            role: rt.role,
            sentences,
            index,
            meta: TurnMeta {
                route: rt.route,
                response_source: rt.response_source,
                agenda_act: rt.agenda_act,
            },
        });
    }
    Ok((AnnotatedConversation { id: raw.id, turns }, unknown))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<LoadedCorpus, CorpusError> {
    load_corpus_with(path, &ActInventory::default())
}

pub fn load_corpus_with(
    path: impl AsRef<Path>,
    inventory: &ActInventory,
) -> Result<LoadedCorpus, CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let file = fs::File::open(path).map_err(io_err)?;
    let mut out = LoadedCorpus::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let (conv, unknown) = parse_record(&line, i + 1, inventory)?;
        out.unknown_label_warnings += unknown;
        if !conv.alternates() {
            out.role_deviations.push(conv.id.clone());
        }
        out.conversations.push(conv);
    }
    if out.unknown_label_warnings > 0 {
        log::warn!(
            "{}: {} sentences had unknown act labels",
            path.display(),
            out.unknown_label_warnings
        );
    }
    Ok(out)
}

/// Serializes a conversation as a single JSON line (without the trailing newline).
pub fn to_record(conversation: &AnnotatedConversation) -> String {
    let raw = RawConversation {
        id: conversation.id.clone(),
        turns: conversation
            .turns
            .iter()
            .map(|t| {
                let meta = if t.meta.is_empty() { TurnMeta::default() } else { t.meta.clone() };
                RawTurn {
                    role: t.role,
                    sentences: t
                        .sentences
                        .iter()
                        .map(|s| RawSentence { text: s.text.clone(), act: s.act.name.clone() })
                        .collect(),
                    route: meta.route,
                    response_source: meta.response_source,
                    agenda_act: meta.agenda_act,
                }
            })
            .collect(),
    };
    serde_json::to_string(&raw).expect("conversation records always serialize")
}

pub fn save_corpus(
    path: impl AsRef<Path>,
    conversations: &[AnnotatedConversation],
) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let mut file = std::io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    for conv in conversations {
        writeln!(file, "{}", to_record(conv)).map_err(io_err)?;
    }
    file.flush().map_err(io_err)
}

/// Shuffles with a seeded RNG and allocates `floor(n * ratio)` conversations to validation
/// and test, the remainder to train.
pub fn split_corpus(
    corpus: &[AnnotatedConversation],
    ratios: [f64; 3],
    seed: u64,
) -> Result<DatasetSplit, CorpusError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadRatios(ratios));
    }
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let n = corpus.len();
    if ratios.iter().all(|r| *r > 0.0) && n < 3 {
        return Err(CorpusError::TooSmall(n));
    }
    let mut ids = HashSet::new();
    for conv in corpus {
        if !ids.insert(conv.id.as_str()) {
            return Err(CorpusError::DuplicateId(conv.id.clone()));
        }
    }

    let part = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
    let n_val = part(ratios[1]);
    let n_test = part(ratios[2]);
    let n_train = n - n_val - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| corpus[i].clone()).collect::<Vec<_>>();
    Ok(DatasetSplit {
        train: pick(&order[..n_train]),
        validation: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
        seed,
    })
}

/// The act a persuader turn is conditioned on: the first Table-1 strategy sentence,
/// otherwise the first sentence's act.
pub fn planned_act(turn: &Turn) -> DialogueActLabel {
    turn.sentences
        .iter()
        .find(|s| s.act.is_strategy())
        .unwrap_or(&turn.sentences[0])
        .act
        .clone()
}

/// One instance per persuader turn, with the full preceding history.
pub fn build_training_instances(conversation: &AnnotatedConversation) -> Vec<TrainingInstance> {
    let mut out = Vec::new();
    let mut history = Vec::new();
    let mut previous = DialogueActLabel::none();
    for turn in &conversation.turns {
        let text = turn.text();
        if turn.role == Side::Persuader {
            let planned = planned_act(turn);
            out.push(TrainingInstance {
                history: history.clone(),
                previous_act: previous,
                planned_act: planned.clone(),
                target: text.clone(),
            });
            previous = planned;
        }
        history.push(Utterance::new(turn.role, text));
    }
    out
}

pub fn instances_of(conversations: &[AnnotatedConversation]) -> Vec<TrainingInstance> {
    conversations.iter().flat_map(build_training_instances).collect()
}

/// Splits unannotated text into sentences.
///
/// A boundary follows `.`, `!` or `?` when the next character is whitespace or the end of
/// the text. A period between two digits never ends a sentence.
pub fn segment_sentences(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for (k, &(pos, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let next = chars.get(k + 1).map(|&(_, n)| n);
        let prev = k.checked_sub(1).map(|j| chars[j].1);
        if c == '.'
            && prev.is_some_and(|p| p.is_ascii_digit())
            && next.is_some_and(|n| n.is_ascii_digit())
        {
            continue;
        }
        if next.is_none() || next.is_some_and(char::is_whitespace) {
            let end = pos + c.len_utf8();
            let piece = text[start..end].trim();
            if !piece.is_empty() {
                out.push(piece);
            }
            start = end;
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acts;

    fn conv(id: &str, turns: &[(Side, &[(&str, &str)])]) -> AnnotatedConversation {
        AnnotatedConversation {
            id: id.into(),
            turns: turns
                .iter()
                .enumerate()
                .map(|(index, (role, sents))| Turn {
                    role: *role,
                    index,
                    sentences: sents
                        .iter()
                        .map(|(t, a)| Sentence {
                            text: t.to_string(),
                            act: DialogueActLabel::new(*a, *role),
                        })
                        .collect(),
                    meta: TurnMeta::default(),
                })
                .collect(),
        }
    }

    fn corpus(n: usize) -> Vec<AnnotatedConversation> {
        (0..n)
            .map(|i| conv(&format!("c{i}"), &[(Side::Persuader, &[("Hi.", acts::GREETING)])]))
            .collect()
    }

    #[test]
    fn segmenter_rules() {
        assert_eq!(segment_sentences("Yes, I agree"), vec!["Yes, I agree"]);
        assert_eq!(segment_sentences("Hi! I'm good, how are you?"), vec!["Hi!", "I'm good, how are you?"]);
        assert_eq!(segment_sentences("It costs 2.50 dollars. Ok"), vec!["It costs 2.50 dollars.", "Ok"]);
        assert_eq!(segment_sentences("Wait... what?!"), vec!["Wait...", "what?!"]);
        assert_eq!(segment_sentences("   "), Vec::<&str>::new());
        assert_eq!(segment_sentences("version 1.2.3 is out."), vec!["version 1.2.3 is out."]);
    }

    #[test]
    fn split_sizes() {
        let s = split_corpus(&corpus(300), [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (240, 30, 30));
        let s = split_corpus(&corpus(10), [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (8, 1, 1));
        let s = split_corpus(&corpus(7), [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (7, 0, 0));
    }

    #[test]
    fn split_errors() {
        assert!(matches!(
            split_corpus(&corpus(10), [0.8, 0.1, 0.2], 0),
            Err(CorpusError::BadRatios(_))
        ));
        assert!(matches!(split_corpus(&[], [0.8, 0.1, 0.1], 0), Err(CorpusError::EmptyCorpus)));
        assert!(matches!(split_corpus(&corpus(2), [0.8, 0.1, 0.1], 0), Err(CorpusError::TooSmall(2))));
        assert!(split_corpus(&corpus(2), [1.0, 0.0, 0.0], 0).is_ok());
        let mut dup = corpus(4);
        dup[3].id = "c0".into();
        assert!(matches!(split_corpus(&dup, [0.5, 0.25, 0.25], 0), Err(CorpusError::DuplicateId(_))));
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let c = corpus(50);
        let a = split_corpus(&c, [0.8, 0.1, 0.1], 42).unwrap();
        let b = split_corpus(&c, [0.8, 0.1, 0.1], 42).unwrap();
        assert_eq!(a, b);
        let mut ids: Vec<_> = a.train.iter().chain(&a.validation).chain(&a.test).map(|c| c.id.clone()).collect();
        ids.sort();
        let mut expected: Vec<_> = c.iter().map(|c| c.id.clone()).collect();
        expected.sort();
        assert_eq!(ids, expected);
        let other = split_corpus(&c, [0.8, 0.1, 0.1], 43).unwrap();
        assert_ne!(a.train, other.train);
    }

    #[test]
    fn first_instance_has_no_context() {
        let c = conv(
            "x",
            &[
                (Side::Persuader, &[("Hello!", acts::GREETING)]),
                (Side::Persuadee, &[("Hi.", acts::GREETING)]),
                (
                    Side::Persuader,
                    &[("Great.", acts::OTHER), ("Every little bit helps.", acts::FOOT_IN_THE_DOOR)],
                ),
            ],
        );
        let inst = build_training_instances(&c);
        assert_eq!(inst.len(), 2);
        assert!(inst[0].history.is_empty());
        assert!(inst[0].previous_act.is_none());
        assert_eq!(inst[1].target, "Great. Every little bit helps.");
        assert_eq!(inst[1].planned_act.name, acts::FOOT_IN_THE_DOOR);
        assert_eq!(inst[1].previous_act.name, acts::GREETING);
        assert_eq!(inst[1].history.len(), 2);
    }

    #[test]
    fn planned_act_falls_back_to_first_sentence() {
        let c = conv("x", &[(Side::Persuader, &[("Okay.", acts::OTHER), ("Sure.", acts::OTHER)])]);
        assert_eq!(planned_act(&c.turns[0]).name, acts::OTHER);
    }

    #[test]
    fn persuadee_only_conversation_has_no_instances() {
        let c = conv("x", &[(Side::Persuadee, &[("Hi.", acts::GREETING)])]);
        assert!(build_training_instances(&c).is_empty());
        assert!(!c.alternates());
    }

    #[test]
    fn malformed_records_report_line() {
        let inv = ActInventory::default();
        let err = parse_record("{\"id\":1}", 4, &inv).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 4, .. }));
        let err = parse_record(r#"{"id":"a","turns":[]}"#, 2, &inv).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyConversation { line: 2, .. }));
        let err = parse_record(
            r#"{"id":"a","turns":[{"role":"persuader","sentences":[{"text":"  ","act":"greeting"}]}]}"#,
            3,
            &inv,
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 3, .. }));
    }

    #[test]
    fn history_rendering() {
        let h = [Utterance::new(Side::Persuader, "Hello."), Utterance::new(Side::Persuadee, "Hi!")];
        assert_eq!(render_history(&h), "PERSUADER: Hello.\nPERSUADEE: Hi!");
        assert_eq!(render_history(&[]), "");
    }
}
