//! Factual answers by nearest-question retrieval over sentence embeddings.
//!
//! The index maps canonical questions (medoids of greedy question clusters) to an aggregated
//! answer. Queries return the answer of the canonical question at minimum cosine distance,
//! unless that distance exceeds the index threshold.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acts::{self, Side};
use crate::corpus::AnnotatedConversation;
use crate::embedding::{cosine_distance, EmbeddingError, EmbeddingProvider};

pub const DEFAULT_DISTANCE_THRESHOLD: f64 = 0.45;
pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 0.2;

#[derive(Debug, Error)]
pub enum QaError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("embedding of {text:?} is the zero vector")]
    ZeroVector { text: String },
    #[error("threshold {0} outside (0, 2)")]
    BadThreshold(f64),
    #[error("cannot build an index from an empty corpus")]
    EmptyCorpus,
    #[error("index was built with provider {index:?} but queried with {provider:?}")]
    ProviderMismatch { index: String, provider: String },
    #[error("embedding dimension {got} does not match index dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot answer an empty question")]
    EmptyQuestion,
    #[error("index file {path}: {message}")]
    File { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPair {
    pub canonical_question: String,
    pub question_embedding: Vec<f32>,
    pub answer: String,
    pub source_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaIndex {
    pub provider_signature: String,
    pub distance_threshold: f64,
    pub pairs: Vec<QaPair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaAnswer {
    pub answer: String,
    pub distance: f64,
    pub canonical_question: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaBuildConfig {
    pub cluster_threshold: f64,
    pub distance_threshold: f64,
    /// Persuadee acts whose sentences are harvested as questions.
    pub question_acts: Vec<String>,
}

impl Default for QaBuildConfig {
    fn default() -> Self {
        Self {
            cluster_threshold: DEFAULT_CLUSTER_THRESHOLD,
            distance_threshold: DEFAULT_DISTANCE_THRESHOLD,
            question_acts: vec![acts::TASK_RELATED_INQUIRY.into(), acts::FACTUAL_QUESTION.into()],
        }
    }
}

/// The answer text of a persuader turn: its leading non-strategy sentences when it opens with
/// any, otherwise the whole turn.
fn answer_text(turn: &crate::corpus::Turn) -> String {
    let lead: Vec<&str> = turn
        .sentences
        .iter()
        .take_while(|s| !s.act.is_strategy())
        .map(|s| s.text.as_str())
        .collect();
    if lead.is_empty() {
        turn.text()
    } else {
        lead.join(" ")
    }
}

/// `(question sentence, answer)` pairs in corpus order.
pub fn extract_question_answers(
    train: &[AnnotatedConversation],
    question_acts: &[String],
) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for conv in train {
        for (i, turn) in conv.turns.iter().enumerate() {
            if turn.role != Side::Persuadee {
                continue;
            }
            let Some(reply) = conv.turns[i + 1..].iter().find(|t| t.role == Side::Persuader) else {
                continue;
            };
            for s in &turn.sentences {
                if question_acts.contains(&s.act.name) {
                    out.push((s.text.clone(), answer_text(reply)));
                }
            }
        }
    }
    out
}

pub fn build_qa_index(
    train: &[AnnotatedConversation],
    provider: &dyn EmbeddingProvider,
    cluster_threshold: f64,
) -> Result<QaIndex, QaError> {
    build_qa_index_with(
        train,
        provider,
        &QaBuildConfig { cluster_threshold, ..QaBuildConfig::default() },
    )
}

struct Cluster {
    members: Vec<usize>,
    medoid: usize,
}

pub fn build_qa_index_with(
    train: &[AnnotatedConversation],
    provider: &dyn EmbeddingProvider,
    config: &QaBuildConfig,
) -> Result<QaIndex, QaError> {
    for t in [config.cluster_threshold, config.distance_threshold] {
        if !(t > 0.0 && t < 2.0) {
            return Err(QaError::BadThreshold(t));
        }
    }
    if train.is_empty() {
        return Err(QaError::EmptyCorpus);
    }
    let qa = extract_question_answers(train, &config.question_acts);
    if qa.is_empty() {
        log::warn!("no questions found in training data; factual index is empty");
    }
    let mut embeddings = Vec::with_capacity(qa.len());
    for (q, _) in &qa {
        let e = embed_checked(provider, q)?;
        if e.iter().all(|x| *x == 0.0) {
            return Err(QaError::ZeroVector { text: q.clone() });
        }
        embeddings.push(e);
    }
    let dist = |a: usize, b: usize| {
        cosine_distance(&embeddings[a], &embeddings[b]).expect("zero vectors rejected above")
    };

    let mut clusters: Vec<Cluster> = Vec::new();
    for i in 0..qa.len() {
        let mut nearest: Option<(usize, f64)> = None;
        for (k, c) in clusters.iter().enumerate() {
            let d = dist(i, c.medoid);
            if nearest.is_none_or(|(_, bd)| d < bd) {
                nearest = Some((k, d));
            }
        }
        match nearest {
            Some((k, d)) if d < config.cluster_threshold => {
                let cluster = &mut clusters[k];
                cluster.members.push(i);
                cluster.medoid = medoid(&cluster.members, &dist);
            }
            _ => clusters.push(Cluster { members: vec![i], medoid: i }),
        }
    }

    let pairs = clusters
        .iter()
        .map(|c| QaPair {
            canonical_question: qa[c.medoid].0.clone(),
            question_embedding: embeddings[c.medoid].clone(),
            answer: aggregate_answers(c.members.iter().map(|&m| qa[m].1.as_str())),
            source_count: c.members.len(),
        })
        .collect();
    Ok(QaIndex {
        provider_signature: provider.signature(),
        distance_threshold: config.distance_threshold,
        pairs,
    })
}

fn medoid(members: &[usize], dist: &impl Fn(usize, usize) -> f64) -> usize {
    let mut best = members[0];
    let mut best_cost = f64::INFINITY;
    for &m in members {
        let cost: f64 = members.iter().map(|&o| dist(m, o)).sum();
        if cost < best_cost {
            best = m;
            best_cost = cost;
        }
    }
    best
}

/// Most frequent exact answer; ties go to the longer answer, then the earlier one.
fn aggregate_answers<'a>(answers: impl Iterator<Item = &'a str>) -> String {
    let mut counts: Vec<(&str, usize)> = Vec::new();
    let mut pos: HashMap<&str, usize> = HashMap::new();
    for a in answers {
        match pos.get(a) {
            Some(&i) => counts[i].1 += 1,
            None => {
                pos.insert(a, counts.len());
                counts.push((a, 1));
            }
        }
    }
    let mut best = counts[0];
    for &(a, n) in &counts[1..] {
        if n > best.1 || (n == best.1 && a.len() > best.0.len()) {
            best = (a, n);
        }
    }
    best.0.to_string()
}

fn embed_checked(provider: &dyn EmbeddingProvider, text: &str) -> Result<Vec<f32>, QaError> {
    let v = provider.embed(text)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EmbeddingError::NonFinite { text: text.to_string() }.into());
    }
    if v.len() != provider.dimension() {
        return Err(QaError::DimensionMismatch { expected: provider.dimension(), got: v.len() });
    }
    Ok(v)
}

impl QaIndex {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.pairs.first().map(|p| p.question_embedding.len())
    }

    /// Index of the pair nearest to `embedding` and its distance. Ties go to the earlier pair.
    pub fn nearest(&self, embedding: &[f32]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, pair) in self.pairs.iter().enumerate() {
            let Some(d) = cosine_distance(embedding, &pair.question_embedding) else {
                continue;
            };
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), QaError> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).expect("index serializes");
        fs::write(path, json)
            .map_err(|e| QaError::File { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, QaError> {
        let path = path.as_ref();
        let file_err = |message: String| QaError::File { path: path.to_path_buf(), message };
        let data = fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
        let index: QaIndex = serde_json::from_str(&data).map_err(|e| file_err(e.to_string()))?;
        if let Some(dim) = index.dimension() {
            if index.pairs.iter().any(|p| p.question_embedding.len() != dim) {
                return Err(file_err("embeddings have mixed dimensions".into()));
            }
        }
        Ok(index)
    }
}

pub fn answer(
    index: &QaIndex,
    question: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<Option<QaAnswer>, QaError> {
    if provider.signature() != index.provider_signature {
        return Err(QaError::ProviderMismatch {
            index: index.provider_signature.clone(),
            provider: provider.signature(),
        });
    }
    if question.trim().is_empty() {
        return Err(QaError::EmptyQuestion);
    }
    let Some(dim) = index.dimension() else {
        return Ok(None);
    };
    let q = embed_checked(provider, question)?;
    if q.len() != dim {
        return Err(QaError::DimensionMismatch { expected: dim, got: q.len() });
    }
    Ok(index.nearest(&q).and_then(|(i, distance)| {
        (distance <= index.distance_threshold).then(|| QaAnswer {
            answer: index.pairs[i].answer.clone(),
            distance,
            canonical_question: index.pairs[i].canonical_question.clone(),
        })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acts::DialogueActLabel;
    use crate::corpus::{Sentence, Turn, TurnMeta};
    use crate::embedding::FixedEmbedding;

    fn turn(index: usize, role: Side, sents: &[(&str, &str)]) -> Turn {
        Turn {
            role,
            index,
            meta: TurnMeta::default(),
            sentences: sents
                .iter()
                .map(|(t, a)| Sentence { text: t.to_string(), act: DialogueActLabel::new(*a, role) })
                .collect(),
        }
    }

    fn qa_conv(id: &str, question: &str, answer: &str) -> AnnotatedConversation {
        AnnotatedConversation {
            id: id.into(),
            turns: vec![
                turn(0, Side::Persuader, &[("Hello!", acts::GREETING)]),
                turn(1, Side::Persuadee, &[(question, acts::FACTUAL_QUESTION)]),
                turn(2, Side::Persuader, &[(answer, acts::CREDIBILITY_APPEAL)]),
            ],
        }
    }

    #[test]
    fn singleton_cluster() {
        let q = "Have you heard of Save the Children?";
        let provider = FixedEmbedding::new(2).with(q, vec![1.0, 0.0]);
        let idx = build_qa_index(&[qa_conv("a", q, "They help kids.")], &provider, 0.2).unwrap();
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.pairs[0].source_count, 1);
    }

    #[test]
    fn close_paraphrases_merge() {
        // angle of 0.1 rad: distance 1 - cos(0.1) ~ 0.005 < 0.2
        let (c, s) = (0.1f32.cos(), 0.1f32.sin());
        let provider = FixedEmbedding::new(2)
            .with("What do they do?", vec![1.0, 0.0])
            .with("What is it they do?", vec![c, s]);
        let train = [
            qa_conv("a", "What do they do?", "They help kids."),
            qa_conv("b", "What is it they do?", "They help children everywhere."),
        ];
        let idx = build_qa_index(&train, &provider, 0.2).unwrap();
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.pairs[0].source_count, 2);
        // counts tie, longer answer wins
        assert_eq!(idx.pairs[0].answer, "They help children everywhere.");
    }

    #[test]
    fn empty_corpus_of_questions_gives_empty_index() {
        let provider = FixedEmbedding::new(2);
        let conv = AnnotatedConversation {
            id: "a".into(),
            turns: vec![turn(0, Side::Persuader, &[("Hello!", acts::GREETING)])],
        };
        let idx = build_qa_index(&[conv], &provider, 0.2).unwrap();
        assert!(idx.is_empty());
        assert_eq!(answer(&idx, "anything?", &provider).unwrap(), None);
    }

    #[test]
    fn zero_vector_is_rejected() {
        let provider = FixedEmbedding::new(2).with("Why?", vec![0.0, 0.0]);
        let err = build_qa_index(&[qa_conv("a", "Why?", "Because.")], &provider, 0.2).unwrap_err();
        assert!(matches!(err, QaError::ZeroVector { .. }));
    }

    #[test]
    fn provider_failure_names_text() {
        let provider = FixedEmbedding::new(2);
        let err = build_qa_index(&[qa_conv("a", "Why?", "Because.")], &provider, 0.2).unwrap_err();
        assert!(err.to_string().contains("Why?"));
    }

    #[test]
    fn threshold_declines_far_questions() {
        let provider = FixedEmbedding::new(2)
            .with("What do they do?", vec![1.0, 0.0])
            .with("Is it raining?", vec![0.0, 1.0]);
        let idx = build_qa_index(&[qa_conv("a", "What do they do?", "Help kids.")], &provider, 0.2).unwrap();
        assert_eq!(answer(&idx, "Is it raining?", &provider).unwrap(), None);
        let hit = answer(&idx, "What do they do?", &provider).unwrap().unwrap();
        assert!(hit.distance <= 1e-6);
        assert_eq!(hit.answer, "Help kids.");
    }

    #[test]
    fn mismatched_provider_is_rejected() {
        let provider = FixedEmbedding::new(2).with("Why?", vec![1.0, 0.0]);
        let idx = build_qa_index(&[qa_conv("a", "Why?", "Because.")], &provider, 0.2).unwrap();
        let other = FixedEmbedding::new(3).with("Why?", vec![1.0, 0.0, 0.0]);
        assert!(matches!(answer(&idx, "Why?", &other), Err(QaError::ProviderMismatch { .. })));
    }

    #[test]
    fn bad_thresholds() {
        let provider = FixedEmbedding::new(2);
        assert!(matches!(build_qa_index(&[], &provider, 0.0), Err(QaError::BadThreshold(_))));
        assert!(matches!(build_qa_index(&[], &provider, 2.0), Err(QaError::BadThreshold(_))));
        assert!(matches!(build_qa_index(&[], &provider, 0.5), Err(QaError::EmptyCorpus)));
    }

    #[test]
    fn answer_prefers_leading_non_strategy_sentences() {
        let conv = AnnotatedConversation {
            id: "a".into(),
            turns: vec![
                turn(0, Side::Persuader, &[("Hi.", acts::GREETING)]),
                turn(1, Side::Persuadee, &[("Got a link?", acts::TASK_RELATED_INQUIRY)]),
                turn(
                    2,
                    Side::Persuader,
                    &[("Sure, it's <URL>.", acts::OTHER), ("Bye now!", acts::CLOSING)],
                ),
            ],
        };
        let qa = extract_question_answers(&[conv], &QaBuildConfig::default().question_acts);
        assert_eq!(qa, vec![("Got a link?".to_string(), "Sure, it's <URL>.".to_string())]);
    }
}
