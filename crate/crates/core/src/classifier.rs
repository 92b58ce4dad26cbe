//! Dialogue-act classification.
//!
//! [`ActClassifier`] is the seam used by the dispatcher and by the agenda pusher's training
//! penalty. [`NgramClassifier`] is the trainable baseline: multinomial logistic regression over
//! word unigram, word bigram and character trigram features. A stronger pretrained model can be
//! dropped in behind the same trait.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acts::{DialogueActLabel, Side};
use crate::corpus::{AnnotatedConversation, DatasetSplit, Utterance};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("classifier has not been trained")]
    NotTrained,
    #[error("cannot classify an empty utterance")]
    EmptyUtterance,
    #[error("training data has {0} distinct labels, need at least 2")]
    TooFewLabels(usize),
    #[error("evaluation set has no sentences the classifier covers")]
    EmptyEvaluation,
    #[error("model archive {path}: {message}")]
    Archive { path: PathBuf, message: String },
}

pub trait ActClassifier: Send + Sync {
    fn label_inventory(&self) -> &[DialogueActLabel];

    /// Returns a label from [`label_inventory`](Self::label_inventory) and a confidence in `[0, 1]`.
    fn classify(
        &self,
        utterance: &str,
        context: Option<&[Utterance]>,
    ) -> Result<(DialogueActLabel, f64), ClassifierError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub min_feature_count: usize,
    pub seed: u64,
    /// Restrict training to one party's sentences; `None` trains on both.
    pub side: Option<Side>,
    /// Labels added to the inventory even when absent from training data.
    #[serde(default)]
    pub extra_labels: Vec<DialogueActLabel>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            epochs: 12,
            learning_rate: 0.5,
            l2: 1e-5,
            min_feature_count: 1,
            seed: 13,
            side: None,
            extra_labels: Vec::new(),
        }
    }
}

/// Sparse binary features of a sentence.
pub fn extract_features(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|w| !w.is_empty())
        .collect();
    let mut feats = BTreeSet::new();
    for w in &words {
        feats.insert(format!("w:{w}"));
    }
    let mut padded = vec!["<s>"];
    padded.extend(words.iter().copied());
    padded.push("</s>");
    for pair in padded.windows(2) {
        feats.insert(format!("b:{}_{}", pair[0], pair[1]));
    }
    let chars: Vec<char> = format!(" {} ", lower.split_whitespace().collect::<Vec<_>>().join(" "))
        .chars()
        .collect();
    for tri in chars.windows(3) {
        feats.insert(format!("c:{}", tri.iter().collect::<String>()));
    }
    feats.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramClassifier {
    format: String,
    version: u32,
    config: ClassifierConfig,
    labels: Vec<DialogueActLabel>,
    features: Vec<String>,
    /// Row-major `labels x features`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

const ARCHIVE_FORMAT: &str = "ngram-act-classifier";
const ARCHIVE_VERSION: u32 = 1;

impl NgramClassifier {
    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    fn rebuild_index(&mut self) {
        self.index = self.features.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
    }

    fn feature_ids(&self, text: &str) -> Vec<usize> {
        extract_features(text).iter().filter_map(|f| self.index.get(f).copied()).collect()
    }

    fn probabilities(&self, ids: &[usize]) -> Vec<f64> {
        let nf = self.features.len();
        let scores: Vec<f64> = (0..self.labels.len())
            .map(|l| self.bias[l] + ids.iter().map(|&f| self.weights[l * nf + f]).sum::<f64>())
            .collect();
        softmax(&scores)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).expect("classifier serializes");
        fs::write(path, json).map_err(|e| ClassifierError::Archive {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        let path = path.as_ref();
        let archive_err = |message: String| ClassifierError::Archive { path: path.to_path_buf(), message };
        let data = fs::read_to_string(path).map_err(|e| archive_err(e.to_string()))?;
        let mut model: NgramClassifier =
            serde_json::from_str(&data).map_err(|e| archive_err(e.to_string()))?;
        if model.format != ARCHIVE_FORMAT || model.version != ARCHIVE_VERSION {
            return Err(archive_err(format!(
                "unsupported archive {} v{}",
                model.format, model.version
            )));
        }
        if model.weights.len() != model.labels.len() * model.features.len()
            || model.bias.len() != model.labels.len()
        {
            return Err(archive_err("weight shape does not match inventory".into()));
        }
        model.rebuild_index();
        Ok(model)
    }
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl ActClassifier for NgramClassifier {
    fn label_inventory(&self) -> &[DialogueActLabel] {
        &self.labels
    }

    fn classify(
        &self,
        utterance: &str,
        _context: Option<&[Utterance]>,
    ) -> Result<(DialogueActLabel, f64), ClassifierError> {
        if self.labels.is_empty() {
            return Err(ClassifierError::NotTrained);
        }
        if utterance.trim().is_empty() {
            return Err(ClassifierError::EmptyUtterance);
        }
        let probs = self.probabilities(&self.feature_ids(utterance));
        // labels are sorted, so the first maximum is the lexicographically lowest
        let mut best = 0;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = i;
            }
        }
        Ok((self.labels[best].clone(), probs[best].clamp(0.0, 1.0)))
    }
}

fn labeled_sentences(
    conversations: &[AnnotatedConversation],
    side: Option<Side>,
) -> Vec<(String, DialogueActLabel)> {
    conversations
        .iter()
        .flat_map(|c| c.sentences())
        .filter(|(t, _)| side.is_none_or(|s| s == t.role))
        .map(|(_, s)| (s.text.clone(), s.act.clone()))
        .collect()
}

pub fn train_classifier(
    split: &DatasetSplit,
    config: &ClassifierConfig,
) -> Result<NgramClassifier, ClassifierError> {
    train_on_sentences(&labeled_sentences(&split.train, config.side), config)
}

/// Trains on already-extracted `(text, label)` pairs.
pub fn train_on_sentences(
    data: &[(String, DialogueActLabel)],
    config: &ClassifierConfig,
) -> Result<NgramClassifier, ClassifierError> {
    let seen: BTreeSet<DialogueActLabel> = data.iter().map(|(_, l)| l.clone()).collect();
    if seen.len() < 2 {
        return Err(ClassifierError::TooFewLabels(seen.len()));
    }
    let labels: Vec<DialogueActLabel> =
        seen.into_iter().chain(config.extra_labels.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect();

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let featurized: Vec<Vec<String>> = data.iter().map(|(t, _)| extract_features(t)).collect();
    for feats in &featurized {
        for f in feats {
            *counts.entry(f.clone()).or_default() += 1;
        }
    }
    let features: Vec<String> = counts
        .into_iter()
        .filter(|(_, c)| *c >= config.min_feature_count.max(1))
        .map(|(f, _)| f)
        .collect();

    let mut model = NgramClassifier {
        format: ARCHIVE_FORMAT.into(),
        version: ARCHIVE_VERSION,
        config: config.clone(),
        weights: vec![0.0; labels.len() * features.len()],
        bias: vec![0.0; labels.len()],
        labels,
        features,
        index: HashMap::new(),
    };
    model.rebuild_index();

    let label_index: HashMap<&DialogueActLabel, usize> =
        model.labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let examples: Vec<(Vec<usize>, usize)> = featurized
        .iter()
        .zip(data)
        .map(|(feats, (_, label))| {
            let ids = feats.iter().filter_map(|f| model.index.get(f).copied()).collect();
            (ids, label_index[label])
        })
        .collect();

    let nf = model.features.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let lr = config.learning_rate / (1.0 + epoch as f64);
        for &i in &order {
            let (ids, gold) = &examples[i];
            let probs = model.probabilities(ids);
            for (l, p) in probs.iter().enumerate() {
                let grad = p - if l == *gold { 1.0 } else { 0.0 };
                model.bias[l] -= lr * grad;
                for &f in ids {
                    let w = &mut model.weights[l * nf + f];
                    *w -= lr * (grad + config.l2 * *w);
                }
            }
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub macro_f1: f64,
    pub accuracy: f64,
    pub per_label_f1: BTreeMap<String, f64>,
    pub support: BTreeMap<String, usize>,
}

/// Macro F1 over every label that occurs as gold or prediction.
///
/// Only sentences spoken by a side present in the classifier's inventory are scored.
pub fn evaluate_classifier(
    classifier: &dyn ActClassifier,
    conversations: &[AnnotatedConversation],
) -> Result<ClassifierMetrics, ClassifierError> {
    let sides: BTreeSet<Side> = classifier.label_inventory().iter().map(|l| l.side).collect();
    let mut pairs = Vec::new();
    for (turn, sentence) in conversations.iter().flat_map(|c| c.sentences()) {
        if !sides.contains(&turn.role) {
            continue;
        }
        let (pred, _) = classifier.classify(&sentence.text, None)?;
        pairs.push((sentence.act.to_string(), pred.to_string()));
    }
    metrics_from_pairs(&pairs)
}

/// Metrics from `(gold, predicted)` label-name pairs.
pub fn metrics_from_pairs(pairs: &[(String, String)]) -> Result<ClassifierMetrics, ClassifierError> {
    if pairs.is_empty() {
        return Err(ClassifierError::EmptyEvaluation);
    }
    let mut tp: BTreeMap<&str, usize> = BTreeMap::new();
    let mut predicted: BTreeMap<&str, usize> = BTreeMap::new();
    let mut support: BTreeMap<String, usize> = BTreeMap::new();
    let mut labels = BTreeSet::new();
    for (gold, pred) in pairs {
        labels.insert(gold.as_str());
        labels.insert(pred.as_str());
        *support.entry(gold.clone()).or_default() += 1;
        *predicted.entry(pred.as_str()).or_default() += 1;
        if gold == pred {
            *tp.entry(gold.as_str()).or_default() += 1;
        }
    }
    let mut per_label_f1 = BTreeMap::new();
    for label in &labels {
        let tp = tp.get(label).copied().unwrap_or(0) as f64;
        let pred = predicted.get(label).copied().unwrap_or(0) as f64;
        let gold = support.get(*label).copied().unwrap_or(0) as f64;
        let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (pred + gold) };
        per_label_f1.insert(label.to_string(), f1);
    }
    let macro_f1 = per_label_f1.values().sum::<f64>() / per_label_f1.len() as f64;
    let correct: usize = tp.values().sum();
    Ok(ClassifierMetrics {
        macro_f1,
        accuracy: correct as f64 / pairs.len() as f64,
        per_label_f1,
        support,
    })
}
