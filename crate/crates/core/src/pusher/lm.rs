//! The conditional language model seam.

use serde::{Deserialize, Serialize};

use super::input::instance_input;
use super::vocab::{TokenId, Vocab};
use crate::acts::DialogueActLabel;
use crate::corpus::TrainingInstance;

/// A model of `P(target | input)` factored token by token.
pub trait ConditionalLm: Send + Sync {
    fn vocab(&self) -> &Vocab;

    /// Natural-log probabilities over the whole vocabulary for the token that follows
    /// `prefix`, given the encoded `input`. Entries may be `-inf`.
    fn next_token_log_probs(&self, input: &[TokenId], prefix: &[TokenId]) -> Vec<f64>;
}

/// A model that can be optimized with plain SGD steps.
pub trait TrainableLm: ConditionalLm + Clone {
    /// Takes one step on `weight` times the mean token NLL of `batch` and returns the
    /// unweighted mean NLL measured before the step.
    fn sgd_step(&mut self, batch: &[&EncodedInstance], weight: f64, learning_rate: f64) -> f64;
}

/// A training instance tokenized for one vocabulary. `target` ends with `<eos>`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInstance {
    pub input_text: String,
    pub input: Vec<TokenId>,
    pub target: Vec<TokenId>,
    pub planned_act: DialogueActLabel,
}

impl EncodedInstance {
    /// `None` when the target has no tokens.
    pub fn encode(vocab: &Vocab, instance: &TrainingInstance) -> Option<Self> {
        let input_text = instance_input(instance);
        let mut target = vocab.encode(&instance.target);
        if target.is_empty() {
            return None;
        }
        target.push(vocab.eos());
        Some(Self {
            input: vocab.encode(&input_text),
            input_text,
            target,
            planned_act: instance.planned_act.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub beam_width: usize,
    pub ngram_block: usize,
    pub max_new_tokens: usize,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { beam_width: 4, ngram_block: 3, max_new_tokens: 48, seed: 0 }
    }
}

impl GenerationConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Mixes several values into a well-spread 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut x: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        x ^= p;
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x ^= x >> 31;
    }
    x
}

/// A vocabulary covering the rendered inputs and targets of `instances`, plus every control
/// code and role prefix so unseen acts still encode to known tokens.
pub fn build_vocab(instances: &[TrainingInstance]) -> Vocab {
    let mut vocab = Vocab::build(["PERSUADER: PERSUADEE:"]);
    for name in crate::acts::PERSUADER_STRATEGIES.iter().chain([&crate::acts::NONE, &crate::acts::OTHER]) {
        vocab.add(&format!("[PREV={name}]"));
        vocab.add(&format!("[ACT={name}]"));
    }
    for inst in instances {
        for text in [instance_input(inst), inst.target.clone()] {
            for tok in super::vocab::tokenize(&text) {
                vocab.add(tok);
            }
        }
    }
    vocab
}
