//! A deterministic stand-in model that reproduces one template per planned act.

use std::collections::HashMap;

use super::input::planned_act_of;
use super::lm::ConditionalLm;
use super::vocab::{tokenize, TokenId, Vocab};
use crate::acts::{self, PERSUADER_STRATEGIES};

/// Puts all probability mass on the template of the input's `[ACT=..]` code.
///
/// Unknown acts, or prefixes that leave the template, get a uniform distribution.
#[derive(Debug, Clone)]
pub struct TemplateLm {
    vocab: Vocab,
    templates: HashMap<String, Vec<TokenId>>,
}

impl Default for TemplateLm {
    /// Templates are the canned strategy examples.
    fn default() -> Self {
        Self::new(acts::STRATEGY_EXAMPLES.iter().map(|(a, t)| (a.to_string(), t.to_string())))
    }
}

impl TemplateLm {
    pub fn new(templates: impl IntoIterator<Item = (String, String)>) -> Self {
        let templates: Vec<(String, String)> = templates.into_iter().collect();
        let mut vocab = Vocab::build(templates.iter().map(|(_, t)| t.as_str()));
        for name in PERSUADER_STRATEGIES.iter().chain([&acts::NONE, &acts::OTHER]) {
            vocab.add(&format!("[ACT={name}]"));
            vocab.add(&format!("[PREV={name}]"));
        }
        let templates = templates
            .into_iter()
            .map(|(act, text)| {
                let ids = tokenize(&text).into_iter().map(|t| vocab.id(t).expect("template token")).collect();
                (act, ids)
            })
            .collect();
        Self { vocab, templates }
    }

    pub fn template(&self, act: &str) -> Option<String> {
        self.templates.get(act).map(|ids| self.vocab.decode(ids))
    }
}

impl ConditionalLm for TemplateLm {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_token_log_probs(&self, input: &[TokenId], prefix: &[TokenId]) -> Vec<f64> {
        let v = self.vocab.len();
        let toks: Vec<&str> = input.iter().map(|&i| self.vocab.token(i)).collect();
        let target = planned_act_of(&toks).and_then(|a| {
            let t = self.templates.get(&a)?;
            t.starts_with(prefix).then(|| t.get(prefix.len()).copied().unwrap_or(self.vocab.eos()))
        });
        match target {
            Some(tok) => {
                let mut lp = vec![f64::NEG_INFINITY; v];
                lp[tok as usize] = 0.0;
                lp
            }
            None => vec![-(v as f64).ln(); v],
        }
    }
}
