//! Beam sampling with n-gram blocking.
//!
//! Each live hypothesis proposes `beam_width` distinct next tokens sampled without replacement
//! (Gumbel top-k over the model's log-probabilities). The `beam_width` proposals with the best
//! cumulative log-probability survive. A token is blocked when it would complete an n-gram of
//! length `ngram_block` that already occurs in the hypothesis. The winner is the finished
//! hypothesis with the best mean token log-probability.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::lm::{ConditionalLm, GenerationConfig};
use super::vocab::TokenId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("invalid generation config: {0}")]
    BadConfig(&'static str),
    #[error("decoding produced no text")]
    Empty,
}

#[derive(Debug, Clone)]
struct Hypothesis {
    tokens: Vec<TokenId>,
    log_prob: f64,
}

impl Hypothesis {
    fn normalized(&self, with_eos: bool) -> f64 {
        self.log_prob / (self.tokens.len() + usize::from(with_eos)).max(1) as f64
    }
}

/// True when appending `next` to `tokens` repeats an n-gram already present.
pub fn would_repeat(tokens: &[TokenId], next: TokenId, n: usize) -> bool {
    if n == 0 || tokens.len() + 1 < n {
        return false;
    }
    let tail = &tokens[tokens.len() + 1 - n..];
    tokens.windows(n).any(|w| w[..n - 1] == *tail && w[n - 1] == next)
}

/// True when some n-gram occurs twice in `tokens`.
pub fn repeats_ngram<T: PartialEq>(tokens: &[T], n: usize) -> bool {
    if n == 0 || tokens.len() < n {
        return false;
    }
    let grams: Vec<&[T]> = tokens.windows(n).collect();
    grams.iter().enumerate().any(|(i, g)| grams[i + 1..].contains(g))
}

pub fn validate(config: &GenerationConfig) -> Result<(), GenerationError> {
    if config.beam_width == 0 {
        return Err(GenerationError::BadConfig("beam_width must be positive"));
    }
    if config.ngram_block < 2 {
        return Err(GenerationError::BadConfig("ngram_block must be at least 2"));
    }
    if config.max_new_tokens == 0 {
        return Err(GenerationError::BadConfig("max_new_tokens must be positive"));
    }
    Ok(())
}

pub fn generate_tokens(
    model: &dyn ConditionalLm,
    input: &[TokenId],
    config: &GenerationConfig,
) -> Result<Vec<TokenId>, GenerationError> {
    validate(config)?;
    let vocab = model.vocab();
    let eos = vocab.eos();
    let allowed = vocab.generatable();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut live = vec![Hypothesis { tokens: Vec::new(), log_prob: 0.0 }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for _ in 0..config.max_new_tokens {
        let mut proposals: Vec<(Hypothesis, bool)> = Vec::new();
        for hyp in &live {
            let log_probs = model.next_token_log_probs(input, &hyp.tokens);
            let mut keyed: Vec<(f64, TokenId)> = log_probs
                .iter()
                .enumerate()
                .filter(|(id, lp)| {
                    allowed[*id]
                        && lp.is_finite()
                        && (*id as TokenId == eos || !would_repeat(&hyp.tokens, *id as TokenId, config.ngram_block))
                })
                .map(|(id, lp)| {
                    let u: f64 = rng.sample(Open01);
                    (lp - (-u.ln()).ln(), id as TokenId)
                })
                .collect();
            keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for &(_, tok) in keyed.iter().take(config.beam_width) {
                let mut next = hyp.clone();
                next.log_prob += log_probs[tok as usize];
                let done = tok == eos;
                if !done {
                    next.tokens.push(tok);
                }
                proposals.push((next, done));
            }
        }
        proposals.sort_by(|a, b| b.0.log_prob.total_cmp(&a.0.log_prob));
        live.clear();
        for (hyp, done) in proposals.into_iter().take(config.beam_width) {
            if done {
                finished.push(hyp);
            } else {
                live.push(hyp);
            }
        }
        if live.is_empty() || finished.len() >= config.beam_width {
            break;
        }
    }

    let best = |pool: &[Hypothesis], with_eos: bool| -> Option<Vec<TokenId>> {
        pool.iter()
            .filter(|h| !h.tokens.is_empty())
            .fold(None::<&Hypothesis>, |best, h| match best {
                Some(b) if b.normalized(with_eos) >= h.normalized(with_eos) => Some(b),
                _ => Some(h),
            })
            .map(|h| h.tokens.clone())
    };
    best(&finished, true).or_else(|| best(&live, false)).ok_or(GenerationError::Empty)
}

/// Generates the agenda part of a turn from a rendered model input.
pub fn generate_strategy_utterance(
    model: &dyn ConditionalLm,
    input: &str,
    config: &GenerationConfig,
) -> Result<String, GenerationError> {
    let vocab = model.vocab();
    let ids = generate_tokens(model, &vocab.encode(input), config)?;
    let text = vocab.decode(&ids);
    if text.trim().is_empty() {
        return Err(GenerationError::Empty);
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeat_detection() {
        assert!(would_repeat(&[1, 2, 3, 1, 2], 3, 3));
        assert!(!would_repeat(&[1, 2, 3, 1, 2], 4, 3));
        assert!(!would_repeat(&[1], 1, 3));
        assert!(would_repeat(&[5, 5], 5, 2));
        assert!(repeats_ngram(&[1, 2, 3, 1, 2, 3], 3));
        assert!(!repeats_ngram(&[1, 2, 3, 1, 2, 4], 3));
    }

    #[test]
    fn config_validation() {
        let ok = GenerationConfig::default();
        assert!(validate(&ok).is_ok());
        assert!(validate(&GenerationConfig { ngram_block: 1, ..ok }).is_err());
        assert!(validate(&GenerationConfig { beam_width: 0, ..ok }).is_err());
        assert!(validate(&GenerationConfig { max_new_tokens: 0, ..ok }).is_err());
    }
}
