//! A small trainable conditional model for desk-scale experiments.
//!
//! Encoder: the mean of the history token embeddings, concatenated with separate embedding
//! slots for the final `control_slots` input tokens (the control codes).
//! Decoder: a one-hidden-layer tanh network over the encoder state and the embeddings of the
//! last `window` generated tokens, followed by a softmax over the vocabulary. Gradients are
//! written out by hand; every loop runs in a fixed order, so training is bitwise reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lm::{ConditionalLm, EncodedInstance, TrainableLm};
use super::vocab::{TokenId, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuralLmConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub window: usize,
    pub control_slots: usize,
    pub seed: u64,
}

impl Default for NeuralLmConfig {
    fn default() -> Self {
        Self { embed_dim: 32, hidden_dim: 96, window: 3, control_slots: 2, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralLm {
    config: NeuralLmConfig,
    vocab: Vocab,
    emb: Vec<f32>,
    w1: Vec<f32>,
    b1: Vec<f32>,
    w2: Vec<f32>,
    b2: Vec<f32>,
}

struct Grads {
    emb: Vec<f32>,
    w1: Vec<f32>,
    b1: Vec<f32>,
    w2: Vec<f32>,
    b2: Vec<f32>,
}

impl NeuralLm {
    pub fn new(vocab: Vocab, config: NeuralLmConfig) -> Self {
        let (v, d, h) = (vocab.len(), config.embed_dim, config.hidden_dim);
        let input = d * (1 + config.control_slots + config.window);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut init = |n: usize, scale: f32| -> Vec<f32> {
            (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
        };
        let emb = init(v * d, 0.1);
        let w1 = init(h * input, (1.0 / input as f32).sqrt());
        let w2 = init(v * h, (1.0 / h as f32).sqrt());
        Self { config, vocab, emb, w1, b1: vec![0.0; h], w2, b2: vec![0.0; v] }
    }

    pub fn config(&self) -> &NeuralLmConfig {
        &self.config
    }

    pub fn parameter_count(&self) -> usize {
        self.emb.len() + self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    fn input_dim(&self) -> usize {
        self.config.embed_dim * (1 + self.config.control_slots + self.config.window)
    }

    fn embedding(&self, id: TokenId) -> &[f32] {
        let d = self.config.embed_dim;
        &self.emb[id as usize * d..(id as usize + 1) * d]
    }

    /// Splits an input into pooled history tokens and control slot ids (left-padded with `<bos>`).
    fn split_input<'a>(&self, input: &'a [TokenId]) -> (&'a [TokenId], Vec<TokenId>) {
        let c = self.config.control_slots;
        let used = c.min(input.len());
        let (history, controls) = input.split_at(input.len() - used);
        let mut slots = vec![self.vocab.bos(); c - used];
        slots.extend_from_slice(controls);
        (history, slots)
    }

    /// Encoder state: pooled history followed by the control slot embeddings.
    fn encode(&self, input: &[TokenId]) -> Vec<f32> {
        let d = self.config.embed_dim;
        let (history, slots) = self.split_input(input);
        let mut enc = vec![0.0f32; d];
        for &id in history {
            for (e, x) in enc.iter_mut().zip(self.embedding(id)) {
                *e += x;
            }
        }
        if !history.is_empty() {
            let inv = 1.0 / history.len() as f32;
            enc.iter_mut().for_each(|e| *e *= inv);
        }
        for id in slots {
            enc.extend_from_slice(self.embedding(id));
        }
        enc
    }

    /// Ids of the `window` tokens before position `t`, most recent first, padded with `<bos>`.
    fn context_ids(&self, prefix: &[TokenId], t: usize) -> Vec<TokenId> {
        let bos = self.vocab.bos();
        (1..=self.config.window).map(|j| if t >= j { prefix[t - j] } else { bos }).collect()
    }

    fn features(&self, enc: &[f32], ctx: &[TokenId]) -> Vec<f32> {
        let mut x = Vec::with_capacity(self.input_dim());
        x.extend_from_slice(enc);
        for &id in ctx {
            x.extend_from_slice(self.embedding(id));
        }
        x
    }

    /// Returns `(hidden, log_probs)` for one decoder step.
    fn forward(&self, x: &[f32]) -> (Vec<f32>, Vec<f64>) {
        let (h_dim, in_dim) = (self.config.hidden_dim, self.input_dim());
        let hidden: Vec<f32> = (0..h_dim)
            .map(|j| {
                let row = &self.w1[j * in_dim..(j + 1) * in_dim];
                (self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f32>()).tanh()
            })
            .collect();
        let logits: Vec<f64> = (0..self.vocab.len())
            .map(|k| {
                let row = &self.w2[k * h_dim..(k + 1) * h_dim];
                f64::from(self.b2[k] + row.iter().zip(&hidden).map(|(w, v)| w * v).sum::<f32>())
            })
            .collect();
        (hidden, log_softmax(&logits))
    }

    fn zero_grads(&self) -> Grads {
        Grads {
            emb: vec![0.0; self.emb.len()],
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        }
    }

    /// Accumulates `scale * d(NLL)/d(params)` for one instance and returns its summed NLL.
    fn backprop(&self, inst: &EncodedInstance, scale: f32, g: &mut Grads) -> f64 {
        let (d, h_dim, in_dim) = (self.config.embed_dim, self.config.hidden_dim, self.input_dim());
        let enc = self.encode(&inst.input);
        let enc_dim = enc.len();
        let mut d_enc = vec![0.0f32; enc_dim];
        let mut nll = 0.0;
        for (t, &gold) in inst.target.iter().enumerate() {
            let ctx = self.context_ids(&inst.target, t);
            let x = self.features(&enc, &ctx);
            let (hidden, log_probs) = self.forward(&x);
            nll -= log_probs[gold as usize];

            let mut d_hidden = vec![0.0f32; h_dim];
            for (k, lp) in log_probs.iter().enumerate() {
                let mut dl = lp.exp() as f32;
                if k == gold as usize {
                    dl -= 1.0;
                }
                dl *= scale;
                g.b2[k] += dl;
                let row = k * h_dim;
                for j in 0..h_dim {
                    g.w2[row + j] += dl * hidden[j];
                    d_hidden[j] += dl * self.w2[row + j];
                }
            }
            let mut dx = vec![0.0f32; in_dim];
            for j in 0..h_dim {
                let dpre = d_hidden[j] * (1.0 - hidden[j] * hidden[j]);
                g.b1[j] += dpre;
                let row = j * in_dim;
                for i in 0..in_dim {
                    g.w1[row + i] += dpre * x[i];
                    dx[i] += dpre * self.w1[row + i];
                }
            }
            for (de, v) in d_enc.iter_mut().zip(&dx[..enc_dim]) {
                *de += v;
            }
            for (slot, &id) in ctx.iter().enumerate() {
                let src = &dx[enc_dim + d * slot..enc_dim + d * (slot + 1)];
                let dst = &mut g.emb[id as usize * d..(id as usize + 1) * d];
                for (a, b) in dst.iter_mut().zip(src) {
                    *a += b;
                }
            }
        }
        let (history, slots) = self.split_input(&inst.input);
        if !history.is_empty() {
            let inv = 1.0 / history.len() as f32;
            for &id in history {
                let dst = &mut g.emb[id as usize * d..(id as usize + 1) * d];
                for (a, b) in dst.iter_mut().zip(&d_enc[..d]) {
                    *a += b * inv;
                }
            }
        }
        for (slot, id) in slots.into_iter().enumerate() {
            let src = &d_enc[d * (slot + 1)..d * (slot + 2)];
            let dst = &mut g.emb[id as usize * d..(id as usize + 1) * d];
            for (a, b) in dst.iter_mut().zip(src) {
                *a += b;
            }
        }
        nll
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|l| l - lse).collect()
}

fn apply(params: &mut [f32], grads: &[f32], lr: f32) {
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

impl ConditionalLm for NeuralLm {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_token_log_probs(&self, input: &[TokenId], prefix: &[TokenId]) -> Vec<f64> {
        let enc = self.encode(input);
        let ctx = self.context_ids(prefix, prefix.len());
        self.forward(&self.features(&enc, &ctx)).1
    }
}

impl TrainableLm for NeuralLm {
    fn sgd_step(&mut self, batch: &[&EncodedInstance], weight: f64, learning_rate: f64) -> f64 {
        let tokens: usize = batch.iter().map(|b| b.target.len()).sum();
        if tokens == 0 {
            return 0.0;
        }
        let scale = (weight / tokens as f64) as f32;
        let mut g = self.zero_grads();
        let nll: f64 = batch.iter().map(|inst| self.backprop(inst, scale, &mut g)).sum();
        let lr = learning_rate as f32;
        apply(&mut self.emb, &g.emb, lr);
        apply(&mut self.w1, &g.w1, lr);
        apply(&mut self.b1, &g.b1, lr);
        apply(&mut self.w2, &g.w2, lr);
        apply(&mut self.b2, &g.b2, lr);
        nll / tokens as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pusher::lm::EncodedInstance;

    fn toy() -> (NeuralLm, EncodedInstance) {
        let vocab = Vocab::build(["[ACT=greeting] hello there friend"]);
        let model = NeuralLm::new(vocab.clone(), NeuralLmConfig { embed_dim: 4, hidden_dim: 5, window: 2, control_slots: 1, seed: 3 });
        let mut target = vocab.encode("hello there friend");
        target.push(vocab.eos());
        let inst = EncodedInstance {
            input_text: "[ACT=greeting]".into(),
            input: vocab.encode("[ACT=greeting] friend"),
            target,
            planned_act: crate::acts::DialogueActLabel::persuader("greeting"),
        };
        (model, inst)
    }

    fn loss(model: &NeuralLm, inst: &EncodedInstance) -> f64 {
        let mut g = model.zero_grads();
        model.backprop(inst, 0.0, &mut g)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (model, inst) = toy();
        let mut g = model.zero_grads();
        model.backprop(&inst, 1.0, &mut g);
        let eps = 1e-3f32;
        let check = |analytic: f32, perturb: &dyn Fn(&mut NeuralLm, f32)| {
            let mut plus = model.clone();
            perturb(&mut plus, eps);
            let mut minus = model.clone();
            perturb(&mut minus, -eps);
            let numeric = (loss(&plus, &inst) - loss(&minus, &inst)) / (2.0 * f64::from(eps));
            assert!(
                (numeric - f64::from(analytic)).abs() < 2e-3 * (1.0 + numeric.abs()),
                "numeric {numeric} vs analytic {analytic}"
            );
        };
        for i in [0, 7, 19] {
            check(g.w1[i], &|m, e| m.w1[i] += e);
        }
        for i in [0, 11, 29] {
            check(g.w2[i], &|m, e| m.w2[i] += e);
        }
        check(g.b1[2], &|m, e| m.b1[2] += e);
        check(g.b2[4], &|m, e| m.b2[4] += e);
        // embedding rows of input-only, target-only and shared tokens
        for i in [4 * 4, 5 * 4 + 1, 7 * 4 + 2, 2 * 4 + 3] {
            check(g.emb[i], &|m, e| m.emb[i] += e);
        }
    }

    #[test]
    fn steps_reduce_loss_and_are_reproducible() {
        let (mut a, inst) = toy();
        let mut b = a.clone();
        let before = loss(&a, &inst);
        for _ in 0..20 {
            a.sgd_step(&[&inst], 1.0, 0.5);
            b.sgd_step(&[&inst], 1.0, 0.5);
        }
        assert!(loss(&a, &inst) < before);
        assert_eq!(a, b);
    }

    #[test]
    fn log_probs_normalize() {
        let (model, inst) = toy();
        let lp = model.next_token_log_probs(&inst.input, &[]);
        let total: f64 = lp.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}
