//! Conditional NLL, the classifier-penalized objective, training and DA accuracy.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::decode::{generate_tokens, validate, GenerationError};
use super::lm::{derive_seed, ConditionalLm, EncodedInstance, GenerationConfig, TrainableLm};
use crate::acts::DialogueActLabel;
use crate::classifier::ActClassifier;
use crate::corpus::{instances_of, segment_sentences, DatasetSplit, TrainingInstance};

#[derive(Debug, Error)]
pub enum PusherError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("target of instance {0} is empty after tokenization")]
    EmptyTarget(usize),
    #[error("training split is empty")]
    EmptyTrain,
    #[error("evaluation set is empty")]
    EmptyTest,
    #[error("classifier inventory lacks planned act {0}")]
    MissingAct(String),
    #[error("invalid trainer config: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Generation(#[from] GenerationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Decode and score one batch item every this many optimizer steps.
    pub penalty_sample_interval: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub decoding: GenerationConfig,
    /// Passes used for validation DA accuracy after each epoch.
    pub validation_passes: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            alpha: 5.0,
            learning_rate: 0.1,
            epochs: 10,
            penalty_sample_interval: 8,
            seed: 0,
            batch_size: 8,
            decoding: GenerationConfig::default(),
            validation_passes: 1,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), PusherError> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(PusherError::BadConfig("alpha must be a nonnegative number"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(PusherError::BadConfig("learning_rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(PusherError::BadConfig("epochs must be positive"));
        }
        if self.penalty_sample_interval == 0 {
            return Err(PusherError::BadConfig("penalty_sample_interval must be positive"));
        }
        if self.batch_size == 0 {
            return Err(PusherError::BadConfig("batch_size must be positive"));
        }
        if self.validation_passes == 0 {
            return Err(PusherError::BadConfig("validation_passes must be positive"));
        }
        validate(&self.decoding)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub step: usize,
    pub lc: f64,
    pub penalty_hits: usize,
    pub sampled: usize,
    pub lp: f64,
    pub da_accuracy_sample: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub mean_lc: f64,
    pub penalty_hits: usize,
    pub sampled: usize,
    pub validation_da_accuracy: Option<f64>,
    pub validation_lc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    /// The checkpoint chosen by validation DA accuracy, ties broken by lower validation NLL.
    pub model: M,
    pub final_model: M,
    pub selected_epoch: usize,
    pub reports: Vec<LossReport>,
    pub epochs: Vec<EpochSummary>,
}

/// The act of a whole persuader turn: the first strategy sentence's act, else the first
/// sentence's act. `None` when nothing is classifiable.
pub fn turn_act(text: &str, classifier: &dyn ActClassifier) -> Option<DialogueActLabel> {
    let mut first = None;
    for sentence in segment_sentences(text) {
        let Ok((label, _)) = classifier.classify(sentence, None) else { continue };
        if label.is_strategy() {
            return Some(label);
        }
        first.get_or_insert(label);
    }
    first
}

fn matches_plan(generated: &str, planned_act: &DialogueActLabel, classifier: &dyn ActClassifier) -> bool {
    turn_act(generated, classifier).as_ref() == Some(planned_act)
}

fn report(step: usize, lc: f64, hit: bool, alpha: f64) -> LossReport {
    LossReport {
        step,
        lc,
        penalty_hits: usize::from(hit),
        sampled: 1,
        lp: if hit { lc + alpha } else { lc },
        da_accuracy_sample: if hit { 0.0 } else { 1.0 },
    }
}

/// `lp = lc + alpha` when the classifier's act for `generated` differs from `planned_act`,
/// else `lp = lc`. Unclassifiable text counts as a mismatch.
pub fn penalized_loss(
    lc: f64,
    generated: &str,
    planned_act: &DialogueActLabel,
    classifier: &dyn ActClassifier,
    alpha: f64,
) -> LossReport {
    report(0, lc, !matches_plan(generated, planned_act, classifier), alpha)
}

fn encode_all(vocab: &super::Vocab, batch: &[TrainingInstance]) -> Result<Vec<EncodedInstance>, PusherError> {
    batch
        .iter()
        .enumerate()
        .map(|(i, inst)| EncodedInstance::encode(vocab, inst).ok_or(PusherError::EmptyTarget(i)))
        .collect()
}

fn encoded_nll(model: &dyn ConditionalLm, batch: &[EncodedInstance]) -> f64 {
    let mut total = 0.0;
    let mut tokens = 0usize;
    for inst in batch {
        for t in 0..inst.target.len() {
            let lp = model.next_token_log_probs(&inst.input, &inst.target[..t]);
            total -= lp[inst.target[t] as usize];
        }
        tokens += inst.target.len();
    }
    total / tokens as f64
}

/// Mean per-token negative log-likelihood of the targets (including `<eos>`) given their inputs.
pub fn conditional_nll(model: &dyn ConditionalLm, batch: &[TrainingInstance]) -> Result<f64, PusherError> {
    if batch.is_empty() {
        return Err(PusherError::EmptyBatch);
    }
    Ok(encoded_nll(model, &encode_all(model.vocab(), batch)?))
}

fn check_inventory(instances: &[TrainingInstance], classifier: &dyn ActClassifier) -> Result<(), PusherError> {
    let inventory = classifier.label_inventory();
    match instances.iter().find(|i| !inventory.contains(&i.planned_act)) {
        Some(i) => Err(PusherError::MissingAct(i.planned_act.name.clone())),
        None => Ok(()),
    }
}

struct Penalty<'a> {
    classifier: &'a dyn ActClassifier,
    alpha: f64,
}

/// The shared optimization loop. Without a penalty every step has weight 1.
fn run_epoch<M: TrainableLm>(
    model: &mut M,
    data: &[EncodedInstance],
    config: &TrainerConfig,
    epoch: usize,
    step: &mut usize,
    penalty: Option<&Penalty<'_>>,
    reports: &mut Vec<LossReport>,
) -> f64 {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(&[config.seed, epoch as u64])));
    let mut lc_sum = 0.0;
    let mut batches = 0usize;
    for chunk in order.chunks(config.batch_size) {
        let batch: Vec<&EncodedInstance> = chunk.iter().map(|&i| &data[i]).collect();
        let sampled = penalty.filter(|_| step.is_multiple_of(config.penalty_sample_interval)).map(|p| {
            let mut pick = ChaCha8Rng::seed_from_u64(derive_seed(&[config.seed, *step as u64, 1]));
            let item = batch[pick.gen_range(0..batch.len())];
            let cfg = config.decoding.with_seed(derive_seed(&[config.decoding.seed, *step as u64]));
            let m: &dyn ConditionalLm = model;
            let text = generate_tokens(m, &item.input, &cfg).map(|ids| m.vocab().decode(&ids)).unwrap_or_default();
            (!matches_plan(&text, &item.planned_act, p.classifier), p.alpha)
        });
        let weight = match sampled {
            Some((true, alpha)) => 1.0 + alpha,
            _ => 1.0,
        };
        let lc = model.sgd_step(&batch, weight, config.learning_rate);
        if let Some((hit, alpha)) = sampled {
            reports.push(report(*step, lc, hit, alpha));
        }
        lc_sum += lc;
        batches += 1;
        *step += 1;
    }
    lc_sum / batches.max(1) as f64
}

/// Plain conditional-NLL training with the same data order and steps as [`train_pusher`].
pub fn train_nll<M: TrainableLm>(mut model: M, split: &DatasetSplit, config: &TrainerConfig) -> Result<M, PusherError> {
    config.validate()?;
    let train = instances_of(&split.train);
    if train.is_empty() {
        return Err(PusherError::EmptyTrain);
    }
    let data = encode_all(model.vocab(), &train)?;
    let mut step = 0;
    for epoch in 0..config.epochs {
        run_epoch(&mut model, &data, config, epoch, &mut step, None, &mut Vec::new());
    }
    Ok(model)
}

/// Fine-tunes `model` on the training conversations under the penalized objective.
///
/// Every `penalty_sample_interval` steps one batch item is decoded with the current
/// parameters. When its act differs from the planned act, that step's NLL is weighted by
/// `1 + alpha`, and the logged report carries `lp = lc + alpha`.
pub fn train_pusher<M: TrainableLm>(
    mut model: M,
    split: &DatasetSplit,
    classifier: &dyn ActClassifier,
    config: &TrainerConfig,
) -> Result<TrainOutcome<M>, PusherError> {
    config.validate()?;
    let train = instances_of(&split.train);
    if train.is_empty() {
        return Err(PusherError::EmptyTrain);
    }
    let validation = instances_of(&split.validation);
    check_inventory(&train, classifier)?;
    check_inventory(&validation, classifier)?;
    let data = encode_all(model.vocab(), &train)?;
    let val_data = encode_all(model.vocab(), &validation)?;

    let penalty = Penalty { classifier, alpha: config.alpha };
    let mut reports = Vec::new();
    let mut epochs = Vec::new();
    let mut best: Option<(f64, f64, usize, M)> = None;
    let mut step = 0;
    for epoch in 0..config.epochs {
        let first_report = reports.len();
        let mean_lc = run_epoch(&mut model, &data, config, epoch, &mut step, Some(&penalty), &mut reports);
        let fresh = &reports[first_report..];
        let mut summary = EpochSummary {
            epoch,
            mean_lc,
            penalty_hits: fresh.iter().map(|r| r.penalty_hits).sum(),
            sampled: fresh.iter().map(|r| r.sampled).sum(),
            validation_da_accuracy: None,
            validation_lc: None,
        };
        if !validation.is_empty() {
            let acc = da_accuracy(&model, &validation, classifier, config.validation_passes, &config.decoding)?;
            let lc = encoded_nll(&model, &val_data);
            summary.validation_da_accuracy = Some(acc);
            summary.validation_lc = Some(lc);
            let better = match &best {
                None => true,
                Some((best_acc, best_lc, _, _)) => acc > *best_acc || (acc == *best_acc && lc < *best_lc),
            };
            if better {
                best = Some((acc, lc, epoch, model.clone()));
            }
        }
        log::info!(
            "epoch {epoch}: lc {mean_lc:.4}, penalty hits {}/{}, val acc {:?}",
            summary.penalty_hits,
            summary.sampled,
            summary.validation_da_accuracy
        );
        epochs.push(summary);
    }
    let (selected_epoch, selected) = match best {
        Some((_, _, epoch, m)) => (epoch, m),
        None => (config.epochs - 1, model.clone()),
    };
    Ok(TrainOutcome { model: selected, final_model: model, selected_epoch, reports, epochs })
}

/// Mean over `passes` of the fraction of instances whose generated turn is classified as its
/// planned act. Pass `p` decodes instance `i` with a seed derived from `(config.seed, p, i)`.
pub fn da_accuracy(
    model: &dyn ConditionalLm,
    test: &[TrainingInstance],
    classifier: &dyn ActClassifier,
    passes: usize,
    config: &GenerationConfig,
) -> Result<f64, PusherError> {
    if test.is_empty() {
        return Err(PusherError::EmptyTest);
    }
    if passes == 0 {
        return Err(PusherError::BadConfig("passes must be positive"));
    }
    validate(config)?;
    let vocab = model.vocab();
    let encoded: Vec<Vec<u32>> = test.iter().map(|t| vocab.encode(&super::instance_input(t))).collect();
    let mut total = 0.0;
    for pass in 0..passes {
        let correct = test
            .iter()
            .zip(&encoded)
            .enumerate()
            .filter(|(i, (inst, input))| {
                let cfg = config.with_seed(derive_seed(&[config.seed, pass as u64, *i as u64]));
                generate_tokens(model, input, &cfg)
                    .map(|ids| matches_plan(&vocab.decode(&ids), &inst.planned_act, classifier))
                    .unwrap_or(false)
            })
            .count();
        total += correct as f64 / test.len() as f64;
    }
    Ok(total / passes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pusher::vocab::{TokenId, Vocab};

    struct Uniform(Vocab);

    impl ConditionalLm for Uniform {
        fn vocab(&self) -> &Vocab {
            &self.0
        }
        fn next_token_log_probs(&self, _: &[TokenId], _: &[TokenId]) -> Vec<f64> {
            vec![-(self.0.len() as f64).ln(); self.0.len()]
        }
    }

    fn instance(target: &str) -> TrainingInstance {
        TrainingInstance {
            history: vec![],
            previous_act: DialogueActLabel::none(),
            planned_act: DialogueActLabel::persuader("greeting"),
            target: target.into(),
        }
    }

    #[test]
    fn uniform_model_scores_log_v() {
        let vocab = Vocab::build(["hello there , how are you ?"]);
        let v = vocab.len() as f64;
        let nll = conditional_nll(&Uniform(vocab), &[instance("hello there"), instance("how are you?")]).unwrap();
        assert!((nll - v.ln()).abs() < 1e-6);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let m = Uniform(Vocab::build(["a"]));
        assert!(matches!(conditional_nll(&m, &[]), Err(PusherError::EmptyBatch)));
        assert!(matches!(conditional_nll(&m, &[instance("  ")]), Err(PusherError::EmptyTarget(0))));
    }

    #[test]
    fn config_validation() {
        let ok = TrainerConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainerConfig { alpha: -1.0, ..ok }.validate().is_err());
        assert!(TrainerConfig { penalty_sample_interval: 0, ..ok }.validate().is_err());
        assert!(TrainerConfig { learning_rate: 0.0, ..ok }.validate().is_err());
    }
}
