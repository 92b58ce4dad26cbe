//! Strategy-conditioned generation and its training objective.

pub mod checkpoint;
pub mod decode;
pub mod input;
pub mod lm;
pub mod neural;
pub mod template;
pub mod train;
pub mod vocab;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, Manifest};
pub use decode::{generate_strategy_utterance, generate_tokens, repeats_ngram, GenerationError};
pub use input::{build_model_input, control_line, instance_input, INPUT_FORMAT_VERSION};
pub use lm::{build_vocab, derive_seed, ConditionalLm, EncodedInstance, GenerationConfig, TrainableLm};
pub use neural::{NeuralLm, NeuralLmConfig};
pub use template::TemplateLm;
pub use train::{
    conditional_nll, da_accuracy, penalized_loss, train_nll, train_pusher, turn_act, EpochSummary, LossReport,
    PusherError, TrainOutcome, TrainerConfig,
};
pub use vocab::{tokenize, TokenId, Vocab};
