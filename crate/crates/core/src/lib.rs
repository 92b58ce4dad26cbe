//! Building blocks of a persuasive dialogue system: annotated corpora, dialogue-act
//! classification, routing, factual and social responders, the strategy agenda and
//! conditional generator, turn orchestration and engagement metrics.

pub mod acts;
pub mod agenda;
pub mod classifier;
pub mod corpus;
pub mod dispatcher;
pub mod embedding;
pub mod eval;
pub mod orchestrator;
pub mod pusher;
pub mod qa;
pub mod social;
pub mod stub;
pub mod synthetic;
