//! Builds an orchestrator from a service config.

use std::sync::Arc;

use anyhow::{Context, Result};
use persuasion_core::agenda::Agenda;
use persuasion_core::classifier::NgramClassifier;
use persuasion_core::dispatcher::Dispatcher;
use persuasion_core::embedding::HashEmbedding;
use persuasion_core::orchestrator::{Components, FactualResponder, Orchestrator, OrchestratorConfig};
use persuasion_core::pusher::load_checkpoint;
use persuasion_core::qa::QaIndex;
use persuasion_core::social::{CannedSocialBackend, SocialBackend, SocialResponder};
use persuasion_core::stub;

use crate::backend::HttpSocialBackend;
use crate::config::ServiceConfig;

fn social(config: &ServiceConfig) -> SocialResponder {
    let backend: Arc<dyn SocialBackend> = match &config.social_endpoint {
        Some(url) => Arc::new(HttpSocialBackend::new(url, config.social_timeout(), config.social_max_in_flight)),
        None => Arc::new(CannedSocialBackend::default()),
    };
    SocialResponder::new(backend, config.social_timeout(), config.social_max_turns)
}

pub fn build_components(config: &ServiceConfig) -> Result<Components> {
    let agenda = if config.agenda.is_empty() { Agenda::default() } else { Agenda::from_names(&config.agenda)? };
    let dispatcher = Dispatcher::new(config.dispatcher.clone())?;
    if config.stub {
        let mut parts = stub::stub_components(CannedSocialBackend::default());
        parts.agenda = agenda;
        parts.dispatcher = dispatcher;
        parts.social = Some(social(config));
        return Ok(parts);
    }
    let classifier_path = config.user_classifier.as_ref().context("user_classifier is not set")?;
    let classifier = NgramClassifier::load(classifier_path)?;
    let checkpoint = config.pusher_checkpoint.as_ref().context("pusher_checkpoint is not set")?;
    let (model, _) = load_checkpoint(checkpoint)?;
    let factual = match &config.qa_index {
        Some(p) => Some(FactualResponder {
            index: Arc::new(QaIndex::load(p)?),
            provider: Arc::new(HashEmbedding::new(config.embedding_dimension)),
        }),
        None => None,
    };
    Ok(Components {
        classifier: Arc::new(classifier),
        dispatcher,
        factual,
        social: Some(social(config)),
        model: Arc::new(model),
        agenda,
    })
}

pub fn build_orchestrator(config: &ServiceConfig) -> Result<Orchestrator> {
    config.validate()?;
    let orchestrator = Orchestrator::new(
        build_components(config)?,
        OrchestratorConfig {
            min_user_turns: config.min_user_turns,
            max_user_turns: config.max_user_turns,
            generation: config.generation,
            seed: config.seed,
        },
    )?;
    orchestrator.health()?;
    Ok(orchestrator)
}
