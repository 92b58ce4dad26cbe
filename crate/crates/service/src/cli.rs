//! Command-line interface.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use persuasion_core::acts::Side;
use persuasion_core::classifier::{evaluate_classifier, train_classifier, ClassifierConfig, NgramClassifier};
use persuasion_core::corpus::{instances_of, load_corpus, save_corpus, split_corpus, AnnotatedConversation, DatasetSplit};
use persuasion_core::embedding::HashEmbedding;
use persuasion_core::eval::{compare_groups, engagement_metrics, format_table, Metric};
use persuasion_core::orchestrator::OrchestratorError;
use persuasion_core::pusher::{
    build_vocab, da_accuracy, load_checkpoint, save_checkpoint, train_pusher, GenerationConfig, Manifest, NeuralLm,
    NeuralLmConfig, TrainerConfig,
};
use persuasion_core::qa::{build_qa_index, DEFAULT_CLUSTER_THRESHOLD};
use persuasion_core::synthetic::{synthetic_corpus, SyntheticConfig};

use crate::components::build_orchestrator;
use crate::config::ServiceConfig;
use crate::http::{serve, AppState};
use crate::records::RecordStore;

#[derive(Debug, Parser)]
#[command(name = "persuade", version, about = "Modular persuasive dialogue system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SideArg {
    Persuader,
    Persuadee,
    Both,
}

impl SideArg {
    fn side(self) -> Option<Side> {
        match self {
            SideArg::Persuader => Some(Side::Persuader),
            SideArg::Persuadee => Some(Side::Persuadee),
            SideArg::Both => None,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct SplitArgs {
    /// Annotated corpus, one JSON record per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Seed for the train/validation/test shuffle.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub validation_ratio: f64,
    #[arg(long, default_value_t = 0.1)]
    pub test_ratio: f64,
}

impl SplitArgs {
    fn load(&self) -> Result<DatasetSplit> {
        let loaded = load_corpus(&self.corpus)?;
        if loaded.unknown_label_warnings > 0 {
            log::warn!("{} sentences had unknown acts and were mapped to other", loaded.unknown_label_warnings);
        }
        let train = 1.0 - self.validation_ratio - self.test_ratio;
        Ok(split_corpus(&loaded.conversations, [train, self.validation_ratio, self.test_ratio], self.split_seed)?)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Writes a synthetic annotated corpus.
    Synthesize {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        conversations: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Trains a dialogue-act classifier and reports test-split metrics.
    TrainClassifier {
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, value_enum, default_value = "both")]
        side: SideArg,
        #[arg(long, default_value_t = 12)]
        epochs: usize,
        #[arg(long, default_value_t = 13)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Builds the factual question index from the training split.
    BuildQaIndex {
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value_t = 256)]
        dimension: usize,
        #[arg(long, default_value_t = DEFAULT_CLUSTER_THRESHOLD)]
        cluster_threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains the agenda pusher with the act-mismatch penalty.
    TrainPusher {
        #[command(flatten)]
        split: SplitArgs,
        /// Persuader-side classifier used by the penalty.
        #[arg(long)]
        classifier: PathBuf,
        /// Trainer settings as TOML; flags below override it.
        #[arg(long)]
        trainer_config: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Checkpoint directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean fraction of generated test turns classified as their planned act.
    EvalDaAccuracy {
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long, default_value_t = 10)]
        passes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Engagement statistics per group, with Welch tests when two groups are given.
    EvalEngagement {
        /// NAME=PATH, repeatable.
        #[arg(long = "group", required = true)]
        groups: Vec<String>,
        /// Also write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Runs the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Chats on stdin, one user message per line.
    Chat {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use built-in stub components.
        #[arg(long)]
        stub: bool,
    },
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn load_group(arg: &str) -> Result<(String, Vec<AnnotatedConversation>)> {
    let Some((name, path)) = arg.split_once('=') else { bail!("group {arg:?} is not NAME=PATH") };
    Ok((name.to_string(), load_corpus(path)?.conversations))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synthesize { out, conversations, seed } => {
            let corpus = synthetic_corpus(&SyntheticConfig { conversations, seed, ..Default::default() });
            save_corpus(&out, &corpus)?;
            println!("wrote {} conversations to {}", corpus.len(), out.display());
        }
        Command::TrainClassifier { split, side, epochs, seed, out } => {
            let split = split.load()?;
            let cfg = ClassifierConfig { side: side.side(), epochs, seed, ..Default::default() };
            let model = train_classifier(&split, &cfg)?;
            model.save(&out)?;
            let eval_on = if split.test.is_empty() { &split.train } else { &split.test };
            let metrics = evaluate_classifier(&model, eval_on)?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
        }
        Command::BuildQaIndex { split, dimension, cluster_threshold, out } => {
            let split = split.load()?;
            let index = build_qa_index(&split.train, &HashEmbedding::new(dimension), cluster_threshold)?;
            index.save(&out)?;
            println!("indexed {} question clusters into {}", index.len(), out.display());
        }
        Command::TrainPusher { split, classifier, trainer_config, alpha, learning_rate, epochs, seed, out } => {
            let split = split.load()?;
            let classifier = NgramClassifier::load(&classifier)?;
            let mut cfg = match trainer_config {
                Some(p) => toml::from_str(&std::fs::read_to_string(&p)?)?,
                None => TrainerConfig::default(),
            };
            cfg.alpha = alpha.unwrap_or(cfg.alpha);
            cfg.learning_rate = learning_rate.unwrap_or(cfg.learning_rate);
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let vocab = build_vocab(&instances_of(&split.train));
            let model = NeuralLm::new(vocab, NeuralLmConfig { seed: cfg.seed, ..Default::default() });
            let outcome = train_pusher(model, &split, &classifier, &cfg)?;
            for e in &outcome.epochs {
                println!("{}", serde_json::to_string(e)?);
            }
            let manifest = Manifest::new(Some(cfg), cfg.seed, Some(outcome.selected_epoch), outcome.epochs.clone());
            save_checkpoint(&out, &outcome.model, &manifest)?;
            println!("saved epoch {} to {}", outcome.selected_epoch, out.display());
        }
        Command::EvalDaAccuracy { split, checkpoint, classifier, passes, seed } => {
            let split = split.load()?;
            let classifier = NgramClassifier::load(&classifier)?;
            let (model, manifest) = load_checkpoint(&checkpoint)?;
            let decoding = manifest.trainer.map(|t| t.decoding).unwrap_or_default();
            let decoding = GenerationConfig { seed, ..decoding };
            let test = instances_of(&split.test);
            let acc = da_accuracy(&model, &test, &classifier, passes, &decoding)?;
            println!("{}", serde_json::json!({ "da_accuracy": acc, "passes": passes, "instances": test.len() }));
        }
        Command::EvalEngagement { groups, json } => {
            let groups = groups.iter().map(|g| load_group(g)).collect::<Result<Vec<_>>>()?;
            let reports = groups
                .iter()
                .map(|(n, c)| Ok((n.clone(), engagement_metrics(c)?)))
                .collect::<Result<Vec<_>>>()?;
            let columns: Vec<(&str, _)> = reports.iter().map(|(n, r)| (n.as_str(), r)).collect();
            print!("{}", format_table(&columns));
            let mut comparisons = Vec::new();
            if let [(_, a), (_, b)] = groups.as_slice() {
                for m in Metric::ALL {
                    let c = compare_groups(a, b, m)?;
                    println!("{:<22} t = {:>8.3}  df = {:>8.2}  p = {:.4}", c.metric, c.t_statistic, c.degrees_of_freedom, c.p_value);
                    comparisons.push(c);
                }
            }
            let report = serde_json::json!({
                "groups": reports.iter().map(|(n, r)| serde_json::json!({ "name": n, "report": r })).collect::<Vec<_>>(),
                "comparisons": comparisons,
            });
            match json {
                Some(p) => write_json(&p, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
        }
        Command::Serve { config } => {
            let cfg = ServiceConfig::load(config.as_deref())?;
            let orchestrator = build_orchestrator(&cfg)?;
            let state = AppState::new(
                orchestrator,
                RecordStore::new(&cfg.records_path),
                cfg.session_ttl(),
                cfg.generation_max_in_flight,
            );
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(cfg.listen).await?;
                log::info!("listening on {}", listener.local_addr()?);
                serve(state, listener).await
            })?;
        }
        Command::Chat { config, stub } => {
            let mut cfg = ServiceConfig::load(config.as_deref())?;
            cfg.stub |= stub;
            let orchestrator = build_orchestrator(&cfg)?;
            let store = RecordStore::new(&cfg.records_path);
            chat(&orchestrator, &store, std::io::stdin().lock(), std::io::stdout().lock())?;
        }
    }
    Ok(())
}

/// Drives one session from `input` lines until it ends, the input runs out or the turn limit
/// is reached, then persists the record.
pub fn chat(
    orchestrator: &persuasion_core::orchestrator::Orchestrator,
    store: &RecordStore,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<String> {
    let (mut session, first) = orchestrator.start_session()?;
    writeln!(output, "SYSTEM: {}", first.full_text)?;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(output, "USER: {line}")?;
        match orchestrator.handle_user_message(&mut session, &line) {
            Ok(turn) => writeln!(output, "SYSTEM: {}", turn.full_text)?,
            Err(OrchestratorError::TurnLimit(_) | OrchestratorError::SessionEnded) => break,
            Err(e) => return Err(e.into()),
        }
    }
    let record = orchestrator.end_session(&mut session);
    store.append(&record)?;
    writeln!(output, "saved {}", record.id)?;
    Ok(record.id)
}
