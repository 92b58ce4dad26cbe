//! Service configuration: one TOML document, every field overridable from the environment.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use persuasion_core::dispatcher::DispatcherConfig;
use persuasion_core::orchestrator::{DEFAULT_MAX_USER_TURNS, DEFAULT_MIN_USER_TURNS};
use persuasion_core::pusher::GenerationConfig;
use serde::{Deserialize, Serialize};

pub const ENV_PREFIX: &str = "PERSUADE_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    /// Use built-in stub components instead of trained artifacts.
    pub stub: bool,
    pub user_classifier: Option<PathBuf>,
    pub pusher_checkpoint: Option<PathBuf>,
    pub qa_index: Option<PathBuf>,
    pub embedding_dimension: usize,
    pub social_endpoint: Option<String>,
    pub social_timeout_ms: u64,
    pub social_max_turns: usize,
    pub social_max_in_flight: usize,
    pub dispatcher: DispatcherConfig,
    /// Agenda act names in order; empty means the default strategy order.
    pub agenda: Vec<String>,
    pub min_user_turns: usize,
    pub max_user_turns: usize,
    pub generation: GenerationConfig,
    pub generation_max_in_flight: usize,
    pub seed: u64,
    pub session_ttl_secs: u64,
    pub records_path: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".parse().expect("literal address"),
            stub: false,
            user_classifier: None,
            pusher_checkpoint: None,
            qa_index: None,
            embedding_dimension: 256,
            social_endpoint: None,
            social_timeout_ms: 10_000,
            social_max_turns: 8,
            social_max_in_flight: 4,
            dispatcher: DispatcherConfig::default(),
            agenda: Vec::new(),
            min_user_turns: DEFAULT_MIN_USER_TURNS,
            max_user_turns: DEFAULT_MAX_USER_TURNS,
            generation: GenerationConfig::default(),
            generation_max_in_flight: 4,
            seed: 0,
            session_ttl_secs: 30 * 60,
            records_path: PathBuf::from("records.jsonl"),
        }
    }
}

fn parse_env<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow::anyhow!("{ENV_PREFIX}{key}={value:?}: {e}"))
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` when given, then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => Self::default(),
        };
        cfg.apply_env(std::env::vars())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else { continue };
            let path = || Some(PathBuf::from(&value));
            match key {
                "LISTEN" => self.listen = parse_env(key, &value)?,
                "STUB" => self.stub = parse_env(key, &value)?,
                "USER_CLASSIFIER" => self.user_classifier = path(),
                "PUSHER_CHECKPOINT" => self.pusher_checkpoint = path(),
                "QA_INDEX" => self.qa_index = path(),
                "EMBEDDING_DIMENSION" => self.embedding_dimension = parse_env(key, &value)?,
                "SOCIAL_ENDPOINT" => self.social_endpoint = Some(value.clone()).filter(|v| !v.is_empty()),
                "SOCIAL_TIMEOUT_MS" => self.social_timeout_ms = parse_env(key, &value)?,
                "SOCIAL_MAX_TURNS" => self.social_max_turns = parse_env(key, &value)?,
                "SOCIAL_MAX_IN_FLIGHT" => self.social_max_in_flight = parse_env(key, &value)?,
                "AGENDA" => {
                    self.agenda = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
                }
                "MIN_USER_TURNS" => self.min_user_turns = parse_env(key, &value)?,
                "MAX_USER_TURNS" => self.max_user_turns = parse_env(key, &value)?,
                "GENERATION_MAX_IN_FLIGHT" => self.generation_max_in_flight = parse_env(key, &value)?,
                "SEED" => self.seed = parse_env(key, &value)?,
                "SESSION_TTL_SECS" => self.session_ttl_secs = parse_env(key, &value)?,
                "RECORDS_PATH" => self.records_path = PathBuf::from(&value),
                _ => log::warn!("ignoring unknown setting {name}"),
            }
        }
        Ok(())
    }

    /// Startup checks: turn limits and artifact presence.
    pub fn validate(&self) -> Result<()> {
        if self.min_user_turns > self.max_user_turns {
            bail!("min_user_turns {} exceeds max_user_turns {}", self.min_user_turns, self.max_user_turns);
        }
        if self.max_user_turns == 0 {
            bail!("max_user_turns must be positive");
        }
        if !self.stub {
            for (name, p) in [("user_classifier", &self.user_classifier), ("pusher_checkpoint", &self.pusher_checkpoint)] {
                match p {
                    None => bail!("{name} is required unless stub = true"),
                    Some(p) if !p.exists() => bail!("{name} {} does not exist", p.display()),
                    Some(_) => {}
                }
            }
            if let Some(p) = &self.qa_index {
                if !p.exists() {
                    bail!("qa_index {} does not exist", p.display());
                }
            }
        }
        Ok(())
    }

    pub fn social_timeout(&self) -> Duration {
        Duration::from_millis(self.social_timeout_ms)
    }

    pub fn session_ttl(&self) -> Duration {
        Duration::from_secs(self.session_ttl_secs)
    }
}
