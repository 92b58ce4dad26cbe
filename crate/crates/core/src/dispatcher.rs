//! Per-utterance routing to the factual answer and social response modules.

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acts::{self, DialogueActLabel};
use crate::corpus::RouteMeta;

#[derive(Debug, Error)]
pub enum DispatcherError {
    #[error("invalid question pattern {pattern:?}: {source}")]
    BadPattern {
        pattern: String,
        #[source]
        source: regex::Error,
    },
}

/// Patterns shipped by default: interrogatives ending in `?` and task keywords followed by `?`.
pub const DEFAULT_QUESTION_PATTERNS: [&str; 2] = [
    r"(?i)^\s*(who|what|where|when|how|why|which|do|does|did|is|are|can|could|would|will|should)\b.*\?\s*$",
    r"(?i)\b(donat\w*|charit\w*|save the children|link|website|founder)\b[^?]*\?",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DispatcherConfig {
    pub question_patterns: Vec<String>,
    /// Acts that always trigger the factual answer module.
    pub factual_acts: Vec<String>,
    /// Acts that count as engaging statements. `None` means every act that is not factual,
    /// not an acknowledgement and not the `none` sentinel.
    pub engaging_acts: Option<Vec<String>>,
}

impl Default for DispatcherConfig {
    fn default() -> Self {
        Self {
            question_patterns: DEFAULT_QUESTION_PATTERNS.iter().map(|p| p.to_string()).collect(),
            factual_acts: vec![acts::TASK_RELATED_INQUIRY.into(), acts::FACTUAL_QUESTION.into()],
            engaging_acts: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    ActRule,
    RegexRule,
    None,
}

impl Trigger {
    pub fn as_str(self) -> &'static str {
        match self {
            Trigger::ActRule => "act_rule",
            Trigger::RegexRule => "regex_rule",
            Trigger::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRoute {
    pub sentence: String,
    pub act: DialogueActLabel,
    pub factual: bool,
    pub social: bool,
    pub trigger: Trigger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteDecision {
    pub invoke_factual: bool,
    pub invoke_social: bool,
    pub trigger: Trigger,
    pub matched_act: DialogueActLabel,
    /// Some sentence carries an engaging act, so a social reply is acceptable even if the
    /// factual rule took precedence on it.
    pub social_fallback: bool,
    pub sentences: Vec<SentenceRoute>,
}

impl RouteDecision {
    /// The sentences that triggered the factual rule, joined, for index lookup.
    pub fn factual_query(&self) -> Option<String> {
        let parts: Vec<&str> =
            self.sentences.iter().filter(|s| s.factual).map(|s| s.sentence.as_str()).collect();
        (!parts.is_empty()).then(|| parts.join(" "))
    }

    pub fn to_meta(&self) -> RouteMeta {
        RouteMeta {
            invoke_factual: self.invoke_factual,
            invoke_social: self.invoke_social,
            trigger: self.trigger.as_str().into(),
            matched_act: self.matched_act.name.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dispatcher {
    config: DispatcherConfig,
    patterns: Vec<Regex>,
}

impl Default for Dispatcher {
    fn default() -> Self {
        Self::new(DispatcherConfig::default()).expect("default patterns compile")
    }
}

impl Dispatcher {
    pub fn new(config: DispatcherConfig) -> Result<Self, DispatcherError> {
        let patterns = config
            .question_patterns
            .iter()
            .map(|p| {
                Regex::new(p).map_err(|source| DispatcherError::BadPattern { pattern: p.clone(), source })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { config, patterns })
    }

    pub fn config(&self) -> &DispatcherConfig {
        &self.config
    }

    fn is_factual_act(&self, act: &DialogueActLabel) -> bool {
        self.config.factual_acts.contains(&act.name)
    }

    pub fn is_engaging(&self, act: &DialogueActLabel) -> bool {
        match &self.config.engaging_acts {
            Some(set) => set.contains(&act.name),
            None => !self.is_factual_act(act) && act.name != acts::ACKNOWLEDGEMENT && !act.is_none(),
        }
    }

    pub fn matches_question(&self, sentence: &str) -> bool {
        self.patterns.iter().any(|re| re.is_match(sentence))
    }

    fn route_sentence(&self, sentence: &str, act: &DialogueActLabel) -> SentenceRoute {
        let (factual, trigger) = if self.is_factual_act(act) {
            (true, Trigger::ActRule)
        } else if self.matches_question(sentence) {
            (true, Trigger::RegexRule)
        } else {
            (false, Trigger::None)
        };
        // factual takes precedence on a single sentence
        let social = !factual && self.is_engaging(act);
        SentenceRoute {
            sentence: sentence.to_string(),
            act: act.clone(),
            factual,
            social,
            trigger: if social { Trigger::ActRule } else { trigger },
        }
    }

    /// Routes one user utterance given its per-sentence classification.
    pub fn route(&self, _utterance: &str, classified: &[(String, DialogueActLabel)]) -> RouteDecision {
        let sentences: Vec<SentenceRoute> =
            classified.iter().map(|(s, a)| self.route_sentence(s, a)).collect();
        let invoke_factual = sentences.iter().any(|s| s.factual);
        let invoke_social = sentences.iter().any(|s| s.social);
        let social_fallback = classified.iter().any(|(_, a)| self.is_engaging(a));
        let deciding = sentences
            .iter()
            .find(|s| s.factual)
            .or_else(|| sentences.iter().find(|s| s.social));
        RouteDecision {
            invoke_factual,
            invoke_social,
            trigger: deciding.map_or(Trigger::None, |s| s.trigger),
            matched_act: deciding.map_or_else(DialogueActLabel::none, |s| s.act.clone()),
            social_fallback,
            sentences,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ee(name: &str) -> DialogueActLabel {
        DialogueActLabel::persuadee(name)
    }

    fn one(text: &str, act: &str) -> Vec<(String, DialogueActLabel)> {
        vec![(text.to_string(), ee(act))]
    }

    #[test]
    fn task_inquiry_triggers_factual() {
        let d = Dispatcher::default();
        let r = d.route("", &one("Tell me about it.", acts::TASK_RELATED_INQUIRY));
        assert!(r.invoke_factual && !r.invoke_social);
        assert_eq!(r.trigger, Trigger::ActRule);
    }

    #[test]
    fn acknowledgement_never_triggers_social() {
        let d = Dispatcher::default();
        let r = d.route("", &one("Ok.", acts::ACKNOWLEDGEMENT));
        assert!(!r.invoke_factual && !r.invoke_social);
        assert_eq!(r.trigger, Trigger::None);
        assert!(r.matched_act.is_none());
    }

    #[test]
    fn regex_backstop_catches_misclassified_question() {
        let d = Dispatcher::default();
        let r = d.route("", &one("Do you know who is their founder?", acts::OTHER));
        assert!(r.invoke_factual);
        assert!(!r.invoke_social);
        assert_eq!(r.trigger, Trigger::RegexRule);
        assert!(r.social_fallback);
        assert_eq!(r.factual_query().as_deref(), Some("Do you know who is their founder?"));
    }

    #[test]
    fn mixed_utterance_fires_both() {
        let d = Dispatcher::default();
        let mut c = one("I love kids.", acts::ENGAGING_STATEMENT);
        c.extend(one("How can I donate?", acts::OTHER));
        let r = d.route("", &c);
        assert!(r.invoke_factual && r.invoke_social);
        assert_eq!(r.trigger, Trigger::RegexRule);
    }

    #[test]
    fn empty_classification_routes_nowhere() {
        let r = Dispatcher::default().route("", &[]);
        assert!(!r.invoke_factual && !r.invoke_social);
    }

    #[test]
    fn custom_engaging_set() {
        let d = Dispatcher::new(DispatcherConfig {
            engaging_acts: Some(vec![acts::ENGAGING_STATEMENT.into()]),
            ..DispatcherConfig::default()
        })
        .unwrap();
        assert!(!d.route("", &one("Hi!", acts::GREETING)).invoke_social);
        assert!(d.route("", &one("Kids matter.", acts::ENGAGING_STATEMENT)).invoke_social);
    }

    #[test]
    fn bad_pattern_is_reported() {
        let cfg = DispatcherConfig { question_patterns: vec!["(".into()], ..DispatcherConfig::default() };
        assert!(Dispatcher::new(cfg).is_err());
    }
}
