//! Dialogue-act labels and the label inventories for both parties.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Which party of a persuasion conversation produced an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Persuader,
    Persuadee,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Persuader => "persuader",
            Side::Persuadee => "persuadee",
        }
    }

    /// Upper-case role prefix used when rendering history lines.
    pub fn role_prefix(self) -> &'static str {
        match self {
            Side::Persuader => "PERSUADER",
            Side::Persuadee => "PERSUADEE",
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Persuader => Side::Persuadee,
            Side::Persuadee => Side::Persuader,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const GREETING: &str = "greeting";
pub const SOURCE_RELATED_INQUIRY: &str = "source-related-inquiry";
pub const PERSONAL_RELATED_INQUIRY: &str = "personal-related-inquiry";
pub const CREDIBILITY_APPEAL: &str = "credibility-appeal";
pub const EMOTIONAL_APPEAL: &str = "emotional-appeal";
pub const LOGICAL_APPEAL: &str = "logical-appeal";
pub const SELF_MODELING: &str = "self-modeling";
pub const FOOT_IN_THE_DOOR: &str = "foot-in-the-door";
pub const PERSONAL_STORY: &str = "personal-story";
pub const PROPOSE_DONATION: &str = "propose-donation";
pub const CLOSING: &str = "closing";

/// Sentinel for "no act", e.g. the previous act of a conversation's first persuader turn.
pub const NONE: &str = "none";
/// Catch-all that unknown annotation strings are mapped to.
pub const OTHER: &str = "other";

pub const TASK_RELATED_INQUIRY: &str = "task-related-inquiry";
pub const FACTUAL_QUESTION: &str = "factual-question";
pub const ACKNOWLEDGEMENT: &str = "acknowledgement";
pub const ENGAGING_STATEMENT: &str = "engaging-statement";
pub const AGREE_DONATION: &str = "agree-donation";
pub const DISAGREE_DONATION: &str = "disagree-donation";

/// The persuader strategies in agenda order.
pub const PERSUADER_STRATEGIES: [&str; 11] = [
    GREETING,
    SOURCE_RELATED_INQUIRY,
    PERSONAL_RELATED_INQUIRY,
    CREDIBILITY_APPEAL,
    EMOTIONAL_APPEAL,
    LOGICAL_APPEAL,
    SELF_MODELING,
    FOOT_IN_THE_DOOR,
    PERSONAL_STORY,
    PROPOSE_DONATION,
    CLOSING,
];

/// Default persuadee inventory. Deployments may extend it through [`ActInventory::with_persuadee`].
pub const DEFAULT_PERSUADEE_ACTS: [&str; 8] = [
    GREETING,
    TASK_RELATED_INQUIRY,
    FACTUAL_QUESTION,
    ACKNOWLEDGEMENT,
    ENGAGING_STATEMENT,
    AGREE_DONATION,
    DISAGREE_DONATION,
    OTHER,
];

/// Persuader strategy example utterances, one per strategy, in agenda order.
/// Used as canned agenda text when generation fails and by the template model.
pub const STRATEGY_EXAMPLES: [(&str, &str); 11] = [
    (GREETING, "Hello there! How are you doing?"),
    (SOURCE_RELATED_INQUIRY, "Have you heard of the organization Save the Children?"),
    (PERSONAL_RELATED_INQUIRY, "Do you have kids yourself?"),
    (
        CREDIBILITY_APPEAL,
        "Save the Children is an international non-governmental organization that promotes children's rights, provides relief, and helps support children in developing countries.",
    ),
    (
        EMOTIONAL_APPEAL,
        "It make me feel sad to see that so many children are suffering from poverty and hunger.",
    ),
    (
        LOGICAL_APPEAL,
        "Donations are extremely important in order for children to have their rights to healthcare, education, safety, etc. If you were to donate, you would be making a huge impact on these children and on the world.",
    ),
    (SELF_MODELING, "I think I'll donate a bit of my money to Save the Children, $2."),
    (FOOT_IN_THE_DOOR, "Every little bit helps. Even a small amount!"),
    (
        PERSONAL_STORY,
        "Someone told me that he and his brother replaced birthday gifts with charity donations a few years ago, and it was a really rewarding experience for them.",
    ),
    (PROPOSE_DONATION, "Would you like to make a donation to Save the Children?"),
    (CLOSING, "Thank you, it's been lovely talking to you. Enjoy your day and bye!"),
];

pub fn strategy_example(name: &str) -> Option<&'static str> {
    STRATEGY_EXAMPLES
        .iter()
        .find(|(act, _)| *act == name)
        .map(|(_, text)| *text)
}

pub fn is_persuader_strategy(name: &str) -> bool {
    PERSUADER_STRATEGIES.contains(&name)
}

/// A sentence-level dialogue act together with the party whose inventory it belongs to.
///
/// The side is the role of the speaker, so a persuadee "greeting" and the persuader
/// strategy "greeting" are distinct labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DialogueActLabel {
    pub name: String,
    pub side: Side,
}

impl DialogueActLabel {
    pub fn new(name: impl Into<String>, side: Side) -> Self {
        Self { name: name.into(), side }
    }

    pub fn persuader(name: impl Into<String>) -> Self {
        Self::new(name, Side::Persuader)
    }

    pub fn persuadee(name: impl Into<String>) -> Self {
        Self::new(name, Side::Persuadee)
    }

    pub fn none() -> Self {
        Self::persuader(NONE)
    }

    pub fn is_none(&self) -> bool {
        self.name == NONE
    }

    pub fn is_strategy(&self) -> bool {
        self.side == Side::Persuader && is_persuader_strategy(&self.name)
    }
}

impl fmt::Display for DialogueActLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Known act names per side. Persuader labels are fixed; the persuadee list is configurable
/// and always contains [`OTHER`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActInventory {
    persuadee: Vec<String>,
}

impl Default for ActInventory {
    fn default() -> Self {
        Self::with_persuadee(DEFAULT_PERSUADEE_ACTS.iter().copied())
    }
}

impl ActInventory {
    pub fn with_persuadee<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut persuadee: Vec<String> = Vec::new();
        for name in names {
            let name = name.into();
            if !persuadee.contains(&name) {
                persuadee.push(name);
            }
        }
        if !persuadee.iter().any(|n| n == OTHER) {
            persuadee.push(OTHER.to_string());
        }
        Self { persuadee }
    }

    pub fn persuadee_acts(&self) -> &[String] {
        &self.persuadee
    }

    pub fn is_known(&self, name: &str, side: Side) -> bool {
        match side {
            Side::Persuader => is_persuader_strategy(name) || name == OTHER,
            Side::Persuadee => self.persuadee.iter().any(|n| n == name),
        }
    }

    /// Maps an annotation string to a label, falling back to [`OTHER`] for unknown names.
    /// The boolean is `false` when the fallback was taken.
    pub fn resolve(&self, name: &str, side: Side) -> (DialogueActLabel, bool) {
        if self.is_known(name, side) {
            (DialogueActLabel::new(name, side), true)
        } else {
            (DialogueActLabel::new(OTHER, side), false)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_are_unique_and_have_examples() {
        for (i, act) in PERSUADER_STRATEGIES.iter().enumerate() {
            assert!(!PERSUADER_STRATEGIES[i + 1..].contains(act));
            assert_eq!(STRATEGY_EXAMPLES[i].0, *act);
        }
        assert_eq!(
            strategy_example(FOOT_IN_THE_DOOR),
            Some("Every little bit helps. Even a small amount!")
        );
    }

    #[test]
    fn unknown_names_fall_back_to_other() {
        let inv = ActInventory::default();
        let (label, known) = inv.resolve("thank", Side::Persuadee);
        assert!(!known);
        assert_eq!(label, DialogueActLabel::persuadee(OTHER));
        let (label, known) = inv.resolve(LOGICAL_APPEAL, Side::Persuader);
        assert!(known);
        assert!(label.is_strategy());
        assert!(!inv.resolve(LOGICAL_APPEAL, Side::Persuadee).1);
    }

    #[test]
    fn custom_inventory_keeps_other() {
        let inv = ActInventory::with_persuadee(["ask-price"]);
        assert_eq!(inv.persuadee_acts(), ["ask-price", OTHER]);
    }
}
