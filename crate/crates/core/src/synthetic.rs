//! Templated synthetic conversations.
//!
//! Every persuader strategy owns five sentence frames. Each frame takes one filler from a
//! shared list, so an act has `5 * fillers` distinct utterances and only the frame words
//! identify it. Strategy order is shuffled per conversation, which leaves the planned-act
//! control code as the only reliable signal of what the next persuader turn should be.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acts::{self, DialogueActLabel, Side, PERSUADER_STRATEGIES};
use crate::corpus::{AnnotatedConversation, Sentence, Turn, TurnMeta};

const FRAMES: [(&str, [&str; 5]); 11] = [
    (acts::GREETING, [
        "Hello there, hope things are well with {}!",
        "Hi, nice to meet you and {}!",
        "Good morning, how are you and {} doing?",
        "Hey, greetings from me to {}!",
        "Hello, lovely to chat about {} today!",
    ]),
    (acts::SOURCE_RELATED_INQUIRY, [
        "Have you heard of the charity that serves {}?",
        "Do you know the organization working for {}?",
        "Are you familiar with the group that backs {}?",
        "Did you ever read about the nonprofit for {}?",
        "Have you come across the foundation aiding {}?",
    ]),
    (acts::PERSONAL_RELATED_INQUIRY, [
        "Do you yourself spend time with {}?",
        "Are you personally close to {}?",
        "Have you ever volunteered your weekends with {}?",
        "Would you say your own life involves {}?",
        "Do your family members work with {}?",
    ]),
    (acts::CREDIBILITY_APPEAL, [
        "The charity is certified and audited while helping {}.",
        "Experts rate the organization highly for serving {}.",
        "The group has a trusted record of support for {}.",
        "Independent reviews praise the nonprofit's work with {}.",
        "The foundation is accredited and transparent about {}.",
    ]),
    (acts::EMOTIONAL_APPEAL, [
        "It breaks my heart to see the suffering of {}.",
        "I feel so sad thinking about the pain of {}.",
        "Imagine the tears and fear felt by {}.",
        "It is heartbreaking how lonely and scared {} feel.",
        "My heart aches for the grief of {}.",
    ]),
    (acts::LOGICAL_APPEAL, [
        "Each dollar buys measurable results for {}, so giving is efficient.",
        "Statistics show that funding {} therefore reduces long term costs.",
        "Because aid compounds, investing in {} yields the most impact.",
        "The numbers prove that support for {} saves money overall.",
        "Logically, small inputs for {} produce large outcomes.",
    ]),
    (acts::SELF_MODELING, [
        "I myself am going to give some of my earnings to {}.",
        "I personally plan to donate part of my pay for {}.",
        "Myself, I will contribute a little from my bonus to {}.",
        "I am donating a portion of my wages toward {}.",
        "I decided I will chip in my own cash for {}.",
    ]),
    (acts::FOOT_IN_THE_DOOR, [
        "Even a tiny amount helps {}.",
        "Every little bit counts for {}.",
        "Just a few cents would matter to {}.",
        "A small start is enough to help {}.",
        "Any modest gift goes far with {}.",
    ]),
    (acts::PERSONAL_STORY, [
        "Once my cousin told me a story about meeting {}.",
        "Years ago a friend of mine spent a summer among {}.",
        "I remember when my neighbor shared memories of {}.",
        "Back in college my roommate wrote letters to {}.",
        "Last year my aunt recalled her journey visiting {}.",
    ]),
    (acts::PROPOSE_DONATION, [
        "Would you like to donate part of your payment to {}?",
        "Will you consider a donation today for {}?",
        "How much of your earnings would you give to {}?",
        "Could you donate some of your task bonus for {}?",
        "Would you be willing to make a gift to {}?",
    ]),
    (acts::CLOSING, [
        "Thanks so much for chatting, goodbye and best wishes to {}.",
        "It was great talking, farewell and cheers to {}.",
        "Thank you for your time, bye and love to {}.",
        "Take care now, goodbye from me and {}.",
        "Have a wonderful day, so long to you and {}.",
    ]),
];

const FILLERS: [&str; 10] = [
    "the kids",
    "families",
    "schools",
    "the community",
    "our neighbors",
    "young people",
    "the world",
    "local clinics",
    "new parents",
    "hungry children",
];

const PERSUADEE_LINES: [(&str, &str); 6] = [
    ("Okay.", acts::ACKNOWLEDGEMENT),
    ("I see.", acts::ACKNOWLEDGEMENT),
    ("Sure.", acts::ACKNOWLEDGEMENT),
    ("That sounds interesting to me.", acts::ENGAGING_STATEMENT),
    ("I care about that too.", acts::ENGAGING_STATEMENT),
    ("Tell me more.", acts::ENGAGING_STATEMENT),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    /// Number of strategies used, taken in agenda order (at most eleven).
    pub acts: usize,
    /// Persuader turns per conversation; each uses a different act.
    pub persuader_turns: usize,
    pub conversations: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { acts: 11, persuader_turns: 4, conversations: 300, seed: 7 }
    }
}

/// Act names used by a config.
pub fn synthetic_acts(acts: usize) -> Vec<&'static str> {
    PERSUADER_STRATEGIES[..acts.clamp(1, PERSUADER_STRATEGIES.len())].to_vec()
}

/// Every utterance of an act's template family.
pub fn act_utterances(act: &str) -> Vec<String> {
    FRAMES
        .iter()
        .find(|(name, _)| *name == act)
        .map(|(_, frames)| {
            frames
                .iter()
                .flat_map(|f| FILLERS.iter().map(move |x| f.replace("{}", x)))
                .collect()
        })
        .unwrap_or_default()
}

fn turn(role: Side, text: String, act: &str, index: usize) -> Turn {
    Turn {
        role,
        sentences: vec![Sentence { text, act: DialogueActLabel::new(act, role) }],
        index,
        meta: TurnMeta::default(),
    }
}

pub fn synthetic_corpus(config: &SyntheticConfig) -> Vec<AnnotatedConversation> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let names = synthetic_acts(config.acts);
    let families: Vec<Vec<String>> = names.iter().map(|a| act_utterances(a)).collect();
    let per_conv = config.persuader_turns.clamp(1, names.len());
    (0..config.conversations)
        .map(|c| {
            let mut order: Vec<usize> = (0..names.len()).collect();
            order.shuffle(&mut rng);
            let mut turns = Vec::new();
            for &a in &order[..per_conv] {
                let text = families[a][rng.gen_range(0..families[a].len())].clone();
                turns.push(turn(Side::Persuader, text, names[a], turns.len()));
                let (line, act) = PERSUADEE_LINES[rng.gen_range(0..PERSUADEE_LINES.len())];
                turns.push(turn(Side::Persuadee, line.to_string(), act, turns.len()));
            }
            AnnotatedConversation { id: format!("synthetic-{c:04}"), turns }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn families_are_disjoint_and_large() {
        let mut seen = HashSet::new();
        for act in PERSUADER_STRATEGIES {
            let u = act_utterances(act);
            assert_eq!(u.iter().collect::<HashSet<_>>().len(), 50);
            for s in u {
                assert!(seen.insert(s), "shared utterance");
            }
        }
    }

    #[test]
    fn corpus_is_deterministic_and_alternating() {
        let cfg = SyntheticConfig { conversations: 20, ..Default::default() };
        let a = synthetic_corpus(&cfg);
        assert_eq!(a, synthetic_corpus(&cfg));
        assert!(a.iter().all(|c| c.alternates() && c.persuader_turns().count() == 4));
        for c in &a {
            let acts: HashSet<_> = c.persuader_turns().map(|t| t.sentences[0].act.name.clone()).collect();
            assert_eq!(acts.len(), 4);
        }
    }
}
