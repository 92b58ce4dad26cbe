//! Self-contained components for demos and tests: no trained artifacts, no network.

use std::sync::Arc;
use std::time::Duration;

use crate::acts::{self, DialogueActLabel, Side};
use crate::agenda::Agenda;
use crate::classifier::{train_on_sentences, ClassifierConfig, NgramClassifier};
use crate::corpus::{AnnotatedConversation, Sentence, Turn, TurnMeta};
use crate::dispatcher::Dispatcher;
use crate::embedding::HashEmbedding;
use crate::orchestrator::{Components, FactualResponder, Orchestrator, OrchestratorConfig, OrchestratorError};
use crate::pusher::TemplateLm;
use crate::qa::{build_qa_index_with, QaBuildConfig};
use crate::social::{CannedSocialBackend, SocialResponder, DEFAULT_MAX_TURNS};

/// Labelled user sentences for the stub routing classifier.
pub const USER_EXAMPLES: [(&str, &str); 30] = [
    ("Hi!", acts::GREETING),
    ("Hello there.", acts::GREETING),
    ("Hi, how are you?", acts::GREETING),
    ("I'm good, how are you?", acts::GREETING),
    ("Good morning to you.", acts::GREETING),
    ("Okay.", acts::ACKNOWLEDGEMENT),
    ("I see.", acts::ACKNOWLEDGEMENT),
    ("Got it.", acts::ACKNOWLEDGEMENT),
    ("Sure.", acts::ACKNOWLEDGEMENT),
    ("Yup!", acts::ACKNOWLEDGEMENT),
    ("Thanks for asking.", acts::ACKNOWLEDGEMENT),
    ("I agree, that is really sad.", acts::ENGAGING_STATEMENT),
    ("That's so great!", acts::ENGAGING_STATEMENT),
    ("I care a lot about children's health.", acts::ENGAGING_STATEMENT),
    ("My sister works at a school for kids.", acts::ENGAGING_STATEMENT),
    ("It's great to know there are helpful organizations.", acts::ENGAGING_STATEMENT),
    ("I kind of worry for those children.", acts::ENGAGING_STATEMENT),
    ("Charities have a hard job in war zones.", acts::ENGAGING_STATEMENT),
    ("How do I donate?", acts::TASK_RELATED_INQUIRY),
    ("Let me know how you would like to donate.", acts::TASK_RELATED_INQUIRY),
    ("How much do you want me to give?", acts::TASK_RELATED_INQUIRY),
    ("Where does my donation go?", acts::TASK_RELATED_INQUIRY),
    ("Do you have a link I could go to?", acts::FACTUAL_QUESTION),
    ("What does Save the Children do?", acts::FACTUAL_QUESTION),
    ("Who founded the charity?", acts::FACTUAL_QUESTION),
    ("Is it a trustworthy organization?", acts::FACTUAL_QUESTION),
    ("Sure, I will donate a dollar.", acts::AGREE_DONATION),
    ("Yes, I'd like to donate.", acts::AGREE_DONATION),
    ("No, I don't want to donate.", acts::DISAGREE_DONATION),
    ("I can't afford to give right now.", acts::DISAGREE_DONATION),
];

/// Question and answer pairs for the stub factual index.
pub const FAQ: [(&str, &str); 4] = [
    ("Do you have a link or something I could directly go to?", "I sure do as a matter of fact it's <URL>."),
    ("How do I donate to the charity?", "You can donate directly to the charity."),
    (
        "What does Save the Children do?",
        "Save the Children promotes children's rights, provides relief and helps support children in developing countries.",
    ),
    ("Who founded Save the Children?", "Save the Children was founded in the UK in 1919."),
];

pub fn stub_user_classifier() -> NgramClassifier {
    let data: Vec<(String, DialogueActLabel)> =
        USER_EXAMPLES.iter().map(|(t, a)| (t.to_string(), DialogueActLabel::persuadee(*a))).collect();
    train_on_sentences(&data, &ClassifierConfig { side: Some(Side::Persuadee), ..Default::default() })
        .expect("stub examples cover several labels")
}

fn faq_conversation() -> AnnotatedConversation {
    let mut turns = Vec::new();
    for (q, a) in FAQ {
        for (role, text, act) in [(Side::Persuadee, q, acts::FACTUAL_QUESTION), (Side::Persuader, a, acts::OTHER)] {
            turns.push(Turn {
                role,
                sentences: vec![Sentence { text: text.into(), act: DialogueActLabel::new(act, role) }],
                index: turns.len(),
                meta: TurnMeta::default(),
            });
        }
    }
    AnnotatedConversation { id: "faq".into(), turns }
}

pub fn stub_factual() -> FactualResponder {
    let provider = Arc::new(HashEmbedding::default());
    let index = build_qa_index_with(&[faq_conversation()], provider.as_ref(), &QaBuildConfig::default())
        .expect("stub index builds");
    FactualResponder { index: Arc::new(index), provider }
}

pub fn stub_components(social: CannedSocialBackend) -> Components {
    Components {
        classifier: Arc::new(stub_user_classifier()),
        dispatcher: Dispatcher::default(),
        factual: Some(stub_factual()),
        social: Some(SocialResponder::new(Arc::new(social), Duration::from_secs(2), DEFAULT_MAX_TURNS)),
        model: Arc::new(TemplateLm::default()),
        agenda: Agenda::default(),
    }
}

pub fn stub_orchestrator(config: OrchestratorConfig) -> Result<Orchestrator, OrchestratorError> {
    Orchestrator::new(stub_components(CannedSocialBackend::default()), config)
}
