//! Engagement proxies per turn and significance tests between groups of conversations.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::acts::Side;
use crate::corpus::{segment_sentences, AnnotatedConversation};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no conversations to evaluate")]
    Empty,
    #[error("group {group} has {turns} turns, need at least 2")]
    TooFewTurns { group: char, turns: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    SystemWords,
    UserWords,
    SystemSentences,
    UserSentences,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::SystemWords, Metric::UserWords, Metric::SystemSentences, Metric::UserSentences];

    pub fn label(self) -> &'static str {
        match self {
            Metric::SystemWords => "# Chatbot Words",
            Metric::UserWords => "# User Words",
            Metric::SystemSentences => "# Chatbot Sentences",
            Metric::UserSentences => "# User Sentences",
        }
    }

    pub fn side(self) -> Side {
        match self {
            Metric::SystemWords | Metric::SystemSentences => Side::Persuader,
            Metric::UserWords | Metric::UserSentences => Side::Persuadee,
        }
    }

    fn count(self, text: &str) -> usize {
        match self {
            Metric::SystemWords | Metric::UserWords => word_count(text),
            Metric::SystemSentences | Metric::UserSentences => sentence_count(text),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| serde_json::to_value(m).ok().and_then(|v| v.as_str().map(|x| x == s)).unwrap_or(false))
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn sentence_count(text: &str) -> usize {
    segment_sentences(text).len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementReport {
    pub avg_system_words: f64,
    pub avg_user_words: f64,
    pub avg_system_sentences: f64,
    pub avg_user_sentences: f64,
    pub n_conversations: usize,
    pub n_system_turns: usize,
    pub n_user_turns: usize,
}

impl EngagementReport {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::SystemWords => self.avg_system_words,
            Metric::UserWords => self.avg_user_words,
            Metric::SystemSentences => self.avg_system_sentences,
            Metric::UserSentences => self.avg_user_sentences,
        }
    }

    /// Rows keyed by the usual table labels, in table order.
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        Metric::ALL.iter().map(|m| (m.label(), self.get(*m))).collect()
    }
}

/// Per-turn values of `metric`, pooled over conversations in order.
pub fn turn_values(conversations: &[AnnotatedConversation], metric: Metric) -> Vec<f64> {
    conversations
        .iter()
        .flat_map(|c| c.turns.iter())
        .filter(|t| t.role == metric.side())
        .map(|t| metric.count(&t.text()) as f64)
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub fn engagement_metrics(conversations: &[AnnotatedConversation]) -> Result<EngagementReport, EvalError> {
    if conversations.is_empty() {
        return Err(EvalError::Empty);
    }
    let avg = |m| mean(&turn_values(conversations, m));
    Ok(EngagementReport {
        avg_system_words: avg(Metric::SystemWords),
        avg_user_words: avg(Metric::UserWords),
        avg_system_sentences: avg(Metric::SystemSentences),
        avg_user_sentences: avg(Metric::UserSentences),
        n_conversations: conversations.len(),
        n_system_turns: turn_values(conversations, Metric::SystemWords).len(),
        n_user_turns: turn_values(conversations, Metric::UserWords).len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub metric: String,
    pub group_a_mean: f64,
    pub group_b_mean: f64,
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub test: String,
}

/// Two-sided Welch t-test on raw per-turn values.
pub fn compare_values(metric: &str, a: &[f64], b: &[f64]) -> Result<ComparisonResult, EvalError> {
    for (group, v) in [('a', a), ('b', b)] {
        if v.len() < 2 {
            return Err(EvalError::TooFewTurns { group, turns: v.len() });
        }
    }
    let (ma, mb) = (mean(a), mean(b));
    let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    let (sa, sb) = (var(a, ma) / a.len() as f64, var(b, mb) / b.len() as f64);
    let se2 = sa + sb;
    let (t, df, p) = if se2 == 0.0 {
        // both groups constant
        let p = if ma == mb { 1.0 } else { 0.0 };
        (if ma == mb { 0.0 } else { f64::INFINITY.copysign(ma - mb) }, (a.len() + b.len() - 2) as f64, p)
    } else {
        let t = (ma - mb) / se2.sqrt();
        let df = se2 * se2 / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (t, df, (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
    };
    Ok(ComparisonResult {
        metric: metric.to_string(),
        group_a_mean: ma,
        group_b_mean: mb,
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        test: "welch-t-two-sided".into(),
    })
}

pub fn compare_groups(
    a: &[AnnotatedConversation],
    b: &[AnnotatedConversation],
    metric: Metric,
) -> Result<ComparisonResult, EvalError> {
    compare_values(metric.label(), &turn_values(a, metric), &turn_values(b, metric))
}

/// Aligned plain-text table of one or more labelled reports.
pub fn format_table(columns: &[(&str, &EngagementReport)]) -> String {
    let mut out = format!("{:<22}", "Utterance Statistic");
    for (name, _) in columns {
        out.push_str(&format!(" {name:>10}"));
    }
    out.push('\n');
    for metric in Metric::ALL {
        out.push_str(&format!("{:<22}", metric.label()));
        for (_, r) in columns {
            out.push_str(&format!(" {:>10.2}", r.get(metric)));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acts::DialogueActLabel;
    use crate::corpus::{Sentence, Turn, TurnMeta};

    fn conv(lines: &[(Side, &str)]) -> AnnotatedConversation {
        AnnotatedConversation {
            id: "c".into(),
            turns: lines
                .iter()
                .enumerate()
                .map(|(i, (role, text))| Turn {
                    role: *role,
                    sentences: vec![Sentence { text: text.to_string(), act: DialogueActLabel::new("other", *role) }],
                    index: i,
                    meta: TurnMeta::default(),
                })
                .collect(),
        }
    }

    #[test]
    fn single_user_turn() {
        let r = engagement_metrics(&[conv(&[(Side::Persuader, "Hi. How are you?"), (Side::Persuadee, "Yes, I agree")])])
            .unwrap();
        assert_eq!(r.avg_user_words, 3.0);
        assert_eq!(r.avg_user_sentences, 1.0);
        assert_eq!(r.avg_system_words, 4.0);
        assert_eq!(r.avg_system_sentences, 2.0);
        assert_eq!(engagement_metrics(&[]), Err(EvalError::Empty));
    }

    #[test]
    fn welch_matches_reference() {
        // scipy.stats.ttest_ind([1,2,3,4,5],[2,4,6,8,10,12], equal_var=False)
        let r = compare_values("x", &[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0]).unwrap();
        assert!((r.t_statistic - -2.3763541031440183).abs() < 1e-12, "{}", r.t_statistic);
        assert!((r.degrees_of_freedom - 6.972255729794934).abs() < 1e-9, "{}", r.degrees_of_freedom);
        assert!((r.p_value - 0.04928433820673049).abs() < 1e-9, "{}", r.p_value);
        let s = compare_values("x", &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(s.p_value, r.p_value);
        assert_eq!(s.t_statistic, -r.t_statistic);
    }

    #[test]
    fn degenerate_groups() {
        assert!(compare_values("x", &[1.0], &[1.0, 2.0]).is_err());
        assert_eq!(compare_values("x", &[2.0, 2.0], &[2.0, 2.0]).unwrap().p_value, 1.0);
        assert_eq!(compare_values("x", &[2.0, 2.0], &[3.0, 3.0]).unwrap().p_value, 0.0);
    }
}
