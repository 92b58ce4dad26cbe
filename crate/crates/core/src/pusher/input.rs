//! Conditioned model inputs.
//!
//! Format version 1, one history line per utterance followed by the control line:
//!
//! ```text
//! PERSUADER: Hello, how are you today?
//! PERSUADEE: Hi! I'm good, how are you?
//! PERSUADER: I'm terrific!
//! [PREV=greeting] [ACT=source-related-inquiry]
//! ```
//!
//! The third line above is an injected response: the response part of the same system turn,
//! appended under the persuader role.

use crate::acts::{DialogueActLabel, Side};
use crate::corpus::{render_history, TrainingInstance, Utterance};

pub const INPUT_FORMAT_VERSION: u32 = 1;

pub fn control_line(previous_act: &DialogueActLabel, planned_act: &DialogueActLabel) -> String {
    format!("[PREV={}] [ACT={}]", previous_act.name, planned_act.name)
}

pub fn build_model_input(
    history: &[Utterance],
    previous_act: &DialogueActLabel,
    planned_act: &DialogueActLabel,
    injected_response: Option<&str>,
) -> String {
    debug_assert_eq!(planned_act.side, Side::Persuader);
    let mut lines: Vec<Utterance> = history.to_vec();
    if let Some(resp) = injected_response.map(str::trim).filter(|r| !r.is_empty()) {
        lines.push(Utterance::new(Side::Persuader, resp));
    }
    let mut out = render_history(&lines);
    if !out.is_empty() {
        out.push('\n');
    }
    out.push_str(&control_line(previous_act, planned_act));
    out
}

pub fn instance_input(instance: &TrainingInstance) -> String {
    build_model_input(&instance.history, &instance.previous_act, &instance.planned_act, None)
}

/// The planned act named by the last `[ACT=..]` token of an input.
pub fn planned_act_of(input_tokens: &[&str]) -> Option<String> {
    input_tokens.iter().rev().find_map(|t| {
        t.strip_prefix("[ACT=").and_then(|rest| rest.strip_suffix(']')).map(str::to_string)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acts;

    #[test]
    fn minimal_input_is_the_control_line() {
        let s = build_model_input(&[], &DialogueActLabel::none(), &DialogueActLabel::persuader(acts::GREETING), None);
        assert_eq!(s, "[PREV=none] [ACT=greeting]");
    }

    #[test]
    fn injected_response_is_last_history_line() {
        let h = [Utterance::new(Side::Persuadee, "Kids need help.")];
        let s = build_model_input(
            &h,
            &DialogueActLabel::persuader(acts::CREDIBILITY_APPEAL),
            &DialogueActLabel::persuader(acts::EMOTIONAL_APPEAL),
            Some("I agree."),
        );
        assert_eq!(
            s,
            "PERSUADEE: Kids need help.\nPERSUADER: I agree.\n[PREV=credibility-appeal] [ACT=emotional-appeal]"
        );
        let toks = crate::pusher::vocab::tokenize(&s);
        assert_eq!(planned_act_of(&toks).as_deref(), Some(acts::EMOTIONAL_APPEAL));
    }
}
