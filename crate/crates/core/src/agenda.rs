//! The ordered persuasion agenda and a session's progress through it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acts::{self, DialogueActLabel, Side};

#[derive(Debug, Error, PartialEq)]
pub enum AgendaError {
    #[error("agenda is empty")]
    Empty,
    #[error("act {0:?} appears twice in the agenda")]
    Duplicate(String),
    #[error("agenda act {0:?} is not a persuader act")]
    NotPersuader(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agenda {
    acts: Vec<DialogueActLabel>,
}

impl Default for Agenda {
    fn default() -> Self {
        Self { acts: acts::PERSUADER_STRATEGIES.iter().map(|a| DialogueActLabel::persuader(*a)).collect() }
    }
}

impl Agenda {
    pub fn new(acts: Vec<DialogueActLabel>) -> Result<Self, AgendaError> {
        if acts.is_empty() {
            return Err(AgendaError::Empty);
        }
        for (i, a) in acts.iter().enumerate() {
            if a.side != Side::Persuader || a.is_none() {
                return Err(AgendaError::NotPersuader(a.name.clone()));
            }
            if acts[..i].contains(a) {
                return Err(AgendaError::Duplicate(a.name.clone()));
            }
        }
        Ok(Self { acts })
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, AgendaError> {
        Self::new(names.iter().map(|n| DialogueActLabel::persuader(n.as_ref())).collect())
    }

    pub fn acts(&self) -> &[DialogueActLabel] {
        &self.acts
    }

    pub fn len(&self) -> usize {
        self.acts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acts.is_empty()
    }

    /// Acts that are never skipped when a session runs short of turns.
    pub fn is_finale(act: &DialogueActLabel) -> bool {
        act.name == acts::PROPOSE_DONATION || act.name == acts::CLOSING
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgendaState {
    agenda: Agenda,
    position: usize,
}

impl AgendaState {
    pub fn new(agenda: Agenda) -> Self {
        Self { agenda, position: 0 }
    }

    pub fn agenda(&self) -> &Agenda {
        &self.agenda
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn is_exhausted(&self) -> bool {
        self.position >= self.agenda.len()
    }

    pub fn remaining(&self) -> &[DialogueActLabel] {
        &self.agenda.acts[self.position.min(self.agenda.len())..]
    }

    /// Returns the act at the current position and advances past it.
    pub fn next_act(&mut self) -> Option<DialogueActLabel> {
        let act = self.agenda.acts.get(self.position)?.clone();
        self.position += 1;
        Some(act)
    }

    /// Like [`next_act`](Self::next_act) but keeps room for the finale acts.
    ///
    /// `turns_left` counts system turns still to come, including this one. While the remaining
    /// finale acts fit in the turns after this one, acts are emitted in order; otherwise
    /// non-finale acts are skipped up to the next finale act.
    pub fn next_act_within(&mut self, turns_left: usize) -> Option<DialogueActLabel> {
        let remaining = self.remaining();
        if remaining.is_empty() {
            return None;
        }
        let finale_left = remaining.iter().filter(|a| Agenda::is_finale(a)).count();
        let next_is_finale = Agenda::is_finale(&remaining[0]);
        if next_is_finale || finale_left == 0 || turns_left > finale_left {
            return self.next_act();
        }
        let skip = remaining.iter().position(Agenda::is_finale).expect("finale_left > 0");
        self.position += skip;
        self.next_act()
    }

    /// Jumps to the closing act if it is still ahead, returning it.
    pub fn force_closing(&mut self) -> Option<DialogueActLabel> {
        let offset = self.remaining().iter().position(|a| a.name == acts::CLOSING)?;
        self.position += offset;
        self.next_act()
    }
}
