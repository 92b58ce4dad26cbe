//! Word-level tokenization shared by every conditional model.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub type TokenId = u32;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";

static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\[(?:PREV|ACT)=[a-z-]+\]|PERSUADER:|PERSUADEE:|<URL>|\w+(?:'\w+)*|[^\w\s]")
        .expect("token pattern compiles")
});

pub fn tokenize(text: &str) -> Vec<&str> {
    TOKEN_RE.find_iter(text).map(|m| m.as_str()).collect()
}

/// Control and role tokens: present in model inputs, never generated.
pub fn is_control_token(token: &str) -> bool {
    (token.starts_with("[PREV=") || token.starts_with("[ACT=")) && token.ends_with(']')
        || token == "PERSUADER:"
        || token == "PERSUADEE:"
}

pub fn detokenize<'a>(tokens: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    let mut glue_next = false;
    for tok in tokens {
        let glue_prev = matches!(tok, "." | "," | "!" | "?" | ";" | ":" | ")" | "%");
        if !out.is_empty() && !glue_prev && !glue_next {
            out.push(' ');
        }
        out.push_str(tok);
        glue_next = matches!(tok, "$" | "(");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<String>", from = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        Self::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Builds a vocabulary from texts; special tokens come first, then tokens in first-seen order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Self::from_tokens(vec![PAD.into(), UNK.into(), BOS.into(), EOS.into()]);
        for text in texts {
            for tok in tokenize(text) {
                v.add(tok);
            }
        }
        v
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as TokenId)).collect();
        Self { tokens, index }
    }

    pub fn add(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn unk(&self) -> TokenId {
        self.id(UNK).expect("vocab has <unk>")
    }

    pub fn bos(&self) -> TokenId {
        self.id(BOS).expect("vocab has <bos>")
    }

    pub fn eos(&self) -> TokenId {
        self.id(EOS).expect("vocab has <eos>")
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        let unk = self.unk();
        tokenize(text).into_iter().map(|t| self.id(t).unwrap_or(unk)).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        detokenize(ids.iter().map(|&i| self.token(i)))
    }

    /// Tokens a decoder may emit: everything except specials (other than `<eos>`) and
    /// control/role tokens.
    pub fn generatable(&self) -> Vec<bool> {
        self.tokens
            .iter()
            .map(|t| t == EOS || !(t == PAD || t == UNK || t == BOS || is_control_token(t)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_keeps_control_tokens_whole() {
        let toks = tokenize("PERSUADEE: I'm fine.\n[PREV=none] [ACT=foot-in-the-door]");
        assert_eq!(toks, ["PERSUADEE:", "I'm", "fine", ".", "[PREV=none]", "[ACT=foot-in-the-door]"]);
        assert!(is_control_token("[ACT=closing]"));
        assert!(!is_control_token("closing"));
    }

    #[test]
    fn detokenize_restores_spacing() {
        let text = "Every little bit helps. Even a small amount!";
        assert_eq!(detokenize(tokenize(text)), text);
        assert_eq!(detokenize(tokenize("I'll give $2, maybe (more).")), "I'll give $2, maybe (more).");
    }

    #[test]
    fn vocab_encodes_unknowns() {
        let v = Vocab::build(["hello world"]);
        assert_eq!(v.len(), 6);
        assert_eq!(v.encode("hello there"), vec![4, v.unk()]);
        assert_eq!(v.decode(&[4, 5]), "hello world");
        let gen = v.generatable();
        assert!(!gen[v.bos() as usize] && gen[v.eos() as usize]);
    }
}
