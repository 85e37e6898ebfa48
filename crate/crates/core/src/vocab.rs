use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::da::{DelexUtterance, Ontology, BOS, EOS};

pub const UNK: &str = "UNK";

/// Token inventory. Indices 0, 1, 2 are BOS, EOS and UNK; slot tokens of the
/// ontology follow, then corpus words in sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub const BOS: usize = 0;
    pub const EOS: usize = 1;
    pub const UNK: usize = 2;

    pub fn build<'a>(ont: &Ontology, utterances: impl IntoIterator<Item = &'a DelexUtterance>) -> Self {
        let mut tokens: Vec<String> = vec![BOS.into(), EOS.into(), UNK.into()];
        tokens.extend(ont.slot_tokens());
        let known: BTreeSet<String> = tokens.iter().cloned().collect();
        let words: BTreeSet<&String> = utterances
            .into_iter()
            .flat_map(|u| u.tokens.iter())
            .filter(|t| !known.contains(*t))
            .collect();
        tokens.extend(words.into_iter().cloned());
        Vocab::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }

    /// Restores the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(Vocab::UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, u: &DelexUtterance) -> Vec<usize> {
        u.tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> DelexUtterance {
        DelexUtterance {
            tokens: ids.iter().map(|&i| self.tokens[i].clone()).collect(),
        }
    }
}
