use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RESTAURANT: &str = include_str!("../../data/ontology/restaurant.toml");
const HOTEL: &str = include_str!("../../data/ontology/hotel.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Categorical,
    /// Takes only `yes` / `no` (and `dontcare` when allowed).
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDef {
    pub name: String,
    pub kind: SlotKind,
    pub allows_dontcare: bool,
    /// Alternative spellings accepted by the DA parser.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

impl SlotDef {
    /// Placeholder token used in delexicalised text, e.g. `SLOT_KIDSALLOWED`.
    pub fn token(&self) -> String {
        slot_token(&self.name)
    }
}

/// Builds the slot token for a slot name.
pub fn slot_token(name: &str) -> String {
    format!("SLOT_{}", normalize_ident(name).to_uppercase())
}

/// Lowercases and drops `-` / `_`, so `kids-allowed`, `kids_allowed` and
/// `kidsallowed` all name the same slot.
pub fn normalize_ident(s: &str) -> String {
    s.chars()
        .filter(|c| *c != '-' && *c != '_')
        .flat_map(char::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ontology {
    pub domain_name: String,
    pub act_types: Vec<String>,
    pub slots: Vec<SlotDef>,
}

impl Ontology {
    pub fn restaurant() -> Self {
        Ontology::from_toml(RESTAURANT).expect("bundled restaurant ontology")
    }

    pub fn hotel() -> Self {
        Ontology::from_toml(HOTEL).expect("bundled hotel ontology")
    }

    pub fn preset(domain: &str) -> Option<Self> {
        match domain {
            "restaurant" => Some(Ontology::restaurant()),
            "hotel" => Some(Ontology::hotel()),
            _ => None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let ont: Ontology =
            toml::from_str(text).map_err(|e| Error::Input(format!("ontology: {e}")))?;
        ont.validate()?;
        Ok(ont)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ontology::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("ontology serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.act_types.is_empty() {
            return Err(Error::Input("ontology has no act types".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for act in &self.act_types {
            if !seen.insert(normalize_ident(act)) {
                return Err(Error::Input(format!("duplicate act type `{act}`")));
            }
        }
        seen.clear();
        for slot in &self.slots {
            for name in std::iter::once(&slot.name).chain(&slot.aliases) {
                if !seen.insert(normalize_ident(name)) {
                    return Err(Error::Input(format!("duplicate slot name `{name}`")));
                }
            }
        }
        Ok(())
    }

    pub fn act_index(&self, name: &str) -> Option<usize> {
        let key = normalize_ident(name);
        self.act_types.iter().position(|a| normalize_ident(a) == key)
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        let key = normalize_ident(name);
        self.slots.iter().position(|s| {
            normalize_ident(&s.name) == key || s.aliases.iter().any(|a| normalize_ident(a) == key)
        })
    }

    pub fn slot(&self, name: &str) -> Option<&SlotDef> {
        self.slot_index(name).map(|i| &self.slots[i])
    }

    /// Slot owning a `SLOT_<NAME>` token, if any.
    pub fn slot_for_token(&self, token: &str) -> Option<usize> {
        let rest = token.strip_prefix("SLOT_")?;
        self.slot_index(rest)
    }

    pub fn slot_tokens(&self) -> Vec<String> {
        self.slots
            .iter()
            .filter(|s| s.kind == SlotKind::Categorical)
            .map(SlotDef::token)
            .collect()
    }
}
