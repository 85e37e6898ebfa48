//! Delexicalisation: swapping categorical slot values for `SLOT_<NAME>`
//! tokens, and the inverse.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::act::{CanonicalDa, DialogueAct};
use super::ontology::{slot_token, Ontology, SlotKind};

pub const BOS: &str = "BOS";
pub const EOS: &str = "EOS";

const SPLIT_PUNCT: &[char] = &['.', ',', '?', '!', ';', ':'];

/// Lowercases, splits on whitespace and detaches trailing punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let lower = word.to_lowercase();
        let core = lower.trim_end_matches(SPLIT_PUNCT);
        if !core.is_empty() {
            out.push(core.to_string());
        }
        out.extend(lower[core.len()..].chars().map(String::from));
    }
    out
}

/// Token sequence framed by [`BOS`] and [`EOS`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DelexUtterance {
    pub tokens: Vec<String>,
}

impl DelexUtterance {
    /// Frames `body` with boundary tokens.
    pub fn from_body<S: Into<String>>(body: impl IntoIterator<Item = S>) -> Self {
        let mut tokens = vec![BOS.to_string()];
        tokens.extend(body.into_iter().map(Into::into));
        tokens.push(EOS.to_string());
        DelexUtterance { tokens }
    }

    /// Tokens between the boundary markers.
    pub fn body(&self) -> &[String] {
        let start = usize::from(self.tokens.first().map(String::as_str) == Some(BOS));
        let end = if self.tokens.len() > start && self.tokens.last().map(String::as_str) == Some(EOS) {
            self.tokens.len() - 1
        } else {
            self.tokens.len()
        };
        &self.tokens[start..end]
    }

    pub fn text(&self) -> String {
        self.body().join(" ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delexicalised {
    pub utterance: DelexUtterance,
    /// Slots whose categorical value could not be found in the text.
    pub unmatched: Vec<String>,
}

/// Replaces every exact token-level occurrence of each categorical value by
/// its slot token, longest value first. Binary and dontcare values stay
/// lexical.
pub fn delexicalise(text: &str, da: &DialogueAct, ont: &Ontology) -> Delexicalised {
    let mut tokens = tokenize(text);
    let mut values: Vec<(String, Vec<String>)> = da
        .categorical()
        .filter(|(slot, _)| {
            ont.slot(slot)
                .is_some_and(|s| s.kind == SlotKind::Categorical)
        })
        .map(|(slot, value)| (slot_token(slot), tokenize(value)))
        .filter(|(_, v)| !v.is_empty())
        .collect();
    values.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.1.cmp(&b.1)));

    let mut unmatched = Vec::new();
    for (token, value) in &values {
        let mut out = Vec::with_capacity(tokens.len());
        let mut i = 0;
        let mut found = false;
        while i < tokens.len() {
            if tokens[i..].starts_with(value) {
                out.push(token.clone());
                i += value.len();
                found = true;
            } else {
                out.push(std::mem::take(&mut tokens[i]));
                i += 1;
            }
        }
        tokens = out;
        if !found {
            unmatched.push(token.trim_start_matches("SLOT_").to_lowercase());
        }
    }
    Delexicalised {
        utterance: DelexUtterance::from_body(tokens),
        unmatched,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicalised {
    pub text: String,
    /// Slot tokens with no categorical binding in the DA; left in the text.
    pub redundant: Vec<String>,
}

/// Fills slot tokens with the DA's values and joins with single spaces.
pub fn lexicalise(u: &DelexUtterance, da: &DialogueAct) -> Lexicalised {
    let fills: Vec<(String, &str)> = da
        .categorical()
        .map(|(slot, value)| (slot_token(slot), value))
        .collect();
    let mut redundant = Vec::new();
    let words: Vec<&str> = u
        .body()
        .iter()
        .map(|tok| {
            if !tok.starts_with("SLOT_") {
                return tok.as_str();
            }
            match fills.iter().find(|(t, _)| t == tok) {
                Some((_, value)) => value,
                None => {
                    redundant.push(tok.clone());
                    tok.as_str()
                }
            }
        })
        .collect();
    Lexicalised {
        text: words.join(" "),
        redundant,
    }
}

/// Groups distinct delexicalised surface forms by canonical DA, keeping
/// first-seen order inside each group.
pub fn group_references<'a, I>(corpus: I) -> BTreeMap<CanonicalDa, Vec<DelexUtterance>>
where
    I: IntoIterator<Item = (&'a DialogueAct, &'a DelexUtterance)>,
{
    let mut groups: BTreeMap<CanonicalDa, Vec<DelexUtterance>> = BTreeMap::new();
    for (da, utt) in corpus {
        let group = groups.entry(da.canonical()).or_default();
        if !group.contains(utt) {
            group.push(utt.clone());
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::da::parse_da;

    #[test]
    fn tokenizer_splits_trailing_punctuation() {
        assert_eq!(tokenize("Allow Children."), ["allow", "children", "."]);
        assert_eq!(tokenize("hi , there?!"), ["hi", ",", "there", "?", "!"]);
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn delexicalises_name_and_area() {
        let r = Ontology::restaurant();
        let da = parse_da(r#"inform(name="red door cafe",area="cathedral hill")"#, &r).unwrap();
        let d = delexicalise("red door cafe is in cathedral hill", &da, &r);
        assert_eq!(d.utterance.text(), "SLOT_NAME is in SLOT_AREA");
        assert!(d.unmatched.is_empty());
        assert_eq!(d.utterance.tokens.first().unwrap(), BOS);
        assert_eq!(d.utterance.tokens.last().unwrap(), EOS);
    }

    #[test]
    fn text_without_values_is_unchanged() {
        let r = Ontology::restaurant();
        let da = parse_da(r#"inform(name="x")"#, &r).unwrap();
        let d = delexicalise("nothing to see here .", &da, &r);
        assert_eq!(d.utterance.text(), "nothing to see here .");
        assert_eq!(d.unmatched, ["name"]);
    }

    #[test]
    fn longest_value_wins() {
        let r = Ontology::restaurant();
        let da = parse_da(
            r#"inform_only(name="dosa on fillmore and kiss seafood",food="seafood",near="lower pacific heights")"#,
            &r,
        )
        .unwrap();
        let d = delexicalise(
            "dosa on fillmore and kiss seafood is the only seafood place near lower pacific heights .",
            &da,
            &r,
        );
        assert_eq!(
            d.utterance.text(),
            "SLOT_NAME is the only SLOT_FOOD place near SLOT_NEAR ."
        );
    }

    #[test]
    fn binary_and_dontcare_stay_lexical() {
        let h = Ontology::hotel();
        let da = parse_da(r#"inform(type="hotel",count="182",dogsallowed="dontcare")"#, &h).unwrap();
        let d = delexicalise("there are 182 hotel options if you do not care about dogs", &da, &h);
        assert_eq!(
            d.utterance.text(),
            "there are SLOT_COUNT SLOT_TYPE options if you do not care about dogs"
        );
    }

    #[test]
    fn lexicalise_fills_values() {
        let r = Ontology::restaurant();
        let da = parse_da(r#"inform(name="red door cafe")"#, &r).unwrap();
        let u = DelexUtterance::from_body(["SLOT_NAME", "is", "good", "."]);
        let l = lexicalise(&u, &da);
        assert_eq!(l.text, "red door cafe is good .");
        assert!(l.redundant.is_empty());

        let plain = DelexUtterance::from_body(["hello", "there"]);
        assert_eq!(lexicalise(&plain, &da).text, "hello there");

        let extra = DelexUtterance::from_body(["SLOT_NAME", "in", "SLOT_AREA"]);
        let l = lexicalise(&extra, &da);
        assert_eq!(l.redundant, ["SLOT_AREA"]);
    }

    #[test]
    fn grouping() {
        let r = Ontology::restaurant();
        let a = parse_da(r#"inform(name="a",area="north")"#, &r).unwrap();
        let b = parse_da(r#"inform(name="b",area="south")"#, &r).unwrap();
        let ua = delexicalise("a is in north", &a, &r).utterance;
        let ub = delexicalise("b is in the south area", &b, &r).utterance;
        let ua2 = delexicalise("a is in north", &a, &r).utterance;
        let groups = group_references([(&a, &ua), (&b, &ub), (&a, &ua2)]);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[&a.canonical()].len(), 2);

        let empty: Vec<(DialogueAct, DelexUtterance)> = Vec::new();
        assert!(group_references(empty.iter().map(|(d, u)| (d, u))).is_empty());
    }
}
