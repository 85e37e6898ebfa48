//! Dialogue acts and their string grammar.
//!
//! ```text
//! da    := ACT '(' [item (',' item)*] ')'
//! item  := SLOT ['=' value]
//! value := '"' chars '"' | 'yes' | 'no' | 'dontcare'
//! ```
//!
//! A slot without a value is a requested slot and is only legal under
//! `request` and `select`. Repeated slots are merged, keeping the first
//! binding.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ontology::{normalize_ident, Ontology, SlotKind};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SlotValue {
    Categorical(String),
    DontCare,
    Yes,
    No,
    Requested,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DialogueAct {
    pub act_type: String,
    pub bindings: Vec<(String, SlotValue)>,
}

/// Value-free identity of a DA: act type, sorted slot names and the
/// special-value markers. Categorical values are erased.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalDa(pub String);

impl fmt::Display for CanonicalDa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl DialogueAct {
    pub fn new(act_type: impl Into<String>) -> Self {
        DialogueAct {
            act_type: act_type.into(),
            bindings: Vec::new(),
        }
    }

    pub fn with(mut self, slot: impl Into<String>, value: SlotValue) -> Self {
        let slot = slot.into();
        if !self.bindings.iter().any(|(s, _)| *s == slot) {
            self.bindings.push((slot, value));
        }
        self
    }

    pub fn value(&self, slot: &str) -> Option<&SlotValue> {
        let key = normalize_ident(slot);
        self.bindings
            .iter()
            .find(|(s, _)| normalize_ident(s) == key)
            .map(|(_, v)| v)
    }

    /// Categorical bindings only; these are the ones that get delexicalised.
    pub fn categorical(&self) -> impl Iterator<Item = (&str, &str)> {
        self.bindings.iter().filter_map(|(s, v)| match v {
            SlotValue::Categorical(text) => Some((s.as_str(), text.as_str())),
            _ => None,
        })
    }

    pub fn canonical(&self) -> CanonicalDa {
        let mut items: Vec<String> = self
            .bindings
            .iter()
            .map(|(slot, v)| match v {
                SlotValue::Categorical(_) => slot.clone(),
                SlotValue::DontCare => format!("{slot}=dontcare"),
                SlotValue::Yes => format!("{slot}=yes"),
                SlotValue::No => format!("{slot}=no"),
                SlotValue::Requested => format!("{slot}=?"),
            })
            .collect();
        items.sort();
        CanonicalDa(format!("{}({})", self.act_type, items.join(",")))
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.act_type)?;
        for (i, (slot, value)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match value {
                SlotValue::Categorical(v) => {
                    let escaped = v.replace('\\', "\\\\").replace('"', "\\\"");
                    write!(f, "{slot}=\"{escaped}\"")?
                }
                SlotValue::DontCare => write!(f, "{slot}=dontcare")?,
                SlotValue::Yes => write!(f, "{slot}=yes")?,
                SlotValue::No => write!(f, "{slot}=no")?,
                SlotValue::Requested => f.write_str(slot)?,
            }
        }
        f.write_str(")")
    }
}

/// Inverse printer of [`parse_da`].
pub fn render_da(da: &DialogueAct) -> String {
    da.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unknown act type `{0}`")]
    UnknownAct(String),
    #[error("unknown slot `{0}`")]
    UnknownSlot(String),
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("unterminated string")]
    Unterminated,
    #[error("invalid value `{value}` for slot `{slot}`")]
    InvalidValue { slot: String, value: String },
    #[error("slot `{0}` requested outside request/select")]
    RequestNotAllowed(String),
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char, what: &'static str) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(ParseErrorKind::Expected(what)))
        }
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            offset: self.pos,
            kind,
        }
    }

    /// Identifier: letters, digits, `_`, `-`.
    fn ident(&mut self) -> Option<(usize, &'a str)> {
        self.skip_ws();
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| !(c.is_alphanumeric() || c == '_' || c == '-'))
            .unwrap_or(self.src.len() - start);
        if len == 0 {
            return None;
        }
        self.pos += len;
        Some((start, &self.src[start..start + len]))
    }

    fn quoted(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        self.pos += 1; // opening quote
        let mut out = String::new();
        let mut chars = self.src[self.pos..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, esc)) => out.push(esc),
                    None => break,
                },
                _ => out.push(c),
            }
        }
        Err(ParseError {
            offset: start,
            kind: ParseErrorKind::Unterminated,
        })
    }
}

/// Parses a DA string against an ontology. Whitespace between tokens is
/// ignored; names are matched case- and hyphen-insensitively.
pub fn parse_da(text: &str, ont: &Ontology) -> Result<DialogueAct, ParseError> {
    let mut cur = Cursor { src: text, pos: 0 };
    let (act_pos, act_raw) = cur
        .ident()
        .ok_or_else(|| cur.error(ParseErrorKind::Expected("act type")))?;
    let act_idx = ont.act_index(act_raw).ok_or(ParseError {
        offset: act_pos,
        kind: ParseErrorKind::UnknownAct(act_raw.to_string()),
    })?;
    let act_type = ont.act_types[act_idx].clone();
    let requests_allowed = matches!(normalize_ident(&act_type).as_str(), "request" | "select");

    let mut da = DialogueAct::new(act_type);
    cur.expect('(', "`(`")?;
    if !cur.eat(')') {
        loop {
            let (slot_pos, slot_raw) = cur
                .ident()
                .ok_or_else(|| cur.error(ParseErrorKind::Expected("slot name")))?;
            let slot = ont.slot(slot_raw).ok_or(ParseError {
                offset: slot_pos,
                kind: ParseErrorKind::UnknownSlot(slot_raw.to_string()),
            })?;
            let value = if cur.eat('=') {
                let value_pos = {
                    cur.skip_ws();
                    cur.pos
                };
                let (raw, quoted) = match cur.peek() {
                    Some('"') => (cur.quoted()?, true),
                    _ => match cur.ident() {
                        Some((_, word)) => (word.to_string(), false),
                        None => return Err(cur.error(ParseErrorKind::Expected("slot value"))),
                    },
                };
                let invalid = || ParseError {
                    offset: value_pos,
                    kind: ParseErrorKind::InvalidValue {
                        slot: slot.name.clone(),
                        value: raw.clone(),
                    },
                };
                let special = match raw.as_str() {
                    "dontcare" => Some(SlotValue::DontCare),
                    "yes" => Some(SlotValue::Yes),
                    "no" => Some(SlotValue::No),
                    _ => None,
                };
                match (slot.kind, special) {
                    (_, Some(SlotValue::DontCare)) if !slot.allows_dontcare => {
                        return Err(invalid())
                    }
                    (_, Some(SlotValue::DontCare)) => SlotValue::DontCare,
                    (SlotKind::Binary, Some(v)) => v,
                    (SlotKind::Binary, None) => return Err(invalid()),
                    (SlotKind::Categorical, _) if !quoted => return Err(invalid()),
                    (SlotKind::Categorical, _) if raw.trim().is_empty() => return Err(invalid()),
                    (SlotKind::Categorical, _) => SlotValue::Categorical(raw.trim().to_string()),
                }
            } else if requests_allowed {
                SlotValue::Requested
            } else {
                return Err(ParseError {
                    offset: slot_pos,
                    kind: ParseErrorKind::RequestNotAllowed(slot.name.clone()),
                });
            };
            da = da.with(slot.name.clone(), value);
            if cur.eat(')') {
                break;
            }
            cur.expect(',', "`,` or `)`")?;
        }
    }
    if cur.peek().is_some() {
        return Err(cur.error(ParseErrorKind::Expected("end of input")));
    }
    Ok(da)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_hotel_example() {
        let h = Ontology::hotel();
        let da = parse_da(r#"inform(type="hotel",count="182",dogsallowed="dontcare")"#, &h).unwrap();
        assert_eq!(da.act_type, "inform");
        assert_eq!(da.bindings.len(), 3);
        assert_eq!(da.value("dogsallowed"), Some(&SlotValue::DontCare));
        assert_eq!(da.value("count"), Some(&SlotValue::Categorical("182".into())));
    }

    #[test]
    fn parses_empty_slot_list() {
        let da = parse_da("goodbye()", &Ontology::restaurant()).unwrap();
        assert_eq!(da.act_type, "goodbye");
        assert!(da.bindings.is_empty());
        assert!(parse_da("  goodbye (  ) ", &Ontology::restaurant()).is_ok());
    }

    #[test]
    fn merges_repeated_slots() {
        let da = parse_da(r#"inform(area="north", area="north")"#, &Ontology::restaurant()).unwrap();
        assert_eq!(da.bindings, vec![("area".into(), SlotValue::Categorical("north".into()))]);
    }

    #[test]
    fn parses_published_examples() {
        let r = Ontology::restaurant();
        let da = parse_da(
            r#"inform(name="red door cafe", goodformeal="breakfast", area="cathedral hill", kidsallowed="no")"#,
            &r,
        )
        .unwrap();
        assert_eq!(da.value("kids-allowed"), Some(&SlotValue::No));
        let da = parse_da(
            r#"informonly(name="dosa on fillmore and kiss seafood", pricerange="expensive", near="lower pacific heights")"#,
            &r,
        )
        .unwrap();
        assert_eq!(da.act_type, "inform_only");
        let h = Ontology::hotel();
        let da = parse_da(
            r#"informonly(name="red victorian bed breakfast",acceptscreditcards="yes",near="haight",hasinternet="yes")"#,
            &h,
        )
        .unwrap();
        assert_eq!(da.value("acceptscards"), Some(&SlotValue::Yes));
    }

    #[test]
    fn reports_error_offsets() {
        let r = Ontology::restaurant();
        let e = parse_da("greet()", &r).unwrap_err();
        assert_eq!(e.offset, 0);
        assert!(matches!(e.kind, ParseErrorKind::UnknownAct(_)));

        let e = parse_da(r#"inform(colour="red")"#, &r).unwrap_err();
        assert_eq!(e.offset, 7);
        assert!(matches!(e.kind, ParseErrorKind::UnknownSlot(_)));

        let e = parse_da(r#"inform(area="north""#, &r).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Expected(_)));

        let e = parse_da(r#"inform(area="north)"#, &r).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Unterminated);
        assert_eq!(e.offset, 12);

        let e = parse_da("inform(area)", &r).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::RequestNotAllowed(_)));

        let e = parse_da("inform(kidsallowed=\"maybe\")", &r).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::InvalidValue { .. }));

        let e = parse_da("inform(name=dontcare)", &r).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::InvalidValue { .. }));

        assert!(parse_da("goodbye() x", &r).is_err());
        assert!(parse_da("", &r).is_err());
    }

    #[test]
    fn requested_slots() {
        let r = Ontology::restaurant();
        let da = parse_da("request(area)", &r).unwrap();
        assert_eq!(da.value("area"), Some(&SlotValue::Requested));
        assert_eq!(da.canonical().0, "request(area=?)");
    }

    #[test]
    fn canonical_erases_categorical_values() {
        let r = Ontology::restaurant();
        let a = parse_da(r#"inform(name="a",area="north",kidsallowed=no)"#, &r).unwrap();
        let b = parse_da(r#"inform(area="south",kidsallowed="no",name="b")"#, &r).unwrap();
        assert_eq!(a.canonical(), b.canonical());
        assert_eq!(a.canonical().0, "inform(area,kids-allowed=no,name)");
    }

    #[test]
    fn render_escapes_quotes() {
        let r = Ontology::restaurant();
        let da = DialogueAct::new("inform").with("name", SlotValue::Categorical("joe's \"best\"".into()));
        assert_eq!(parse_da(&render_da(&da), &r).unwrap(), da);
    }
}
