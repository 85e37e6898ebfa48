//! Dialogue-act ontology, DA grammar, control-vector encoding and
//! (de)lexicalisation.

mod act;
pub mod corpus;
mod delex;
mod encode;
mod ontology;

pub use act::{parse_da, render_da, CanonicalDa, DialogueAct, ParseError, ParseErrorKind, SlotValue};
pub use delex::{
    delexicalise, group_references, lexicalise, tokenize, DelexUtterance, Delexicalised,
    Lexicalised, BOS, EOS,
};
pub use encode::{encode_da, DaLayout, DaVector, Feature, FEATURES_PER_SLOT};
pub use ontology::{normalize_ident, slot_token, Ontology, SlotDef, SlotKind};
