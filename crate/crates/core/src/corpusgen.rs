//! Synthetic (DA, utterance) corpora from surface templates.
//!
//! A template file holds value inventories, weighted DA shapes, sentence
//! frames per act type and phrases per slot. Frames use `{slot}` for a
//! value, `{slots}` for the phrases of all remaining bindings and `(a|b)`
//! for paraphrase alternatives.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::da::corpus::CorpusRecord;
use crate::da::{render_da, DialogueAct, Ontology, SlotKind, SlotValue};
use crate::error::{Error, Result};
use crate::numkit::Rng;

const RESTAURANT: &str = include_str!("../data/templates/restaurant.toml");
const HOTEL: &str = include_str!("../data/templates/hotel.toml");

/// One weighted DA shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub act: String,
    pub weight: f64,
    #[serde(default)]
    pub required: Vec<String>,
    #[serde(default)]
    pub pool: BTreeMap<String, f64>,
    /// `sizes[k]`: probability of adding `k` pool slots.
    #[serde(default)]
    pub sizes: Vec<f64>,
    /// Chance that a pool slot allowing it is bound to dontcare. A DA gets
    /// at most one dontcare binding.
    #[serde(default)]
    pub dontcare: f64,
    /// Pool slots are requested instead of valued.
    #[serde(default)]
    pub requested: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub act: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotPhrases {
    #[serde(default)]
    pub value: Vec<String>,
    #[serde(default)]
    pub yes: Vec<String>,
    #[serde(default)]
    pub no: Vec<String>,
    #[serde(default)]
    pub dontcare: Vec<String>,
    #[serde(default)]
    pub requested: Vec<String>,
}

impl SlotPhrases {
    fn for_value(&self, v: &SlotValue) -> &[String] {
        match v {
            SlotValue::Categorical(_) => &self.value,
            SlotValue::Yes => &self.yes,
            SlotValue::No => &self.no,
            SlotValue::DontCare => &self.dontcare,
            SlotValue::Requested => &self.requested,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub domain: String,
    pub entity: String,
    pub values: BTreeMap<String, Vec<String>>,
    pub sampler: Vec<SamplerSpec>,
    pub frame: Vec<Frame>,
    pub slot: BTreeMap<String, SlotPhrases>,
    #[serde(default)]
    pub synonyms: BTreeMap<String, String>,
}

/// A piece of template text after alternatives are resolved.
#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Words(String),
    Slot(String),
    Slots,
}

/// Splits `text` into literal runs and `{...}` placeholders.
fn placeholders(text: &str) -> std::result::Result<Vec<Piece>, String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push(Piece::Words(rest[..open].to_string()));
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| "unclosed `{`".to_string())?
            + open;
        let name = rest[open + 1..close].trim();
        out.push(if name == "slots" {
            Piece::Slots
        } else {
            Piece::Slot(name.to_string())
        });
        rest = &rest[close + 1..];
    }
    out.push(Piece::Words(rest.to_string()));
    Ok(out)
}

/// Resolves `(a|b)` groups, choosing uniformly; groups may nest.
fn expand(text: &str, rng: &mut Rng) -> std::result::Result<String, String> {
    fn group(chars: &[char], pos: &mut usize, rng: &mut Option<&mut Rng>) -> std::result::Result<String, String> {
        // called just after `(`
        let mut options = vec![String::new()];
        while *pos < chars.len() {
            let c = chars[*pos];
            *pos += 1;
            match c {
                '(' => {
                    let inner = group(chars, pos, rng)?;
                    options.last_mut().unwrap().push_str(&inner);
                }
                '|' => options.push(String::new()),
                ')' => {
                    let k = match rng {
                        Some(r) => r.below(options.len()),
                        None => 0,
                    };
                    return Ok(options.swap_remove(k));
                }
                _ => options.last_mut().unwrap().push(c),
            }
        }
        Err("unclosed `(`".into())
    }
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::new();
    let mut pos = 0;
    let mut r = Some(rng);
    while pos < chars.len() {
        let c = chars[pos];
        pos += 1;
        match c {
            '(' => out.push_str(&group(&chars, &mut pos, &mut r)?),
            ')' => return Err("unmatched `)`".into()),
            '|' => return Err("`|` outside a group".into()),
            _ => out.push(c),
        }
    }
    Ok(out)
}

fn check_syntax(text: &str) -> std::result::Result<Vec<Piece>, String> {
    expand(text, &mut Rng::seed(0))?;
    placeholders(text)
}

impl TemplateSet {
    pub fn restaurant() -> Self {
        Self::from_toml(RESTAURANT).expect("bundled restaurant templates are valid")
    }

    pub fn hotel() -> Self {
        Self::from_toml(HOTEL).expect("bundled hotel templates are valid")
    }

    pub fn preset(domain: &str) -> Option<Self> {
        match domain {
            "restaurant" => Some(Self::restaurant()),
            "hotel" => Some(Self::hotel()),
            _ => None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Input(format!("template file: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    fn bad(template: &str, reason: impl Into<String>) -> Error {
        Error::Template {
            template: template.to_string(),
            reason: reason.into(),
        }
    }

    /// Checks every name against the ontology and that the sampler can only
    /// produce DAs the frames and phrases can render.
    pub fn validate(&self, ont: &Ontology) -> Result<()> {
        let known_slot = |s: &str| ont.slot(s).is_some();
        for (slot, vals) in &self.values {
            if !known_slot(slot) {
                return Err(Self::bad(&format!("values.{slot}"), "unknown slot"));
            }
            if vals.is_empty() {
                return Err(Self::bad(&format!("values.{slot}"), "empty inventory"));
            }
        }
        for f in &self.frame {
            if ont.act_index(&f.act).is_none() {
                return Err(Self::bad(&f.text, format!("unknown act type `{}`", f.act)));
            }
            for p in check_syntax(&f.text).map_err(|r| Self::bad(&f.text, r))? {
                if let Piece::Slot(s) = p {
                    if !known_slot(&s) {
                        return Err(Self::bad(&f.text, format!("unknown slot `{s}`")));
                    }
                }
            }
        }
        for (slot, ph) in &self.slot {
            if !known_slot(slot) {
                return Err(Self::bad(&format!("slot.{slot}"), "unknown slot"));
            }
            for text in [&ph.value, &ph.yes, &ph.no, &ph.dontcare, &ph.requested]
                .into_iter()
                .flatten()
            {
                for p in check_syntax(text).map_err(|r| Self::bad(text, r))? {
                    match p {
                        Piece::Slot(s) if s != *slot => {
                            return Err(Self::bad(text, format!("phrase for `{slot}` names `{s}`")))
                        }
                        Piece::Slots => return Err(Self::bad(text, "`{slots}` inside a slot phrase")),
                        _ => {}
                    }
                }
            }
        }
        for s in &self.sampler {
            let name = format!("sampler `{}`", s.act);
            if ont.act_index(&s.act).is_none() {
                return Err(Self::bad(&name, "unknown act type"));
            }
            if s.weight.is_nan() || s.weight <= 0.0 {
                return Err(Self::bad(&name, "weight must be positive"));
            }
            if !s.sizes.is_empty() && ((s.sizes.iter().sum::<f64>() - 1.0).abs() > 1e-9 || s.sizes.len() > s.pool.len() + 1)
            {
                return Err(Self::bad(&name, "sizes must sum to 1 and not exceed the pool"));
            }
            let frames = self.frame.iter().filter(|f| f.act == s.act).count();
            if frames == 0 {
                return Err(Self::bad(&name, "no frame for this act type"));
            }
            if s.weight >= 0.1 && frames < 2 {
                return Err(Self::bad(&name, "frequent act types need at least two frames"));
            }
            for slot in s.required.iter().chain(s.pool.keys()) {
                let def = ont
                    .slot(slot)
                    .ok_or_else(|| Self::bad(&name, format!("unknown slot `{slot}`")))?;
                let ph = self.slot.get(&def.name);
                let has = |v: &[String]| !v.is_empty();
                let ok = match (def.kind, s.requested && !s.required.contains(slot)) {
                    (_, true) => ph.is_some_and(|p| has(&p.requested)),
                    (SlotKind::Binary, false) => ph.is_some_and(|p| has(&p.yes) && has(&p.no)),
                    (SlotKind::Categorical, false) => {
                        self.values.get(&def.name).is_some_and(|v| !v.is_empty())
                    }
                };
                if !ok {
                    return Err(Self::bad(&name, format!("slot `{slot}` has no values or phrases")));
                }
            }
        }
        Ok(())
    }

    fn sample_da(&self, ont: &Ontology, rng: &mut Rng) -> DialogueAct {
        let weights: Vec<f64> = self.sampler.iter().map(|s| s.weight).collect();
        let spec = &self.sampler[pick_weighted(&weights, rng)];
        let mut da = DialogueAct::new(spec.act.clone());
        let bind = |da: DialogueAct, slot: &str, requested: bool, dontcare: f64, rng: &mut Rng| {
            let def = ont.slot(slot).expect("validated slot");
            let value = if requested {
                SlotValue::Requested
            } else if def.allows_dontcare && dontcare > 0.0 && rng.bernoulli(dontcare) {
                SlotValue::DontCare
            } else if def.kind == SlotKind::Binary {
                if rng.bernoulli(0.5) {
                    SlotValue::Yes
                } else {
                    SlotValue::No
                }
            } else {
                let vals = &self.values[&def.name];
                SlotValue::Categorical(vals[rng.below(vals.len())].clone())
            };
            da.with(def.name.clone(), value)
        };
        for slot in &spec.required {
            da = bind(da, slot, false, 0.0, rng);
        }
        let k = if spec.sizes.is_empty() {
            0
        } else {
            pick_weighted(&spec.sizes, rng)
        };
        let mut pool: Vec<(&String, f64)> = spec
            .pool
            .iter()
            .filter(|(s, _)| !spec.required.contains(s))
            .map(|(s, w)| (s, *w))
            .collect();
        for _ in 0..k.min(pool.len()) {
            let i = pick_weighted(&pool.iter().map(|p| p.1).collect::<Vec<_>>(), rng);
            let (slot, _) = pool.remove(i);
            // at most one dontcare per DA
            let dc = if da.bindings.iter().any(|(_, v)| *v == SlotValue::DontCare) {
                0.0
            } else {
                spec.dontcare
            };
            da = bind(da, slot, spec.requested, dc, rng);
        }
        da
    }

    fn phrase(&self, slot: &str, value: &SlotValue, rng: &mut Rng) -> Result<Vec<(String, bool)>> {
        let options = self
            .slot
            .get(slot)
            .map(|p| p.for_value(value))
            .unwrap_or_default();
        if options.is_empty() {
            return Err(Self::bad(&format!("slot.{slot}"), format!("no phrase for {value:?}")));
        }
        let text = &options[rng.below(options.len())];
        let expanded = expand(text, rng).map_err(|r| Self::bad(text, r))?;
        let mut out = Vec::new();
        for p in placeholders(&expanded).map_err(|r| Self::bad(text, r))? {
            match p {
                Piece::Words(w) => out.push((w, false)),
                Piece::Slot(_) => match value {
                    SlotValue::Categorical(v) => out.push((v.clone(), true)),
                    _ => return Err(Self::bad(text, format!("`{slot}` has no value to fill"))),
                },
                Piece::Slots => unreachable!("rejected by validate"),
            }
        }
        Ok(out)
    }

    /// Renders `da` with one specific frame text.
    pub fn render_with(&self, frame: &str, da: &DialogueAct, rng: &mut Rng) -> Result<String> {
        let expanded = expand(frame, rng).map_err(|r| Self::bad(frame, r))?;
        let pieces = placeholders(&expanded).map_err(|r| Self::bad(frame, r))?;
        let named: BTreeSet<String> = pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(crate::da::normalize_ident(s)),
                _ => None,
            })
            .collect();
        let mut rest: Vec<&(String, SlotValue)> = da
            .bindings
            .iter()
            .filter(|(s, _)| !named.contains(&crate::da::normalize_ident(s)))
            .collect();
        if !rest.is_empty() && !pieces.contains(&Piece::Slots) {
            return Err(Self::bad(frame, format!("does not express slot `{}`", rest[0].0)));
        }
        rng.shuffle(&mut rest);

        let mut out: Vec<(String, bool)> = Vec::new();
        for p in pieces {
            match p {
                Piece::Words(w) => out.push((w, false)),
                Piece::Slot(s) => match da.value(&s) {
                    Some(SlotValue::Categorical(v)) => out.push((v.clone(), true)),
                    _ => return Err(Self::bad(frame, format!("slot `{s}` is not bound to a value"))),
                },
                Piece::Slots => {
                    let n = rest.len();
                    for (i, (slot, value)) in rest.iter().enumerate() {
                        if i > 0 {
                            let sep = if i + 1 == n { " and " } else { " , " };
                            out.push((sep.to_string(), false));
                        }
                        out.extend(self.phrase(slot, value, rng)?);
                    }
                }
            }
        }
        let words: Vec<String> = out
            .iter()
            .flat_map(|(t, _)| t.split_whitespace().map(String::from))
            .collect();
        Ok(words.join(" "))
    }

    /// Renders `da` with a random fitting frame; `noise_rate` is the chance
    /// of one synonym swap on template words.
    pub fn render(&self, da: &DialogueAct, rng: &mut Rng, noise_rate: f64) -> Result<String> {
        let fits: Vec<&Frame> = self
            .frame
            .iter()
            .filter(|f| f.act == da.act_type && self.frame_fits(&f.text, da))
            .collect();
        if fits.is_empty() {
            return Err(Self::bad(&da.act_type, format!("no frame fits `{da}`")));
        }
        let frame = fits[rng.below(fits.len())];
        let text = self.render_with(&frame.text, da, rng)?;
        if noise_rate > 0.0 && rng.bernoulli(noise_rate) {
            return Ok(self.add_noise(&text, da, rng));
        }
        Ok(text)
    }

    fn frame_fits(&self, text: &str, da: &DialogueAct) -> bool {
        let Ok(pieces) = placeholders(text) else {
            return false;
        };
        let mut named = 0;
        for p in &pieces {
            if let Piece::Slot(s) = p {
                if !matches!(da.value(s), Some(SlotValue::Categorical(_))) {
                    return false;
                }
                named += 1;
            }
        }
        pieces.contains(&Piece::Slots) || named == da.bindings.len()
    }

    /// Swaps one word that has a synonym and is not part of a slot value.
    fn add_noise(&self, text: &str, da: &DialogueAct, rng: &mut Rng) -> String {
        let value_words: BTreeSet<&str> = da
            .categorical()
            .flat_map(|(_, v)| v.split_whitespace())
            .collect();
        let mut words: Vec<String> = text.split_whitespace().map(String::from).collect();
        let candidates: Vec<usize> = (0..words.len())
            .filter(|&i| self.synonyms.contains_key(&words[i]) && !value_words.contains(words[i].as_str()))
            .collect();
        if let Some(&i) = rng.choose(&candidates) {
            words[i] = self.synonyms[&words[i]].clone();
        }
        words.join(" ")
    }
}

/// Index drawn with probability proportional to `weights`.
fn pick_weighted(weights: &[f64], rng: &mut Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.next_f64() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Samples `n` dialogue acts and renders each with a random fitting frame.
pub fn synth_corpus(
    ont: &Ontology,
    templates: &TemplateSet,
    n: usize,
    rng: &mut Rng,
    noise_rate: f64,
) -> Result<Vec<CorpusRecord>> {
    if n == 0 {
        return Err(Error::Input("corpus size must be positive".into()));
    }
    templates.validate(ont)?;
    (0..n)
        .map(|_| {
            let da = templates.sample_da(ont, rng);
            let text = templates.render(&da, rng, noise_rate)?;
            Ok(CorpusRecord {
                da: render_da(&da),
                text,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentences: usize,
    pub distinct_das: usize,
    pub mean_slots_per_da: f64,
}

pub fn corpus_stats<'a>(das: impl IntoIterator<Item = &'a DialogueAct>) -> CorpusStats {
    let mut distinct = BTreeSet::new();
    let (mut n, mut slots) = (0usize, 0usize);
    for da in das {
        distinct.insert(da.canonical());
        n += 1;
        slots += da.bindings.len();
    }
    CorpusStats {
        sentences: n,
        distinct_das: distinct.len(),
        mean_slots_per_da: if n == 0 { 0.0 } else { slots as f64 / n as f64 },
    }
}
