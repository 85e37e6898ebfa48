use super::act::{DialogueAct, SlotValue};
use super::ontology::Ontology;

/// Per-slot feature positions inside a slot's group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Mentioned = 0,
    DontCare = 1,
    Yes = 2,
    No = 3,
    Requested = 4,
}

pub const FEATURES_PER_SLOT: usize = 5;

/// Binary control vector for one DA.
#[derive(Debug, Clone, PartialEq)]
pub struct DaVector(pub Vec<f64>);

impl DaVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Layout: `|act_types|` one-hot entries, then one group of
/// [`FEATURES_PER_SLOT`] entries per slot in ontology order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DaLayout {
    pub num_acts: usize,
    pub num_slots: usize,
}

impl DaLayout {
    pub fn new(ont: &Ontology) -> Self {
        DaLayout {
            num_acts: ont.act_types.len(),
            num_slots: ont.slots.len(),
        }
    }

    pub fn dim(&self) -> usize {
        self.num_acts + FEATURES_PER_SLOT * self.num_slots
    }

    pub fn slot_offset(&self, slot: usize) -> usize {
        self.num_acts + FEATURES_PER_SLOT * slot
    }

    pub fn feature(&self, slot: usize, f: Feature) -> usize {
        self.slot_offset(slot) + f as usize
    }

    pub fn slot_group(&self, slot: usize) -> std::ops::Range<usize> {
        let o = self.slot_offset(slot);
        o..o + FEATURES_PER_SLOT
    }
}

/// Encodes a DA that is valid for `ont`. Unknown names are skipped.
pub fn encode_da(da: &DialogueAct, ont: &Ontology) -> DaVector {
    let layout = DaLayout::new(ont);
    let mut v = vec![0.0; layout.dim()];
    if let Some(a) = ont.act_index(&da.act_type) {
        v[a] = 1.0;
    }
    for (slot, value) in &da.bindings {
        let Some(s) = ont.slot_index(slot) else {
            continue;
        };
        v[layout.feature(s, Feature::Mentioned)] = 1.0;
        let special = match value {
            SlotValue::Categorical(_) => None,
            SlotValue::DontCare => Some(Feature::DontCare),
            SlotValue::Yes => Some(Feature::Yes),
            SlotValue::No => Some(Feature::No),
            SlotValue::Requested => Some(Feature::Requested),
        };
        if let Some(f) = special {
            v[layout.feature(s, f)] = 1.0;
        }
    }
    DaVector(v)
}
