mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use sclstm::da::{
    delexicalise, encode_da, parse_da, render_da, slot_token, DaLayout, DialogueAct, Feature, Ontology, SlotKind,
    SlotValue,
};
use sclstm::numkit::Rng;

fn onts() -> [Ontology; 2] {
    [Ontology::restaurant(), Ontology::hotel()]
}

proptest! {
    #[test]
    fn render_then_parse_is_identity(seed in 0u64..100_000, hotel in any::<bool>()) {
        let ont = if hotel { Ontology::hotel() } else { Ontology::restaurant() };
        let da = common::random_da(&ont, &mut Rng::seed(seed));
        let back = parse_da(&render_da(&da), &ont).unwrap();
        prop_assert_eq!(back, da);
    }

    #[test]
    fn quoted_values_survive(value in "[a-z\"\\\\,()=][a-z\"\\\\ ,()=]{0,10}[a-z\"]") {
        let ont = Ontology::restaurant();
        let da = DialogueAct::new("inform").with("name", SlotValue::Categorical(value));
        prop_assert_eq!(parse_da(&render_da(&da), &ont).unwrap(), da);
    }

    #[test]
    fn parser_never_panics(text in "\\PC{0,40}") {
        let _ = parse_da(&text, &Ontology::restaurant());
    }
}

#[test]
fn one_act_bit_and_consistent_slot_groups() {
    for ont in onts() {
        let layout = DaLayout::new(&ont);
        let mut rng = Rng::seed(11);
        for _ in 0..2000 {
            let da = common::random_da(&ont, &mut rng);
            let v = encode_da(&da, &ont);
            assert_eq!(v.len(), layout.dim());
            assert!(v.as_slice().iter().all(|&x| x == 0.0 || x == 1.0));
            assert_eq!(v.as_slice()[..layout.num_acts].iter().sum::<f64>(), 1.0);
            for (s, def) in ont.slots.iter().enumerate() {
                let g = &v.as_slice()[layout.slot_group(s)];
                match da.value(&def.name) {
                    None => assert!(g.iter().all(|&x| x == 0.0)),
                    Some(val) => {
                        assert_eq!(g[Feature::Mentioned as usize], 1.0);
                        let special = match val {
                            SlotValue::Categorical(_) => None,
                            SlotValue::DontCare => Some(Feature::DontCare),
                            SlotValue::Yes => Some(Feature::Yes),
                            SlotValue::No => Some(Feature::No),
                            SlotValue::Requested => Some(Feature::Requested),
                        };
                        let lit = g[1..].iter().filter(|&&x| x == 1.0).count();
                        assert_eq!(lit, special.is_some() as usize);
                        if let Some(f) = special {
                            assert_eq!(g[f as usize], 1.0);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn distinct_canonical_forms_encode_distinctly() {
    let ont = Ontology::restaurant();
    let mut rng = Rng::seed(12);
    let mut seen: HashMap<Vec<u8>, String> = HashMap::new();
    for _ in 0..5000 {
        let da = common::random_da(&ont, &mut rng);
        let key: Vec<u8> = encode_da(&da, &ont).as_slice().iter().map(|&x| x as u8).collect();
        let canon = da.canonical().0;
        if let Some(prev) = seen.insert(key, canon.clone()) {
            assert_eq!(prev, canon);
        }
    }
}

#[test]
fn delexicalisation_only_emits_bound_slots() {
    let ont = Ontology::restaurant();
    let mut rng = Rng::seed(13);
    let words = ["the", "v1", "v2", "v3", "cheap", "food", "near", "it", "is"];
    for _ in 0..2000 {
        let da = common::random_da(&ont, &mut rng);
        let text: Vec<&str> = (0..rng.below(12)).map(|_| words[rng.below(words.len())]).collect();
        let d = delexicalise(&text.join(" "), &da, &ont);
        for tok in d.utterance.body() {
            if let Some(def) = ont.slots.iter().find(|s| slot_token(&s.name) == *tok) {
                assert_eq!(def.kind, SlotKind::Categorical);
                assert!(matches!(da.value(&def.name), Some(SlotValue::Categorical(_))), "{tok} for {da}");
            }
        }
    }
}

#[test]
fn malformed_das_are_rejected() {
    let ont = Ontology::restaurant();
    for bad in [
        "",
        "inform",
        "inform(",
        "inform(name=\"x\"",
        "dance(name=\"x\")",
        "inform(colour=\"red\")",
        "inform(food)",
        "inform(kids-allowed=\"maybe\")",
        "inform(name=\"x\")trailing",
        "inform(name=\"unterminated)",
    ] {
        assert!(parse_da(bad, &ont).is_err(), "accepted {bad:?}");
    }
}
