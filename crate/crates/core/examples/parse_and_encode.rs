//! Parses dialogue acts, prints their canonical form and control vector,
//! and delexicalises a sentence against each.
//!
//! cargo run --example parse_and_encode -- 'inform(name="koi garden",food="thai")'

use sclstm::da::{delexicalise, encode_da, lexicalise, parse_da, DaLayout, Feature, Ontology};

fn main() {
    let ont = Ontology::restaurant();
    let mut inputs: Vec<String> = std::env::args().skip(1).collect();
    if inputs.is_empty() {
        inputs = vec![
            r#"inform(name="koi garden",food="thai",pricerange=dontcare)"#.into(),
            r#"request(area)"#.into(),
            r#"inform_only(name="casa mia",kids-allowed=no)"#.into(),
            r#"inform(name="casa mia""#.into(),
        ];
    }
    let layout = DaLayout::new(&ont);
    for text in &inputs {
        let da = match parse_da(text, &ont) {
            Ok(da) => da,
            Err(e) => {
                println!("{text}\n  error: {e}\n");
                continue;
            }
        };
        println!("{da}\n  canonical {}", da.canonical());
        let v = encode_da(&da, &ont);
        let on: Vec<String> = v
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &x)| x == 1.0)
            .map(|(i, _)| describe(i, &layout, &ont))
            .collect();
        println!("  d0 has {} of {} bits set: {}", on.len(), v.len(), on.join(" "));

        let sentence = da
            .categorical()
            .map(|(s, v)| format!("the {s} is {v}"))
            .collect::<Vec<_>>()
            .join(" and ");
        if !sentence.is_empty() {
            let d = delexicalise(&sentence, &da, &ont);
            println!("  delex    {}", d.utterance.text());
            println!("  relex    {}", lexicalise(&d.utterance, &da).text);
        }
        println!();
    }
}

fn describe(i: usize, layout: &DaLayout, ont: &Ontology) -> String {
    if i < layout.num_acts {
        return format!("act:{}", ont.act_types[i]);
    }
    let slot = (i - layout.num_acts) / sclstm::da::FEATURES_PER_SLOT;
    let kind = match (i - layout.num_acts) % sclstm::da::FEATURES_PER_SLOT {
        k if k == Feature::Mentioned as usize => "",
        k if k == Feature::DontCare as usize => "=dontcare",
        k if k == Feature::Yes as usize => "=yes",
        k if k == Feature::No as usize => "=no",
        _ => "=?",
    };
    format!("{}{kind}", ont.slots[slot].name)
}
