//! Trains a small generator, then teacher-forces one test sentence and
//! prints how each slot's share of the DA vector decays word by word.
//!
//! cargo run --release --example gate_dynamics -- [epochs]

use sclstm::corpusgen::TemplateSet;
use sclstm::da::{encode_da, DaLayout, Ontology};
use sclstm::experiment::{train_model, Dataset, ModelSpec};
use sclstm::net::{forward_sentence, Dropout};
use sclstm::trainer::TrainConfig;

fn main() -> sclstm::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let ont = Ontology::restaurant();
    let ds = Dataset::synthesize(ont.clone(), &TemplateSet::restaurant(), 800, 1, 0.0, 1)?;
    let spec = ModelSpec {
        hidden: 40,
        ..ModelSpec::default()
    };
    let cfg = TrainConfig {
        max_epochs: epochs,
        ..TrainConfig::default()
    };
    let (model, _) = train_model(&ds, &spec, &cfg, |e| eprintln!("{e}"))?;

    let ex = ds
        .split
        .test
        .iter()
        .max_by_key(|e| e.da.categorical().count())
        .expect("non-empty test split");
    println!("{}\n{}\n", ex.da, ex.delex.text());

    let layout = DaLayout::new(&ont);
    let d0 = encode_da(&ex.da, &ont).0;
    let ids = model.vocab.encode(&ex.delex);
    let trace = forward_sentence(&model.forward, &model.config, &ids[..ids.len() - 1], &d0, Dropout::Off)?;
    let slots: Vec<usize> = (0..ont.slots.len())
        .filter(|&s| layout.slot_group(s).any(|i| d0[i] > 0.0))
        .collect();

    print!("{:<16}", "word");
    for &s in &slots {
        print!("{:>14}", ont.slots[s].name);
    }
    println!();
    for (t, &id) in ids[..ids.len() - 1].iter().enumerate() {
        print!("{:<16}", model.vocab.token(id));
        for &s in &slots {
            // largest remaining feature of this slot after reading the word
            let v = layout.slot_group(s).map(|i| trace.d(t + 1)[i]).fold(0.0, f64::max);
            print!("{v:>14.3}");
        }
        println!();
    }
    Ok(())
}
