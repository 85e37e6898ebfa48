//! Corpus BLEU-4 on hand-written hypotheses with multiple references, with
//! and without add-one smoothing.
//!
//! cargo run --example bleu_scoring

use sclstm::da::tokenize;
use sclstm::evaluator::{bleu4_with, Smoothing};

fn main() -> sclstm::Result<()> {
    let cases: [(&str, &[&str]); 3] = [
        (
            "koi garden is a nice restaurant serving thai food .",
            &[
                "koi garden is a nice restaurant serving thai food .",
                "koi garden serves thai food .",
            ],
        ),
        (
            "casa mia is in the mission area .",
            &["casa mia is a place in the mission area .", "casa mia is in the mission area and is cheap ."],
        ),
        ("sorry , no restaurant .", &["sorry , there is no restaurant near city hall ."]),
    ];
    let hyps: Vec<Vec<String>> = cases.iter().map(|(h, _)| tokenize(h)).collect();
    let refs: Vec<Vec<Vec<String>>> = cases.iter().map(|(_, rs)| rs.iter().map(|r| tokenize(r)).collect()).collect();

    for (i, (h, r)) in hyps.iter().zip(&refs).enumerate() {
        let one = bleu4_with(std::slice::from_ref(h), std::slice::from_ref(r), Smoothing::None)?;
        let smooth = bleu4_with(std::slice::from_ref(h), std::slice::from_ref(r), Smoothing::AddOne)?;
        println!("sentence {i}: bleu4 {one:.4}  add-one {smooth:.4}");
    }
    println!("corpus:     bleu4 {:.4}", bleu4_with(&hyps, &refs, Smoothing::None)?);
    Ok(())
}
