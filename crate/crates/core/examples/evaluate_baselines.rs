//! Scores the nearest-neighbour baseline and the gold test sentences
//! themselves on the same split, as reference points for trained models.
//!
//! cargo run --release --example evaluate_baselines -- [restaurant|hotel] [n]

use sclstm::corpusgen::TemplateSet;
use sclstm::da::Ontology;
use sclstm::evaluator::{build_references, score_realisations, KnnBaseline};
use sclstm::experiment::Dataset;

fn main() -> sclstm::Result<()> {
    let mut args = std::env::args().skip(1);
    let domain = args.next().unwrap_or_else(|| "restaurant".into());
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(2000);
    let ont = Ontology::preset(&domain).expect("restaurant or hotel");
    let templates = TemplateSet::preset(&domain).expect("bundled templates");
    let ds = Dataset::synthesize(ont.clone(), &templates, n, 1, 0.0, 1)?;
    let test = &ds.split.test;
    let das: Vec<_> = test.iter().map(|e| e.da.clone()).collect();
    let refs = build_references(test, &ds.corpus);
    println!(
        "{} test sentences, {} with only their own reference",
        test.len(),
        refs.iter().filter(|r| r.fallback).count()
    );

    let knn = KnnBaseline::new(&ds.split.train, &ont)?;
    let knn_out: Vec<_> = das.iter().map(|da| vec![knn.generate(da)]).collect();
    let gold: Vec<_> = test.iter().map(|e| vec![e.delex.clone()]).collect();

    for (name, outs) in [("knn", &knn_out), ("gold", &gold)] {
        let r = score_realisations(test, outs, &refs, &ont)?;
        println!("{name:<6} bleu4 {:.4}  err% {:.3}", r.bleu4, r.corpus_err_percent);
    }
    Ok(())
}
