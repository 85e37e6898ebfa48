//! Synthesizes a restaurant corpus, trains a one-layer generator and prints
//! reranked realisations for a few held-out DAs plus the test metrics.
//!
//! cargo run --release --example train_and_generate -- [n_sentences] [hidden]

use std::time::Instant;

use sclstm::corpusgen::TemplateSet;
use sclstm::da::Ontology;
use sclstm::decoder::DecodeConfig;
use sclstm::experiment::{evaluate_baseline, evaluate_model, generator, train_model, Dataset, ModelSpec};
use sclstm::numkit::Rng;
use sclstm::trainer::TrainConfig;

fn main() -> sclstm::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(2000);
    let hidden: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(80);

    let t0 = Instant::now();
    let ds = Dataset::synthesize(Ontology::restaurant(), &TemplateSet::restaurant(), n, 1, 0.0, 1)?;
    println!(
        "train {} / valid {} / test {} sentences, vocab {}",
        ds.split.train.len(),
        ds.split.valid.len(),
        ds.split.test.len(),
        ds.vocab.len()
    );

    let spec = ModelSpec {
        hidden,
        ..ModelSpec::default()
    };
    let tcfg = TrainConfig::default();
    let (model, history) = train_model(&ds, &spec, &tcfg, |e| println!("{e}"))?;
    println!("best epoch {} after {:.1?}", history.best_epoch, t0.elapsed());

    let dcfg = DecodeConfig::default();
    let gen = generator(&model, &tcfg);
    let mut rng = Rng::seed(7);
    for ex in ds.split.test.iter().take(3) {
        println!("\n{}", ex.da);
        for c in gen.rerank(&ex.da, &dcfg, &mut rng)? {
            let text = sclstm::da::lexicalise(&c.tokens, &ex.da).text;
            println!("  {:>9.3}  err {:.2}  {text}", c.score, c.err);
        }
    }

    let report = evaluate_model(&model, &ds, &tcfg, &dcfg, 1)?;
    let knn = evaluate_baseline(&ds)?;
    println!(
        "\nsc-lstm  bleu4 {:.4}  err {:.3}%\nknn      bleu4 {:.4}  err {:.3}%\ntotal {:.1?}",
        report.bleu4,
        report.corpus_err_percent,
        knn.bleu4,
        knn.corpus_err_percent,
        t0.elapsed()
    );
    Ok(())
}
