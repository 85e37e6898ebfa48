//! Generates a synthetic corpus from the bundled templates and prints a
//! few records with the corpus statistics.
//!
//! cargo run --example synthesize_corpus -- [restaurant|hotel] [n] [noise_rate]

use sclstm::corpusgen::{corpus_stats, synth_corpus, TemplateSet};
use sclstm::da::{parse_da, Ontology};
use sclstm::numkit::Rng;

fn main() -> sclstm::Result<()> {
    let mut args = std::env::args().skip(1);
    let domain = args.next().unwrap_or_else(|| "restaurant".into());
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(2000);
    let noise: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.0);

    let ont = Ontology::preset(&domain).expect("domain is restaurant or hotel");
    let templates = TemplateSet::preset(&domain).expect("bundled templates");
    let records = synth_corpus(&ont, &templates, n, &mut Rng::seed(1), noise)?;
    for r in records.iter().take(8) {
        println!("{}\n    {}", r.da, r.text);
    }
    let das: Vec<_> = records.iter().map(|r| parse_da(&r.da, &ont).unwrap()).collect();
    let stats = corpus_stats(&das);
    println!(
        "\n{} sentences, {} distinct DAs, {:.2} slots per DA",
        stats.sentences, stats.distinct_das, stats.mean_slots_per_da
    );
    Ok(())
}
