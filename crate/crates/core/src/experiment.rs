//! The synthesize, split, train and evaluate pipeline shared by the CLI,
//! the examples and the acceptance run.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpusgen::{synth_corpus, TemplateSet};
use crate::da::corpus::{parse_records, Example};
use crate::da::Ontology;
use crate::decoder::{DecodeConfig, Generator};
use crate::error::Result;
use crate::evaluator::{evaluate, evaluate_knn, EvalReport};
use crate::net::io::SavedModel;
use crate::net::{GatingMode, NetConfig};
use crate::numkit::Rng;
use crate::trainer::{split_3_1_1, train_with_log, EpochLog, SplitCorpus, TrainConfig, TrainHistory};
use crate::vocab::Vocab;

/// A parsed corpus with its 3:1:1 split and the training vocabulary.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub ontology: Ontology,
    pub corpus: Vec<Example>,
    pub split: SplitCorpus,
    pub vocab: Vocab,
}

impl Dataset {
    /// Splits by DA group with `split_seed`; the vocabulary covers the
    /// training split only.
    pub fn from_examples(ontology: Ontology, corpus: Vec<Example>, split_seed: u64) -> Self {
        let split = split_3_1_1(corpus.clone(), &mut Rng::seed(split_seed));
        let vocab = Vocab::build(&ontology, split.train.iter().map(|e| &e.delex));
        Dataset {
            ontology,
            corpus,
            split,
            vocab,
        }
    }

    pub fn synthesize(
        ontology: Ontology,
        templates: &TemplateSet,
        n: usize,
        seed: u64,
        noise_rate: f64,
        split_seed: u64,
    ) -> Result<Self> {
        let records = synth_corpus(&ontology, templates, n, &mut Rng::seed(seed), noise_rate)?;
        let corpus = parse_records(&records, &ontology)?;
        Ok(Dataset::from_examples(ontology, corpus, split_seed))
    }
}

/// Architecture choices that vary between runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub hidden: usize,
    pub layers: usize,
    pub dropout: f64,
    pub gating: GatingMode,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            hidden: 80,
            layers: 1,
            dropout: 0.4,
            gating: GatingMode::Learned,
        }
    }
}

impl ModelSpec {
    pub fn net_config(&self, vocab: &Vocab, ont: &Ontology) -> NetConfig {
        NetConfig::for_domain(vocab, ont)
            .with_hidden(self.hidden)
            .with_layers(self.layers, self.dropout)
            .with_gating(self.gating)
    }
}

/// Trains one forward/backward pair and packages it with its vocabulary.
pub fn train_model(
    ds: &Dataset,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    log: impl FnMut(&EpochLog),
) -> Result<(SavedModel, TrainHistory)> {
    let net_cfg = spec.net_config(&ds.vocab, &ds.ontology);
    let (forward, backward, history) = train_with_log(&ds.split, &ds.vocab, &ds.ontology, &net_cfg, cfg, log)?;
    let mut meta = BTreeMap::new();
    meta.insert("seed".to_string(), cfg.seed.to_string());
    meta.insert("best_epoch".to_string(), history.best_epoch.to_string());
    meta.insert("gating".to_string(), spec.gating.to_string());
    Ok((
        SavedModel {
            config: net_cfg,
            forward,
            backward,
            vocab: ds.vocab.clone(),
            ontology: ds.ontology.clone(),
            meta,
        },
        history,
    ))
}

pub fn generator<'a>(model: &'a SavedModel, penalty: &TrainConfig) -> Generator<'a> {
    Generator {
        forward: &model.forward,
        backward: &model.backward,
        config: &model.config,
        vocab: &model.vocab,
        ontology: &model.ontology,
        penalty: penalty.penalty(),
    }
}

/// Reranked generation for every test DA, scored against the corpus.
pub fn evaluate_model(
    model: &SavedModel,
    ds: &Dataset,
    tcfg: &TrainConfig,
    dcfg: &DecodeConfig,
    seed: u64,
) -> Result<EvalReport> {
    evaluate(&generator(model, tcfg), &ds.split.test, &ds.corpus, dcfg, &mut Rng::seed(seed))
}

pub fn evaluate_baseline(ds: &Dataset) -> Result<EvalReport> {
    evaluate_knn(&ds.split.train, &ds.split.test, &ds.corpus, &ds.ontology)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub bleu4: f64,
    pub bleu4_top5_mean: f64,
    pub corpus_err_percent: f64,
}

/// Metrics per seed and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeedReport {
    pub label: String,
    pub per_seed: Vec<SeedResult>,
}

impl MultiSeedReport {
    pub fn push(&mut self, seed: u64, r: &EvalReport) {
        self.per_seed.push(SeedResult {
            seed,
            bleu4: r.bleu4,
            bleu4_top5_mean: r.bleu4_top5_mean,
            corpus_err_percent: r.corpus_err_percent,
        });
    }

    pub fn mean(&self) -> SeedResult {
        let n = self.per_seed.len().max(1) as f64;
        let avg = |f: fn(&SeedResult) -> f64| self.per_seed.iter().map(f).sum::<f64>() / n;
        SeedResult {
            seed: 0,
            bleu4: avg(|r| r.bleu4),
            bleu4_top5_mean: avg(|r| r.bleu4_top5_mean),
            corpus_err_percent: avg(|r| r.corpus_err_percent),
        }
    }
}

impl fmt::Display for MultiSeedReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}]", self.label)?;
        writeln!(f, "{:<8}{:>10}{:>12}{:>10}", "seed", "bleu4", "bleu4@5", "err%")?;
        for r in &self.per_seed {
            writeln!(
                f,
                "{:<8}{:>10.4}{:>12.4}{:>10.3}",
                r.seed, r.bleu4, r.bleu4_top5_mean, r.corpus_err_percent
            )?;
        }
        let m = self.mean();
        write!(
            f,
            "{:<8}{:>10.4}{:>12.4}{:>10.3}",
            "mean", m.bleu4, m.bleu4_top5_mean, m.corpus_err_percent
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_mean_and_layout() {
        let mut r = MultiSeedReport {
            label: "sc-lstm".into(),
            per_seed: vec![],
        };
        let e = |b, err| EvalReport {
            bleu4: b,
            bleu4_top5_mean: b,
            corpus_err_percent: err,
            details: vec![],
        };
        r.push(1, &e(0.5, 1.0));
        r.push(2, &e(0.7, 3.0));
        let m = r.mean();
        assert!((m.bleu4 - 0.6).abs() < 1e-15 && (m.corpus_err_percent - 2.0).abs() < 1e-15);
        let text = r.to_string();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().last().unwrap().starts_with("mean"));
    }

    #[test]
    fn dataset_vocab_comes_from_train() {
        let ds = Dataset::synthesize(Ontology::restaurant(), &TemplateSet::restaurant(), 200, 1, 0.0, 1).unwrap();
        assert_eq!(ds.split.len(), 200);
        for e in &ds.split.train {
            assert!(ds.vocab.encode(&e.delex).iter().all(|&i| i != Vocab::UNK));
        }
    }
}
