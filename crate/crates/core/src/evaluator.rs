//! Corpus BLEU-4, corpus slot error rate and the nearest-neighbour baseline.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::da::corpus::Example;
use crate::da::{
    encode_da, group_references, lexicalise, tokenize, CanonicalDa, DelexUtterance, DialogueAct,
    Ontology,
};
use crate::decoder::{slot_error_rate, DecodeConfig, Generator};
use crate::error::{Error, Result};
use crate::numkit::{dot, norm2, Rng};

/// How to treat n-gram orders with no matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Smoothing {
    /// Exact zeros: any empty order makes the score 0.
    #[default]
    None,
    /// Add one to matches and totals for orders 2 to 4.
    AddOne,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Reference length closest to `hyp_len`; the shorter one wins a tie.
fn closest_ref_len(hyp_len: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(hyp_len), r))
        .unwrap_or(0)
}

/// Corpus BLEU-4 with per-sentence clipping against each reference set,
/// uniform weights and the closest-reference brevity penalty.
pub fn bleu4(hyps: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> Result<f64> {
    bleu4_with(hyps, refs, Smoothing::None)
}

pub fn bleu4_with(hyps: &[Vec<String>], refs: &[Vec<Vec<String>>], smoothing: Smoothing) -> Result<f64> {
    if hyps.is_empty() {
        return Err(Error::Input("BLEU needs at least one hypothesis".into()));
    }
    if hyps.len() != refs.len() {
        return Err(Error::Input(format!(
            "{} hypotheses but {} reference sets",
            hyps.len(),
            refs.len()
        )));
    }
    if refs.iter().any(Vec::is_empty) {
        return Err(Error::Input("every hypothesis needs a reference".into()));
    }
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, rs) in hyps.iter().zip(refs) {
        hyp_len += h.len();
        ref_len += closest_ref_len(h.len(), rs);
        for n in 1..=4 {
            let hc = ngram_counts(h, n);
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for r in rs {
                for (g, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            for (g, c) in &hc {
                matches[n - 1] += (*c).min(max_ref.get(g).copied().unwrap_or(0));
            }
            totals[n - 1] += h.len().saturating_sub(n - 1);
        }
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        let (mut m, mut t) = (matches[n] as f64, totals[n] as f64);
        if smoothing == Smoothing::AddOne && n > 0 {
            m += 1.0;
            t += 1.0;
        }
        if m == 0.0 || t == 0.0 {
            return Ok(0.0);
        }
        log_sum += (m / t).ln() / 4.0;
    }
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(bp * log_sum.exp())
}

/// Mean slot error rate over every realisation of every DA, in percent.
pub fn corpus_err(realisations: &[Vec<DelexUtterance>], das: &[DialogueAct], ont: &Ontology) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (cands, da) in realisations.iter().zip(das) {
        for c in cands {
            total += slot_error_rate(c, da, ont);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        100.0 * total / count as f64
    }
}

/// Cosine similarity, 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm2(a), norm2(b));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Returns the surface form of the most similar training DA.
#[derive(Debug, Clone)]
pub struct KnnBaseline {
    /// One entry per training canonical DA, sorted by canonical form.
    entries: Vec<(CanonicalDa, Vec<f64>, DelexUtterance)>,
    ontology: Ontology,
}

impl KnnBaseline {
    pub fn new(train: &[Example], ont: &Ontology) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Input("kNN baseline needs training examples".into()));
        }
        let mut firsts: BTreeMap<CanonicalDa, (Vec<f64>, DelexUtterance)> = BTreeMap::new();
        for ex in train {
            firsts
                .entry(ex.da.canonical())
                .or_insert_with(|| (encode_da(&ex.da, ont).0, ex.delex.clone()));
        }
        Ok(KnnBaseline {
            entries: firsts.into_iter().map(|(k, (v, u))| (k, v, u)).collect(),
            ontology: ont.clone(),
        })
    }

    /// Nearest training DA by cosine; ties go to the smallest canonical form.
    pub fn nearest(&self, da: &DialogueAct) -> (&CanonicalDa, &DelexUtterance) {
        let q = encode_da(da, &self.ontology).0;
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for (i, (_, v, _)) in self.entries.iter().enumerate() {
            let s = cosine(&q, v);
            if s > best_sim {
                best_sim = s;
                best = i;
            }
        }
        let (k, _, u) = &self.entries[best];
        (k, u)
    }

    pub fn generate(&self, da: &DialogueAct) -> DelexUtterance {
        self.nearest(da).1.clone()
    }
}

pub fn knn_generate(train: &[Example], ont: &Ontology, da: &DialogueAct) -> Result<DelexUtterance> {
    Ok(KnnBaseline::new(train, ont)?.generate(da))
}

/// Lexicalised, tokenised references for one test DA.
#[derive(Debug, Clone, PartialEq)]
pub struct References {
    pub refs: Vec<Vec<String>>,
    /// True when the DA had no group in the corpus and its own gold
    /// utterance stands in.
    pub fallback: bool,
}

pub fn lexicalised_tokens(u: &DelexUtterance, da: &DialogueAct) -> Vec<String> {
    tokenize(&lexicalise(u, da).text)
}

/// Every surface form sharing the test DA's canonical form, filled with the
/// test DA's values.
pub fn build_references(test: &[Example], corpus: &[Example]) -> Vec<References> {
    let groups = group_references(corpus.iter().map(|e| (&e.da, &e.delex)));
    test.iter()
        .map(|ex| match groups.get(&ex.da.canonical()) {
            Some(forms) => References {
                refs: forms.iter().map(|u| lexicalised_tokens(u, &ex.da)).collect(),
                fallback: false,
            },
            None => References {
                refs: vec![lexicalised_tokens(&ex.delex, &ex.da)],
                fallback: true,
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaDetail {
    pub da: String,
    pub realisations: Vec<String>,
    pub errs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// BLEU-4 of the top-ranked realisation per DA.
    pub bleu4: f64,
    /// BLEU-4 averaged over rank positions 1..=n_best.
    pub bleu4_top5_mean: f64,
    pub corpus_err_percent: f64,
    pub details: Vec<DaDetail>,
}

/// Scores ranked realisations (best first) against reference sets.
pub fn score_realisations(
    test: &[Example],
    realisations: &[Vec<DelexUtterance>],
    refs: &[References],
    ont: &Ontology,
) -> Result<EvalReport> {
    let das: Vec<DialogueAct> = test.iter().map(|e| e.da.clone()).collect();
    let ref_sets: Vec<Vec<Vec<String>>> = refs.iter().map(|r| r.refs.clone()).collect();
    let depth = realisations.iter().map(Vec::len).min().unwrap_or(0);
    if depth == 0 {
        return Err(Error::Input("every DA needs at least one realisation".into()));
    }
    let bleu_at = |k: usize| -> Result<f64> {
        let hyps: Vec<Vec<String>> = realisations
            .iter()
            .zip(&das)
            .map(|(r, da)| lexicalised_tokens(&r[k], da))
            .collect();
        bleu4(&hyps, &ref_sets)
    };
    let bleu = bleu_at(0)?;
    let mut mean = 0.0;
    for k in 0..depth {
        mean += bleu_at(k)?;
    }
    let details = realisations
        .iter()
        .zip(&das)
        .map(|(r, da)| DaDetail {
            da: da.to_string(),
            realisations: r.iter().map(|u| lexicalise(u, da).text).collect(),
            errs: r.iter().map(|u| slot_error_rate(u, da, ont)).collect(),
        })
        .collect();
    Ok(EvalReport {
        bleu4: bleu,
        bleu4_top5_mean: mean / depth as f64,
        corpus_err_percent: corpus_err(realisations, &das, ont),
        details,
    })
}

/// Reranked generation for every test example, scored against references
/// drawn from `corpus`.
pub fn evaluate(
    gen: &Generator<'_>,
    test: &[Example],
    corpus: &[Example],
    cfg: &DecodeConfig,
    rng: &mut Rng,
) -> Result<EvalReport> {
    let mut realisations = Vec::with_capacity(test.len());
    for ex in test {
        let ranked = gen.rerank(&ex.da, cfg, rng)?;
        realisations.push(ranked.into_iter().map(|c| c.tokens).collect());
    }
    score_realisations(test, &realisations, &build_references(test, corpus), gen.ontology)
}

pub fn evaluate_knn(train: &[Example], test: &[Example], corpus: &[Example], ont: &Ontology) -> Result<EvalReport> {
    let knn = KnnBaseline::new(train, ont)?;
    let realisations: Vec<Vec<DelexUtterance>> = test.iter().map(|ex| vec![knn.generate(&ex.da)]).collect();
    score_realisations(test, &realisations, &build_references(test, corpus), ont)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::da::parse_da;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn identity_and_disjoint() {
        let h = vec![toks("the cat sat on the mat")];
        let r = vec![vec![toks("the cat sat on the mat"), toks("a dog")]];
        assert!((bleu4(&h, &r).unwrap() - 1.0).abs() < 1e-12);
        let r2 = vec![vec![toks("x y z w v")]];
        assert_eq!(bleu4(&h, &r2).unwrap(), 0.0);
        assert!(bleu4(&[], &[]).is_err());
    }

    #[test]
    fn smoothing_lifts_zero_orders() {
        let h = vec![toks("a b c d")];
        let r = vec![vec![toks("a b x d")]];
        assert_eq!(bleu4(&h, &r).unwrap(), 0.0);
        assert!(bleu4_with(&h, &r, Smoothing::AddOne).unwrap() > 0.0);
    }

    #[test]
    fn err_average() {
        let o = Ontology::restaurant();
        let da = parse_da(r#"inform(name="a",area="b")"#, &o).unwrap();
        let good = DelexUtterance::from_body(["SLOT_NAME", "SLOT_AREA"]);
        let half = DelexUtterance::from_body(["SLOT_NAME"]);
        let mut r = vec![vec![good.clone(); 5], vec![good.clone(); 5]];
        assert_eq!(corpus_err(&r, &[da.clone(), da.clone()], &o), 0.0);
        r[1][2] = half;
        assert!((corpus_err(&r, &[da.clone(), da], &o) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn knn_self_match_and_ties() {
        let o = Ontology::restaurant();
        let ex = |s: &str, u: &str| Example {
            da: parse_da(s, &o).unwrap(),
            text: u.into(),
            delex: DelexUtterance::from_body(u.split_whitespace()),
        };
        let train = vec![
            ex(r#"inform(name="a",food="b")"#, "SLOT_NAME serves SLOT_FOOD"),
            ex(r#"inform(name="a",area="b")"#, "SLOT_NAME is in SLOT_AREA"),
            ex(r#"inform(name="c",food="d")"#, "second form"),
        ];
        let knn = KnnBaseline::new(&train, &o).unwrap();
        let q = parse_da(r#"inform(name="z",food="y")"#, &o).unwrap();
        assert_eq!(knn.generate(&q).text(), "SLOT_NAME serves SLOT_FOOD");
        // equally close to both two-slot DAs: smallest canonical form wins
        let q = parse_da(r#"inform(name="z")"#, &o).unwrap();
        assert_eq!(knn.nearest(&q).0 .0, "inform(area,name)");
    }

    #[test]
    fn references_fill_values() {
        let o = Ontology::restaurant();
        let mk = |s: &str, u: &str| Example {
            da: parse_da(s, &o).unwrap(),
            text: String::new(),
            delex: DelexUtterance::from_body(u.split_whitespace()),
        };
        let corpus = vec![
            mk(r#"inform(name="a")"#, "SLOT_NAME is good"),
            mk(r#"inform(name="b")"#, "try SLOT_NAME"),
            mk(r#"inform(name="c")"#, "SLOT_NAME is good"),
        ];
        let test = vec![mk(r#"inform(name="Red Door")"#, "x"), mk(r#"inform(area="n")"#, "in SLOT_AREA")];
        let refs = build_references(&test, &corpus);
        assert_eq!(refs[0].refs, vec![toks("red door is good"), toks("try red door")]);
        assert!(!refs[0].fallback);
        assert!(refs[1].fallback);
        assert_eq!(refs[1].refs, vec![toks("in n")]);
    }
}
