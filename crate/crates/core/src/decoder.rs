//! Over-generation by sampling, then reranking by forward and backward
//! cost plus a slot-error penalty.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::da::{encode_da, DelexUtterance, DialogueAct, Ontology, SlotKind, SlotValue};
use crate::error::{Error, Result};
use crate::net::{reverse_for_reranker, step, NetConfig, NetworkParams, State};
use crate::numkit::{sample_categorical, Rng};
use crate::trainer::{eval_cost, GatePenalty};
use crate::vocab::Vocab;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub n_overgen: usize,
    pub n_best: usize,
    /// Weight of the slot error rate in the reranking score.
    pub lambda: f64,
    /// Longest body sampled before the utterance is cut off.
    pub max_len: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            n_overgen: 20,
            n_best: 5,
            lambda: 100.0,
            max_len: 60,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_best == 0 || self.n_best > self.n_overgen {
            return Err(Error::Input("need 1 <= n_best <= n_overgen".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub utterance: DelexUtterance,
    /// True when `max_len` was hit and EOS was appended by force.
    pub truncated: bool,
}

/// Draws one utterance from the forward network, feeding each sampled
/// token back as the next input.
pub fn sample_utterance(
    params: &NetworkParams,
    cfg: &NetConfig,
    vocab: &Vocab,
    d0: &[f64],
    rng: &mut Rng,
    max_len: usize,
) -> Result<Sample> {
    let mut state = State::zeros(cfg);
    let mut d = d0.to_vec();
    let mut token = Vocab::BOS;
    let mut ids = vec![Vocab::BOS];
    let mut truncated = true;
    for t in 0..=max_len {
        let st = step(params, cfg, token, &state, &d, None).map_err(|e| match e {
            Error::NonFinite { what, .. } => Error::NonFinite { timestep: t, what },
            other => other,
        })?;
        let next = sample_categorical(&st.p, rng)?;
        if next == Vocab::EOS {
            truncated = false;
            break;
        }
        if t == max_len {
            break;
        }
        ids.push(next);
        token = next;
        state = st.state();
        d = st.d;
    }
    ids.push(Vocab::EOS);
    Ok(Sample {
        utterance: vocab.decode(&ids),
        truncated,
    })
}

/// Missing plus redundant slot tokens over the number of categorical
/// bindings. Binary, dontcare and requested bindings have no slot token
/// and are ignored. Tokens of slots absent from the DA count as
/// redundant. With no categorical bindings the result is the redundant
/// count itself.
pub fn slot_error_rate(candidate: &DelexUtterance, da: &DialogueAct, ont: &Ontology) -> f64 {
    let mut expected: BTreeMap<usize, usize> = BTreeMap::new();
    for (slot, value) in &da.bindings {
        if let (SlotValue::Categorical(_), Some(s)) = (value, ont.slot_index(slot)) {
            if ont.slots[s].kind == SlotKind::Categorical {
                *expected.entry(s).or_insert(0) += 1;
            }
        }
    }
    let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
    for tok in candidate.body() {
        if let Some(s) = ont.slot_for_token(tok) {
            *seen.entry(s).or_insert(0) += 1;
        }
    }
    let n: usize = expected.values().sum();
    let missing: usize = expected
        .iter()
        .map(|(s, &want)| want.saturating_sub(seen.get(s).copied().unwrap_or(0)))
        .sum();
    let redundant: usize = seen
        .iter()
        .map(|(s, &got)| got.saturating_sub(expected.get(s).copied().unwrap_or(0)))
        .sum();
    if n == 0 {
        redundant as f64
    } else {
        (missing + redundant) as f64 / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub tokens: DelexUtterance,
    pub f_cost: f64,
    pub b_cost: f64,
    pub err: f64,
    pub score: f64,
    pub truncated: bool,
}

impl Candidate {
    pub fn score_of(f_cost: f64, b_cost: f64, err: f64, lambda: f64) -> f64 {
        -(f_cost + b_cost + lambda * err)
    }
}

/// A trained generator pair with what it needs to read DAs and words.
#[derive(Debug, Clone, Copy)]
pub struct Generator<'a> {
    pub forward: &'a NetworkParams,
    pub backward: &'a NetworkParams,
    pub config: &'a NetConfig,
    pub vocab: &'a Vocab,
    pub ontology: &'a Ontology,
    pub penalty: GatePenalty,
}

impl Generator<'_> {
    /// Scores an utterance with both networks and the slot error rate.
    pub fn score(&self, tokens: DelexUtterance, da: &DialogueAct, lambda: f64, truncated: bool) -> Result<Candidate> {
        let d0 = encode_da(da, self.ontology).0;
        let ids = self.vocab.encode(&tokens);
        let f_cost = eval_cost(self.forward, self.config, &ids, &d0, &self.penalty)?;
        let b_cost = eval_cost(self.backward, self.config, &reverse_for_reranker(&ids), &d0, &self.penalty)?;
        let err = slot_error_rate(&tokens, da, self.ontology);
        Ok(Candidate {
            tokens,
            f_cost,
            b_cost,
            err,
            score: Candidate::score_of(f_cost, b_cost, err, lambda),
            truncated,
        })
    }

    /// Samples and scores `n_overgen` candidates, in sampling order.
    pub fn overgenerate(&self, da: &DialogueAct, cfg: &DecodeConfig, rng: &mut Rng) -> Result<Vec<Candidate>> {
        let d0 = encode_da(da, self.ontology).0;
        (0..cfg.n_overgen)
            .map(|_| {
                let s = sample_utterance(self.forward, self.config, self.vocab, &d0, rng, cfg.max_len)?;
                self.score(s.utterance, da, cfg.lambda, s.truncated)
            })
            .collect()
    }

    /// Over-generates and keeps the `n_best` highest scores.
    pub fn rerank(&self, da: &DialogueAct, cfg: &DecodeConfig, rng: &mut Rng) -> Result<Vec<Candidate>> {
        cfg.validate()?;
        let mut all = self.overgenerate(da, cfg, rng)?;
        rank(&mut all);
        all.truncate(cfg.n_best);
        Ok(all)
    }
}

/// Sorts by score descending, then lower error, then shorter utterance.
pub fn rank(cands: &mut [Candidate]) {
    cands.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.err.total_cmp(&b.err))
            .then(a.tokens.tokens.len().cmp(&b.tokens.tokens.len()))
    });
}

/// Free-function form of [`Generator::rerank`].
#[allow(clippy::too_many_arguments)]
pub fn rerank(
    fwd: &NetworkParams,
    bwd: &NetworkParams,
    net_cfg: &NetConfig,
    vocab: &Vocab,
    ont: &Ontology,
    da: &DialogueAct,
    cfg: &DecodeConfig,
    rng: &mut Rng,
) -> Result<Vec<Candidate>> {
    Generator {
        forward: fwd,
        backward: bwd,
        config: net_cfg,
        vocab,
        ontology: ont,
        penalty: GatePenalty::default(),
    }
    .rerank(da, cfg, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::da::parse_da;

    fn ont() -> Ontology {
        Ontology::restaurant()
    }

    fn utt(s: &str) -> DelexUtterance {
        DelexUtterance::from_body(s.split_whitespace())
    }

    #[test]
    fn err_examples() {
        let o = ont();
        let da = parse_da(r#"inform(name="a",food="b",area="c")"#, &o).unwrap();
        assert_eq!(slot_error_rate(&utt("SLOT_NAME serves SLOT_FOOD in SLOT_AREA"), &da, &o), 0.0);
        let e = slot_error_rate(&utt("SLOT_NAME SLOT_NAME serves SLOT_FOOD"), &da, &o);
        assert!((e - 2.0 / 3.0).abs() < 1e-15);
        let bye = parse_da("goodbye()", &o).unwrap();
        assert_eq!(slot_error_rate(&utt("goodbye"), &bye, &o), 0.0);
        assert_eq!(slot_error_rate(&utt("bye SLOT_NAME SLOT_AREA"), &bye, &o), 2.0);
    }

    #[test]
    fn binary_and_dontcare_are_ignored() {
        let o = ont();
        let da = parse_da(r#"inform(name="a",kids-allowed=no,area=dontcare)"#, &o).unwrap();
        assert_eq!(slot_error_rate(&utt("SLOT_NAME allows no kids"), &da, &o), 0.0);
        assert_eq!(slot_error_rate(&utt("no kids at SLOT_AREA"), &da, &o), 2.0);
    }

    fn eos_only_model() -> (NetworkParams, NetConfig, Vocab) {
        let o = ont();
        let vocab = Vocab::build(&o, [&utt("hello there")]);
        let cfg = NetConfig::for_domain(&vocab, &o).with_hidden(4);
        let mut p = NetworkParams::init_scaled(&cfg, 0.0, &mut Rng::seed(0));
        for c in 0..cfg.hidden_size {
            p.w_out.set(Vocab::EOS, c, 0.0);
        }
        p.layers[0].w_wo.fill(10.0);
        p.embedding.fill(1.0);
        p.layers[0].w_wi.fill(10.0);
        p.layers[0].w_wc.fill(10.0);
        p.w_out.set(Vocab::EOS, 0, 1e3);
        (p, cfg, vocab)
    }

    #[test]
    fn forced_eos_gives_empty_body() {
        let (p, cfg, vocab) = eos_only_model();
        let d0 = vec![0.0; cfg.da_dim];
        let s = sample_utterance(&p, &cfg, &vocab, &d0, &mut Rng::seed(1), 60).unwrap();
        assert!(s.utterance.body().is_empty());
        assert!(!s.truncated);
    }

    #[test]
    fn truncation_is_flagged() {
        let o = ont();
        let vocab = Vocab::build(&o, [&utt("hello there")]);
        let cfg = NetConfig::for_domain(&vocab, &o).with_hidden(4);
        let mut p = NetworkParams::init_scaled(&cfg, 0.0, &mut Rng::seed(0));
        // zero weights give a uniform distribution; make EOS impossible-ish
        p.layers[0].w_wo.fill(10.0);
        p.embedding.fill(1.0);
        p.layers[0].w_wi.fill(10.0);
        p.layers[0].w_wc.fill(10.0);
        for c in 0..4 {
            p.w_out.set(Vocab::EOS, c, -1e3);
        }
        let d0 = vec![0.0; cfg.da_dim];
        let s = sample_utterance(&p, &cfg, &vocab, &d0, &mut Rng::seed(1), 7).unwrap();
        assert!(s.truncated);
        assert_eq!(s.utterance.body().len(), 7);
        assert_eq!(s.utterance.tokens.last().map(String::as_str), Some("EOS"));
    }

    fn cand(score: f64, err: f64, len: usize) -> Candidate {
        Candidate {
            tokens: DelexUtterance::from_body(vec!["w"; len]),
            f_cost: 0.0,
            b_cost: 0.0,
            err,
            score,
            truncated: false,
        }
    }

    #[test]
    fn ranking_ties() {
        let mut c = vec![cand(-3.0, 0.0, 2), cand(-1.0, 0.5, 4), cand(-1.0, 0.5, 3), cand(-1.0, 0.0, 9)];
        rank(&mut c);
        let order: Vec<(f64, usize)> = c.iter().map(|x| (x.err, x.tokens.tokens.len())).collect();
        assert_eq!(order, vec![(0.0, 11), (0.5, 5), (0.5, 6), (0.0, 4)]);
    }

    #[test]
    fn config_checks() {
        assert!(DecodeConfig::default().validate().is_ok());
        let bad = DecodeConfig {
            n_best: 30,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
