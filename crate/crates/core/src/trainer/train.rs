use std::fmt;

use serde::{Deserialize, Serialize};

use crate::da::corpus::Example;
use crate::da::{encode_da, Ontology};
use crate::error::{Error, Result};
use crate::net::{
    accumulate_gradients, forward_sentence, reverse_for_reranker, Dropout, Gradients, NetConfig,
    NetworkParams, INIT_SCALE,
};
use crate::numkit::Rng;
use crate::vocab::Vocab;

use super::cost::{sentence_cost, GatePenalty};
use super::split::{upsample, SplitCorpus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Multiplier applied to the learning rate after an epoch that does
    /// not improve validation cost.
    pub lr_decay: f64,
    pub eta: f64,
    pub xi: f64,
    pub l2_coeff: f64,
    /// The l2 term joins the gradient on every `l2_every`-th sentence.
    pub l2_every: usize,
    pub max_epochs: usize,
    /// Non-improving epochs tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub upsample: bool,
    /// Elementwise gradient clip.
    pub clip: f64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            lr_decay: 0.5,
            eta: 1e-4,
            xi: 100.0,
            l2_coeff: 1e-5,
            l2_every: 10,
            max_epochs: 30,
            patience: 5,
            seed: 1,
            upsample: true,
            clip: 5.0,
            init_scale: INIT_SCALE,
        }
    }
}

impl TrainConfig {
    pub fn penalty(&self) -> GatePenalty {
        GatePenalty {
            eta: self.eta,
            xi: self.xi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Input(format!("train config: {m}")));
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive");
        }
        if !(self.eta > 0.0 && self.xi > 0.0) {
            return bad("eta and xi must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must be in (0, 1]");
        }
        if self.l2_every == 0 {
            return bad("l2_every must be at least 1");
        }
        if self.clip.is_nan() || self.clip <= 0.0 {
            return bad("clip must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-sentence cost of both networks during the epoch.
    pub train_cost: f64,
    pub valid_cost: f64,
    pub learning_rate: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {:>3}  train {:.4}  valid {:.4}  lr {:.4}",
            self.epoch, self.train_cost, self.valid_cost, self.learning_rate
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were returned (1-based, 0 if none ran).
    pub best_epoch: usize,
    pub best_valid_cost: f64,
    pub stopped_early: bool,
}

/// A sentence ready for the networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    /// `[BOS, words.., EOS]` as vocabulary ids.
    pub ids: Vec<usize>,
    pub reversed: Vec<usize>,
    pub d0: Vec<f64>,
}

impl Prepared {
    pub fn new(ex: &Example, vocab: &Vocab, ont: &Ontology) -> Self {
        let ids = vocab.encode(&ex.delex);
        Prepared {
            reversed: reverse_for_reranker(&ids),
            ids,
            d0: encode_da(&ex.da, ont).0,
        }
    }
}

/// `params -= lr * grads`
pub fn sgd_step(params: &mut NetworkParams, grads: &Gradients, lr: f64) {
    params.add_scaled(grads, -lr);
}

/// Cost of one framed sentence under `params`, without dropout.
pub fn eval_cost(
    params: &NetworkParams,
    cfg: &NetConfig,
    ids: &[usize],
    d0: &[f64],
    penalty: &GatePenalty,
) -> Result<f64> {
    let trace = forward_sentence(params, cfg, &ids[..ids.len() - 1], d0, Dropout::Off)?;
    Ok(sentence_cost(&trace, &ids[1..], penalty).0)
}

/// Mean cost of forward plus backward network over `data`.
pub fn corpus_cost(
    fwd: &NetworkParams,
    bwd: &NetworkParams,
    cfg: &NetConfig,
    data: &[Prepared],
    penalty: &GatePenalty,
) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for p in data {
        total += eval_cost(fwd, cfg, &p.ids, &p.d0, penalty)?;
        total += eval_cost(bwd, cfg, &p.reversed, &p.d0, penalty)?;
    }
    Ok(total / data.len() as f64)
}

struct Updater<'a> {
    cfg: &'a NetConfig,
    tcfg: &'a TrainConfig,
    penalty: GatePenalty,
    grads: Gradients,
}

impl Updater<'_> {
    /// One SGD update on one sentence. Returns the cost before the update.
    fn update(
        &mut self,
        params: &mut NetworkParams,
        ids: &[usize],
        d0: &[f64],
        lr: f64,
        with_l2: bool,
        rng: &mut Rng,
    ) -> Result<f64> {
        let (inputs, targets) = (&ids[..ids.len() - 1], &ids[1..]);
        let trace = forward_sentence(params, self.cfg, inputs, d0, Dropout::Sample(rng))?;
        self.grads.for_each_mut(|_, m| m.fill(0.0));
        let cost = accumulate_gradients(params, self.cfg, &trace, targets, &self.penalty, 1.0, &mut self.grads)?;
        if with_l2 {
            self.grads.add_scaled(params, self.tcfg.l2_coeff);
        }
        self.grads.clip(self.tcfg.clip);
        sgd_step(params, &self.grads, lr);
        Ok(cost)
    }
}

/// Trains the forward generator and the backward reranker together,
/// alternating one sentence update each and keeping the shared reading-gate
/// and embedding weights identical. Returns the parameters from the epoch
/// with the lowest validation cost.
pub fn train(
    corpus: &SplitCorpus,
    vocab: &Vocab,
    ont: &Ontology,
    net_cfg: &NetConfig,
    cfg: &TrainConfig,
) -> Result<(NetworkParams, NetworkParams, TrainHistory)> {
    train_with_log(corpus, vocab, ont, net_cfg, cfg, |_| {})
}

pub fn train_with_log(
    corpus: &SplitCorpus,
    vocab: &Vocab,
    ont: &Ontology,
    net_cfg: &NetConfig,
    cfg: &TrainConfig,
    mut log: impl FnMut(&EpochLog),
) -> Result<(NetworkParams, NetworkParams, TrainHistory)> {
    cfg.validate()?;
    net_cfg.validate()?;
    if corpus.train.is_empty() || corpus.valid.is_empty() {
        return Err(Error::Input("training needs non-empty train and valid splits".into()));
    }
    let penalty = cfg.penalty();
    let train_ex = if cfg.upsample {
        upsample(&corpus.train)
    } else {
        corpus.train.clone()
    };
    let train: Vec<Prepared> = train_ex.iter().map(|e| Prepared::new(e, vocab, ont)).collect();
    let valid: Vec<Prepared> = corpus.valid.iter().map(|e| Prepared::new(e, vocab, ont)).collect();

    let mut root = Rng::seed(cfg.seed);
    let mut init_rng = root.fork();
    let mut order_rng = root.fork();
    let mut drop_rng = root.fork();

    let mut fwd = NetworkParams::init_scaled(net_cfg, cfg.init_scale, &mut init_rng);
    let mut bwd = NetworkParams::init_scaled(net_cfg, cfg.init_scale, &mut init_rng);
    bwd.copy_shared_from(&fwd);

    let mut up = Updater {
        cfg: net_cfg,
        tcfg: cfg,
        penalty,
        grads: fwd.zeros_like(),
    };
    let mut history = TrainHistory {
        best_valid_cost: f64::INFINITY,
        ..Default::default()
    };
    let mut best = (fwd.clone(), bwd.clone());
    let mut lr = cfg.learning_rate;
    let mut stall = 0;
    let mut seen = 0usize;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order_rng.shuffle(&mut order);
        let mut total = 0.0;
        for (pos, &i) in order.iter().enumerate() {
            let p = &train[i];
            seen += 1;
            let with_l2 = seen.is_multiple_of(cfg.l2_every);
            let diverged = |_| Error::Diverged {
                epoch,
                sentence: pos,
            };
            let cf = up
                .update(&mut fwd, &p.ids, &p.d0, lr, with_l2, &mut drop_rng)
                .map_err(diverged)?;
            bwd.copy_shared_from(&fwd);
            let cb = up
                .update(&mut bwd, &p.reversed, &p.d0, lr, with_l2, &mut drop_rng)
                .map_err(diverged)?;
            fwd.copy_shared_from(&bwd);
            if !(cf + cb).is_finite() || !fwd.is_finite() || !bwd.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    sentence: pos,
                });
            }
            total += cf + cb;
        }
        let valid_cost = corpus_cost(&fwd, &bwd, net_cfg, &valid, &penalty).map_err(|_| Error::Diverged {
            epoch,
            sentence: train.len(),
        })?;
        if !valid_cost.is_finite() {
            return Err(Error::Diverged {
                epoch,
                sentence: train.len(),
            });
        }
        let entry = EpochLog {
            epoch,
            train_cost: total / train.len() as f64,
            valid_cost,
            learning_rate: lr,
        };
        log(&entry);
        history.epochs.push(entry);

        if valid_cost < history.best_valid_cost {
            history.best_valid_cost = valid_cost;
            history.best_epoch = epoch;
            best = (fwd.clone(), bwd.clone());
            stall = 0;
        } else {
            stall += 1;
            if stall > cfg.patience {
                history.stopped_early = true;
                break;
            }
            lr *= cfg.lr_decay;
        }
    }
    Ok((best.0, best.1, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::backprop_sentence;

    #[test]
    fn small_step_decreases_sentence_cost() {
        let mut rng = Rng::seed(4);
        for trial in 0..20 {
            let cfg = NetConfig::new(10, 7).with_hidden(5);
            let params = NetworkParams::init_scaled(&cfg, 0.3, &mut rng);
            let mut ids = vec![Vocab::BOS];
            ids.extend((0..4).map(|_| 3 + rng.below(7)));
            ids.push(Vocab::EOS);
            let d0: Vec<f64> = (0..7).map(|k| f64::from(u8::from(k % 2 == trial % 2))).collect();
            let pen = GatePenalty::default();
            let before = eval_cost(&params, &cfg, &ids, &d0, &pen).unwrap();
            let trace = forward_sentence(&params, &cfg, &ids[..ids.len() - 1], &d0, Dropout::Off).unwrap();
            let (mut g, _) = backprop_sentence(&params, &cfg, &trace, &ids[1..], &pen).unwrap();
            g.clip(5.0);
            let mut after_p = params.clone();
            sgd_step(&mut after_p, &g, 1e-3);
            let after = eval_cost(&after_p, &cfg, &ids, &d0, &pen).unwrap();
            assert!(after < before, "trial {trial}: {after} >= {before}");
        }
    }

    #[test]
    fn rejects_bad_config() {
        let c = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            eta: -1.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn epoch_line_format() {
        let e = EpochLog {
            epoch: 3,
            train_cost: 12.5,
            valid_cost: 13.25,
            learning_rate: 0.05,
        };
        assert_eq!(e.to_string(), "epoch   3  train 12.5000  valid 13.2500  lr 0.0500");
    }
}
