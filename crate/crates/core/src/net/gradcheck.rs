//! Central-difference verification of the analytic gradients.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::numkit::{norm2, Rng};
use crate::trainer::{sentence_cost, GatePenalty};
use crate::vocab::Vocab;

use super::backward::backprop_sentence;
use super::forward::{forward_sentence, Dropout, ForwardTrace, StepMasks};
use super::params::{GatingMode, Gradients, NetConfig, NetworkParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckConfig {
    pub hidden_size: usize,
    pub da_dim: usize,
    pub vocab_size: usize,
    /// Number of input steps (BOS plus `length - 1` words).
    pub length: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Weights are drawn from `U(-init_scale, init_scale)`. Larger than the
    /// training default so few gradient entries sit near the 1e-8 floor,
    /// where forward-pass rounding alone reaches the tolerance.
    pub init_scale: f64,
    pub modes: Vec<GatingMode>,
    pub layers: Vec<usize>,
    /// Dropout used for multi-layer instances, with masks frozen.
    pub deep_dropout: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            hidden_size: 6,
            da_dim: 9,
            vocab_size: 12,
            length: 5,
            step: 1e-5,
            tolerance: 1e-4,
            init_scale: 0.5,
            modes: vec![GatingMode::Learned, GatingMode::Heuristic, GatingMode::None],
            layers: vec![1, 2],
            deep_dropout: 0.5,
        }
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// A random network plus one teacher-forced sentence.
#[derive(Debug, Clone)]
pub struct GradcheckInstance {
    pub net: NetConfig,
    pub params: NetworkParams,
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
    pub d0: Vec<f64>,
    pub masks: Option<Vec<StepMasks>>,
}

impl GradcheckInstance {
    pub fn random(cfg: &GradcheckConfig, gating: GatingMode, layers: usize, rng: &mut Rng) -> Self {
        let v = cfg.vocab_size;
        let dropout = if layers > 1 { cfg.deep_dropout } else { 0.0 };
        let mut net = NetConfig::new(v, cfg.da_dim)
            .with_hidden(cfg.hidden_size)
            .with_layers(layers, dropout)
            .with_gating(gating);
        // The first few word ids act as slot tokens, each clearing a pair
        // of features, so the heuristic gate has something to do.
        net.slot_clears = (0..v)
            .map(|t| match t {
                3..=6 => vec![2 * (t - 3), 2 * (t - 3) + 1]
                    .into_iter()
                    .filter(|&k| k < cfg.da_dim)
                    .collect(),
                _ => Vec::new(),
            })
            .collect();
        let params = NetworkParams::init_scaled(&net, cfg.init_scale, rng);
        let mut inputs = vec![Vocab::BOS];
        inputs.extend((1..cfg.length).map(|_| 3 + rng.below(v - 3)));
        let mut targets = inputs[1..].to_vec();
        targets.push(Vocab::EOS);
        let mut d0: Vec<f64> = (0..cfg.da_dim).map(|_| if rng.bernoulli(0.5) { 1.0 } else { 0.0 }).collect();
        d0[rng.below(cfg.da_dim)] = 1.0;
        let masks = (dropout > 0.0).then(|| (0..inputs.len()).map(|_| StepMasks::sample(&net, rng)).collect());
        GradcheckInstance {
            net,
            params,
            inputs,
            targets,
            d0,
            masks,
        }
    }

    fn dropout(&self) -> Dropout<'_> {
        match &self.masks {
            Some(m) => Dropout::Fixed(m),
            None => Dropout::Off,
        }
    }

    pub fn trace_with(&self, params: &NetworkParams) -> ForwardTrace {
        forward_sentence(params, &self.net, &self.inputs, &self.d0, self.dropout())
            .expect("gradcheck instance is well formed")
    }

    pub fn cost_with(&self, params: &NetworkParams) -> f64 {
        sentence_cost(&self.trace_with(params), &self.targets, &GatePenalty::default()).0
    }

    pub fn analytic(&self) -> Gradients {
        let trace = forward_sentence(&self.params, &self.net, &self.inputs, &self.d0, self.dropout())
            .expect("gradcheck instance is well formed");
        backprop_sentence(&self.params, &self.net, &trace, &self.targets, &GatePenalty::default())
            .expect("gradcheck instance is well formed")
            .0
    }

    /// Central differences for every parameter, with step `h`.
    pub fn numeric(&self, h: f64) -> Gradients {
        let mut grads = self.params.zeros_like();
        let mut probe = self.params.clone();
        for name in self.params.block_names() {
            let len = self.params.block(&name).map_or(0, |m| m.as_slice().len());
            for idx in 0..len {
                let orig = self.params.block(&name).unwrap().as_slice()[idx];
                probe.block_mut(&name).unwrap().as_mut_slice()[idx] = orig + h;
                let plus = self.trace_with(&probe);
                probe.block_mut(&name).unwrap().as_mut_slice()[idx] = orig - h;
                let minus = self.trace_with(&probe);
                probe.block_mut(&name).unwrap().as_mut_slice()[idx] = orig;
                let diff = cost_difference(&plus, &minus, &self.targets, &GatePenalty::default());
                grads.block_mut(&name).unwrap().as_mut_slice()[idx] = diff / (2.0 * h);
            }
        }
        grads
    }
}

/// `|a| - |b|` without forming either norm's rounding error in the result.
fn norm_difference(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm2(a), norm2(b));
    if na + nb == 0.0 {
        return 0.0;
    }
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x + y)).sum();
    num / (na + nb)
}

/// `cost(plus) - cost(minus)` summed term by term. Taking the whole costs
/// first and subtracting loses about one ulp of a cost near 10, which after
/// division by `2h` swamps gradient entries below ~1e-6.
fn cost_difference(plus: &ForwardTrace, minus: &ForwardTrace, targets: &[usize], pen: &GatePenalty) -> f64 {
    let mut diff = 0.0;
    for ((sp, sm), &y) in plus.steps.iter().zip(&minus.steps).zip(targets) {
        // log-sum-exp difference relative to the minus logits
        let top = sm.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut den, mut num) = (0.0, 0.0);
        for (zp, zm) in sp.logits.iter().zip(&sm.logits) {
            let w = (zm - top).exp();
            den += w;
            num += w * (zp - zm).exp_m1();
        }
        diff += (num / den).ln_1p() - (sp.logits[y] - sm.logits[y]);
    }
    diff += norm_difference(plus.d_final(), minus.d_final());
    let delta = |t: &ForwardTrace, k: usize| -> Vec<f64> {
        t.d(k + 1).iter().zip(t.d(k)).map(|(a, b)| a - b).collect()
    };
    for k in 0..plus.len() {
        let (dp, dm) = (delta(plus, k), delta(minus, k));
        let step = norm_difference(&dp, &dm);
        diff += pen.value(norm2(&dm)) * (step * pen.xi.ln()).exp_m1();
    }
    diff
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockError {
    pub gating: GatingMode,
    pub layers: usize,
    pub block: String,
    pub worst_rel_error: f64,
    pub max_abs_grad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub entries: Vec<BlockError>,
}

impl GradcheckReport {
    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.worst_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.worst() < self.tolerance
    }

    pub fn failures(&self) -> impl Iterator<Item = &BlockError> {
        self.entries.iter().filter(|e| e.worst_rel_error >= self.tolerance)
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{:<9} layers={} {:<14} worst_rel={:.3e} max|g|={:.3e}",
                format!("{:?}", e.gating).to_lowercase(),
                e.layers,
                e.block,
                e.worst_rel_error,
                e.max_abs_grad
            )?;
        }
        write!(f, "worst relative error: {:.3e}", self.worst())
    }
}

/// Compares analytic and numeric gradients block by block.
pub fn compare(analytic: &Gradients, numeric: &Gradients) -> Vec<(String, f64, f64)> {
    analytic
        .blocks()
        .into_iter()
        .zip(numeric.blocks())
        .map(|((name, a), (_, n))| {
            let worst = a
                .as_slice()
                .iter()
                .zip(n.as_slice())
                .map(|(&x, &y)| relative_error(x, y))
                .fold(0.0, f64::max);
            (name, worst, a.max_abs())
        })
        .collect()
}

/// Runs the comparison for every configured gating mode and depth.
pub fn gradcheck(cfg: &GradcheckConfig, rng: &mut Rng) -> GradcheckReport {
    let mut entries = Vec::new();
    for &gating in &cfg.modes {
        for &layers in &cfg.layers {
            let inst = GradcheckInstance::random(cfg, gating, layers, rng);
            let a = inst.analytic();
            let n = inst.numeric(cfg.step);
            for (block, worst, max_abs) in compare(&a, &n) {
                entries.push(BlockError {
                    gating,
                    layers,
                    block,
                    worst_rel_error: worst,
                    max_abs_grad: max_abs,
                });
            }
        }
    }
    GradcheckReport {
        tolerance: cfg.tolerance,
        entries,
    }
}
