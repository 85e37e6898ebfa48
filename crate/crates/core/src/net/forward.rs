use crate::error::{Error, Result};
use crate::numkit::{sigmoid_scalar, softmax, Rng};
use crate::vocab::Vocab;

use super::params::{GatingMode, NetConfig, NetworkParams};

/// Recurrent state: hidden and cell vectors for every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl State {
    pub fn zeros(cfg: &NetConfig) -> Self {
        State {
            h: vec![vec![0.0; cfg.hidden_size]; cfg.num_layers],
            c: vec![vec![0.0; cfg.hidden_size]; cfg.num_layers],
        }
    }
}

/// Inverted-dropout masks for one step (entries are `0` or `1/(1-p)`).
/// Only the vertical connections are masked: the lower hidden state fed
/// into each upper layer, and the hidden concatenation fed to the output.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMasks {
    /// `hidden_in[l - 1]` masks layer `l-1`'s hidden state inside layer `l`'s input.
    pub hidden_in: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl StepMasks {
    pub fn sample(cfg: &NetConfig, rng: &mut Rng) -> Self {
        let keep = 1.0 - cfg.dropout;
        let mut draw = |len: usize| -> Vec<f64> {
            (0..len)
                .map(|_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 })
                .collect()
        };
        StepMasks {
            hidden_in: (1..cfg.num_layers).map(|_| draw(cfg.hidden_size)).collect(),
            output: draw(cfg.hidden_size * cfg.num_layers),
        }
    }
}

/// Dropout policy for a forward pass.
pub enum Dropout<'a> {
    Off,
    /// Fresh masks per step (training).
    Sample(&'a mut Rng),
    /// Reuse given masks, one per step (gradient checking).
    Fixed(&'a [StepMasks]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    /// Layer input after masking.
    pub input: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub c_hat: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub token: usize,
    pub r: Vec<f64>,
    pub d: Vec<f64>,
    /// `tanh(W_dc d)`, added to the bottom layer's cell.
    pub da_cell: Vec<f64>,
    pub layers: Vec<LayerTrace>,
    /// Concatenated hidden states after masking, as seen by `w_out`.
    pub output_in: Vec<f64>,
    pub logits: Vec<f64>,
    pub p: Vec<f64>,
    pub masks: Option<StepMasks>,
}

impl StepTrace {
    pub fn state(&self) -> State {
        State {
            h: self.layers.iter().map(|l| l.h.clone()).collect(),
            c: self.layers.iter().map(|l| l.c.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub d0: Vec<f64>,
    pub steps: Vec<StepTrace>,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// DA vector after `k` steps; `d(0)` is the initial vector.
    pub fn d(&self, k: usize) -> &[f64] {
        if k == 0 {
            &self.d0
        } else {
            &self.steps[k - 1].d
        }
    }

    pub fn d_final(&self) -> &[f64] {
        self.d(self.steps.len())
    }
}

/// Heuristic reading gate: ones, except zeros on the features cleared by
/// the slot token just read.
pub fn heuristic_reading_gate(cfg: &NetConfig, token: usize) -> Vec<f64> {
    let mut r = vec![1.0; cfg.da_dim];
    if let Some(clears) = cfg.slot_clears.get(token) {
        for &k in clears {
            r[k] = 0.0;
        }
    }
    r
}

fn reading_gate(params: &NetworkParams, cfg: &NetConfig, token: usize, prev: &State) -> Vec<f64> {
    match cfg.gating {
        GatingMode::Learned => {
            let mut pre = vec![0.0; cfg.da_dim];
            params.w_wr.gemv_add(params.embedding.row(token), &mut pre);
            let mut hterm = vec![0.0; cfg.da_dim];
            for (l, layer) in params.layers.iter().enumerate() {
                hterm.iter_mut().for_each(|x| *x = 0.0);
                layer.w_hr.gemv_add(&prev.h[l], &mut hterm);
                crate::numkit::axpy(cfg.alpha[l], &hterm, &mut pre);
            }
            pre.into_iter().map(sigmoid_scalar).collect()
        }
        GatingMode::Heuristic => heuristic_reading_gate(cfg, token),
        GatingMode::None => vec![1.0; cfg.da_dim],
    }
}

/// One generator step on input `token`.
pub fn step(
    params: &NetworkParams,
    cfg: &NetConfig,
    token: usize,
    prev: &State,
    d_prev: &[f64],
    masks: Option<&StepMasks>,
) -> Result<StepTrace> {
    let n = cfg.hidden_size;
    if token >= cfg.vocab_size {
        return Err(Error::Input(format!("token index {token} outside vocabulary")));
    }
    if d_prev.len() != cfg.da_dim {
        return Err(Error::Shape(format!(
            "DA vector has length {}, expected {}",
            d_prev.len(),
            cfg.da_dim
        )));
    }
    let emb = params.embedding.row(token);

    let r = reading_gate(params, cfg, token, prev);
    let d: Vec<f64> = r.iter().zip(d_prev).map(|(a, b)| a * b).collect();
    let mut da_cell = vec![0.0; n];
    params.w_dc.gemv_add(&d, &mut da_cell);
    da_cell.iter_mut().for_each(|x| *x = x.tanh());

    let mut layers: Vec<LayerTrace> = Vec::with_capacity(cfg.num_layers);
    for (l, lp) in params.layers.iter().enumerate() {
        let mut input = emb.to_vec();
        if l > 0 {
            let below = &layers[l - 1].h;
            match masks {
                Some(m) => input.extend(below.iter().zip(&m.hidden_in[l - 1]).map(|(h, k)| h * k)),
                None => input.extend_from_slice(below),
            }
        }
        let h_prev = &prev.h[l];
        let gate = |w_in: &crate::numkit::Mat, w_h: &crate::numkit::Mat| {
            let mut z = vec![0.0; n];
            w_in.gemv_add(&input, &mut z);
            w_h.gemv_add(h_prev, &mut z);
            z
        };
        let i: Vec<f64> = gate(&lp.w_wi, &lp.w_hi).into_iter().map(sigmoid_scalar).collect();
        let f: Vec<f64> = gate(&lp.w_wf, &lp.w_hf).into_iter().map(sigmoid_scalar).collect();
        let o: Vec<f64> = gate(&lp.w_wo, &lp.w_ho).into_iter().map(sigmoid_scalar).collect();
        let c_hat: Vec<f64> = gate(&lp.w_wc, &lp.w_hc).into_iter().map(f64::tanh).collect();
        let c: Vec<f64> = (0..n)
            .map(|j| {
                let base = f[j] * prev.c[l][j] + i[j] * c_hat[j];
                if l == 0 {
                    base + da_cell[j]
                } else {
                    base
                }
            })
            .collect();
        let tanh_c: Vec<f64> = c.iter().map(|x| x.tanh()).collect();
        let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
        layers.push(LayerTrace {
            input,
            i,
            f,
            o,
            c_hat,
            c,
            tanh_c,
            h,
        });
    }

    let mut output_in: Vec<f64> = layers.iter().flat_map(|l| l.h.iter().copied()).collect();
    if let Some(m) = masks {
        output_in.iter_mut().zip(&m.output).for_each(|(x, k)| *x *= k);
    }
    let mut logits = vec![0.0; cfg.vocab_size];
    params.w_out.gemv_add(&output_in, &mut logits);
    let p = softmax(&logits);

    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    let bad = if !finite(&d) {
        Some("reading gate")
    } else if !layers.iter().all(|l| finite(&l.c) && finite(&l.h)) {
        Some("hidden state")
    } else if !finite(&p) {
        Some("output distribution")
    } else {
        None
    };
    if let Some(what) = bad {
        return Err(Error::NonFinite { timestep: 0, what });
    }

    Ok(StepTrace {
        token,
        r,
        d,
        da_cell,
        layers,
        output_in,
        logits,
        p,
        masks: masks.cloned(),
    })
}

/// [`step`] with the heuristic gate regardless of the configured mode.
pub fn heuristic_gate_step(
    params: &NetworkParams,
    cfg: &NetConfig,
    token: usize,
    prev: &State,
    d_prev: &[f64],
    masks: Option<&StepMasks>,
) -> Result<StepTrace> {
    if cfg.gating == GatingMode::Heuristic {
        return step(params, cfg, token, prev, d_prev, masks);
    }
    let cfg = NetConfig {
        gating: GatingMode::Heuristic,
        ..cfg.clone()
    };
    step(params, &cfg, token, prev, d_prev, masks)
}

/// Teacher-forced pass over `tokens` (the inputs, starting with BOS).
pub fn forward_sentence(
    params: &NetworkParams,
    cfg: &NetConfig,
    tokens: &[usize],
    d0: &[f64],
    mut dropout: Dropout<'_>,
) -> Result<ForwardTrace> {
    if tokens.first() != Some(&Vocab::BOS) {
        return Err(Error::Input("input sequence must start with BOS".into()));
    }
    if let Some(&bad) = tokens.iter().find(|&&t| t >= cfg.vocab_size) {
        return Err(Error::Input(format!("token index {bad} outside vocabulary")));
    }
    if let Dropout::Fixed(m) = &dropout {
        if m.len() != tokens.len() {
            return Err(Error::Shape("need one dropout mask per step".into()));
        }
    }
    let mut state = State::zeros(cfg);
    let mut d = d0.to_vec();
    let mut steps = Vec::with_capacity(tokens.len());
    for (t, &tok) in tokens.iter().enumerate() {
        let sampled;
        let masks = match &mut dropout {
            Dropout::Off => None,
            Dropout::Sample(_) if cfg.dropout == 0.0 => None,
            Dropout::Sample(rng) => {
                sampled = StepMasks::sample(cfg, rng);
                Some(&sampled)
            }
            Dropout::Fixed(m) => Some(&m[t]),
        };
        let st = step(params, cfg, tok, &state, &d, masks).map_err(|e| match e {
            Error::NonFinite { what, .. } => Error::NonFinite { timestep: t, what },
            other => other,
        })?;
        state = st.state();
        d.clone_from(&st.d);
        steps.push(st);
    }
    Ok(ForwardTrace {
        d0: d0.to_vec(),
        steps,
    })
}

/// Splits a framed id sequence into network inputs and next-token targets.
pub fn inputs_and_targets(ids: &[usize]) -> (&[usize], &[usize]) {
    assert!(ids.len() >= 2, "utterance needs BOS and EOS");
    (&ids[..ids.len() - 1], &ids[1..])
}

/// Reverses the body of a framed sequence, keeping BOS first and EOS last.
pub fn reverse_for_reranker<T: Clone>(tokens: &[T]) -> Vec<T> {
    if tokens.len() <= 2 {
        return tokens.to_vec();
    }
    let last = tokens.len() - 1;
    let mut out = Vec::with_capacity(tokens.len());
    out.push(tokens[0].clone());
    out.extend(tokens[1..last].iter().rev().cloned());
    out.push(tokens[last].clone());
    out
}
