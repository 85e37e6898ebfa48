use serde::{Deserialize, Serialize};

use crate::da::{DaLayout, Feature, Ontology, SlotKind};
use crate::error::{Error, Result};
use crate::numkit::{Mat, Rng};
use crate::vocab::Vocab;

/// How the DA vector evolves over a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatingMode {
    /// Reading gate computed from the token and hidden states.
    Learned,
    /// Slot features switched off when their slot token is read.
    Heuristic,
    /// No gate: the DA vector stays at d0 for every step.
    None,
}

impl std::fmt::Display for GatingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GatingMode::Learned => "learned",
            GatingMode::Heuristic => "heuristic",
            GatingMode::None => "none",
        })
    }
}

impl std::str::FromStr for GatingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learned" => Ok(GatingMode::Learned),
            "heuristic" => Ok(GatingMode::Heuristic),
            "none" => Ok(GatingMode::None),
            other => Err(Error::Input(format!("unknown gating mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub hidden_size: usize,
    pub num_layers: usize,
    pub embedding_dim: usize,
    pub vocab_size: usize,
    pub da_dim: usize,
    pub dropout: f64,
    /// Per-layer weight on the hidden-state term of the reading gate.
    pub alpha: Vec<f64>,
    pub gating: GatingMode,
    /// For each token id, the DA features the heuristic gate clears when
    /// that token is read. Empty for ordinary words.
    #[serde(default)]
    pub slot_clears: Vec<Vec<usize>>,
}

impl NetConfig {
    /// Hidden size 80, one layer, alpha 0.5, learned gate, no dropout.
    pub fn new(vocab_size: usize, da_dim: usize) -> Self {
        NetConfig {
            hidden_size: 80,
            num_layers: 1,
            embedding_dim: 80,
            vocab_size,
            da_dim,
            dropout: 0.0,
            alpha: vec![0.5],
            gating: GatingMode::Learned,
            slot_clears: Vec::new(),
        }
    }

    /// Config sized for a vocabulary and ontology, with heuristic-gate
    /// rules derived from the slot tokens.
    pub fn for_domain(vocab: &Vocab, ont: &Ontology) -> Self {
        let layout = DaLayout::new(ont);
        let mut cfg = NetConfig::new(vocab.len(), layout.dim());
        cfg.slot_clears = heuristic_rules(vocab, ont);
        cfg
    }

    pub fn with_hidden(mut self, n: usize) -> Self {
        self.hidden_size = n;
        self.embedding_dim = n;
        self
    }

    pub fn with_layers(mut self, layers: usize, dropout: f64) -> Self {
        let a = self.alpha.first().copied().unwrap_or(0.5);
        self.num_layers = layers;
        self.alpha = vec![a; layers];
        self.dropout = dropout;
        self
    }

    pub fn with_gating(mut self, gating: GatingMode) -> Self {
        self.gating = gating;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Input(format!("net config: {m}")));
        if self.hidden_size == 0 || self.embedding_dim == 0 {
            return bad("sizes must be positive");
        }
        if self.num_layers == 0 {
            return bad("need at least one layer");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.alpha.len() != self.num_layers || self.alpha.iter().any(|a| !a.is_finite()) {
            return bad("alpha needs one finite weight per layer");
        }
        if !self.slot_clears.is_empty() && self.slot_clears.len() != self.vocab_size {
            return bad("slot_clears must have one entry per token");
        }
        if self.slot_clears.iter().flatten().any(|&k| k >= self.da_dim) {
            return bad("slot_clears index outside DA vector");
        }
        Ok(())
    }

    pub(crate) fn layer_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.embedding_dim
        } else {
            self.embedding_dim + self.hidden_size
        }
    }
}

/// Slot token `SLOT_<s>` clears the mentioned and requested features of
/// slot `s`. Dontcare and yes/no features have no slot token and are never
/// cleared.
pub fn heuristic_rules(vocab: &Vocab, ont: &Ontology) -> Vec<Vec<usize>> {
    let layout = DaLayout::new(ont);
    vocab
        .tokens()
        .iter()
        .map(|tok| match ont.slot_for_token(tok) {
            Some(s) if ont.slots[s].kind == SlotKind::Categorical => vec![
                layout.feature(s, Feature::Mentioned),
                layout.feature(s, Feature::Requested),
            ],
            _ => Vec::new(),
        })
        .collect()
}

/// Weights of one LSTM layer. Input projections read the layer input
/// (embedding, plus the lower layer's hidden state above layer 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub w_wi: Mat,
    pub w_wf: Mat,
    pub w_wo: Mat,
    pub w_wc: Mat,
    pub w_hi: Mat,
    pub w_hf: Mat,
    pub w_ho: Mat,
    pub w_hc: Mat,
    /// Phrase detector feeding the reading gate.
    pub w_hr: Mat,
}

/// All weights of one direction of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: Vec<LayerParams>,
    /// DA-to-cell projection, bottom layer only.
    pub w_dc: Mat,
    /// Keyword detector feeding the reading gate. Shared between the
    /// forward generator and the backward reranker.
    pub w_wr: Mat,
    /// Hidden-to-vocabulary projection over all layers' hidden states.
    pub w_out: Mat,
    pub embedding: Mat,
}

/// Same shapes as [`NetworkParams`], holding partial derivatives.
pub type Gradients = NetworkParams;

pub const INIT_SCALE: f64 = 0.1;

impl NetworkParams {
    pub fn init(cfg: &NetConfig, rng: &mut Rng) -> Self {
        Self::init_scaled(cfg, INIT_SCALE, rng)
    }

    pub fn init_scaled(cfg: &NetConfig, scale: f64, rng: &mut Rng) -> Self {
        let n = cfg.hidden_size;
        let mut u = |r, c| Mat::uniform(r, c, scale, rng);
        let layers = (0..cfg.num_layers)
            .map(|l| {
                let inp = cfg.layer_input_dim(l);
                LayerParams {
                    w_wi: u(n, inp),
                    w_wf: u(n, inp),
                    w_wo: u(n, inp),
                    w_wc: u(n, inp),
                    w_hi: u(n, n),
                    w_hf: u(n, n),
                    w_ho: u(n, n),
                    w_hc: u(n, n),
                    w_hr: u(cfg.da_dim, n),
                }
            })
            .collect();
        NetworkParams {
            layers,
            w_dc: u(n, cfg.da_dim),
            w_wr: u(cfg.da_dim, cfg.embedding_dim),
            w_out: u(cfg.vocab_size, n * cfg.num_layers),
            embedding: u(cfg.vocab_size, cfg.embedding_dim),
        }
    }

    /// Zero-filled gradient buffer with matching shapes.
    pub fn zeros_like(&self) -> Gradients {
        let mut g = self.clone();
        g.for_each_mut(|_, m| m.fill(0.0));
        g
    }

    /// Named references to every block, in a fixed order.
    pub fn blocks(&self) -> Vec<(String, &Mat)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, m) in layer.named() {
                out.push((format!("layer{l}.{name}"), m));
            }
        }
        out.push(("w_dc".into(), &self.w_dc));
        out.push(("w_wr".into(), &self.w_wr));
        out.push(("w_out".into(), &self.w_out));
        out.push(("embedding".into(), &self.embedding));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut Mat)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (name, m) in layer.named_mut() {
                out.push((format!("layer{l}.{name}"), m));
            }
        }
        out.push(("w_dc".into(), &mut self.w_dc));
        out.push(("w_wr".into(), &mut self.w_wr));
        out.push(("w_out".into(), &mut self.w_out));
        out.push(("embedding".into(), &mut self.embedding));
        out
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &mut Mat)) {
        for (name, m) in self.blocks_mut() {
            f(&name, m);
        }
    }

    pub fn block_names(&self) -> Vec<String> {
        self.blocks().into_iter().map(|(n, _)| n).collect()
    }

    pub fn block(&self, name: &str) -> Option<&Mat> {
        self.blocks().into_iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut Mat> {
        self.blocks_mut().into_iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    /// `self += scale * other`, block by block.
    pub fn add_scaled(&mut self, other: &NetworkParams, scale: f64) {
        for ((_, m), (_, o)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            m.add_scaled(o, scale);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.for_each_mut(|_, m| m.scale(s));
    }

    pub fn clip(&mut self, limit: f64) {
        self.for_each_mut(|_, m| {
            m.as_mut_slice()
                .iter_mut()
                .for_each(|x| *x = x.clamp(-limit, limit))
        });
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, m)| m.is_finite())
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|(_, m)| m.as_slice().len()).sum()
    }

    /// Copies the blocks shared between the forward and backward networks.
    pub fn copy_shared_from(&mut self, other: &NetworkParams) {
        self.w_wr.clone_from(&other.w_wr);
        self.embedding.clone_from(&other.embedding);
    }

    pub fn check_shapes(&self, cfg: &NetConfig) -> Result<()> {
        let fresh = NetworkParams::init_scaled(cfg, 0.0, &mut Rng::seed(0));
        let shapes = |p: &NetworkParams| -> Vec<(String, (usize, usize))> {
            p.blocks().into_iter().map(|(n, m)| (n, m.shape())).collect()
        };
        let (expect, got) = (shapes(&fresh), shapes(self));
        if expect != got {
            return Err(Error::Shape(format!(
                "parameter blocks do not match config: expected {expect:?}, got {got:?}"
            )));
        }
        Ok(())
    }
}

impl LayerParams {
    fn named(&self) -> [(&'static str, &Mat); 9] {
        [
            ("w_wi", &self.w_wi),
            ("w_wf", &self.w_wf),
            ("w_wo", &self.w_wo),
            ("w_wc", &self.w_wc),
            ("w_hi", &self.w_hi),
            ("w_hf", &self.w_hf),
            ("w_ho", &self.w_ho),
            ("w_hc", &self.w_hc),
            ("w_hr", &self.w_hr),
        ]
    }

    fn named_mut(&mut self) -> [(&'static str, &mut Mat); 9] {
        [
            ("w_wi", &mut self.w_wi),
            ("w_wf", &mut self.w_wf),
            ("w_wo", &mut self.w_wo),
            ("w_wc", &mut self.w_wc),
            ("w_hi", &mut self.w_hi),
            ("w_hf", &mut self.w_hf),
            ("w_ho", &mut self.w_ho),
            ("w_hc", &mut self.w_hc),
            ("w_hr", &mut self.w_hr),
        ]
    }
}
