//! Independent reference implementations shared by the integration tests.
//! Written from the definitions, without calling into the crate's own
//! numerics.
#![allow(dead_code)]

use sclstm::da::{slot_token, DialogueAct, Ontology, SlotKind, SlotValue};
use sclstm::net::NetworkParams;
use sclstm::numkit::{Mat, Rng};

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn mv(m: &Mat, x: &[f64]) -> Vec<f64> {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| m.get(r, c) * x[c]).sum())
        .collect()
}

/// One step of a textbook stacked LSTM with no DA input: returns new
/// (h, c) per layer and the softmax output.
pub fn plain_lstm_step(
    p: &NetworkParams,
    token: usize,
    h_prev: &[Vec<f64>],
    c_prev: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let emb: Vec<f64> = p.embedding.row(token).to_vec();
    let mut hs: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<Vec<f64>> = Vec::new();
    for (l, lp) in p.layers.iter().enumerate() {
        let mut x = emb.clone();
        if l > 0 {
            x.extend_from_slice(&hs[l - 1]);
        }
        let pre = |wx: &Mat, wh: &Mat| -> Vec<f64> {
            mv(wx, &x).iter().zip(mv(wh, &h_prev[l])).map(|(a, b)| a + b).collect()
        };
        let i: Vec<f64> = pre(&lp.w_wi, &lp.w_hi).into_iter().map(sig).collect();
        let f: Vec<f64> = pre(&lp.w_wf, &lp.w_hf).into_iter().map(sig).collect();
        let o: Vec<f64> = pre(&lp.w_wo, &lp.w_ho).into_iter().map(sig).collect();
        let g: Vec<f64> = pre(&lp.w_wc, &lp.w_hc).into_iter().map(f64::tanh).collect();
        let c: Vec<f64> = (0..i.len()).map(|j| f[j] * c_prev[l][j] + i[j] * g[j]).collect();
        let h: Vec<f64> = (0..i.len()).map(|j| o[j] * c[j].tanh()).collect();
        hs.push(h);
        cs.push(c);
    }
    let all: Vec<f64> = hs.iter().flatten().copied().collect();
    let z = mv(&p.w_out, &all);
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    (hs, cs, e.iter().map(|v| v / s).collect())
}

/// Corpus BLEU-4 by direct enumeration: clipped n-gram matches, closest
/// reference length (shorter on ties), no smoothing.
pub fn brute_bleu(hyps: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> f64 {
    let grams = |s: &[String], n: usize| -> Vec<Vec<String>> {
        if s.len() < n {
            return vec![];
        }
        (0..=s.len() - n).map(|i| s[i..i + n].to_vec()).collect()
    };
    let count = |list: &[Vec<String>], g: &Vec<String>| list.iter().filter(|x| *x == g).count();
    let mut num = [0f64; 4];
    let mut den = [0f64; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rs) in hyps.iter().zip(refs) {
        c += h.len();
        let mut best = rs[0].len();
        for x in rs {
            let (d, bd) = (x.len().abs_diff(h.len()), best.abs_diff(h.len()));
            if d < bd || (d == bd && x.len() < best) {
                best = x.len();
            }
        }
        r += best;
        for n in 1..=4 {
            let hg = grams(h, n);
            let mut seen: Vec<Vec<String>> = Vec::new();
            for g in &hg {
                if seen.contains(g) {
                    continue;
                }
                seen.push(g.clone());
                let mut cap = 0;
                for x in rs {
                    cap = cap.max(count(&grams(x, n), g));
                }
                num[n - 1] += count(&hg, g).min(cap) as f64;
            }
            den[n - 1] += hg.len() as f64;
        }
    }
    if (0..4).any(|k| num[k] == 0.0) {
        return 0.0;
    }
    let p: f64 = (0..4).map(|k| (num[k] / den[k]).ln()).sum::<f64>() / 4.0;
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * p.exp()
}

/// Slot error rate by counting slot-token strings.
pub fn brute_err(tokens: &[String], da: &DialogueAct, ont: &Ontology) -> f64 {
    let (mut n, mut p, mut q) = (0i64, 0i64, 0i64);
    for def in &ont.slots {
        let want = if def.kind == SlotKind::Categorical {
            da.bindings
                .iter()
                .filter(|(s, v)| ont.slot(s).map(|d| &d.name) == Some(&def.name) && matches!(v, SlotValue::Categorical(_)))
                .count() as i64
        } else {
            0
        };
        let tok = slot_token(&def.name);
        let got = tokens.iter().filter(|t| **t == tok).count() as i64;
        n += want;
        p += (want - got).max(0);
        q += (got - want).max(0);
    }
    if n == 0 {
        q as f64
    } else {
        (p + q) as f64 / n as f64
    }
}

/// A random DA valid under `ont`.
pub fn random_da(ont: &Ontology, rng: &mut Rng) -> DialogueAct {
    let act = ont.act_types[rng.below(ont.act_types.len())].clone();
    let may_request = act == "request" || act == "select";
    let mut da = DialogueAct::new(act);
    for _ in 0..rng.below(4) {
        let def = &ont.slots[rng.below(ont.slots.len())];
        let v = match (def.kind, rng.below(4)) {
            (_, 0) if may_request => SlotValue::Requested,
            (_, 1) if def.allows_dontcare => SlotValue::DontCare,
            (SlotKind::Binary, k) => {
                if k % 2 == 0 {
                    SlotValue::Yes
                } else {
                    SlotValue::No
                }
            }
            (SlotKind::Categorical, _) => SlotValue::Categorical(format!("v{}", rng.below(5))),
        };
        da = da.with(def.name.clone(), v);
    }
    da
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}
