//! Backpropagation through time for the full per-sentence cost, including
//! the DA-vector path through the reading gate.

use crate::error::{Error, Result};
use crate::numkit::{norm2, Mat};
use crate::trainer::{sentence_cost, GatePenalty};

use super::forward::ForwardTrace;
use super::params::{GatingMode, Gradients, NetConfig, NetworkParams};

/// Exact gradients of the sentence cost for a recorded trace.
pub fn backprop_sentence(
    params: &NetworkParams,
    cfg: &NetConfig,
    trace: &ForwardTrace,
    targets: &[usize],
    penalty: &GatePenalty,
) -> Result<(Gradients, f64)> {
    let mut grads = params.zeros_like();
    let loss = accumulate_gradients(params, cfg, trace, targets, penalty, 1.0, &mut grads)?;
    Ok((grads, loss))
}

fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Adds `scale * dCost/dParams` into `grads` and returns the (unscaled) cost.
pub fn accumulate_gradients(
    params: &NetworkParams,
    cfg: &NetConfig,
    trace: &ForwardTrace,
    targets: &[usize],
    penalty: &GatePenalty,
    scale: f64,
    grads: &mut Gradients,
) -> Result<f64> {
    let steps = trace.len();
    if targets.len() != steps {
        return Err(Error::Shape(format!(
            "{} targets for {} steps",
            targets.len(),
            steps
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&y| y >= cfg.vocab_size) {
        return Err(Error::Input(format!("target index {bad} outside vocabulary")));
    }
    let (loss, _) = sentence_cost(trace, targets, penalty);

    let n = cfg.hidden_size;
    let m = cfg.embedding_dim;
    let layers = cfg.num_layers;
    let learned = cfg.gating == GatingMode::Learned;
    let zeros = vec![0.0; n];

    let mut dh_next = vec![vec![0.0; n]; layers];
    let mut dc_next = vec![vec![0.0; n]; layers];
    let mut dd_next = vec![0.0; cfg.da_dim];

    for k in (0..steps).rev() {
        let st = &trace.steps[k];
        let h_prev = |l: usize| -> &[f64] {
            if k == 0 {
                &zeros
            } else {
                &trace.steps[k - 1].layers[l].h
            }
        };
        let c_prev = |l: usize| -> &[f64] {
            if k == 0 {
                &zeros
            } else {
                &trace.steps[k - 1].layers[l].c
            }
        };

        // softmax + cross-entropy
        let mut dz = st.p.clone();
        dz[targets[k]] -= 1.0;
        dz.iter_mut().for_each(|x| *x *= scale);
        grads.w_out.add_outer(&dz, &st.output_in, 1.0);
        let mut dout = vec![0.0; n * layers];
        params.w_out.gemv_t_add(&dz, &mut dout);
        if let Some(masks) = &st.masks {
            dout.iter_mut().zip(&masks.output).for_each(|(x, k)| *x *= k);
        }
        let mut dh: Vec<Vec<f64>> = (0..layers)
            .map(|l| {
                dout[l * n..(l + 1) * n]
                    .iter()
                    .zip(&dh_next[l])
                    .map(|(a, b)| a + b)
                    .collect()
            })
            .collect();

        // gradient w.r.t. the DA vector produced by this step
        let mut dd = dd_next.clone();
        if learned {
            let delta: Vec<f64> = trace.d(k + 1).iter().zip(trace.d(k)).map(|(a, b)| a - b).collect();
            crate::numkit::axpy(scale, &penalty.grad(&delta), &mut dd);
            if k + 1 == steps {
                let d_t = trace.d_final();
                let norm = norm2(d_t);
                if norm > 0.0 {
                    crate::numkit::axpy(scale / norm, d_t, &mut dd);
                }
            }
        }

        let mut de = vec![0.0; m];
        let mut dh_prev_new = vec![vec![0.0; n]; layers];
        let mut dc_prev_new = vec![vec![0.0; n]; layers];

        for l in (0..layers).rev() {
            let lt = &st.layers[l];
            let lp = &params.layers[l];
            let lg = &mut grads.layers[l];
            let dh_l = &dh[l];

            let d_o = hadamard(dh_l, &lt.tanh_c);
            let dc: Vec<f64> = (0..n)
                .map(|j| dh_l[j] * lt.o[j] * (1.0 - lt.tanh_c[j] * lt.tanh_c[j]) + dc_next[l][j])
                .collect();
            let cp = c_prev(l);
            let dz_i: Vec<f64> = (0..n).map(|j| dc[j] * lt.c_hat[j] * lt.i[j] * (1.0 - lt.i[j])).collect();
            let dz_f: Vec<f64> = (0..n).map(|j| dc[j] * cp[j] * lt.f[j] * (1.0 - lt.f[j])).collect();
            let dz_o: Vec<f64> = (0..n).map(|j| d_o[j] * lt.o[j] * (1.0 - lt.o[j])).collect();
            let dz_c: Vec<f64> = (0..n)
                .map(|j| dc[j] * lt.i[j] * (1.0 - lt.c_hat[j] * lt.c_hat[j]))
                .collect();
            dc_prev_new[l] = hadamard(&dc, &lt.f);

            if l == 0 {
                let dz_a: Vec<f64> = (0..n)
                    .map(|j| dc[j] * (1.0 - st.da_cell[j] * st.da_cell[j]))
                    .collect();
                grads.w_dc.add_outer(&dz_a, &st.d, 1.0);
                params.w_dc.gemv_t_add(&dz_a, &mut dd);
            }

            let hp = h_prev(l);
            let mut dinput = vec![0.0; lt.input.len()];
            let pairs: [(&Vec<f64>, &Mat, &Mat, usize); 4] = [
                (&dz_i, &lp.w_wi, &lp.w_hi, 0),
                (&dz_f, &lp.w_wf, &lp.w_hf, 1),
                (&dz_o, &lp.w_wo, &lp.w_ho, 2),
                (&dz_c, &lp.w_wc, &lp.w_hc, 3),
            ];
            for (dzg, w_in, w_h, which) in pairs {
                let (g_in, g_h) = match which {
                    0 => (&mut lg.w_wi, &mut lg.w_hi),
                    1 => (&mut lg.w_wf, &mut lg.w_hf),
                    2 => (&mut lg.w_wo, &mut lg.w_ho),
                    _ => (&mut lg.w_wc, &mut lg.w_hc),
                };
                g_in.add_outer(dzg, &lt.input, 1.0);
                g_h.add_outer(dzg, hp, 1.0);
                w_in.gemv_t_add(dzg, &mut dinput);
                w_h.gemv_t_add(dzg, &mut dh_prev_new[l]);
            }

            crate::numkit::axpy(1.0, &dinput[..m], &mut de);
            if l > 0 {
                let below = &dinput[m..];
                let dh_below = &mut dh[l - 1];
                match &st.masks {
                    Some(masks) => {
                        for ((x, g), k) in dh_below.iter_mut().zip(below).zip(&masks.hidden_in[l - 1]) {
                            *x += g * k;
                        }
                    }
                    None => crate::numkit::axpy(1.0, below, dh_below),
                }
            }
        }

        if learned {
            let d_before = trace.d(k);
            let dz_r: Vec<f64> = (0..cfg.da_dim)
                .map(|j| dd[j] * d_before[j] * st.r[j] * (1.0 - st.r[j]))
                .collect();
            let emb = params.embedding.row(st.token);
            grads.w_wr.add_outer(&dz_r, emb, 1.0);
            params.w_wr.gemv_t_add(&dz_r, &mut de);
            for (l, dh) in dh_prev_new.iter_mut().enumerate() {
                let alpha = cfg.alpha[l];
                grads.layers[l].w_hr.add_outer(&dz_r, h_prev(l), alpha);
                let mut tmp = vec![0.0; n];
                params.layers[l].w_hr.gemv_t_add(&dz_r, &mut tmp);
                crate::numkit::axpy(alpha, &tmp, dh);
            }
            // d_k feeds this step's product and the penalty term of this step
            let delta: Vec<f64> = trace.d(k + 1).iter().zip(d_before).map(|(a, b)| a - b).collect();
            let pen = penalty.grad(&delta);
            dd_next = (0..cfg.da_dim)
                .map(|j| dd[j] * st.r[j] - scale * pen[j])
                .collect();
        }

        crate::numkit::axpy(1.0, &de, grads.embedding.row_mut(st.token));
        dh_next = dh_prev_new;
        dc_next = dc_prev_new;
    }
    Ok(loss)
}
