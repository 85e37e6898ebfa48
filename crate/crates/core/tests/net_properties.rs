mod common;

use proptest::prelude::*;
use sclstm::net::{
    backprop_sentence, forward_sentence, heuristic_gate_step, reverse_for_reranker, step, Dropout, GatingMode,
    NetConfig, NetworkParams, State,
};
use sclstm::numkit::Rng;
use sclstm::trainer::{sentence_cost, GatePenalty};

fn small_cfg(gating: GatingMode, layers: usize) -> NetConfig {
    let mut cfg = NetConfig::new(12, 9).with_hidden(6).with_layers(layers, 0.0).with_gating(gating);
    cfg.slot_clears = (0..12).map(|t| if (3..6).contains(&t) { vec![t - 3, t] } else { vec![] }).collect();
    cfg
}

fn binary_d0(rng: &mut Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| if rng.bernoulli(0.5) { 1.0 } else { 0.0 }).collect()
}

fn sentence(rng: &mut Rng, len: usize) -> Vec<usize> {
    let mut ids = vec![0];
    ids.extend((1..len).map(|_| 2 + rng.below(10)));
    ids
}

#[test]
fn none_mode_with_zero_da_is_a_plain_lstm() {
    let mut rng = Rng::seed(42);
    for trial in 0..50 {
        let layers = 1 + trial % 2;
        let cfg = small_cfg(GatingMode::None, layers);
        let params = NetworkParams::init_scaled(&cfg, 0.5, &mut rng);
        let mut state = State::zeros(&cfg);
        state.h.iter_mut().flatten().for_each(|x| *x = rng.uniform(-0.9, 0.9));
        state.c.iter_mut().flatten().for_each(|x| *x = rng.uniform(-2.0, 2.0));
        let tok = rng.below(12);
        let st = step(&params, &cfg, tok, &state, &[0.0; 9], None).unwrap();
        let (h, c, p) = common::plain_lstm_step(&params, tok, &state.h, &state.c);
        for l in 0..layers {
            for j in 0..6 {
                assert!((st.layers[l].h[j] - h[l][j]).abs() <= 1e-12);
                assert!((st.layers[l].c[j] - c[l][j]).abs() <= 1e-12);
            }
        }
        for (a, b) in st.p.iter().zip(&p) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!(st.d.iter().all(|&x| x == 0.0));
    }
}

#[test]
fn forced_gates() {
    let cfg = small_cfg(GatingMode::Learned, 1);
    let mut rng = Rng::seed(3);
    let mut params = NetworkParams::init(&cfg, &mut rng);
    let d0 = vec![1.0; 9];
    // Saturate the reading gate open, then shut.
    params.w_wr.fill(0.0);
    params.layers[0].w_hr.fill(0.0);
    params.embedding.fill(1.0);
    params.w_wr.fill(100.0);
    let st = step(&params, &cfg, 4, &State::zeros(&cfg), &d0, None).unwrap();
    assert_eq!(st.d, d0);
    params.w_wr.fill(-100.0);
    let st = step(&params, &cfg, 4, &State::zeros(&cfg), &d0, None).unwrap();
    assert!(st.d.iter().all(|&x| x < 1e-40));
    assert!(st.da_cell.iter().all(|&x| x.abs() < 1e-30));
}

#[test]
fn heuristic_gate_rules() {
    let cfg = small_cfg(GatingMode::Learned, 1);
    let params = NetworkParams::init(&cfg, &mut Rng::seed(1));
    let d0 = vec![1.0; 9];
    let st = heuristic_gate_step(&params, &cfg, 4, &State::zeros(&cfg), &d0, None).unwrap();
    assert_eq!(st.d[1], 0.0);
    assert_eq!(st.d[4], 0.0);
    assert_eq!(st.d.iter().filter(|&&x| x == 1.0).count(), 7);
    let st = heuristic_gate_step(&params, &cfg, 8, &State::zeros(&cfg), &d0, None).unwrap();
    assert_eq!(st.d, d0);
}

#[test]
fn eval_forward_is_deterministic() {
    let cfg = small_cfg(GatingMode::Learned, 2);
    let mut rng = Rng::seed(9);
    let params = NetworkParams::init(&cfg, &mut rng);
    let ids = sentence(&mut rng, 6);
    let d0 = binary_d0(&mut rng, 9);
    let a = forward_sentence(&params, &cfg, &ids, &d0, Dropout::Off).unwrap();
    let b = forward_sentence(&params, &cfg, &ids, &d0, Dropout::Off).unwrap();
    assert_eq!(a, b);
    let one = forward_sentence(&params, &cfg, &[0], &d0, Dropout::Off).unwrap();
    assert_eq!(one.len(), 1);
    assert!(one.d_final().iter().zip(&d0).all(|(x, y)| x <= y));
}

#[test]
fn train_mode_forward_repeats_with_seed() {
    let cfg = small_cfg(GatingMode::Learned, 2).with_layers(2, 0.5);
    let params = NetworkParams::init(&cfg, &mut Rng::seed(2));
    let ids = vec![0, 3, 5, 7, 9];
    let run = |s| {
        let mut r = Rng::seed(s);
        forward_sentence(&params, &cfg, &ids, &[1.0; 9], Dropout::Sample(&mut r)).unwrap()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}

#[test]
fn da_vector_never_increases_over_100_networks() {
    let mut rng = Rng::seed(2024);
    let mut violations = 0;
    for trial in 0..100 {
        let gating = [GatingMode::Learned, GatingMode::Heuristic, GatingMode::None][trial % 3];
        let cfg = small_cfg(gating, 1 + trial % 2);
        let params = NetworkParams::init_scaled(&cfg, rng.uniform(0.05, 2.0), &mut rng);
        let len = 3 + rng.below(10);
        let ids = sentence(&mut rng, len);
        let d0 = binary_d0(&mut rng, 9);
        let tr = forward_sentence(&params, &cfg, &ids, &d0, Dropout::Off).unwrap();
        for t in 1..=tr.len() {
            for (now, before) in tr.d(t).iter().zip(tr.d(t - 1)) {
                if !(*now <= *before && (0.0..=1.0).contains(now)) {
                    violations += 1;
                }
            }
        }
    }
    assert_eq!(violations, 0);
}

proptest! {
    #[test]
    fn output_distribution_sums_to_one(seed in 0u64..500, tok in 0usize..12) {
        let cfg = small_cfg(GatingMode::Learned, 2);
        let mut rng = Rng::seed(seed);
        let params = NetworkParams::init_scaled(&cfg, 1.0, &mut rng);
        let d0 = binary_d0(&mut rng, 9);
        let st = step(&params, &cfg, tok, &State::zeros(&cfg), &d0, None).unwrap();
        prop_assert!((st.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(st.r.iter().all(|&r| (0.0..=1.0).contains(&r)));
    }

    #[test]
    fn monotone_da_for_any_weights(seed in 0u64..10_000, scale in 0.01f64..3.0, len in 1usize..12) {
        let cfg = small_cfg(GatingMode::Learned, 1);
        let mut rng = Rng::seed(seed);
        let params = NetworkParams::init_scaled(&cfg, scale, &mut rng);
        let ids = sentence(&mut rng, len);
        let d0 = binary_d0(&mut rng, 9);
        let tr = forward_sentence(&params, &cfg, &ids, &d0, Dropout::Off).unwrap();
        for t in 1..=tr.len() {
            for (now, before) in tr.d(t).iter().zip(tr.d(t - 1)) {
                prop_assert!(*now <= *before && *now >= 0.0);
            }
        }
    }

    #[test]
    fn reversal_is_an_involution(body in proptest::collection::vec(2usize..50, 0..20)) {
        let mut s = vec![0];
        s.extend(&body);
        s.push(1);
        let r = reverse_for_reranker(&s);
        prop_assert_eq!(r.first(), Some(&0));
        prop_assert_eq!(r.last(), Some(&1));
        prop_assert_eq!(reverse_for_reranker(&r), s);
    }
}

#[test]
fn binary_only_da_is_constant_under_heuristic() {
    // Features 6..9 are never cleared by any token in this configuration.
    let cfg = small_cfg(GatingMode::Heuristic, 1);
    let params = NetworkParams::init(&cfg, &mut Rng::seed(4));
    let mut d0 = vec![0.0; 9];
    d0[7] = 1.0;
    d0[8] = 1.0;
    let tr = forward_sentence(&params, &cfg, &[0, 3, 4, 5, 9], &d0, Dropout::Off).unwrap();
    for t in 0..=tr.len() {
        assert_eq!(tr.d(t), &d0[..]);
    }
}

#[test]
fn logits_gradient_is_p_minus_y_with_zero_output_weights() {
    let cfg = small_cfg(GatingMode::None, 1);
    let mut params = NetworkParams::init(&cfg, &mut Rng::seed(5));
    params.w_out.fill(0.0);
    let ids = [0, 4, 7];
    let tr = forward_sentence(&params, &cfg, &ids, &[0.0; 9], Dropout::Off).unwrap();
    let targets = [4, 7, 1];
    let (g, _) = backprop_sentence(&params, &cfg, &tr, &targets, &GatePenalty::default()).unwrap();
    // dL/dW_out[v, j] = sum_t (p_t[v] - y_t[v]) * h_t[j]
    for v in 0..12 {
        for j in 0..6 {
            let mut want = 0.0;
            for (t, st) in tr.steps.iter().enumerate() {
                let y = if targets[t] == v { 1.0 } else { 0.0 };
                want += (1.0 / 12.0 - y) * st.output_in[j];
            }
            assert!((g.w_out.get(v, j) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn doubling_the_cost_doubles_the_gradient() {
    let cfg = small_cfg(GatingMode::Learned, 1);
    let params = NetworkParams::init_scaled(&cfg, 0.5, &mut Rng::seed(6));
    let ids = [0, 3, 8, 5];
    let targets = [3, 8, 5, 1];
    let tr = forward_sentence(&params, &cfg, &ids, &[1.0; 9], Dropout::Off).unwrap();
    let mut once = params.zeros_like();
    let mut twice = params.zeros_like();
    let pen = GatePenalty::default();
    sclstm::net::accumulate_gradients(&params, &cfg, &tr, &targets, &pen, 1.0, &mut once).unwrap();
    sclstm::net::accumulate_gradients(&params, &cfg, &tr, &targets, &pen, 2.0, &mut twice).unwrap();
    for ((_, a), (_, b)) in once.blocks().into_iter().zip(twice.blocks()) {
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }
}

#[test]
fn shared_reading_gate_gradient_sums_both_directions() {
    let cfg = small_cfg(GatingMode::Learned, 1);
    let mut rng = Rng::seed(77);
    let fwd = NetworkParams::init_scaled(&cfg, 0.5, &mut rng);
    let mut bwd = NetworkParams::init_scaled(&cfg, 0.5, &mut rng);
    bwd.copy_shared_from(&fwd);
    let ids = vec![0, 3, 9, 4, 1];
    let rev = reverse_for_reranker(&ids);
    let d0 = vec![1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0];
    let pen = GatePenalty::default();
    let loss = |p: &NetworkParams, seq: &[usize]| {
        let tr = forward_sentence(p, &cfg, &seq[..seq.len() - 1], &d0, Dropout::Off).unwrap();
        sentence_cost(&tr, &seq[1..], &pen).0
    };
    let grad = |p: &NetworkParams, seq: &[usize]| {
        let tr = forward_sentence(p, &cfg, &seq[..seq.len() - 1], &d0, Dropout::Off).unwrap();
        backprop_sentence(p, &cfg, &tr, &seq[1..], &pen).unwrap().0
    };
    let (gf, gb) = (grad(&fwd, &ids), grad(&bwd, &rev));
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..fwd.w_wr.as_slice().len() {
        let shifted = |delta: f64| {
            let (mut f, mut b) = (fwd.clone(), bwd.clone());
            f.w_wr.as_mut_slice()[k] += delta;
            b.copy_shared_from(&f);
            loss(&f, &ids) + loss(&b, &rev)
        };
        let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
        let analytic = gf.w_wr.as_slice()[k] + gb.w_wr.as_slice()[k];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel.min((analytic - numeric).abs() / 1e-6));
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}
