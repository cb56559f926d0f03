use super::*;
use crate::rng;
use crate::rng::CounterRng;
use crate::tensor::Tensor;

fn eye(n: usize) -> Tensor {
    let mut t = Tensor::zeros(&[n, n]);
    for i in 0..n {
        t.data[i * n + i] = 1.0;
    }
    t
}

fn identity_attn(d: usize) -> AttentionParams {
    AttentionParams {
        heads: 1,
        wq: eye(d),
        bq: Tensor::zeros(&[d]),
        wk: eye(d),
        bk: Tensor::zeros(&[d]),
        wv: eye(d),
        bv: Tensor::zeros(&[d]),
        wo: eye(d),
        bo: Tensor::zeros(&[d]),
    }
}

fn no_binds() -> Vec<(String, crate::tensor::TensorId)> {
    Vec::new()
}

#[test]
fn sinusoidal_row_zero_alternates_zero_one() {
    let pe = sinusoidal_encoding(3, 8).unwrap();
    for i in 0..4 {
        assert_eq!(pe.data[2 * i], 0.0);
        assert_eq!(pe.data[2 * i + 1], 1.0);
    }
}

#[test]
fn sinusoidal_closed_form_entries() {
    let pe = sinusoidal_encoding(4, 6).unwrap();
    assert!((pe.at2(1, 0) - 1.0_f64.sin()).abs() < 1e-12);
    assert!((pe.at2(1, 0) - 0.841471).abs() < 1e-6);
    // Last column: cos(p / 10000^((d-2)/d)) ≈ 1 for small p.
    let d = 6.0;
    for p in 0..4 {
        let expect = (p as f64 / 10000f64.powf((d - 2.0) / d)).cos();
        assert!((pe.at2(p, 5) - expect).abs() < 1e-12);
        assert!(pe.at2(p, 5) > 0.999);
    }
}

#[test]
fn sinusoidal_rejects_odd_dim() {
    assert!(sinusoidal_encoding(4, 7).is_err());
}

#[test]
fn sinusoidal_rows_have_norm_dim_over_two() {
    let pe = sinusoidal_encoding(50, 16).unwrap();
    for p in 0..50 {
        let sq: f64 = pe.data[p * 16..(p + 1) * 16].iter().map(|v| v * v).sum();
        assert!((sq - 8.0).abs() < 1e-9, "row {p}: {sq}");
    }
}

#[test]
fn attention_single_key_returns_value_row() {
    let d = 4;
    let params = identity_attn(d);
    let mut g = crate::tensor::Graph::new();
    let mut binds = no_binds();
    let ids = params.leaf(&mut g, &mut binds, "attn");
    let x = g.constant(Tensor::new(vec![0.3, -1.0, 2.0, 0.7], vec![1, d]).unwrap());
    let mask = AttentionMask::all(1, 1);
    let out = multi_head_attention(&mut g, x, x, x, &mask, &ids, None).unwrap();
    for (o, x) in g.data(out).iter().zip(&[0.3, -1.0, 2.0, 0.7]) {
        assert!((o - x).abs() < 1e-12);
    }
}

#[test]
fn attention_identical_keys_uniform_values() {
    let d = 2;
    let params = identity_attn(d);
    let mut g = crate::tensor::Graph::new();
    let mut binds = no_binds();
    let ids = params.leaf(&mut g, &mut binds, "attn");
    let q = g.constant(Tensor::new(vec![1.0, 2.0], vec![1, d]).unwrap());
    let kv = g.constant(Tensor::new(vec![0.5, -0.5, 0.5, -0.5], vec![2, d]).unwrap());
    let mask = AttentionMask::all(1, 2);
    let out = multi_head_attention(&mut g, q, kv, kv, &mask, &ids, None).unwrap();
    assert!((g.data(out)[0] - 0.5).abs() < 1e-12);
    assert!((g.data(out)[1] + 0.5).abs() < 1e-12);
}

#[test]
fn attention_masked_key_is_inert() {
    let d = 4;
    let mut r = rng::seeded(2);
    let params = AttentionParams::init(d, 2, &mut r).unwrap();
    let mut mask = AttentionMask::all(1, 3);
    mask.deny(0, 2);

    let run = |keys: &Tensor| {
        let mut g = crate::tensor::Graph::new();
        let mut binds = no_binds();
        let ids = params.leaf(&mut g, &mut binds, "attn");
        let q = g.constant(Tensor::new(vec![0.1, 0.2, 0.3, 0.4], vec![1, d]).unwrap());
        let k = g.constant(keys.clone());
        let out = multi_head_attention(&mut g, q, k, k, &mask, &ids, None).unwrap();
        g.data(out).to_vec()
    };

    let mut r2 = rng::seeded(3);
    let keys = Tensor::randn(&[3, d], 1.0, &mut r2);
    let base = run(&keys);
    let mut perturbed = keys.clone();
    for j in 0..d {
        perturbed.data[2 * d + j] += 17.0 + j as f64;
    }
    let moved = run(&perturbed);
    for (a, b) in base.iter().zip(&moved) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn attention_all_masked_row_errors() {
    let d = 2;
    let params = identity_attn(d);
    let mut g = crate::tensor::Graph::new();
    let mut binds = no_binds();
    let ids = params.leaf(&mut g, &mut binds, "attn");
    let x = g.constant(Tensor::zeros(&[2, d]));
    let mask = AttentionMask::none(2, 2);
    let err = multi_head_attention(&mut g, x, x, x, &mask, &ids, None);
    assert!(matches!(err, Err(NnError::AllMaskedRow { row: 0 })));
}

#[test]
fn encoder_block_with_zero_projections_is_identity() {
    let mut r = rng::seeded(4);
    let mut p = EncoderBlockParams::init(4, 2, 8, &mut r).unwrap();
    p.attn.wo = Tensor::zeros(&[4, 4]);
    p.ff2 = Tensor::zeros(&[8, 4]);

    let mut g = crate::tensor::Graph::new();
    let mut binds = no_binds();
    let ids = p.leaf(&mut g, &mut binds, "blk");
    let x_t = Tensor::randn(&[3, 4], 1.0, &mut r);
    let x = g.constant(x_t.clone());
    let mask = AttentionMask::all(3, 3);
    let mut drop_rng = CounterRng::new(0);
    let out = encoder_block(&mut g, x, &mask, &ids, 0.0, false, &mut drop_rng, None).unwrap();
    assert_eq!(g.data(out), &x_t.data[..]);
}

#[test]
fn encoder_block_eval_is_deterministic() {
    let mut r = rng::seeded(5);
    let p = EncoderBlockParams::init(4, 2, 8, &mut r).unwrap();
    let x_t = Tensor::randn(&[3, 4], 1.0, &mut r);
    let mask = AttentionMask::causal(3);

    let run = || {
        let mut g = crate::tensor::Graph::new();
        let mut binds = no_binds();
        let ids = p.leaf(&mut g, &mut binds, "blk");
        let x = g.constant(x_t.clone());
        let mut drop_rng = CounterRng::new(9);
        let out = encoder_block(&mut g, x, &mask, &ids, 0.1, false, &mut drop_rng, None).unwrap();
        g.data(out).to_vec()
    };
    assert_eq!(run(), run());
}

#[test]
fn encoder_block_causal_rows_ignore_the_future() {
    let mut r = rng::seeded(6);
    let p = EncoderBlockParams::init(4, 2, 8, &mut r).unwrap();
    let x_t = Tensor::randn(&[4, 4], 1.0, &mut r);
    let mask = AttentionMask::causal(4);

    let run = |x_t: &Tensor| {
        let mut g = crate::tensor::Graph::new();
        let mut binds = no_binds();
        let ids = p.leaf(&mut g, &mut binds, "blk");
        let x = g.constant(x_t.clone());
        let mut drop_rng = CounterRng::new(0);
        let out = encoder_block(&mut g, x, &mask, &ids, 0.0, false, &mut drop_rng, None).unwrap();
        g.data(out).to_vec()
    };

    let base = run(&x_t);
    let mut moved = x_t.clone();
    for j in 0..4 {
        moved.data[3 * 4 + j] = -9.0 - j as f64;
    }
    let out = run(&moved);
    // Rows 0..3 unchanged, row 3 free to change.
    for i in 0..3 * 4 {
        assert!((base[i] - out[i]).abs() <= 1e-12);
    }
}

#[test]
fn masked_positions_block_gradients_exactly() {
    // Module-level causality theorem: if M[t, t'] is false then
    // d out[t] / d x[t'] == 0, by perturbation and by autodiff.
    for seed in 0..10 {
        let mut r = rng::seeded(seed);
        let n = 5;
        let p = EncoderBlockParams::init(4, 2, 8, &mut r).unwrap();
        let mut mask = AttentionMask::none(n, n);
        for q in 0..n {
            mask.allow(q, q);
            for k in 0..n {
                if rng::uniform(&mut r) < 0.4 {
                    mask.allow(q, k);
                }
            }
        }
        let x_t = Tensor::randn(&[n, 4], 1.0, &mut r).with_grad();
        let t = rng::index(&mut r, n);

        let mut g = crate::tensor::Graph::new();
        let mut binds = no_binds();
        let ids = p.leaf(&mut g, &mut binds, "blk");
        let x = g.leaf(&x_t);
        let mut drop_rng = CounterRng::new(0);
        let out = encoder_block(&mut g, x, &mask, &ids, 0.0, false, &mut drop_rng, None).unwrap();
        let row = g.slice_rows(out, t, 1);
        let loss = g.sum_all(row);
        g.backward(loss).unwrap();
        let grad = g.grad(x).unwrap();
        for tp in 0..n {
            if tp != t && !mask.is_allowed(t, tp) {
                for j in 0..4 {
                    assert_eq!(
                        grad[tp * 4 + j], 0.0,
                        "seed {seed}: leak from {tp} into {t}"
                    );
                }
            }
        }
    }
}

#[test]
fn attention_trace_rows_are_probability_vectors() {
    let mut r = rng::seeded(8);
    let p = EncoderBlockParams::init(4, 2, 8, &mut r).unwrap();
    let mut g = crate::tensor::Graph::new();
    let mut binds = no_binds();
    let ids = p.leaf(&mut g, &mut binds, "blk");
    let x = g.constant(Tensor::randn(&[5, 4], 1.0, &mut r));
    let mask = AttentionMask::causal(5);
    let mut trace = AttentionTrace::new();
    let mut drop_rng = CounterRng::new(0);
    encoder_block(
        &mut g,
        x,
        &mask,
        &ids,
        0.0,
        false,
        &mut drop_rng,
        Some(&mut trace),
    )
    .unwrap();
    assert_eq!(trace.layers.len(), 1);
    let layer = &trace.layers[0];
    for matrix in std::iter::once(&layer.avg).chain(layer.heads.iter()) {
        for row in matrix.chunks(layer.k_len) {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }
    // Masked entries carry exact zeros.
    assert_eq!(layer.avg[1], 0.0);
}

#[test]
fn decoder_single_token_runs_on_cross_attention() {
    let mut r = rng::seeded(10);
    let p = DecoderBlockParams::init(4, 2, 8, &mut r).unwrap();
    let mut g = crate::tensor::Graph::new();
    let mut binds = no_binds();
    let ids = p.leaf(&mut g, &mut binds, "dec");
    let y = g.constant(Tensor::randn(&[1, 4], 1.0, &mut r));
    let enc = g.constant(Tensor::randn(&[3, 4], 1.0, &mut r));
    let mask = AttentionMask::causal(1);
    let mut drop_rng = CounterRng::new(0);
    let out = decoder_block(
        &mut g, y, enc, &mask, &ids, 0.0, false, &mut drop_rng, None,
    )
    .unwrap();
    assert_eq!(g.shape(out), &[1, 4]);
}

#[test]
fn decoder_future_tokens_are_invisible() {
    let mut r = rng::seeded(11);
    let p = DecoderBlockParams::init(4, 2, 8, &mut r).unwrap();
    let y_t = Tensor::randn(&[3, 4], 1.0, &mut r);
    let enc_t = Tensor::randn(&[2, 4], 1.0, &mut r);

    let run = |y_t: &Tensor| {
        let mut g = crate::tensor::Graph::new();
        let mut binds = no_binds();
        let ids = p.leaf(&mut g, &mut binds, "dec");
        let y = g.constant(y_t.clone());
        let enc = g.constant(enc_t.clone());
        let mask = AttentionMask::causal(3);
        let mut drop_rng = CounterRng::new(0);
        let out = decoder_block(
            &mut g, y, enc, &mask, &ids, 0.0, false, &mut drop_rng, None,
        )
        .unwrap();
        g.data(out).to_vec()
    };

    let base = run(&y_t);
    let mut moved = y_t.clone();
    for j in 0..4 {
        moved.data[2 * 4 + j] += 5.0;
    }
    let out = run(&moved);
    for i in 0..2 * 4 {
        assert!((base[i] - out[i]).abs() <= 1e-12);
    }
}

#[test]
fn decoder_with_zero_cross_value_ignores_encoder() {
    let mut r = rng::seeded(12);
    let mut p = DecoderBlockParams::init(4, 2, 8, &mut r).unwrap();
    p.cross_attn.wv = Tensor::zeros(&[4, 4]);
    p.cross_attn.bv = Tensor::zeros(&[4]);
    let y_t = Tensor::randn(&[2, 4], 1.0, &mut r);

    let run = |enc_t: &Tensor| {
        let mut g = crate::tensor::Graph::new();
        let mut binds = no_binds();
        let ids = p.leaf(&mut g, &mut binds, "dec");
        let y = g.constant(y_t.clone());
        let enc = g.constant(enc_t.clone());
        let mask = AttentionMask::causal(2);
        let mut drop_rng = CounterRng::new(0);
        let out = decoder_block(
            &mut g, y, enc, &mask, &ids, 0.0, false, &mut drop_rng, None,
        )
        .unwrap();
        g.data(out).to_vec()
    };

    let zero_enc = Tensor::zeros(&[3, 4]);
    let mut r2 = rng::seeded(13);
    let rand_enc = Tensor::randn(&[3, 4], 2.0, &mut r2);
    assert_eq!(run(&zero_enc), run(&rand_enc));
}

#[test]
fn lstm_zero_params_halve_the_cell() {
    let hidden = 3;
    let p = LstmCellParams {
        w_ih: Tensor::zeros(&[2, 4 * hidden]),
        w_hh: Tensor::zeros(&[hidden, 4 * hidden]),
        bias: Tensor::zeros(&[4 * hidden]),
    };
    let mut g = crate::tensor::Graph::new();
    let mut binds = no_binds();
    let ids = p.leaf(&mut g, &mut binds, "cell");
    let x = g.constant(Tensor::new(vec![1.0, -1.0], vec![1, 2]).unwrap());
    let h = g.constant(Tensor::zeros(&[1, hidden]));
    let c = g.constant(Tensor::new(vec![0.4, -0.8, 1.2], vec![1, hidden]).unwrap());
    let (h2, c2) = lstm_cell(&mut g, x, h, c, &ids).unwrap();
    for (j, &cv) in [0.4, -0.8, 1.2].iter().enumerate() {
        assert!((g.data(c2)[j] - 0.5 * cv).abs() < 1e-12);
        assert!((g.data(h2)[j] - 0.5 * (0.5 * cv).tanh()).abs() < 1e-12);
    }
}

#[test]
fn lstm_saturated_gates_preserve_memory() {
    let hidden = 2;
    let mut bias = Tensor::zeros(&[4 * hidden]);
    for j in 0..hidden {
        bias.data[j] = -1e9; // input gate shut
        bias.data[hidden + j] = 1e9; // forget gate open
    }
    let p = LstmCellParams {
        w_ih: Tensor::zeros(&[1, 4 * hidden]),
        w_hh: Tensor::zeros(&[hidden, 4 * hidden]),
        bias,
    };
    let mut g = crate::tensor::Graph::new();
    let mut binds = no_binds();
    let ids = p.leaf(&mut g, &mut binds, "cell");
    let x = g.constant(Tensor::new(vec![3.0], vec![1, 1]).unwrap());
    let h = g.constant(Tensor::zeros(&[1, hidden]));
    let c = g.constant(Tensor::new(vec![0.9, -2.5], vec![1, hidden]).unwrap());
    let (_, c2) = lstm_cell(&mut g, x, h, c, &ids).unwrap();
    assert_eq!(g.data(c2), &[0.9, -2.5]);
}

#[test]
fn lstm_matches_per_gate_loop_oracle() {
    let (input, hidden) = (3, 2);
    let mut r = rng::seeded(14);
    let p = LstmCellParams::init(input, hidden, &mut r);
    let x = Tensor::randn(&[1, input], 1.0, &mut r);
    let h = Tensor::randn(&[1, hidden], 1.0, &mut r);
    let c = Tensor::randn(&[1, hidden], 1.0, &mut r);

    // Explicit per-gate oracle.
    let sigma = |v: f64| 1.0 / (1.0 + (-v).exp());
    let mut expect_h = vec![0.0; hidden];
    let mut expect_c = vec![0.0; hidden];
    for j in 0..hidden {
        let mut gates = [0.0; 4];
        for (gi, gate) in gates.iter_mut().enumerate() {
            let col = gi * hidden + j;
            let mut v = p.bias.data[col];
            for a in 0..input {
                v += x.data[a] * p.w_ih.data[a * 4 * hidden + col];
            }
            for b in 0..hidden {
                v += h.data[b] * p.w_hh.data[b * 4 * hidden + col];
            }
            *gate = v;
        }
        let (i, f, o, cand) = (sigma(gates[0]), sigma(gates[1]), sigma(gates[2]), gates[3].tanh());
        expect_c[j] = f * c.data[j] + i * cand;
        expect_h[j] = o * expect_c[j].tanh();
    }

    let mut g = crate::tensor::Graph::new();
    let mut binds = no_binds();
    let ids = p.leaf(&mut g, &mut binds, "cell");
    let xi = g.constant(x.clone());
    let hi = g.constant(h.clone());
    let ci = g.constant(c.clone());
    let (h2, c2) = lstm_cell(&mut g, xi, hi, ci, &ids).unwrap();
    for j in 0..hidden {
        assert!((g.data(c2)[j] - expect_c[j]).abs() < 1e-12);
        assert!((g.data(h2)[j] - expect_h[j]).abs() < 1e-12);
    }
}

#[test]
fn dropout_identity_cases() {
    let mut g = crate::tensor::Graph::new();
    let x = g.constant(Tensor::new(vec![1.0, 2.0, 3.0], vec![3]).unwrap());
    let mut r = CounterRng::new(1);
    let same = dropout(&mut g, x, 0.0, true, &mut r).unwrap();
    assert_eq!(same, x);
    let same = dropout(&mut g, x, 0.5, false, &mut r).unwrap();
    assert_eq!(same, x);
    assert!(dropout(&mut g, x, 1.0, true, &mut r).is_err());
}

#[test]
fn dropout_statistics_match_rate() {
    let n = 1_000_000;
    let mut g = crate::tensor::Graph::new();
    let x = g.constant(Tensor::full(&[n], 1.0));
    let mut r = CounterRng::new(7);
    let y = dropout(&mut g, x, 0.1, true, &mut r).unwrap();
    let data = g.data(y);
    let zeros = data.iter().filter(|&&v| v == 0.0).count() as f64 / n as f64;
    assert!((zeros - 0.1).abs() < 0.002, "zero fraction {zeros}");
    let mean: f64 = data.iter().sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
}
