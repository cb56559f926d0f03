use super::*;
use crate::rng;
use proptest::prelude::*;

fn t(data: Vec<f64>, shape: Vec<usize>) -> Tensor {
    Tensor::new(data, shape).unwrap()
}

#[test]
fn matmul_identity_is_exact() {
    let mut g = Graph::new();
    let eye = g.constant(t(vec![1.0, 0.0, 0.0, 1.0], vec![2, 2]));
    let a = g.constant(t(vec![3.0, 4.0, 5.0, 6.0], vec![2, 2]));
    let c = g.matmul(eye, a).unwrap();
    assert_eq!(g.data(c), &[3.0, 4.0, 5.0, 6.0]);
}

#[test]
fn matmul_dot_product() {
    let mut g = Graph::new();
    let a = g.constant(t(vec![1.0, 2.0], vec![1, 2]));
    let b = g.constant(t(vec![3.0, 4.0], vec![2, 1]));
    let c = g.matmul(a, b).unwrap();
    assert_eq!(g.data(c), &[11.0]);
}

#[test]
fn matmul_matches_triple_loop_oracle() {
    let mut r = rng::seeded(11);
    let a: Vec<f64> = (0..20).map(|_| rng::normal(&mut r)).collect();
    let b: Vec<f64> = (0..15).map(|_| rng::normal(&mut r)).collect();
    // Independent brute-force oracle: c[i][j] = Σₖ a[i][k]·b[k][j].
    let mut expect = vec![0.0; 4 * 3];
    for i in 0..4 {
        for j in 0..3 {
            let mut s = 0.0;
            for k in 0..5 {
                s += a[i * 5 + k] * b[k * 3 + j];
            }
            expect[i * 3 + j] = s;
        }
    }
    let mut g = Graph::new();
    let at = g.constant(t(a, vec![4, 5]));
    let bt = g.constant(t(b, vec![5, 3]));
    let c = g.matmul(at, bt).unwrap();
    for (got, want) in g.data(c).iter().zip(&expect) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn matmul_shape_mismatch_names_both_shapes() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[4, 2]));
    let err = g.matmul(a, b).unwrap_err().to_string();
    assert!(err.contains("[2, 3]") && err.contains("[4, 2]"), "{err}");
}

#[test]
fn softmax_symmetry_and_closed_form() {
    let mut g = Graph::new();
    let a = g.constant(t(vec![0.0, 0.0], vec![2]));
    let s = g.softmax(a, 0).unwrap();
    assert_eq!(g.data(s), &[0.5, 0.5]);

    let b = g.constant(t(vec![2.0_f64.ln(), 0.0], vec![2]));
    let s = g.softmax(b, 0).unwrap();
    assert!((g.data(s)[0] - 2.0 / 3.0).abs() < 1e-15);
    assert!((g.data(s)[1] - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn softmax_is_stable_under_large_logits() {
    let mut g = Graph::new();
    let a = g.constant(t(vec![1000.0, 0.0], vec![2]));
    let s = g.softmax(a, 0).unwrap();
    assert!(g.data(s)[0] > 1.0 - 1e-12);
    assert!(g.data(s)[1] < 1e-12);
    assert!(g.data(s).iter().all(|v| v.is_finite()));
}

#[test]
fn softmax_axis_out_of_range() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 2]));
    assert!(g.softmax(a, 2).is_err());
}

#[test]
fn layer_norm_cases() {
    let mut g = Graph::new();
    let gamma = g.constant(t(vec![1.0, 1.0, 1.0], vec![3]));
    let beta = g.constant(Tensor::zeros(&[3]));
    let x = g.constant(t(vec![1.0, 1.0, 1.0], vec![1, 3]));
    let y = g.layer_norm(x, gamma, beta, 1e-5).unwrap();
    for v in g.data(y) {
        assert!(v.abs() < 1e-9);
    }

    let gamma = g.constant(t(vec![1.0, 1.0], vec![2]));
    let beta = g.constant(Tensor::zeros(&[2]));
    let x = g.constant(t(vec![-1.0, 1.0], vec![1, 2]));
    let y = g.layer_norm(x, gamma, beta, 1e-30).unwrap();
    assert!((g.data(y)[0] + 1.0).abs() < 1e-12);
    assert!((g.data(y)[1] - 1.0).abs() < 1e-12);

    let gamma = g.constant(t(vec![3.0, 3.0], vec![2]));
    let beta = g.constant(t(vec![1.0, 1.0], vec![2]));
    let x = g.constant(t(vec![0.0, 2.0], vec![1, 2]));
    let y = g.layer_norm(x, gamma, beta, 1e-30).unwrap();
    assert!((g.data(y)[0] + 2.0).abs() < 1e-12);
    assert!((g.data(y)[1] - 4.0).abs() < 1e-12);
}

#[test]
fn layer_norm_dim_mismatch() {
    let mut g = Graph::new();
    let gamma = g.constant(Tensor::zeros(&[3]));
    let beta = g.constant(Tensor::zeros(&[3]));
    let x = g.constant(Tensor::zeros(&[2, 4]));
    assert!(g.layer_norm(x, gamma, beta, 1e-5).is_err());
}

#[test]
fn cross_entropy_uniform_logits() {
    let mut g = Graph::new();
    let logits = g.constant(Tensor::zeros(&[1, 4]));
    let loss = g.cross_entropy(logits, &[2], None).unwrap();
    assert!((g.data(loss)[0] - 4.0_f64.ln()).abs() < 1e-12);
}

#[test]
fn cross_entropy_confident_correct_is_near_zero() {
    let mut g = Graph::new();
    let mut logits = Tensor::zeros(&[1, 3]);
    logits.data[1] = 1e6;
    let logits = g.constant(logits);
    let loss = g.cross_entropy(logits, &[1], None).unwrap();
    assert!(g.data(loss)[0].abs() < 1e-9);
}

#[test]
fn cross_entropy_ignored_rows_match_masked_mean_oracle() {
    let mut g = Graph::new();
    let two = g.constant(t(vec![0.3, -0.7, 1.1, 9.0, 9.0, 9.0], vec![2, 3]));
    let ignore = Some(usize::MAX);
    let masked = g.cross_entropy(two, &[2, usize::MAX], ignore).unwrap();
    let one = g.constant(t(vec![0.3, -0.7, 1.1], vec![1, 3]));
    let single = g.cross_entropy(one, &[2], None).unwrap();
    assert_eq!(g.data(masked)[0], g.data(single)[0]);
}

#[test]
fn cross_entropy_all_ignored_is_zero() {
    let mut g = Graph::new();
    let logits = g.constant(Tensor::zeros(&[2, 3]));
    let loss = g
        .cross_entropy(logits, &[usize::MAX, usize::MAX], Some(usize::MAX))
        .unwrap();
    assert_eq!(g.data(loss)[0], 0.0);
}

#[test]
fn cross_entropy_target_out_of_range() {
    let mut g = Graph::new();
    let logits = g.constant(Tensor::zeros(&[1, 3]));
    assert!(g.cross_entropy(logits, &[3], None).is_err());
}

#[test]
fn backward_sum_of_squares() {
    let mut g = Graph::new();
    let x = g.leaf(&t(vec![1.0, 2.0], vec![2]).with_grad());
    let sq = g.mul(x, x).unwrap();
    let loss = g.sum_all(sq);
    g.backward(loss).unwrap();
    assert_eq!(g.grad(x).unwrap(), &[2.0, 4.0]);
}

#[test]
fn backward_constant_has_no_gradient() {
    let mut g = Graph::new();
    let x = g.leaf(&t(vec![1.0, 2.0], vec![2]).with_grad());
    let c = g.constant(Tensor::scalar(5.0));
    let loss = g.sum_all(c);
    g.backward(loss).unwrap();
    assert!(g.grad(x).is_none());
}

#[test]
fn backward_non_scalar_loss_is_an_error() {
    let mut g = Graph::new();
    let x = g.leaf(&t(vec![1.0, 2.0], vec![2]).with_grad());
    assert!(g.backward(x).is_err());
}

#[test]
fn backward_fanout_accumulates_exactly() {
    // d/dx of (x + x) == 2 exactly.
    let mut g = Graph::new();
    let x = g.leaf(&t(vec![3.0], vec![1]).with_grad());
    let y = g.add(x, x).unwrap();
    g.backward(y).unwrap();
    assert_eq!(g.grad(x).unwrap(), &[2.0]);
}

#[test]
fn backward_two_layer_mlp_matches_finite_differences() {
    let mut r = rng::seeded(5);
    let w1 = Tensor::randn(&[3, 4], 0.7, &mut r);
    let w2 = Tensor::randn(&[4, 2], 0.7, &mut r);
    let x = Tensor::randn(&[2, 3], 1.0, &mut r);

    let err = grad_check(
        |g, xid| {
            let w1 = g.constant(w1.clone());
            let w2 = g.constant(w2.clone());
            let h = g.matmul(xid, w1).unwrap();
            let h = g.tanh(h);
            let o = g.matmul(h, w2).unwrap();
            let sq = g.mul(o, o).unwrap();
            g.sum_all(sq)
        },
        &x,
        1e-5,
    );
    assert!(err < 1e-4, "max rel err {err}");
}

#[test]
fn grad_check_quadratic_is_nearly_exact() {
    let x = t(vec![0.4, -1.2, 2.0], vec![3]);
    let err = grad_check(
        |g, xid| {
            let sq = g.mul(xid, xid).unwrap();
            g.sum_all(sq)
        },
        &x,
        1e-5,
    );
    assert!(err < 1e-8, "max rel err {err}");
}

#[test]
fn grad_check_cross_entropy_softmax_chain() {
    let mut r = rng::seeded(9);
    let x = Tensor::randn(&[3, 5], 1.0, &mut r);
    let err = grad_check(
        |g, xid| {
            let s = g.scale(xid, 1.7);
            g.cross_entropy(s, &[0, 3, 2], None).unwrap()
        },
        &x,
        1e-5,
    );
    assert!(err < 1e-4, "max rel err {err}");
}

#[test]
fn grad_check_is_deterministic_without_dropout() {
    let x = t(vec![0.5, 0.25], vec![2]);
    let f = |g: &mut Graph, xid: TensorId| {
        let y = g.sigmoid(xid);
        g.mean_all(y)
    };
    let a = grad_check(f, &x, 1e-5);
    let b = grad_check(f, &x, 1e-5);
    assert_eq!(a, b);
}

#[test]
fn gradient_soundness_over_random_compositions() {
    // Smaller sibling of the acceptance criterion: random op chains.
    for seed in 0..20 {
        let mut r = rng::seeded(seed);
        let x = Tensor::randn(&[2, 4], 0.8, &mut r);
        let w = Tensor::randn(&[4, 4], 0.6, &mut r);
        let gamma = Tensor::full(&[4], 1.0);
        let beta = Tensor::zeros(&[4]);
        let err = grad_check(
            |g, xid| {
                let w = g.constant(w.clone());
                let gm = g.constant(gamma.clone());
                let bt = g.constant(beta.clone());
                let h = g.matmul(xid, w).unwrap();
                let h = g.layer_norm(h, gm, bt, 1e-5).unwrap();
                let h = g.softmax(h, 1).unwrap();
                let h2 = g.tanh(h);
                let m = g.mul(h, h2).unwrap();
                g.mean_all(m)
            },
            &x,
            1e-5,
        );
        assert!(err < 1e-4, "seed {seed}: rel err {err}");
    }
}

#[test]
fn gather_and_concat_grads_flow() {
    let table = t(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![3, 2]).with_grad();
    let mut g = Graph::new();
    let tid = g.leaf(&table);
    let rows = g.gather_rows(tid, &[0, 2, 0]);
    let sum = g.gather_rows_sum(tid, &[vec![0, 1], vec![]]);
    let cat = g.concat_rows(&[rows, sum]).unwrap();
    let loss = g.sum_all(cat);
    g.backward(loss).unwrap();
    // row 0 used twice by gather + once in group; row 1 once; row 2 once.
    assert_eq!(g.grad(tid).unwrap(), &[3.0, 3.0, 1.0, 1.0, 1.0, 1.0]);
    // Empty group contributes zeros.
    assert_eq!(&g.data(sum)[2..4], &[0.0, 0.0]);
}

#[test]
fn slice_and_concat_cols_round_trip_grads() {
    let x = t(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![2, 3]).with_grad();
    let mut g = Graph::new();
    let xid = g.leaf(&x);
    let a = g.slice_cols(xid, 0, 1);
    let b = g.slice_cols(xid, 1, 2);
    let back = g.concat_cols(&[a, b]).unwrap();
    assert_eq!(g.data(back), g.data(xid));
    let loss = g.sum_all(back);
    g.backward(loss).unwrap();
    assert_eq!(g.grad(xid).unwrap(), &[1.0; 6]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..5, cols in 1usize..6, seed in 0u64..1000) {
        let mut r = rng::seeded(seed);
        let data: Vec<f64> = (0..rows * cols).map(|_| rng::normal(&mut r) * 3.0).collect();
        let mut g = Graph::new();
        let x = g.constant(t(data, vec![rows, cols]));
        let s = g.softmax(x, 1).unwrap();
        for row in g.data(s).chunks(cols) {
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn softmax_shift_invariance(cols in 1usize..6, shift in -50.0f64..50.0, seed in 0u64..1000) {
        let mut r = rng::seeded(seed);
        let data: Vec<f64> = (0..cols).map(|_| rng::normal(&mut r) * 2.0).collect();
        let shifted: Vec<f64> = data.iter().map(|v| v + shift).collect();
        let mut g = Graph::new();
        let a = g.constant(t(data, vec![cols]));
        let b = g.constant(t(shifted, vec![cols]));
        let sa = g.softmax(a, 0).unwrap();
        let sb = g.softmax(b, 0).unwrap();
        for (x, y) in g.data(sa).iter().zip(g.data(sb)) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn matmul_identity_property(n in 1usize..6, seed in 0u64..1000) {
        let mut r = rng::seeded(seed);
        let data: Vec<f64> = (0..n * n).map(|_| rng::normal(&mut r)).collect();
        let mut eye = vec![0.0; n * n];
        for i in 0..n {
            eye[i * n + i] = 1.0;
        }
        let mut g = Graph::new();
        let i_t = g.constant(t(eye, vec![n, n]));
        let a = g.constant(t(data.clone(), vec![n, n]));
        let c = g.matmul(i_t, a).unwrap();
        prop_assert_eq!(g.data(c), &data[..]);
    }
}
