//! Finite-difference gradient verification.

use super::{Graph, Tensor, TensorId};

/// Compare reverse-mode gradients of a scalar function against central
/// finite differences.
///
/// `f` must be deterministic (disable dropout). Returns the maximum over
/// coordinates of `|autodiff − central| / max(1, |central|)`.
pub fn grad_check<F>(mut f: F, x: &Tensor, h: f64) -> f64
where
    F: FnMut(&mut Graph, TensorId) -> TensorId,
{
    assert!(h > 0.0);
    let mut probe = x.clone();
    probe.requires_grad = true;

    let mut graph = Graph::new();
    let xid = graph.leaf(&probe);
    let loss = f(&mut graph, xid);
    graph.backward(loss).expect("scalar loss");
    let autodiff: Vec<f64> = match graph.grad(xid) {
        Some(g) => g.to_vec(),
        None => vec![0.0; x.numel()],
    };

    let eval = |data: &Tensor, f: &mut F| -> f64 {
        let mut g = Graph::new();
        let id = g.constant(data.clone());
        let loss = f(&mut g, id);
        g.data(loss)[0]
    };

    let mut worst: f64 = 0.0;
    for i in 0..x.numel() {
        let mut plus = x.clone();
        plus.data[i] += h;
        let mut minus = x.clone();
        minus.data[i] -= h;
        let central = (eval(&plus, &mut f) - eval(&minus, &mut f)) / (2.0 * h);
        let err = (autodiff[i] - central).abs() / central.abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}
