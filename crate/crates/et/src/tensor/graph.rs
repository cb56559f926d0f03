//! Tape-based computation graph.
//!
//! A [`Graph`] records every operation in topological order as it executes;
//! [`Graph::backward`] walks the tape in reverse and accumulates gradients
//! with `+=` across fan-out. Graphs are rebuilt per forward pass and confined
//! to one thread; parameters enter a graph as leaf copies.

use super::{matmul_acc, transpose_raw, Tensor, TensorError};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorId(pub(crate) usize);

/// Operation record; inputs are node ids that precede the record.
#[derive(Clone, Debug)]
pub enum Op {
    Leaf,
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    Scale(TensorId, f64),
    AddBias(TensorId, TensorId),
    Matmul(TensorId, TensorId),
    Transpose(TensorId),
    Reshape(TensorId),
    Relu(TensorId),
    Tanh(TensorId),
    Sigmoid(TensorId),
    Softmax(TensorId, usize),
    LayerNorm {
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
        eps: f64,
    },
    CrossEntropy {
        logits: TensorId,
        targets: Vec<usize>,
        ignore_index: Option<usize>,
    },
    SumAll(TensorId),
    MeanAll(TensorId),
    GatherRows {
        table: TensorId,
        indices: Vec<usize>,
    },
    GatherRowsSum {
        table: TensorId,
        groups: Vec<Vec<usize>>,
    },
    ConcatRows(Vec<TensorId>),
    SliceRows {
        x: TensorId,
        start: usize,
        len: usize,
    },
    ConcatCols(Vec<TensorId>),
    SliceCols {
        x: TensorId,
        start: usize,
        len: usize,
    },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Dynamic tape; acyclic by construction (inputs always precede consumers).
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    /// Number of recorded operations (leaves included).
    pub fn op_count(&self) -> usize {
        self.nodes.len()
    }

    /// Copy a tensor into the graph as a leaf. Gradient flows back to the
    /// leaf node iff `tensor.requires_grad`.
    pub fn leaf(&mut self, tensor: &Tensor) -> TensorId {
        self.push(Op::Leaf, tensor.clone())
    }

    /// Leaf that always receives gradient, regardless of the source flag.
    pub fn leaf_param(&mut self, tensor: &Tensor) -> TensorId {
        let mut t = tensor.clone();
        t.requires_grad = true;
        t.grad = None;
        self.push(Op::Leaf, t)
    }

    /// Leaf that never receives gradient.
    pub fn constant(&mut self, tensor: Tensor) -> TensorId {
        let mut t = tensor;
        t.requires_grad = false;
        self.push(Op::Leaf, t)
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].value.shape
    }

    pub fn data(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].value.data
    }

    pub fn value(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of a node after [`Graph::backward`]; `None` if no gradient
    /// reached it (or it did not require one).
    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.0].value.grad.as_deref()
    }

    fn push(&mut self, op: Op, value: Tensor) -> TensorId {
        let id = TensorId(self.nodes.len());
        self.nodes.push(Node { op, value });
        id
    }

    fn requires(&self, id: TensorId) -> bool {
        self.nodes[id.0].value.requires_grad
    }

    fn out(&mut self, op: Op, data: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> TensorId {
        self.push(
            op,
            Tensor {
                shape,
                data,
                requires_grad,
                grad: None,
            },
        )
    }

    // ---- elementwise ----

    fn check_same_shape(
        &self,
        op: &'static str,
        a: TensorId,
        b: TensorId,
    ) -> Result<(), TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::ShapeMismatch {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.check_same_shape("add", a, b)?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.requires(a) || self.requires(b);
        Ok(self.out(Op::Add(a, b), data, shape, rg))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.check_same_shape("sub", a, b)?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x - y)
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.requires(a) || self.requires(b);
        Ok(self.out(Op::Sub(a, b), data, shape, rg))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.check_same_shape("mul", a, b)?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.requires(a) || self.requires(b);
        Ok(self.out(Op::Mul(a, b), data, shape, rg))
    }

    pub fn scale(&mut self, a: TensorId, factor: f64) -> TensorId {
        let data = self.data(a).iter().map(|x| x * factor).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.requires(a);
        self.out(Op::Scale(a, factor), data, shape, rg)
    }

    /// Row-broadcast bias: [n×d] + [d]. The one permitted broadcast.
    pub fn add_bias(&mut self, a: TensorId, bias: TensorId) -> Result<TensorId, TensorError> {
        let d = *self.shape(a).last().unwrap();
        if self.shape(bias) != [d] {
            return Err(TensorError::ShapeMismatch {
                op: "add_bias",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(bias).to_vec(),
            });
        }
        let bdata = self.data(bias).to_vec();
        let data = self
            .data(a)
            .iter()
            .enumerate()
            .map(|(i, x)| x + bdata[i % d])
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.requires(a) || self.requires(bias);
        Ok(self.out(Op::AddBias(a, bias), data, shape, rg))
    }

    // ---- activations ----

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        let data = self.data(a).iter().map(|x| x.max(0.0)).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.requires(a);
        self.out(Op::Relu(a), data, shape, rg)
    }

    pub fn tanh(&mut self, a: TensorId) -> TensorId {
        let data = self.data(a).iter().map(|x| x.tanh()).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.requires(a);
        self.out(Op::Tanh(a), data, shape, rg)
    }

    pub fn sigmoid(&mut self, a: TensorId) -> TensorId {
        let data = self
            .data(a)
            .iter()
            .map(|x| 1.0 / (1.0 + (-x).exp()))
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.requires(a);
        self.out(Op::Sigmoid(a), data, shape, rg)
    }

    // ---- linear algebra ----

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut data = vec![0.0; m * n];
        matmul_acc(self.data(a), self.data(b), m, k, n, &mut data);
        let rg = self.requires(a) || self.requires(b);
        Ok(self.out(Op::Matmul(a, b), data, vec![m, n], rg))
    }

    pub fn transpose(&mut self, a: TensorId) -> TensorId {
        let s = self.shape(a).to_vec();
        assert_eq!(s.len(), 2, "transpose expects a 2-D tensor");
        let data = transpose_raw(self.data(a), s[0], s[1]);
        let rg = self.requires(a);
        self.out(Op::Transpose(a), data, vec![s[1], s[0]], rg)
    }

    pub fn reshape(&mut self, a: TensorId, shape: Vec<usize>) -> Result<TensorId, TensorError> {
        let numel: usize = shape.iter().product();
        if numel != self.data(a).len() {
            return Err(TensorError::BadLength {
                len: self.data(a).len(),
                shape,
            });
        }
        let data = self.data(a).to_vec();
        let rg = self.requires(a);
        Ok(self.out(Op::Reshape(a), data, shape, rg))
    }

    // ---- normalization / distributions ----

    /// Softmax along `axis` with max-subtraction for stability.
    pub fn softmax(&mut self, a: TensorId, axis: usize) -> Result<TensorId, TensorError> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(TensorError::AxisOutOfRange {
                op: "softmax",
                axis,
                shape,
            });
        }
        let data = softmax_raw(self.data(a), &shape, axis);
        let rg = self.requires(a);
        Ok(self.out(Op::Softmax(a, axis), data, shape, rg))
    }

    /// Per-row normalization over the last dimension, then `gamma·x̂ + beta`.
    pub fn layer_norm(
        &mut self,
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
        eps: f64,
    ) -> Result<TensorId, TensorError> {
        let shape = self.shape(x).to_vec();
        let d = *shape.last().unwrap();
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(TensorError::ShapeMismatch {
                op: "layer_norm",
                lhs: shape,
                rhs: self.shape(gamma).to_vec(),
            });
        }
        assert!(eps > 0.0, "layer_norm eps must be positive");
        let xd = self.data(x);
        let g = self.data(gamma);
        let b = self.data(beta);
        let mut data = vec![0.0; xd.len()];
        for r in 0..xd.len() / d {
            let row = &xd[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for j in 0..d {
                data[r * d + j] = (row[j] - mean) * inv * g[j] + b[j];
            }
        }
        let shape = self.shape(x).to_vec();
        let rg = self.requires(x) || self.requires(gamma) || self.requires(beta);
        Ok(self.out(Op::LayerNorm { x, gamma, beta, eps }, data, shape, rg))
    }

    /// Mean negative log-softmax over rows whose target is not the ignore
    /// index; 0 if every row is ignored.
    pub fn cross_entropy(
        &mut self,
        logits: TensorId,
        targets: &[usize],
        ignore_index: Option<usize>,
    ) -> Result<TensorId, TensorError> {
        let shape = self.shape(logits).to_vec();
        assert_eq!(shape.len(), 2, "cross_entropy expects [n×K] logits");
        let (n, classes) = (shape[0], shape[1]);
        assert_eq!(targets.len(), n, "one target per logits row");
        for &t in targets {
            if Some(t) != ignore_index && t >= classes {
                return Err(TensorError::TargetOutOfRange { target: t, classes });
            }
        }
        let ld = self.data(logits);
        let mut total = 0.0;
        let mut live = 0usize;
        for (r, &t) in targets.iter().enumerate() {
            if Some(t) == ignore_index {
                continue;
            }
            live += 1;
            let row = &ld[r * classes..(r + 1) * classes];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            total += lse - row[t];
        }
        let loss = if live == 0 { 0.0 } else { total / live as f64 };
        let rg = self.requires(logits);
        Ok(self.out(
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                ignore_index,
            },
            vec![loss],
            vec![1],
            rg,
        ))
    }

    // ---- reductions ----

    pub fn sum_all(&mut self, a: TensorId) -> TensorId {
        let s = self.data(a).iter().sum();
        let rg = self.requires(a);
        self.out(Op::SumAll(a), vec![s], vec![1], rg)
    }

    pub fn mean_all(&mut self, a: TensorId) -> TensorId {
        let n = self.data(a).len();
        let s = self.data(a).iter().sum::<f64>() / n as f64;
        let rg = self.requires(a);
        self.out(Op::MeanAll(a), vec![s], vec![1], rg)
    }

    // ---- gather / concat / slice ----

    /// Embedding lookup: rows of `table` selected by `indices`.
    pub fn gather_rows(&mut self, table: TensorId, indices: &[usize]) -> TensorId {
        let d = self.shape(table)[1];
        let rows = self.shape(table)[0];
        let td = self.data(table);
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            assert!(i < rows, "gather index {i} out of range for {rows} rows");
            data.extend_from_slice(&td[i * d..(i + 1) * d]);
        }
        let rg = self.requires(table);
        self.out(
            Op::GatherRows {
                table,
                indices: indices.to_vec(),
            },
            data,
            vec![indices.len(), d],
            rg,
        )
    }

    /// Multi-hot lookup: output row r is the sum of the table rows listed in
    /// `groups[r]`.
    pub fn gather_rows_sum(&mut self, table: TensorId, groups: &[Vec<usize>]) -> TensorId {
        let d = self.shape(table)[1];
        let td = self.data(table);
        let mut data = vec![0.0; groups.len() * d];
        for (r, group) in groups.iter().enumerate() {
            let orow = &mut data[r * d..(r + 1) * d];
            for &i in group {
                let trow = &td[i * d..(i + 1) * d];
                for (o, &t) in orow.iter_mut().zip(trow) {
                    *o += t;
                }
            }
        }
        let rg = self.requires(table);
        self.out(
            Op::GatherRowsSum {
                table,
                groups: groups.to_vec(),
            },
            data,
            vec![groups.len(), d],
            rg,
        )
    }

    /// Stack 2-D tensors with equal column counts along the row axis.
    pub fn concat_rows(&mut self, parts: &[TensorId]) -> Result<TensorId, TensorError> {
        assert!(!parts.is_empty());
        let d = self.shape(parts[0])[1];
        let mut rows = 0;
        for &p in parts {
            if self.shape(p).len() != 2 || self.shape(p)[1] != d {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_rows",
                    lhs: self.shape(parts[0]).to_vec(),
                    rhs: self.shape(p).to_vec(),
                });
            }
            rows += self.shape(p)[0];
        }
        let mut data = Vec::with_capacity(rows * d);
        for &p in parts {
            data.extend_from_slice(self.data(p));
        }
        let rg = parts.iter().any(|&p| self.requires(p));
        Ok(self.out(Op::ConcatRows(parts.to_vec()), data, vec![rows, d], rg))
    }

    pub fn slice_rows(&mut self, x: TensorId, start: usize, len: usize) -> TensorId {
        let shape = self.shape(x).to_vec();
        assert_eq!(shape.len(), 2);
        assert!(start + len <= shape[0], "slice_rows out of range");
        let d = shape[1];
        let data = self.data(x)[start * d..(start + len) * d].to_vec();
        let rg = self.requires(x);
        self.out(Op::SliceRows { x, start, len }, data, vec![len, d], rg)
    }

    /// Concatenate 2-D tensors with equal row counts along the column axis.
    pub fn concat_cols(&mut self, parts: &[TensorId]) -> Result<TensorId, TensorError> {
        assert!(!parts.is_empty());
        let n = self.shape(parts[0])[0];
        let mut width = 0;
        for &p in parts {
            if self.shape(p).len() != 2 || self.shape(p)[0] != n {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.shape(parts[0]).to_vec(),
                    rhs: self.shape(p).to_vec(),
                });
            }
            width += self.shape(p)[1];
        }
        let mut data = vec![0.0; n * width];
        let mut col = 0;
        for &p in parts {
            let w = self.shape(p)[1];
            let pd = self.data(p);
            for r in 0..n {
                data[r * width + col..r * width + col + w]
                    .copy_from_slice(&pd[r * w..(r + 1) * w]);
            }
            col += w;
        }
        let rg = parts.iter().any(|&p| self.requires(p));
        Ok(self.out(Op::ConcatCols(parts.to_vec()), data, vec![n, width], rg))
    }

    pub fn slice_cols(&mut self, x: TensorId, start: usize, len: usize) -> TensorId {
        let shape = self.shape(x).to_vec();
        assert_eq!(shape.len(), 2);
        assert!(start + len <= shape[1], "slice_cols out of range");
        let (n, w) = (shape[0], shape[1]);
        let xd = self.data(x);
        let mut data = Vec::with_capacity(n * len);
        for r in 0..n {
            data.extend_from_slice(&xd[r * w + start..r * w + start + len]);
        }
        let rg = self.requires(x);
        self.out(Op::SliceCols { x, start, len }, data, vec![n, len], rg)
    }

    // ---- backward ----

    /// Reverse sweep from a scalar loss. Gradients accumulate with `+=`
    /// across fan-out and are left on every node that received one.
    pub fn backward(&mut self, loss: TensorId) -> Result<(), TensorError> {
        if self.data(loss).len() != 1 {
            return Err(TensorError::NonScalarLoss {
                shape: self.shape(loss).to_vec(),
            });
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..n).rev() {
            let gout = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            if !self.nodes[i].value.requires_grad {
                // Leaves that do not require grad still stop here; interior
                // nodes without requires_grad cannot receive gradient at all.
                continue;
            }
            self.propagate(i, &gout, &mut grads);
            self.nodes[i].value.grad = Some(gout);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, gout: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |id: TensorId, contribution: &mut dyn FnMut(&mut [f64])| {
            if !self.requires(id) {
                return;
            }
            let slot = &mut grads[id.0];
            if slot.is_none() {
                *slot = Some(vec![0.0; self.nodes[id.0].value.data.len()]);
            }
            contribution(slot.as_mut().unwrap());
        };

        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, &mut |g| {
                    for (gi, &go) in g.iter_mut().zip(gout) {
                        *gi += go;
                    }
                });
                acc(*b, &mut |g| {
                    for (gi, &go) in g.iter_mut().zip(gout) {
                        *gi += go;
                    }
                });
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |g| {
                    for (gi, &go) in g.iter_mut().zip(gout) {
                        *gi += go;
                    }
                });
                acc(*b, &mut |g| {
                    for (gi, &go) in g.iter_mut().zip(gout) {
                        *gi -= go;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.data(*a), self.data(*b));
                acc(*a, &mut |g| {
                    for ((gi, &go), &bv) in g.iter_mut().zip(gout).zip(bd) {
                        *gi += go * bv;
                    }
                });
                acc(*b, &mut |g| {
                    for ((gi, &go), &av) in g.iter_mut().zip(gout).zip(ad) {
                        *gi += go * av;
                    }
                });
            }
            Op::Scale(a, factor) => {
                let f = *factor;
                acc(*a, &mut |g| {
                    for (gi, &go) in g.iter_mut().zip(gout) {
                        *gi += go * f;
                    }
                });
            }
            Op::AddBias(a, bias) => {
                let d = self.nodes[bias.0].value.data.len();
                acc(*a, &mut |g| {
                    for (gi, &go) in g.iter_mut().zip(gout) {
                        *gi += go;
                    }
                });
                acc(*bias, &mut |g| {
                    for (j, &go) in gout.iter().enumerate() {
                        g[j % d] += go;
                    }
                });
            }
            Op::Matmul(a, b) => {
                let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let n = self.shape(*b)[1];
                let (ad, bd) = (self.data(*a), self.data(*b));
                acc(*a, &mut |g| {
                    // dA = dC · Bᵀ
                    let bt = transpose_raw(bd, k, n);
                    matmul_acc(gout, &bt, m, n, k, g);
                });
                acc(*b, &mut |g| {
                    // dB = Aᵀ · dC
                    let at = transpose_raw(ad, m, k);
                    matmul_acc(&at, gout, k, m, n, g);
                });
            }
            Op::Transpose(a) => {
                let s = self.shape(i_id(i));
                let (r, c) = (s[0], s[1]);
                acc(*a, &mut |g| {
                    let gt = transpose_raw(gout, r, c);
                    for (gi, &go) in g.iter_mut().zip(gt.iter()) {
                        *gi += go;
                    }
                });
            }
            Op::Reshape(a) => {
                acc(*a, &mut |g| {
                    for (gi, &go) in g.iter_mut().zip(gout) {
                        *gi += go;
                    }
                });
            }
            Op::Relu(a) => {
                let ad = self.data(*a);
                acc(*a, &mut |g| {
                    for ((gi, &go), &av) in g.iter_mut().zip(gout).zip(ad) {
                        if av > 0.0 {
                            *gi += go;
                        }
                    }
                });
            }
            Op::Tanh(a) => {
                let yd = self.data(i_id(i));
                acc(*a, &mut |g| {
                    for ((gi, &go), &y) in g.iter_mut().zip(gout).zip(yd) {
                        *gi += go * (1.0 - y * y);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let yd = self.data(i_id(i));
                acc(*a, &mut |g| {
                    for ((gi, &go), &y) in g.iter_mut().zip(gout).zip(yd) {
                        *gi += go * y * (1.0 - y);
                    }
                });
            }
            Op::Softmax(a, axis) => {
                let shape = self.shape(i_id(i)).to_vec();
                let yd = self.data(i_id(i));
                let axis = *axis;
                acc(*a, &mut |g| {
                    softmax_backward(yd, gout, &shape, axis, g);
                });
            }
            Op::LayerNorm { x, gamma, beta, eps } => {
                let shape = self.shape(*x).to_vec();
                let d = *shape.last().unwrap();
                let xd = self.data(*x);
                let gd = self.data(*gamma);
                let eps = *eps;
                let rows = xd.len() / d;
                // Precompute per-row stats once.
                let mut stats = Vec::with_capacity(rows);
                for r in 0..rows {
                    let row = &xd[r * d..(r + 1) * d];
                    let mean = row.iter().sum::<f64>() / d as f64;
                    let var =
                        row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                    stats.push((mean, 1.0 / (var + eps).sqrt()));
                }
                acc(*x, &mut |g| {
                    for r in 0..rows {
                        let (mean, inv) = stats[r];
                        let row = &xd[r * d..(r + 1) * d];
                        let gorow = &gout[r * d..(r + 1) * d];
                        // dxhat_j = gout_j * gamma_j
                        let mut sum_dx = 0.0;
                        let mut sum_dx_xhat = 0.0;
                        for j in 0..d {
                            let xhat = (row[j] - mean) * inv;
                            let dxh = gorow[j] * gd[j];
                            sum_dx += dxh;
                            sum_dx_xhat += dxh * xhat;
                        }
                        let grow = &mut g[r * d..(r + 1) * d];
                        for j in 0..d {
                            let xhat = (row[j] - mean) * inv;
                            let dxh = gorow[j] * gd[j];
                            grow[j] += inv
                                * (dxh - sum_dx / d as f64 - xhat * sum_dx_xhat / d as f64);
                        }
                    }
                });
                acc(*gamma, &mut |g| {
                    for r in 0..rows {
                        let (mean, inv) = stats[r];
                        for j in 0..d {
                            let xhat = (xd[r * d + j] - mean) * inv;
                            g[j] += gout[r * d + j] * xhat;
                        }
                    }
                });
                acc(*beta, &mut |g| {
                    for r in 0..rows {
                        for j in 0..d {
                            g[j] += gout[r * d + j];
                        }
                    }
                });
            }
            Op::CrossEntropy {
                logits,
                targets,
                ignore_index,
            } => {
                let classes = self.shape(*logits)[1];
                let ld = self.data(*logits);
                let live = targets
                    .iter()
                    .filter(|&&t| Some(t) != *ignore_index)
                    .count();
                if live == 0 {
                    return;
                }
                let go = gout[0] / live as f64;
                acc(*logits, &mut |g| {
                    for (r, &t) in targets.iter().enumerate() {
                        if Some(t) == *ignore_index {
                            continue;
                        }
                        let row = &ld[r * classes..(r + 1) * classes];
                        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let denom: f64 = row.iter().map(|v| (v - max).exp()).sum();
                        let grow = &mut g[r * classes..(r + 1) * classes];
                        for j in 0..classes {
                            let p = (row[j] - max).exp() / denom;
                            grow[j] += go * (p - if j == t { 1.0 } else { 0.0 });
                        }
                    }
                });
            }
            Op::SumAll(a) => {
                let go = gout[0];
                acc(*a, &mut |g| {
                    for gi in g.iter_mut() {
                        *gi += go;
                    }
                });
            }
            Op::MeanAll(a) => {
                let len = self.data(*a).len() as f64;
                let go = gout[0] / len;
                acc(*a, &mut |g| {
                    for gi in g.iter_mut() {
                        *gi += go;
                    }
                });
            }
            Op::GatherRows { table, indices } => {
                let d = self.shape(*table)[1];
                acc(*table, &mut |g| {
                    for (r, &idx) in indices.iter().enumerate() {
                        let grow = &gout[r * d..(r + 1) * d];
                        let trow = &mut g[idx * d..(idx + 1) * d];
                        for (t, &go) in trow.iter_mut().zip(grow) {
                            *t += go;
                        }
                    }
                });
            }
            Op::GatherRowsSum { table, groups } => {
                let d = self.shape(*table)[1];
                acc(*table, &mut |g| {
                    for (r, group) in groups.iter().enumerate() {
                        let grow = &gout[r * d..(r + 1) * d];
                        for &idx in group {
                            let trow = &mut g[idx * d..(idx + 1) * d];
                            for (t, &go) in trow.iter_mut().zip(grow) {
                                *t += go;
                            }
                        }
                    }
                });
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.data(p).len();
                    acc(p, &mut |g| {
                        for (gi, &go) in g.iter_mut().zip(&gout[offset..offset + len]) {
                            *gi += go;
                        }
                    });
                    offset += len;
                }
            }
            Op::SliceRows { x, start, len: _ } => {
                let d = self.shape(*x)[1];
                let off = start * d;
                acc(*x, &mut |g| {
                    for (gi, &go) in g[off..off + gout.len()].iter_mut().zip(gout) {
                        *gi += go;
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let n = self.shape(i_id(i))[0];
                let width = self.shape(i_id(i))[1];
                let mut col = 0;
                for &p in parts {
                    let w = self.shape(p)[1];
                    let c0 = col;
                    acc(p, &mut |g| {
                        for r in 0..n {
                            for j in 0..w {
                                g[r * w + j] += gout[r * width + c0 + j];
                            }
                        }
                    });
                    col += w;
                }
            }
            Op::SliceCols { x, start, len } => {
                let (n, w) = (self.shape(*x)[0], self.shape(*x)[1]);
                let (start, len) = (*start, *len);
                acc(*x, &mut |g| {
                    for r in 0..n {
                        for j in 0..len {
                            g[r * w + start + j] += gout[r * len + j];
                        }
                    }
                });
            }
        }
    }
}

fn i_id(i: usize) -> TensorId {
    TensorId(i)
}

fn softmax_raw(x: &[f64], shape: &[usize], axis: usize) -> Vec<f64> {
    let axis_len = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |a: usize| o * axis_len * inner + a * inner + i;
            let mut max = f64::NEG_INFINITY;
            for a in 0..axis_len {
                max = max.max(x[idx(a)]);
            }
            let mut sum = 0.0;
            for a in 0..axis_len {
                let e = (x[idx(a)] - max).exp();
                out[idx(a)] = e;
                sum += e;
            }
            for a in 0..axis_len {
                out[idx(a)] /= sum;
            }
        }
    }
    out
}

fn softmax_backward(y: &[f64], gout: &[f64], shape: &[usize], axis: usize, g: &mut [f64]) {
    let axis_len = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    for o in 0..outer {
        for i in 0..inner {
            let idx = |a: usize| o * axis_len * inner + a * inner + i;
            let mut dot = 0.0;
            for a in 0..axis_len {
                dot += gout[idx(a)] * y[idx(a)];
            }
            for a in 0..axis_len {
                g[idx(a)] += y[idx(a)] * (gout[idx(a)] - dot);
            }
        }
    }
}
