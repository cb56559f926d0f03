//! Standard LSTM cell for the recurrent baseline.

use rand_chacha::ChaCha8Rng;

use super::{bind, NnError};
use crate::tensor::{Graph, Tensor, TensorId};

/// Gate weights packed as [input | forget | output | candidate] along the
/// second axis.
#[derive(Clone, Debug)]
pub struct LstmCellParams {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub bias: Tensor,
}

impl LstmCellParams {
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        LstmCellParams {
            w_ih: Tensor::xavier(input_dim, 4 * hidden_dim, rng),
            w_hh: Tensor::xavier(hidden_dim, 4 * hidden_dim, rng),
            bias: Tensor::zeros(&[4 * hidden_dim]),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hh.shape[0]
    }

    pub fn leaf(
        &self,
        g: &mut Graph,
        binds: &mut Vec<(String, TensorId)>,
        prefix: &str,
    ) -> LstmLeafIds {
        LstmLeafIds {
            w_ih: bind(g, binds, prefix, "w_ih", &self.w_ih),
            w_hh: bind(g, binds, prefix, "w_hh", &self.w_hh),
            bias: bind(g, binds, prefix, "bias", &self.bias),
        }
    }

    pub fn named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.w_ih"), &self.w_ih));
        out.push((format!("{prefix}.w_hh"), &self.w_hh));
        out.push((format!("{prefix}.bias"), &self.bias));
    }

    pub fn named_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push((format!("{prefix}.w_ih"), &mut self.w_ih));
        out.push((format!("{prefix}.w_hh"), &mut self.w_hh));
        out.push((format!("{prefix}.bias"), &mut self.bias));
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LstmLeafIds {
    pub w_ih: TensorId,
    pub w_hh: TensorId,
    pub bias: TensorId,
}

/// Gated update. `x` is [1×input], `h`/`c` are [1×hidden]; returns (h', c').
pub fn lstm_cell(
    g: &mut Graph,
    x: TensorId,
    h: TensorId,
    c: TensorId,
    p: &LstmLeafIds,
) -> Result<(TensorId, TensorId), NnError> {
    let hidden = g.shape(h)[1];
    let xw = g.matmul(x, p.w_ih)?;
    let hw = g.matmul(h, p.w_hh)?;
    let gates = g.add(xw, hw)?;
    let gates = g.add_bias(gates, p.bias)?;

    let i_gate = g.slice_cols(gates, 0, hidden);
    let f_gate = g.slice_cols(gates, hidden, hidden);
    let o_gate = g.slice_cols(gates, 2 * hidden, hidden);
    let cand = g.slice_cols(gates, 3 * hidden, hidden);

    let i_gate = g.sigmoid(i_gate);
    let f_gate = g.sigmoid(f_gate);
    let o_gate = g.sigmoid(o_gate);
    let cand = g.tanh(cand);

    let keep = g.mul(f_gate, c)?;
    let write = g.mul(i_gate, cand)?;
    let c_next = g.add(keep, write)?;
    let c_act = g.tanh(c_next);
    let h_next = g.mul(o_gate, c_act)?;
    Ok((h_next, c_next))
}
