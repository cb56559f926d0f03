//! Scaled dot-product multi-head attention over explicit boolean masks.

use rand_chacha::ChaCha8Rng;

use super::{bind, AttentionMask, AttentionTrace, NnError};
use crate::tensor::{Graph, Tensor, TensorId};

/// Projection parameters for one attention sub-layer.
#[derive(Clone, Debug)]
pub struct AttentionParams {
    pub heads: usize,
    pub wq: Tensor,
    pub bq: Tensor,
    pub wk: Tensor,
    pub bk: Tensor,
    pub wv: Tensor,
    pub bv: Tensor,
    pub wo: Tensor,
    pub bo: Tensor,
}

impl AttentionParams {
    pub fn init(model_dim: usize, heads: usize, rng: &mut ChaCha8Rng) -> Result<Self, NnError> {
        if model_dim % heads != 0 {
            return Err(NnError::HeadSplit {
                dim: model_dim,
                heads,
            });
        }
        Ok(AttentionParams {
            heads,
            wq: Tensor::xavier(model_dim, model_dim, rng),
            bq: Tensor::zeros(&[model_dim]),
            wk: Tensor::xavier(model_dim, model_dim, rng),
            bk: Tensor::zeros(&[model_dim]),
            wv: Tensor::xavier(model_dim, model_dim, rng),
            bv: Tensor::zeros(&[model_dim]),
            wo: Tensor::xavier(model_dim, model_dim, rng),
            bo: Tensor::zeros(&[model_dim]),
        })
    }

    pub fn model_dim(&self) -> usize {
        self.wq.shape[0]
    }

    pub fn leaf(
        &self,
        g: &mut Graph,
        binds: &mut Vec<(String, TensorId)>,
        prefix: &str,
    ) -> AttnLeafIds {
        AttnLeafIds {
            heads: self.heads,
            wq: bind(g, binds, prefix, "wq", &self.wq),
            bq: bind(g, binds, prefix, "bq", &self.bq),
            wk: bind(g, binds, prefix, "wk", &self.wk),
            bk: bind(g, binds, prefix, "bk", &self.bk),
            wv: bind(g, binds, prefix, "wv", &self.wv),
            bv: bind(g, binds, prefix, "bv", &self.bv),
            wo: bind(g, binds, prefix, "wo", &self.wo),
            bo: bind(g, binds, prefix, "bo", &self.bo),
        }
    }

    pub fn named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        for (n, t) in [
            ("wq", &self.wq),
            ("bq", &self.bq),
            ("wk", &self.wk),
            ("bk", &self.bk),
            ("wv", &self.wv),
            ("bv", &self.bv),
            ("wo", &self.wo),
            ("bo", &self.bo),
        ] {
            out.push((format!("{prefix}.{n}"), t));
        }
    }

    pub fn named_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        for (n, t) in [
            ("wq", &mut self.wq),
            ("bq", &mut self.bq),
            ("wk", &mut self.wk),
            ("bk", &mut self.bk),
            ("wv", &mut self.wv),
            ("bv", &mut self.bv),
            ("wo", &mut self.wo),
            ("bo", &mut self.bo),
        ] {
            out.push((format!("{prefix}.{n}"), t));
        }
    }
}

/// Graph-resident handles to one attention sub-layer's parameters.
#[derive(Clone, Copy, Debug)]
pub struct AttnLeafIds {
    pub heads: usize,
    pub wq: TensorId,
    pub bq: TensorId,
    pub wk: TensorId,
    pub bk: TensorId,
    pub wv: TensorId,
    pub bv: TensorId,
    pub wo: TensorId,
    pub bo: TensorId,
}

/// Multi-head attention: per-head scaled dot-product with additive masking,
/// heads concatenated and output-projected. Records head-averaged and raw
/// per-head probabilities into `trace` when provided.
pub fn multi_head_attention(
    g: &mut Graph,
    q_in: TensorId,
    k_in: TensorId,
    v_in: TensorId,
    mask: &AttentionMask,
    p: &AttnLeafIds,
    trace: Option<&mut AttentionTrace>,
) -> Result<TensorId, NnError> {
    let q_len = g.shape(q_in)[0];
    let k_len = g.shape(k_in)[0];
    if mask.q_len() != q_len || mask.k_len() != k_len {
        return Err(NnError::MaskShape {
            mask_q: mask.q_len(),
            mask_k: mask.k_len(),
            q: q_len,
            k: k_len,
        });
    }
    mask.validate()?;
    let model_dim = g.shape(k_in)[1];
    let heads = p.heads;
    if model_dim % heads != 0 {
        return Err(NnError::HeadSplit {
            dim: model_dim,
            heads,
        });
    }
    let head_dim = model_dim / heads;
    let scale = 1.0 / (head_dim as f64).sqrt();

    let q = g.matmul(q_in, p.wq)?;
    let q = g.add_bias(q, p.bq)?;
    let k = g.matmul(k_in, p.wk)?;
    let k = g.add_bias(k, p.bk)?;
    let v = g.matmul(v_in, p.wv)?;
    let v = g.add_bias(v, p.bv)?;

    let bias = g.constant(mask.to_bias());
    let mut head_outs = Vec::with_capacity(heads);
    let mut head_probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_cols(q, h * head_dim, head_dim);
        let kh = g.slice_cols(k, h * head_dim, head_dim);
        let vh = g.slice_cols(v, h * head_dim, head_dim);
        let kt = g.transpose(kh);
        let scores = g.matmul(qh, kt)?;
        let scores = g.scale(scores, scale);
        let scores = g.add(scores, bias)?;
        let probs = g.softmax(scores, 1)?;
        if trace.is_some() {
            head_probs.push(g.data(probs).to_vec());
        }
        head_outs.push(g.matmul(probs, vh)?);
    }
    if let Some(t) = trace {
        t.record(q_len, k_len, head_probs);
    }
    let cat = g.concat_cols(&head_outs)?;
    let out = g.matmul(cat, p.wo)?;
    Ok(g.add_bias(out, p.bo)?)
}
