//! Pre-norm residual transformer blocks, linear layers, and dropout.

use rand_chacha::ChaCha8Rng;

use super::attention::{multi_head_attention, AttentionParams, AttnLeafIds};
use super::{bind, AttentionMask, AttentionTrace, NnError};
use crate::rng::CounterRng;
use crate::tensor::{Graph, Tensor, TensorId};

pub fn linear(g: &mut Graph, x: TensorId, w: TensorId, b: TensorId) -> Result<TensorId, NnError> {
    let h = g.matmul(x, w)?;
    Ok(g.add_bias(h, b)?)
}

/// Inverted dropout: in training, zero with probability `p` and scale
/// survivors by 1/(1−p); in eval, the identity.
pub fn dropout(
    g: &mut Graph,
    x: TensorId,
    p: f64,
    training: bool,
    rng: &mut CounterRng,
) -> Result<TensorId, NnError> {
    if !(0.0..1.0).contains(&p) {
        return Err(NnError::BadDropout(p));
    }
    if !training || p == 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - p);
    let len = g.data(x).len();
    let mask: Vec<f64> = (0..len)
        .map(|_| if rng.next_f64() < p { 0.0 } else { keep })
        .collect();
    let mask = g.constant(Tensor::new(mask, g.shape(x).to_vec()).unwrap());
    Ok(g.mul(x, mask)?)
}

/// One transformer encoder block's parameters.
#[derive(Clone, Debug)]
pub struct EncoderBlockParams {
    pub attn: AttentionParams,
    pub ff1: Tensor,
    pub bff1: Tensor,
    pub ff2: Tensor,
    pub bff2: Tensor,
    pub ln1_gamma: Tensor,
    pub ln1_beta: Tensor,
    pub ln2_gamma: Tensor,
    pub ln2_beta: Tensor,
}

impl EncoderBlockParams {
    pub fn init(
        model_dim: usize,
        heads: usize,
        ff_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NnError> {
        Ok(EncoderBlockParams {
            attn: AttentionParams::init(model_dim, heads, rng)?,
            ff1: Tensor::xavier(model_dim, ff_dim, rng),
            bff1: Tensor::zeros(&[ff_dim]),
            ff2: Tensor::xavier(ff_dim, model_dim, rng),
            bff2: Tensor::zeros(&[model_dim]),
            ln1_gamma: Tensor::full(&[model_dim], 1.0),
            ln1_beta: Tensor::zeros(&[model_dim]),
            ln2_gamma: Tensor::full(&[model_dim], 1.0),
            ln2_beta: Tensor::zeros(&[model_dim]),
        })
    }

    pub fn model_dim(&self) -> usize {
        self.attn.model_dim()
    }

    pub fn ff_dim(&self) -> usize {
        self.ff1.shape[1]
    }

    pub fn head_count(&self) -> usize {
        self.attn.heads
    }

    pub fn leaf(
        &self,
        g: &mut Graph,
        binds: &mut Vec<(String, TensorId)>,
        prefix: &str,
    ) -> EncoderLeafIds {
        EncoderLeafIds {
            attn: self.attn.leaf(g, binds, &format!("{prefix}.attn")),
            ff1: bind(g, binds, prefix, "ff1", &self.ff1),
            bff1: bind(g, binds, prefix, "bff1", &self.bff1),
            ff2: bind(g, binds, prefix, "ff2", &self.ff2),
            bff2: bind(g, binds, prefix, "bff2", &self.bff2),
            ln1_gamma: bind(g, binds, prefix, "ln1_gamma", &self.ln1_gamma),
            ln1_beta: bind(g, binds, prefix, "ln1_beta", &self.ln1_beta),
            ln2_gamma: bind(g, binds, prefix, "ln2_gamma", &self.ln2_gamma),
            ln2_beta: bind(g, binds, prefix, "ln2_beta", &self.ln2_beta),
        }
    }

    pub fn named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        self.attn.named(&format!("{prefix}.attn"), out);
        for (n, t) in [
            ("ff1", &self.ff1),
            ("bff1", &self.bff1),
            ("ff2", &self.ff2),
            ("bff2", &self.bff2),
            ("ln1_gamma", &self.ln1_gamma),
            ("ln1_beta", &self.ln1_beta),
            ("ln2_gamma", &self.ln2_gamma),
            ("ln2_beta", &self.ln2_beta),
        ] {
            out.push((format!("{prefix}.{n}"), t));
        }
    }

    pub fn named_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        self.attn.named_mut(&format!("{prefix}.attn"), out);
        for (n, t) in [
            ("ff1", &mut self.ff1),
            ("bff1", &mut self.bff1),
            ("ff2", &mut self.ff2),
            ("bff2", &mut self.bff2),
            ("ln1_gamma", &mut self.ln1_gamma),
            ("ln1_beta", &mut self.ln1_beta),
            ("ln2_gamma", &mut self.ln2_gamma),
            ("ln2_beta", &mut self.ln2_beta),
        ] {
            out.push((format!("{prefix}.{n}"), t));
        }
    }
}

/// Graph-resident handles to one encoder block's parameters.
#[derive(Clone, Copy, Debug)]
pub struct EncoderLeafIds {
    pub attn: AttnLeafIds,
    pub ff1: TensorId,
    pub bff1: TensorId,
    pub ff2: TensorId,
    pub bff2: TensorId,
    pub ln1_gamma: TensorId,
    pub ln1_beta: TensorId,
    pub ln2_gamma: TensorId,
    pub ln2_beta: TensorId,
}

const LN_EPS: f64 = 1e-5;

/// Pre-norm residual encoder block:
/// `x + Drop(MHA(LN(x)))` then `+ Drop(FF(LN(·)))`.
#[allow(clippy::too_many_arguments)]
pub fn encoder_block(
    g: &mut Graph,
    x: TensorId,
    mask: &AttentionMask,
    p: &EncoderLeafIds,
    dropout_p: f64,
    training: bool,
    rng: &mut CounterRng,
    trace: Option<&mut AttentionTrace>,
) -> Result<TensorId, NnError> {
    let normed = g.layer_norm(x, p.ln1_gamma, p.ln1_beta, LN_EPS)?;
    let attn = multi_head_attention(g, normed, normed, normed, mask, &p.attn, trace)?;
    let attn = dropout(g, attn, dropout_p, training, rng)?;
    let x = g.add(x, attn)?;

    let normed = g.layer_norm(x, p.ln2_gamma, p.ln2_beta, LN_EPS)?;
    let h = linear(g, normed, p.ff1, p.bff1)?;
    let h = g.relu(h);
    let h = linear(g, h, p.ff2, p.bff2)?;
    let h = dropout(g, h, dropout_p, training, rng)?;
    Ok(g.add(x, h)?)
}

/// One transformer decoder block's parameters: masked self-attention,
/// cross-attention over encoder output, feed-forward, three layer norms.
#[derive(Clone, Debug)]
pub struct DecoderBlockParams {
    pub self_attn: AttentionParams,
    pub cross_attn: AttentionParams,
    pub ff1: Tensor,
    pub bff1: Tensor,
    pub ff2: Tensor,
    pub bff2: Tensor,
    pub ln1_gamma: Tensor,
    pub ln1_beta: Tensor,
    pub ln2_gamma: Tensor,
    pub ln2_beta: Tensor,
    pub ln3_gamma: Tensor,
    pub ln3_beta: Tensor,
}

impl DecoderBlockParams {
    pub fn init(
        model_dim: usize,
        heads: usize,
        ff_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NnError> {
        Ok(DecoderBlockParams {
            self_attn: AttentionParams::init(model_dim, heads, rng)?,
            cross_attn: AttentionParams::init(model_dim, heads, rng)?,
            ff1: Tensor::xavier(model_dim, ff_dim, rng),
            bff1: Tensor::zeros(&[ff_dim]),
            ff2: Tensor::xavier(ff_dim, model_dim, rng),
            bff2: Tensor::zeros(&[model_dim]),
            ln1_gamma: Tensor::full(&[model_dim], 1.0),
            ln1_beta: Tensor::zeros(&[model_dim]),
            ln2_gamma: Tensor::full(&[model_dim], 1.0),
            ln2_beta: Tensor::zeros(&[model_dim]),
            ln3_gamma: Tensor::full(&[model_dim], 1.0),
            ln3_beta: Tensor::zeros(&[model_dim]),
        })
    }

    pub fn leaf(
        &self,
        g: &mut Graph,
        binds: &mut Vec<(String, TensorId)>,
        prefix: &str,
    ) -> DecoderLeafIds {
        DecoderLeafIds {
            self_attn: self.self_attn.leaf(g, binds, &format!("{prefix}.self_attn")),
            cross_attn: self
                .cross_attn
                .leaf(g, binds, &format!("{prefix}.cross_attn")),
            ff1: bind(g, binds, prefix, "ff1", &self.ff1),
            bff1: bind(g, binds, prefix, "bff1", &self.bff1),
            ff2: bind(g, binds, prefix, "ff2", &self.ff2),
            bff2: bind(g, binds, prefix, "bff2", &self.bff2),
            ln1_gamma: bind(g, binds, prefix, "ln1_gamma", &self.ln1_gamma),
            ln1_beta: bind(g, binds, prefix, "ln1_beta", &self.ln1_beta),
            ln2_gamma: bind(g, binds, prefix, "ln2_gamma", &self.ln2_gamma),
            ln2_beta: bind(g, binds, prefix, "ln2_beta", &self.ln2_beta),
            ln3_gamma: bind(g, binds, prefix, "ln3_gamma", &self.ln3_gamma),
            ln3_beta: bind(g, binds, prefix, "ln3_beta", &self.ln3_beta),
        }
    }

    pub fn named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        self.self_attn.named(&format!("{prefix}.self_attn"), out);
        self.cross_attn.named(&format!("{prefix}.cross_attn"), out);
        for (n, t) in [
            ("ff1", &self.ff1),
            ("bff1", &self.bff1),
            ("ff2", &self.ff2),
            ("bff2", &self.bff2),
            ("ln1_gamma", &self.ln1_gamma),
            ("ln1_beta", &self.ln1_beta),
            ("ln2_gamma", &self.ln2_gamma),
            ("ln2_beta", &self.ln2_beta),
            ("ln3_gamma", &self.ln3_gamma),
            ("ln3_beta", &self.ln3_beta),
        ] {
            out.push((format!("{prefix}.{n}"), t));
        }
    }

    pub fn named_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        self.self_attn
            .named_mut(&format!("{prefix}.self_attn"), out);
        self.cross_attn
            .named_mut(&format!("{prefix}.cross_attn"), out);
        for (n, t) in [
            ("ff1", &mut self.ff1),
            ("bff1", &mut self.bff1),
            ("ff2", &mut self.ff2),
            ("bff2", &mut self.bff2),
            ("ln1_gamma", &mut self.ln1_gamma),
            ("ln1_beta", &mut self.ln1_beta),
            ("ln2_gamma", &mut self.ln2_gamma),
            ("ln2_beta", &mut self.ln2_beta),
            ("ln3_gamma", &mut self.ln3_gamma),
            ("ln3_beta", &mut self.ln3_beta),
        ] {
            out.push((format!("{prefix}.{n}"), t));
        }
    }
}

/// Graph-resident handles to one decoder block's parameters.
#[derive(Clone, Copy, Debug)]
pub struct DecoderLeafIds {
    pub self_attn: AttnLeafIds,
    pub cross_attn: AttnLeafIds,
    pub ff1: TensorId,
    pub bff1: TensorId,
    pub ff2: TensorId,
    pub bff2: TensorId,
    pub ln1_gamma: TensorId,
    pub ln1_beta: TensorId,
    pub ln2_gamma: TensorId,
    pub ln2_beta: TensorId,
    pub ln3_gamma: TensorId,
    pub ln3_beta: TensorId,
}

/// Pre-norm decoder block: masked self-attention, then cross-attention over
/// `enc_out`, then feed-forward. `self_mask` must be strictly causal.
#[allow(clippy::too_many_arguments)]
pub fn decoder_block(
    g: &mut Graph,
    y: TensorId,
    enc_out: TensorId,
    self_mask: &AttentionMask,
    p: &DecoderLeafIds,
    dropout_p: f64,
    training: bool,
    rng: &mut CounterRng,
    trace: Option<&mut AttentionTrace>,
) -> Result<TensorId, NnError> {
    let normed = g.layer_norm(y, p.ln1_gamma, p.ln1_beta, LN_EPS)?;
    let attn = multi_head_attention(g, normed, normed, normed, self_mask, &p.self_attn, trace)?;
    let attn = dropout(g, attn, dropout_p, training, rng)?;
    let y = g.add(y, attn)?;

    let cross_mask = AttentionMask::all(g.shape(y)[0], g.shape(enc_out)[0]);
    let normed = g.layer_norm(y, p.ln2_gamma, p.ln2_beta, LN_EPS)?;
    let attn = multi_head_attention(
        g,
        normed,
        enc_out,
        enc_out,
        &cross_mask,
        &p.cross_attn,
        None,
    )?;
    let attn = dropout(g, attn, dropout_p, training, rng)?;
    let y = g.add(y, attn)?;

    let normed = g.layer_norm(y, p.ln3_gamma, p.ln3_beta, LN_EPS)?;
    let h = linear(g, normed, p.ff1, p.bff1)?;
    let h = g.relu(h);
    let h = linear(g, h, p.ff2, p.bff2)?;
    let h = dropout(g, h, dropout_p, training, rng)?;
    Ok(g.add(y, h)?)
}
