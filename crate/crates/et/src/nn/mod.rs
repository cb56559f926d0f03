//! Transformer building blocks and the LSTM cell.
//!
//! Everything here is a pure function of (graph inputs, parameters); trace
//! recording writes into a caller-owned buffer. Masking is additive −1e9
//! before softmax, which underflows to exact zeros after exponentiation, so
//! masked positions receive exactly zero probability and exactly zero
//! gradient.

mod attention;
mod blocks;
mod encoding;
mod lstm;
mod trace;

pub use attention::{multi_head_attention, AttentionParams, AttnLeafIds};
pub use blocks::{
    decoder_block, dropout, encoder_block, linear, DecoderBlockParams, DecoderLeafIds,
    EncoderBlockParams, EncoderLeafIds,
};
pub use encoding::{sinusoidal_encoding, sinusoidal_rows};
pub use lstm::{lstm_cell, LstmCellParams, LstmLeafIds};
pub use trace::{AttentionTrace, TraceLayer};

use crate::tensor::{Graph, Tensor, TensorError, TensorId};
use thiserror::Error;

pub const MASK_NEG: f64 = -1e9;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("sinusoidal encoding requires an even dim, got {0}")]
    OddDim(usize),
    #[error("attention mask has an all-masked query row {row}")]
    AllMaskedRow { row: usize },
    #[error("mask is {mask_q}x{mask_k} but attention is {q}x{k}")]
    MaskShape {
        mask_q: usize,
        mask_k: usize,
        q: usize,
        k: usize,
    },
    #[error("dropout probability {0} out of [0, 1)")]
    BadDropout(f64),
    #[error("model_dim {dim} not divisible by head_count {heads}")]
    HeadSplit { dim: usize, heads: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Boolean attention mask; `true` means the query may attend the key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionMask {
    q_len: usize,
    k_len: usize,
    allowed: Vec<bool>,
}

impl AttentionMask {
    /// Fully permissive mask.
    pub fn all(q_len: usize, k_len: usize) -> Self {
        AttentionMask {
            q_len,
            k_len,
            allowed: vec![true; q_len * k_len],
        }
    }

    /// Fully blocked mask; call [`AttentionMask::allow`] to open entries.
    pub fn none(q_len: usize, k_len: usize) -> Self {
        AttentionMask {
            q_len,
            k_len,
            allowed: vec![false; q_len * k_len],
        }
    }

    /// Strictly causal square mask (query t sees keys ≤ t).
    pub fn causal(len: usize) -> Self {
        let mut m = AttentionMask::none(len, len);
        for q in 0..len {
            for k in 0..=q {
                m.allow(q, k);
            }
        }
        m
    }

    pub fn q_len(&self) -> usize {
        self.q_len
    }

    pub fn k_len(&self) -> usize {
        self.k_len
    }

    pub fn allow(&mut self, q: usize, k: usize) {
        self.allowed[q * self.k_len + k] = true;
    }

    pub fn deny(&mut self, q: usize, k: usize) {
        self.allowed[q * self.k_len + k] = false;
    }

    pub fn is_allowed(&self, q: usize, k: usize) -> bool {
        self.allowed[q * self.k_len + k]
    }

    /// Every query row must keep at least one visible key.
    pub fn validate(&self) -> Result<(), NnError> {
        for q in 0..self.q_len {
            if !self.allowed[q * self.k_len..(q + 1) * self.k_len]
                .iter()
                .any(|&a| a)
            {
                return Err(NnError::AllMaskedRow { row: q });
            }
        }
        Ok(())
    }

    /// Additive bias matrix: 0 where allowed, −1e9 where masked.
    pub fn to_bias(&self) -> Tensor {
        let data = self
            .allowed
            .iter()
            .map(|&a| if a { 0.0 } else { MASK_NEG })
            .collect();
        Tensor {
            shape: vec![self.q_len, self.k_len],
            data,
            requires_grad: false,
            grad: None,
        }
    }
}

/// Leaf a parameter tensor into a graph, recording (name, id) for gradient
/// harvesting. Parameters always receive gradient.
pub fn bind(
    g: &mut Graph,
    binds: &mut Vec<(String, TensorId)>,
    prefix: &str,
    name: &str,
    t: &Tensor,
) -> TensorId {
    let id = g.leaf_param(t);
    let full = if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    };
    binds.push((full, id));
    id
}

#[cfg(test)]
mod tests;
