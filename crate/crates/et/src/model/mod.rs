//! The full-episode transformer agent, the LSTM baseline, and the
//! natural-to-synthetic translator.

mod ckpt;
mod et;
mod lstm;
mod mask;
mod translator;

pub use ckpt::checkpoint_kind;
pub use et::{encode_language, encode_visual, et_act, et_forward_episode, EtOutput, ETParams};
pub use lstm::{lstm_act, lstm_forward, LstmOutput, LstmParams};
pub use mask::build_causal_mask;
pub use translator::{
    greedy_decode, transfer_encoder, translator_forward, TranslatorOutput, TranslatorParams,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::NnError;
use crate::tensor::TensorError;
use crate::world::{ACTION_COUNT, CLASS_COUNT, FEATURE_DIM};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad episode input: {0}")]
    BadInput(String),
    #[error("token id {id} out of range for the {kind} table of size {size}")]
    TokenOutOfRange {
        id: usize,
        kind: &'static str,
        size: usize,
    },
    #[error("transfer failed: {0}")]
    Transfer(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Learned start-of-episode action token: one extra row in the action table.
pub const START_ACTION: usize = ACTION_COUNT;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_dim: usize,
    pub heads: usize,
    pub blocks_language: usize,
    pub blocks_multimodal: usize,
    pub ff_dim: usize,
    pub dropout: f64,
    pub vocab_natural: usize,
    pub vocab_synthetic: usize,
    pub action_count: usize,
    pub class_count: usize,
    pub visual_dim: usize,
    pub visual_embed_dim: usize,
    /// Visible window of past frames, current frame included; `None` = full
    /// episode.
    pub history_frames: Option<usize>,
    /// Visible window of previous actions; `None` = all, default 1.
    pub history_actions: Option<usize>,
    /// Let language queries attend visual/action keys in the multimodal
    /// encoder. Off by default: with ≥2 blocks it funnels future timesteps
    /// into language keys and breaks causality.
    pub lang_attends_multimodal: bool,
    /// LSTM baseline decoder width.
    pub lstm_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let model_dim = 64;
        ModelConfig {
            model_dim,
            heads: 2,
            blocks_language: 2,
            blocks_multimodal: 2,
            ff_dim: 256,
            dropout: 0.1,
            vocab_natural: 4,
            vocab_synthetic: 4,
            action_count: ACTION_COUNT,
            class_count: CLASS_COUNT,
            visual_dim: FEATURE_DIM,
            visual_embed_dim: 128,
            history_frames: None,
            history_actions: Some(1),
            lang_attends_multimodal: false,
            lstm_hidden: 4 * model_dim,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstructionKind {
    Natural,
    Synthetic,
}

/// One episode as the models consume it.
///
/// `actions` holds the taken actions a₁..: during teacher-forced training it
/// has length T (the last action is a target only, never an input); during
/// step-wise inference it has length T−1 (the agent's own history).
#[derive(Clone, Debug)]
pub struct EpisodeInput {
    pub instruction: Vec<usize>,
    pub kind: InstructionKind,
    pub frames: Vec<Vec<usize>>,
    pub actions: Vec<usize>,
}

impl EpisodeInput {
    pub fn validate(&self, config: &ModelConfig) -> Result<(), ModelError> {
        let t = self.frames.len();
        if t == 0 {
            return Err(ModelError::BadInput("episode needs at least one frame".into()));
        }
        if self.instruction.is_empty() {
            return Err(ModelError::BadInput("empty instruction".into()));
        }
        if self.actions.len() + 1 != t && self.actions.len() != t {
            return Err(ModelError::BadInput(format!(
                "got {} actions for {} frames; expected T or T-1",
                self.actions.len(),
                t
            )));
        }
        let table = match self.kind {
            InstructionKind::Natural => config.vocab_natural,
            InstructionKind::Synthetic => config.vocab_synthetic,
        };
        for &id in &self.instruction {
            if id >= table {
                return Err(ModelError::TokenOutOfRange {
                    id,
                    kind: match self.kind {
                        InstructionKind::Natural => "natural",
                        InstructionKind::Synthetic => "synthetic",
                    },
                    size: table,
                });
            }
        }
        for &a in &self.actions {
            if a >= config.action_count {
                return Err(ModelError::BadInput(format!("action id {a} out of range")));
            }
        }
        for frame in &self.frames {
            for &f in frame {
                if f >= config.visual_dim {
                    return Err(ModelError::BadInput(format!(
                        "visual feature {f} out of range"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Action-stream ids: a₀ = START, then a₁..a_{T−1}.
    pub(crate) fn shifted_actions(&self) -> Vec<usize> {
        let t = self.frames.len();
        let mut ids = Vec::with_capacity(t);
        ids.push(START_ACTION);
        for &a in self.actions.iter().take(t - 1) {
            ids.push(a);
        }
        ids
    }
}
