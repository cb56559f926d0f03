//! Instruction-following agents on a deterministic household gridworld.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: dense f64 tensors, a tape-based reverse-mode autodiff graph,
//!   the AdamW optimizer, gradient checking, and the checkpoint archive.
//! - [`nn`]: transformer building blocks (multi-head attention with arbitrary
//!   boolean masks, pre-norm encoder/decoder blocks, sinusoidal encodings),
//!   dropout, and an LSTM cell.
//! - [`world`]: the gridworld benchmark — task sampling, dynamics, egocentric
//!   observations, the scripted expert planner, and goal checking.
//! - [`lang`]: synthetic subgoal instructions, templated natural-language
//!   instructions, tokenization, and vocabularies.
//! - [`model`]: the full-episode transformer agent, the recurrent LSTM
//!   baseline, and the natural-to-synthetic seq2seq translator.
//! - [`train`]: behavior-cloning training, translator pretraining, and joint
//!   natural+synthetic training.
//! - [`eval`]: closed-loop evaluation, success metrics, and ablation grids.
//! - [`attn`]: attention-rollout attribution from actions to frames/tokens.
//! - [`cli`]: configuration tree and the pipeline commands.

// pub mod attn;
// pub mod cli;
// pub mod eval;
pub mod lang;
pub mod model;
pub mod nn;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod world;
