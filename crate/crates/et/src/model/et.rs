//! The full-episode transformer agent: four encoders, causal multimodal
//! attention, and output heads read off the visual positions.

use rand_chacha::ChaCha8Rng;

use super::mask::build_causal_mask;
use super::{EpisodeInput, InstructionKind, ModelConfig, ModelError};
use crate::nn::{
    bind, dropout, encoder_block, linear, sinusoidal_encoding, AttentionMask, AttentionTrace,
    EncoderBlockParams,
};
use crate::rng::CounterRng;
use crate::tensor::{Graph, Tensor, TensorId};
use crate::world::ActionType;

/// All learnable parameters of the agent.
#[derive(Clone, Debug)]
pub struct ETParams {
    pub config: ModelConfig,
    pub nat_embed: Tensor,
    pub syn_embed: Tensor,
    pub lang_blocks: Vec<EncoderBlockParams>,
    pub lang_ln_gamma: Tensor,
    pub lang_ln_beta: Tensor,
    pub visual_embed: Tensor,
    pub visual_b0: Tensor,
    pub visual_fc1: Tensor,
    pub visual_b1: Tensor,
    pub visual_fc2: Tensor,
    pub visual_b2: Tensor,
    pub act_embed: Tensor,
    pub mm_blocks: Vec<EncoderBlockParams>,
    pub mm_ln_gamma: Tensor,
    pub mm_ln_beta: Tensor,
    pub head_action_w: Tensor,
    pub head_action_b: Tensor,
    pub head_class_w: Tensor,
    pub head_class_b: Tensor,
    pub head_progress_w: Tensor,
    pub head_progress_b: Tensor,
}

impl ETParams {
    pub fn init(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self, ModelError> {
        let d = config.model_dim;
        let ve = config.visual_embed_dim;
        let embed_std = 1.0 / (d as f64).sqrt();
        let lang_blocks = (0..config.blocks_language)
            .map(|_| EncoderBlockParams::init(d, config.heads, config.ff_dim, rng))
            .collect::<Result<Vec<_>, _>>()?;
        let mm_blocks = (0..config.blocks_multimodal)
            .map(|_| EncoderBlockParams::init(d, config.heads, config.ff_dim, rng))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ETParams {
            config: config.clone(),
            nat_embed: Tensor::randn(&[config.vocab_natural, d], embed_std, rng),
            syn_embed: Tensor::randn(&[config.vocab_synthetic, d], embed_std, rng),
            lang_blocks,
            lang_ln_gamma: Tensor::full(&[d], 1.0),
            lang_ln_beta: Tensor::zeros(&[d]),
            visual_embed: Tensor::randn(&[config.visual_dim, ve], 0.02, rng),
            visual_b0: Tensor::zeros(&[ve]),
            visual_fc1: Tensor::xavier(ve, ve, rng),
            visual_b1: Tensor::zeros(&[ve]),
            visual_fc2: Tensor::xavier(ve, d, rng),
            visual_b2: Tensor::zeros(&[d]),
            act_embed: Tensor::randn(&[config.action_count + 1, d], embed_std, rng),
            mm_blocks,
            mm_ln_gamma: Tensor::full(&[d], 1.0),
            mm_ln_beta: Tensor::zeros(&[d]),
            head_action_w: Tensor::xavier(d, config.action_count, rng),
            head_action_b: Tensor::zeros(&[config.action_count]),
            head_class_w: Tensor::xavier(d, config.class_count, rng),
            head_class_b: Tensor::zeros(&[config.class_count]),
            head_progress_w: Tensor::xavier(d, 2, rng),
            head_progress_b: Tensor::zeros(&[2]),
        })
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        out.push(("lang.nat_embed".into(), &self.nat_embed));
        out.push(("lang.syn_embed".into(), &self.syn_embed));
        for (i, b) in self.lang_blocks.iter().enumerate() {
            b.named(&format!("lang.{i}"), &mut out);
        }
        out.push(("lang.ln_gamma".into(), &self.lang_ln_gamma));
        out.push(("lang.ln_beta".into(), &self.lang_ln_beta));
        for (n, t) in [
            ("visual.embed", &self.visual_embed),
            ("visual.b0", &self.visual_b0),
            ("visual.fc1", &self.visual_fc1),
            ("visual.b1", &self.visual_b1),
            ("visual.fc2", &self.visual_fc2),
            ("visual.b2", &self.visual_b2),
            ("act_embed", &self.act_embed),
        ] {
            out.push((n.into(), t));
        }
        for (i, b) in self.mm_blocks.iter().enumerate() {
            b.named(&format!("mm.{i}"), &mut out);
        }
        out.push(("mm.ln_gamma".into(), &self.mm_ln_gamma));
        out.push(("mm.ln_beta".into(), &self.mm_ln_beta));
        for (n, t) in [
            ("head.action_w", &self.head_action_w),
            ("head.action_b", &self.head_action_b),
            ("head.class_w", &self.head_class_w),
            ("head.class_b", &self.head_class_b),
            ("head.progress_w", &self.head_progress_w),
            ("head.progress_b", &self.head_progress_b),
        ] {
            out.push((n.into(), t));
        }
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        out.push(("lang.nat_embed".into(), &mut self.nat_embed));
        out.push(("lang.syn_embed".into(), &mut self.syn_embed));
        for (i, b) in self.lang_blocks.iter_mut().enumerate() {
            b.named_mut(&format!("lang.{i}"), &mut out);
        }
        out.push(("lang.ln_gamma".into(), &mut self.lang_ln_gamma));
        out.push(("lang.ln_beta".into(), &mut self.lang_ln_beta));
        for (n, t) in [
            ("visual.embed", &mut self.visual_embed),
            ("visual.b0", &mut self.visual_b0),
            ("visual.fc1", &mut self.visual_fc1),
            ("visual.b1", &mut self.visual_b1),
            ("visual.fc2", &mut self.visual_fc2),
            ("visual.b2", &mut self.visual_b2),
            ("act_embed", &mut self.act_embed),
        ] {
            out.push((n.into(), t));
        }
        for (i, b) in self.mm_blocks.iter_mut().enumerate() {
            b.named_mut(&format!("mm.{i}"), &mut out);
        }
        out.push(("mm.ln_gamma".into(), &mut self.mm_ln_gamma));
        out.push(("mm.ln_beta".into(), &mut self.mm_ln_beta));
        for (n, t) in [
            ("head.action_w", &mut self.head_action_w),
            ("head.action_b", &mut self.head_action_b),
            ("head.class_w", &mut self.head_class_w),
            ("head.class_b", &mut self.head_class_b),
            ("head.progress_w", &mut self.head_progress_w),
            ("head.progress_b", &mut self.head_progress_b),
        ] {
            out.push((n.into(), t));
        }
        out
    }
}

/// Forward-pass artifacts; node ids stay valid against `graph`.
pub struct EtOutput {
    pub graph: Graph,
    pub binds: Vec<(String, TensorId)>,
    pub action_logits: TensorId,
    pub class_logits: TensorId,
    pub progress: TensorId,
    pub h_lang: TensorId,
    pub h_visual: TensorId,
    pub h_action: TensorId,
    pub trace: AttentionTrace,
    pub lang_trace: AttentionTrace,
}

pub(crate) struct LangEncoderIds<'a> {
    pub table: &'a Tensor,
    pub table_name: &'static str,
    pub blocks: &'a [EncoderBlockParams],
    pub ln_gamma: &'a Tensor,
    pub ln_beta: &'a Tensor,
    pub prefix: &'static str,
}

/// Shared language-encoder forward: look-up, ×√d, positional encoding,
/// bidirectional blocks, final norm.
#[allow(clippy::too_many_arguments)]
pub(crate) fn encode_language_into(
    g: &mut Graph,
    binds: &mut Vec<(String, TensorId)>,
    enc: &LangEncoderIds,
    ids: &[usize],
    dropout_p: f64,
    training: bool,
    rng: &mut CounterRng,
    trace: Option<&mut AttentionTrace>,
) -> Result<TensorId, ModelError> {
    let d = enc.ln_gamma.shape[0];
    let table = bind(g, binds, enc.prefix, enc.table_name, enc.table);
    let embedded = g.gather_rows(table, ids);
    let scaled = g.scale(embedded, (d as f64).sqrt());
    let pe = g.constant(sinusoidal_encoding(ids.len(), d)?);
    let mut h = g.add(scaled, pe)?;
    let mask = AttentionMask::all(ids.len(), ids.len());
    let mut trace = trace;
    for (i, block) in enc.blocks.iter().enumerate() {
        let ids = block.leaf(g, binds, &format!("{}.{i}", enc.prefix));
        h = encoder_block(
            g,
            h,
            &mask,
            &ids,
            dropout_p,
            training,
            rng,
            trace.as_deref_mut(),
        )?;
    }
    let gamma = bind(g, binds, enc.prefix, "ln_gamma", enc.ln_gamma);
    let beta = bind(g, binds, enc.prefix, "ln_beta", enc.ln_beta);
    Ok(g.layer_norm(h, gamma, beta, 1e-5)?)
}

fn lang_encoder<'a>(params: &'a ETParams, kind: InstructionKind) -> LangEncoderIds<'a> {
    match kind {
        InstructionKind::Natural => LangEncoderIds {
            table: &params.nat_embed,
            table_name: "nat_embed",
            blocks: &params.lang_blocks,
            ln_gamma: &params.lang_ln_gamma,
            ln_beta: &params.lang_ln_beta,
            prefix: "lang",
        },
        InstructionKind::Synthetic => LangEncoderIds {
            table: &params.syn_embed,
            table_name: "syn_embed",
            blocks: &params.lang_blocks,
            ln_gamma: &params.lang_ln_gamma,
            ln_beta: &params.lang_ln_beta,
            prefix: "lang",
        },
    }
}

/// Per-frame independent visual encoding: multi-hot feature embedding
/// followed by a two-layer MLP down to model_dim.
pub(crate) fn encode_visual_into(
    g: &mut Graph,
    binds: &mut Vec<(String, TensorId)>,
    params: &ETParams,
    frames: &[Vec<usize>],
) -> Result<TensorId, ModelError> {
    let table = bind(g, binds, "visual", "embed", &params.visual_embed);
    let b0 = bind(g, binds, "visual", "b0", &params.visual_b0);
    let fc1 = bind(g, binds, "visual", "fc1", &params.visual_fc1);
    let b1 = bind(g, binds, "visual", "b1", &params.visual_b1);
    let fc2 = bind(g, binds, "visual", "fc2", &params.visual_fc2);
    let b2 = bind(g, binds, "visual", "b2", &params.visual_b2);

    let summed = g.gather_rows_sum(table, frames);
    let h = g.add_bias(summed, b0)?;
    let h = g.relu(h);
    let h = linear(g, h, fc1, b1)?;
    let h = g.relu(h);
    Ok(linear(g, h, fc2, b2)?)
}

/// Standalone language encoding (eval mode), mainly for inspection.
pub fn encode_language(
    ids: &[usize],
    kind: InstructionKind,
    params: &ETParams,
) -> Result<Tensor, ModelError> {
    for &id in ids {
        let size = match kind {
            InstructionKind::Natural => params.config.vocab_natural,
            InstructionKind::Synthetic => params.config.vocab_synthetic,
        };
        if id >= size {
            return Err(ModelError::TokenOutOfRange {
                id,
                kind: "language",
                size,
            });
        }
    }
    let mut g = Graph::new();
    let mut binds = Vec::new();
    let mut rng = CounterRng::new(0);
    let enc = lang_encoder(params, kind);
    let h = encode_language_into(&mut g, &mut binds, &enc, ids, 0.0, false, &mut rng, None)?;
    Ok(g.value(h).clone())
}

/// Standalone per-frame visual encoding (eval mode).
pub fn encode_visual(frames: &[Vec<usize>], params: &ETParams) -> Result<Tensor, ModelError> {
    let mut g = Graph::new();
    let mut binds = Vec::new();
    let h = encode_visual_into(&mut g, &mut binds, params, frames)?;
    Ok(g.value(h).clone())
}

fn temporal_rows(indices: std::ops::Range<usize>, dim: usize) -> Result<Tensor, ModelError> {
    let idx: Vec<usize> = indices.collect();
    Ok(crate::nn::sinusoidal_rows(&idx, dim)?)
}

/// Full-episode forward pass: all action/class/progress predictions at once,
/// read off the visual output positions.
pub fn et_forward_episode(
    input: &EpisodeInput,
    params: &ETParams,
    training: bool,
    rng: &mut CounterRng,
    record_trace: bool,
) -> Result<EtOutput, ModelError> {
    input.validate(&params.config)?;
    let cfg = &params.config;
    let d = cfg.model_dim;
    let t_len = input.frames.len();
    let l_len = input.instruction.len();

    let mut g = Graph::new();
    let mut binds = Vec::new();
    let mut lang_trace = AttentionTrace::new();
    let mut trace = AttentionTrace::new();

    let enc = lang_encoder(params, input.kind);
    let h_lang = encode_language_into(
        &mut g,
        &mut binds,
        &enc,
        &input.instruction,
        cfg.dropout,
        training,
        &mut rng.split(1),
        record_trace.then_some(&mut lang_trace),
    )?;

    // Visual stream: per-frame encoding plus temporal encoding at index t.
    let v_raw = encode_visual_into(&mut g, &mut binds, params, &input.frames)?;
    let v_te = g.constant(temporal_rows(1..t_len + 1, d)?);
    let h_visual = g.add(v_raw, v_te)?;

    // Action stream: START then a₁..a_{T−1}, temporal index s.
    let act_table = bind(&mut g, &mut binds, "", "act_embed", &params.act_embed);
    let a_ids = input.shifted_actions();
    let a_raw = g.gather_rows(act_table, &a_ids);
    let a_scaled = g.scale(a_raw, (d as f64).sqrt());
    let a_te = g.constant(temporal_rows(0..t_len, d)?);
    let h_action = g.add(a_scaled, a_te)?;

    let mut h = g.concat_rows(&[h_lang, h_visual, h_action])?;
    let mask = build_causal_mask(
        l_len,
        t_len,
        cfg.history_frames,
        cfg.history_actions,
        cfg.lang_attends_multimodal,
    );
    let mut mm_rng = rng.split(2);
    for (i, block) in params.mm_blocks.iter().enumerate() {
        let ids = block.leaf(&mut g, &mut binds, &format!("mm.{i}"));
        h = encoder_block(
            &mut g,
            h,
            &mask,
            &ids,
            cfg.dropout,
            training,
            &mut mm_rng,
            record_trace.then_some(&mut trace),
        )?;
    }
    let gamma = bind(&mut g, &mut binds, "mm", "ln_gamma", &params.mm_ln_gamma);
    let beta = bind(&mut g, &mut binds, "mm", "ln_beta", &params.mm_ln_beta);
    let z = g.layer_norm(h, gamma, beta, 1e-5)?;
    let z_visual = g.slice_rows(z, l_len, t_len);

    let aw = bind(&mut g, &mut binds, "head", "action_w", &params.head_action_w);
    let ab = bind(&mut g, &mut binds, "head", "action_b", &params.head_action_b);
    let cw = bind(&mut g, &mut binds, "head", "class_w", &params.head_class_w);
    let cb = bind(&mut g, &mut binds, "head", "class_b", &params.head_class_b);
    let pw = bind(
        &mut g,
        &mut binds,
        "head",
        "progress_w",
        &params.head_progress_w,
    );
    let pb = bind(
        &mut g,
        &mut binds,
        "head",
        "progress_b",
        &params.head_progress_b,
    );
    let action_logits = linear(&mut g, z_visual, aw, ab)?;
    let class_logits = linear(&mut g, z_visual, cw, cb)?;
    let progress = linear(&mut g, z_visual, pw, pb)?;

    Ok(EtOutput {
        graph: g,
        binds,
        action_logits,
        class_logits,
        progress,
        h_lang,
        h_visual,
        h_action,
        trace,
        lang_trace,
    })
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Step-wise inference: run the partial episode, take the last-step argmax.
/// The predicted class is meaningful only when the action interacts.
pub fn et_act(
    instruction: &[usize],
    kind: InstructionKind,
    frames: &[Vec<usize>],
    action_history: &[usize],
    params: &ETParams,
) -> Result<(ActionType, usize), ModelError> {
    let input = EpisodeInput {
        instruction: instruction.to_vec(),
        kind,
        frames: frames.to_vec(),
        actions: action_history.to_vec(),
    };
    let mut rng = CounterRng::new(0);
    let out = et_forward_episode(&input, params, false, &mut rng, false)?;
    let t = frames.len();
    let a_count = params.config.action_count;
    let k_count = params.config.class_count;
    let arow = &out.graph.data(out.action_logits)[(t - 1) * a_count..t * a_count];
    let crow = &out.graph.data(out.class_logits)[(t - 1) * k_count..t * k_count];
    let action = ActionType::from_id(argmax(arow)).expect("logit head width");
    Ok((action, argmax(crow)))
}
