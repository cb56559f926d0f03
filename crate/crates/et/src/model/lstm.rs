//! Recurrent baseline: the same language and visual encoders as the
//! transformer agent, but history lives in an LSTM hidden state and only the
//! current frame is observed explicitly.

use rand_chacha::ChaCha8Rng;

use super::et::{encode_language_into, LangEncoderIds};
use super::{EpisodeInput, InstructionKind, ModelConfig, ModelError};
use crate::nn::{bind, dropout, linear, lstm_cell, EncoderBlockParams, LstmCellParams};
use crate::rng::CounterRng;
use crate::tensor::{Graph, Tensor, TensorId};
use crate::world::ActionType;

#[derive(Clone, Debug)]
pub struct LstmParams {
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
    /// Hidden-conditioned attention pooling over language embeddings.
    pub pool_q: Tensor,
    pub cell: LstmCellParams,
    pub head_action_w: Tensor,
    pub head_action_b: Tensor,
    pub head_class_w: Tensor,
    pub head_class_b: Tensor,
}

impl LstmParams {
    pub fn init(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self, ModelError> {
        let d = config.model_dim;
        let ve = config.visual_embed_dim;
        let h = config.lstm_hidden;
        let embed_std = 1.0 / (d as f64).sqrt();
        let lang_blocks = (0..config.blocks_language)
            .map(|_| EncoderBlockParams::init(d, config.heads, config.ff_dim, rng))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LstmParams {
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
            pool_q: Tensor::xavier(h, d, rng),
            cell: LstmCellParams::init(3 * d, h, rng),
            head_action_w: Tensor::xavier(h, config.action_count, rng),
            head_action_b: Tensor::zeros(&[config.action_count]),
            head_class_w: Tensor::xavier(h, config.class_count, rng),
            head_class_b: Tensor::zeros(&[config.class_count]),
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
            ("pool_q", &self.pool_q),
        ] {
            out.push((n.into(), t));
        }
        self.cell.named("cell", &mut out);
        for (n, t) in [
            ("head.action_w", &self.head_action_w),
            ("head.action_b", &self.head_action_b),
            ("head.class_w", &self.head_class_w),
            ("head.class_b", &self.head_class_b),
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
            ("pool_q", &mut self.pool_q),
        ] {
            out.push((n.into(), t));
        }
        self.cell.named_mut("cell", &mut out);
        for (n, t) in [
            ("head.action_w", &mut self.head_action_w),
            ("head.action_b", &mut self.head_action_b),
            ("head.class_w", &mut self.head_class_w),
            ("head.class_b", &mut self.head_class_b),
        ] {
            out.push((n.into(), t));
        }
        out
    }
}

pub struct LstmOutput {
    pub graph: Graph,
    pub binds: Vec<(String, TensorId)>,
    pub action_logits: TensorId,
    pub class_logits: TensorId,
    /// Sequential cell evaluations in this forward (one per timestep).
    pub cell_steps: usize,
}

/// Unrolled recurrent forward. Set `carry_state: false` to ablate the
/// recurrence (the hidden state resets every step).
pub fn lstm_forward(
    input: &EpisodeInput,
    params: &LstmParams,
    training: bool,
    rng: &mut CounterRng,
    carry_state: bool,
) -> Result<LstmOutput, ModelError> {
    input.validate(&params.config)?;
    let cfg = &params.config;
    let d = cfg.model_dim;
    let hidden = cfg.lstm_hidden;
    let t_len = input.frames.len();

    let mut g = Graph::new();
    let mut binds = Vec::new();

    let enc = LangEncoderIds {
        table: match input.kind {
            InstructionKind::Natural => &params.nat_embed,
            InstructionKind::Synthetic => &params.syn_embed,
        },
        table_name: match input.kind {
            InstructionKind::Natural => "nat_embed",
            InstructionKind::Synthetic => "syn_embed",
        },
        blocks: &params.lang_blocks,
        ln_gamma: &params.lang_ln_gamma,
        ln_beta: &params.lang_ln_beta,
        prefix: "lang",
    };
    let h_lang = encode_language_into(
        &mut g,
        &mut binds,
        &enc,
        &input.instruction,
        cfg.dropout,
        training,
        &mut rng.split(1),
        None,
    )?;
    let h_lang_t = g.transpose(h_lang);

    let table = bind(&mut g, &mut binds, "visual", "embed", &params.visual_embed);
    let b0 = bind(&mut g, &mut binds, "visual", "b0", &params.visual_b0);
    let fc1 = bind(&mut g, &mut binds, "visual", "fc1", &params.visual_fc1);
    let b1 = bind(&mut g, &mut binds, "visual", "b1", &params.visual_b1);
    let fc2 = bind(&mut g, &mut binds, "visual", "fc2", &params.visual_fc2);
    let b2 = bind(&mut g, &mut binds, "visual", "b2", &params.visual_b2);
    let summed = g.gather_rows_sum(table, &input.frames);
    let v = g.add_bias(summed, b0)?;
    let v = g.relu(v);
    let v = linear(&mut g, v, fc1, b1)?;
    let v = g.relu(v);
    let h_visual = linear(&mut g, v, fc2, b2)?;

    let act_table = bind(&mut g, &mut binds, "", "act_embed", &params.act_embed);
    let a_ids = input.shifted_actions();
    let a_raw = g.gather_rows(act_table, &a_ids);
    let h_action = g.scale(a_raw, (d as f64).sqrt());

    let pool_q = bind(&mut g, &mut binds, "", "pool_q", &params.pool_q);
    let cell = params.cell.leaf(&mut g, &mut binds, "cell");

    let zeros = Tensor::zeros(&[1, hidden]);
    let mut h_state = g.constant(zeros.clone());
    let mut c_state = g.constant(zeros.clone());
    let mut rows = Vec::with_capacity(t_len);
    let mut drop_rng = rng.split(2);
    for t in 0..t_len {
        if !carry_state && t > 0 {
            h_state = g.constant(zeros.clone());
            c_state = g.constant(zeros.clone());
        }
        // Attention pooling over language conditioned on the hidden state.
        let q = g.matmul(h_state, pool_q)?;
        let scores = g.matmul(q, h_lang_t)?;
        let scores = g.scale(scores, 1.0 / (d as f64).sqrt());
        let alpha = g.softmax(scores, 1)?;
        let pooled = g.matmul(alpha, h_lang)?;

        let v_t = g.slice_rows(h_visual, t, 1);
        let a_t = g.slice_rows(h_action, t, 1);
        let x_t = g.concat_cols(&[v_t, a_t, pooled])?;
        let x_t = dropout(&mut g, x_t, cfg.dropout, training, &mut drop_rng)?;
        let (h_next, c_next) = lstm_cell(&mut g, x_t, h_state, c_state, &cell)?;
        h_state = h_next;
        c_state = c_next;
        rows.push(h_state);
    }
    let states = g.concat_rows(&rows)?;

    let aw = bind(&mut g, &mut binds, "head", "action_w", &params.head_action_w);
    let ab = bind(&mut g, &mut binds, "head", "action_b", &params.head_action_b);
    let cw = bind(&mut g, &mut binds, "head", "class_w", &params.head_class_w);
    let cb = bind(&mut g, &mut binds, "head", "class_b", &params.head_class_b);
    let action_logits = linear(&mut g, states, aw, ab)?;
    let class_logits = linear(&mut g, states, cw, cb)?;

    Ok(LstmOutput {
        graph: g,
        binds,
        action_logits,
        class_logits,
        cell_steps: t_len,
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

/// Step-wise inference for the recurrent agent.
pub fn lstm_act(
    instruction: &[usize],
    kind: InstructionKind,
    frames: &[Vec<usize>],
    action_history: &[usize],
    params: &LstmParams,
) -> Result<(ActionType, usize), ModelError> {
    let input = EpisodeInput {
        instruction: instruction.to_vec(),
        kind,
        frames: frames.to_vec(),
        actions: action_history.to_vec(),
    };
    let mut rng = CounterRng::new(0);
    let out = lstm_forward(&input, params, false, &mut rng, true)?;
    let t = frames.len();
    let a_count = params.config.action_count;
    let k_count = params.config.class_count;
    let arow = &out.graph.data(out.action_logits)[(t - 1) * a_count..t * a_count];
    let crow = &out.graph.data(out.class_logits)[(t - 1) * k_count..t * k_count];
    let action = ActionType::from_id(argmax(arow)).expect("logit head width");
    Ok((action, argmax(crow)))
}
