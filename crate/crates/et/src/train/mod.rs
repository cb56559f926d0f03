//! Behavior-cloning training for the agents and seq2seq pretraining for the
//! translator.
//!
//! Determinism contract: a fixed config seed fixes the data order, the
//! dropout streams and therefore the final checkpoint, bit for bit.

mod translator;

pub use translator::{pretrain_translator, token_f1, PairDataset};

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{LangError, Vocab};
use crate::model::{
    et_forward_episode, lstm_forward, EpisodeInput, ETParams, InstructionKind, LstmParams,
    ModelConfig, ModelError,
};
use crate::rng::{self, CounterRng};
use crate::tensor::{adamw_step, AdamWState, Graph, Tensor, TensorError, TensorId};
use crate::world::{replay, Demonstration, WorldConfig, WorldError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("joint training needs both a natural and a synthetic dataset")]
    JointNeedsBoth,
    #[error("joint training needs an even batch size, got {0}")]
    OddJointBatch(usize),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub lr_first_half: f64,
    pub lr_second_half: f64,
    pub weight_decay: f64,
    pub w_class: f64,
    pub w_progress: f64,
    pub joint: bool,
    pub grad_clip: f64,
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batches_per_epoch: 200,
            batch_size: 8,
            lr_first_half: 1e-4,
            lr_second_half: 1e-5,
            weight_decay: 0.33,
            w_class: 0.1,
            w_progress: 0.1,
            joint: false,
            grad_clip: 5.0,
            checkpoint_every: 2,
            seed: 0,
        }
    }
}

/// Piecewise-constant schedule: the first-half rate through epoch
/// ⌈epochs/2⌉−1, the second-half rate afterwards.
pub fn lr_schedule(epoch: usize, config: &TrainConfig) -> f64 {
    debug_assert!(epoch < config.epochs);
    if epoch < config.epochs.div_ceil(2) {
        config.lr_first_half
    } else {
        config.lr_second_half
    }
}

/// A demonstration turned into model inputs and supervision targets.
#[derive(Clone, Debug)]
pub struct PreparedDemo {
    pub input: EpisodeInput,
    pub action_targets: Vec<usize>,
    /// Target class id per step; `IGNORE` on non-interaction steps.
    pub class_targets: Vec<usize>,
    pub overall_progress: Vec<f64>,
    pub subgoal_progress: Vec<f64>,
}

/// Ignore-index sentinel for class targets.
pub const IGNORE: usize = usize::MAX;

/// Replay a stored demonstration into observations and encode its
/// instruction with the right vocabulary.
pub fn prepare_demo(
    demo: &Demonstration,
    world_config: &WorldConfig,
    vocab: &Vocab,
    kind: InstructionKind,
) -> Result<PreparedDemo, TrainError> {
    let (_, observations, _) = replay(demo, world_config)?;
    let frames: Vec<Vec<usize>> = observations.iter().map(|o| o.feature_indices()).collect();
    let tokens = match kind {
        InstructionKind::Natural => &demo.natural_tokens,
        InstructionKind::Synthetic => &demo.synthetic_tokens,
    };
    let instruction = vocab.encode(tokens);
    let actions: Vec<usize> = demo.actions.iter().map(|a| a.id()).collect();
    let class_targets = demo
        .target_classes
        .iter()
        .map(|c| c.map(|c| c.id()).unwrap_or(IGNORE))
        .collect();
    Ok(PreparedDemo {
        input: EpisodeInput {
            instruction,
            kind,
            frames,
            actions: actions.clone(),
        },
        action_targets: actions,
        class_targets,
        overall_progress: demo.overall_progress(),
        subgoal_progress: demo.subgoal_progress(),
    })
}

/// Loss components, each before weighting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub ce_action: f64,
    pub ce_class: f64,
    pub mse_progress: f64,
}

/// Behavior-cloning loss on one episode's outputs:
/// `CE(actions) + w_class·CE(classes | interactions) + w_progress·(MSE overall + MSE subgoal)`.
pub fn bc_loss(
    g: &mut Graph,
    action_logits: TensorId,
    class_logits: Option<TensorId>,
    progress: Option<TensorId>,
    demo: &PreparedDemo,
    w_class: f64,
    w_progress: f64,
) -> Result<(TensorId, LossParts), TrainError> {
    let t_len = demo.action_targets.len();
    if g.shape(action_logits)[0] != t_len {
        return Err(TrainError::Model(ModelError::BadInput(format!(
            "{} logit rows for {} targets",
            g.shape(action_logits)[0],
            t_len
        ))));
    }
    let ce_action = g.cross_entropy(action_logits, &demo.action_targets, None)?;
    let mut total = ce_action;
    let mut parts = LossParts {
        ce_action: g.data(ce_action)[0],
        ..Default::default()
    };

    if let Some(class_logits) = class_logits {
        let ce_class = g.cross_entropy(class_logits, &demo.class_targets, Some(IGNORE))?;
        parts.ce_class = g.data(ce_class)[0];
        let weighted = g.scale(ce_class, w_class);
        total = g.add(total, weighted)?;
    }

    if let Some(progress) = progress {
        let overall = g.slice_cols(progress, 0, 1);
        let subgoal = g.slice_cols(progress, 1, 1);
        let target_o = g.constant(Tensor::new(demo.overall_progress.clone(), vec![t_len, 1])?);
        let target_s = g.constant(Tensor::new(demo.subgoal_progress.clone(), vec![t_len, 1])?);
        let d_o = g.sub(overall, target_o)?;
        let sq_o = g.mul(d_o, d_o)?;
        let mse_o = g.mean_all(sq_o);
        let d_s = g.sub(subgoal, target_s)?;
        let sq_s = g.mul(d_s, d_s)?;
        let mse_s = g.mean_all(sq_s);
        let mse = g.add(mse_o, mse_s)?;
        parts.mse_progress = g.data(mse)[0];
        let weighted = g.scale(mse, w_progress);
        total = g.add(total, weighted)?;
    }

    parts.total = g.data(total)[0];
    Ok((total, parts))
}

/// Accumulated gradients, keyed by parameter name. The trainer zeroes this
/// explicitly between optimizer steps.
#[derive(Default)]
pub struct GradStore {
    map: HashMap<String, Vec<f64>>,
}

impl GradStore {
    pub fn new() -> Self {
        GradStore::default()
    }

    pub fn zero(&mut self) {
        self.map.clear();
    }

    /// Add `scale`× the gradients found on the bound leaves of a graph.
    pub fn accumulate(&mut self, graph: &Graph, binds: &[(String, TensorId)], scale: f64) {
        for (name, id) in binds {
            if let Some(g) = graph.grad(*id) {
                self.map
                    .entry(name.clone())
                    .and_modify(|acc| acc.iter_mut().zip(g).for_each(|(a, v)| *a += v * scale))
                    .or_insert_with(|| g.iter().map(|v| v * scale).collect());
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.map.get(name).map(|v| v.as_slice())
    }

    pub fn global_norm(&self) -> f64 {
        self.map
            .values()
            .flat_map(|v| v.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Clip to a global norm and take one AdamW step over the named parameters.
pub fn apply_update(
    named: Vec<(String, &mut Tensor)>,
    store: &GradStore,
    state: &mut AdamWState,
    clip: f64,
) -> Result<(), TensorError> {
    let norm = store.global_norm();
    let scale = if clip > 0.0 && norm > clip {
        clip / norm
    } else {
        1.0
    };
    let mut names = Vec::with_capacity(named.len());
    let mut tensors = Vec::with_capacity(named.len());
    for (n, t) in named {
        names.push(n);
        tensors.push(t);
    }
    let grads: Vec<Vec<f64>> = names
        .iter()
        .zip(tensors.iter())
        .map(|(n, t)| match store.get(n) {
            Some(g) => g.iter().map(|v| v * scale).collect(),
            None => vec![0.0; t.numel()],
        })
        .collect();
    let mut refs: Vec<(&str, &mut Tensor)> = names
        .iter()
        .map(|n| n.as_str())
        .zip(tensors.into_iter())
        .collect();
    adamw_step(&mut refs, &grads, state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Et,
    Lstm,
}

/// Trained parameters, either architecture.
#[derive(Clone, Debug)]
pub enum AgentParams {
    Et(ETParams),
    Lstm(LstmParams),
}

impl AgentParams {
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        match self {
            AgentParams::Et(p) => p.save(path),
            AgentParams::Lstm(p) => p.save(path),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            AgentParams::Et(p) => &p.config,
            AgentParams::Lstm(p) => &p.config,
        }
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        match self {
            AgentParams::Et(p) => p.named(),
            AgentParams::Lstm(p) => p.named(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub loss_total: f64,
    pub ce_action: f64,
    pub ce_class: f64,
    pub mse_progress: f64,
    pub action_accuracy: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Sequence-level forward passes: one per episode for the transformer,
    /// one per timestep for the recurrent baseline.
    pub forward_passes: usize,
    pub graphs_built: usize,
    pub demos_processed: usize,
}

impl TrainReport {
    /// Deterministic view (drops wall-clock) for reproducibility checks.
    pub fn numbers(&self) -> Vec<(usize, f64, f64, f64, f64, f64)> {
        self.epochs
            .iter()
            .map(|e| {
                (
                    e.epoch,
                    e.lr,
                    e.loss_total,
                    e.ce_action,
                    e.ce_class,
                    e.action_accuracy,
                )
            })
            .collect()
    }

    /// CSV: epoch, ce_action, ce_class, mse_progress, acc, seconds.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,ce_action,ce_class,mse_progress,acc,seconds\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.4},{:.2}\n",
                e.epoch, e.ce_action, e.ce_class, e.mse_progress, e.action_accuracy, e.seconds
            ));
        }
        out
    }
}

struct BatchOutcome {
    parts: LossParts,
    correct: usize,
    steps: usize,
}

/// Behavior-clone an agent on demonstration datasets.
///
/// Joint training draws half of every batch from each dataset, sums the two
/// half-batch losses and takes a single optimizer step. Pass `init` to start
/// from transferred weights instead of a fresh seed.
#[allow(clippy::too_many_arguments)]
pub fn train_agent(
    natural: &[PreparedDemo],
    synthetic: Option<&[PreparedDemo]>,
    kind: ModelKind,
    model_config: &ModelConfig,
    config: &TrainConfig,
    init: Option<AgentParams>,
    ckpt_dir: Option<&Path>,
) -> Result<(AgentParams, TrainReport), TrainError> {
    if natural.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if config.joint {
        if synthetic.map_or(true, |s| s.is_empty()) {
            return Err(TrainError::JointNeedsBoth);
        }
        if config.batch_size % 2 != 0 {
            return Err(TrainError::OddJointBatch(config.batch_size));
        }
    }

    let mut params = match init {
        Some(p) => p,
        None => {
            let mut init_rng = rng::seeded(rng::derive(config.seed, "init"));
            match kind {
                ModelKind::Et => AgentParams::Et(ETParams::init(model_config, &mut init_rng)?),
                ModelKind::Lstm => {
                    AgentParams::Lstm(LstmParams::init(model_config, &mut init_rng)?)
                }
            }
        }
    };

    let mut state = AdamWState::new(config.lr_first_half, config.weight_decay);
    let mut report = TrainReport::default();
    let mut store = GradStore::new();

    let mut order_rng = rng::seeded(rng::derive(config.seed, "order"));
    let mut order_nat = ShuffledCycle::new(natural.len());
    let mut order_syn = ShuffledCycle::new(synthetic.map_or(0, |s| s.len()));

    for epoch in 0..config.epochs {
        let start = std::time::Instant::now();
        state.lr = lr_schedule(epoch, config);
        let mut sums = LossParts::default();
        let mut correct = 0usize;
        let mut steps = 0usize;
        let mut episodes = 0usize;

        for batch in 0..config.batches_per_epoch {
            store.zero();
            let mut batch_sums = LossParts::default();

            let plan: Vec<(bool, usize)> = if config.joint {
                let half = config.batch_size / 2;
                let mut p: Vec<(bool, usize)> = (0..half)
                    .map(|_| (false, order_nat.next(&mut order_rng)))
                    .collect();
                p.extend((0..half).map(|_| (true, order_syn.next(&mut order_rng))));
                p
            } else {
                (0..config.batch_size)
                    .map(|_| (false, order_nat.next(&mut order_rng)))
                    .collect()
            };

            let half = if config.joint {
                config.batch_size / 2
            } else {
                config.batch_size
            };
            for (item, &(is_syn, idx)) in plan.iter().enumerate() {
                let demo = if is_syn {
                    &synthetic.unwrap()[idx]
                } else {
                    &natural[idx]
                };
                let drop_key =
                    rng::derive(config.seed, &format!("drop.{epoch}.{batch}.{item}"));
                let mut drop_rng = CounterRng::new(drop_key);
                let outcome = train_episode(
                    &mut params,
                    demo,
                    config,
                    &mut drop_rng,
                    &mut store,
                    1.0 / half as f64,
                    &mut report,
                )?;
                batch_sums.total += outcome.parts.total / half as f64;
                batch_sums.ce_action += outcome.parts.ce_action / half as f64;
                batch_sums.ce_class += outcome.parts.ce_class / half as f64;
                batch_sums.mse_progress += outcome.parts.mse_progress / half as f64;
                correct += outcome.correct;
                steps += outcome.steps;
                episodes += 1;
            }

            if !batch_sums.total.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch,
                    detail: format!("{batch_sums:?}"),
                });
            }

            match &mut params {
                AgentParams::Et(p) => {
                    apply_update(p.named_mut(), &store, &mut state, config.grad_clip)?
                }
                AgentParams::Lstm(p) => {
                    apply_update(p.named_mut(), &store, &mut state, config.grad_clip)?
                }
            }

            sums.total += batch_sums.total;
            sums.ce_action += batch_sums.ce_action;
            sums.ce_class += batch_sums.ce_class;
            sums.mse_progress += batch_sums.mse_progress;
        }

        let nb = config.batches_per_epoch as f64;
        report.epochs.push(EpochStats {
            epoch,
            lr: state.lr,
            loss_total: sums.total / nb,
            ce_action: sums.ce_action / nb,
            ce_class: sums.ce_class / nb,
            mse_progress: sums.mse_progress / nb,
            action_accuracy: correct as f64 / steps.max(1) as f64,
            seconds: start.elapsed().as_secs_f64(),
        });
        report.demos_processed += episodes;

        if let Some(dir) = ckpt_dir {
            let due = (epoch + 1) % config.checkpoint_every.max(1) == 0;
            if due || epoch + 1 == config.epochs {
                params
                    .save(&dir.join(format!("epoch_{:03}.bin", epoch + 1)))
                    .map_err(TrainError::Model)?;
            }
        }
    }

    Ok((params, report))
}

fn train_episode(
    params: &mut AgentParams,
    demo: &PreparedDemo,
    config: &TrainConfig,
    drop_rng: &mut CounterRng,
    store: &mut GradStore,
    scale: f64,
    report: &mut TrainReport,
) -> Result<BatchOutcome, TrainError> {
    let (mut graph, binds, action_logits, class_logits, progress) = match params {
        AgentParams::Et(p) => {
            let out = et_forward_episode(&demo.input, p, true, drop_rng, false)?;
            report.forward_passes += 1;
            (
                out.graph,
                out.binds,
                out.action_logits,
                out.class_logits,
                Some(out.progress),
            )
        }
        AgentParams::Lstm(p) => {
            let out = lstm_forward(&demo.input, p, true, drop_rng, true)?;
            report.forward_passes += out.cell_steps;
            (
                out.graph,
                out.binds,
                out.action_logits,
                out.class_logits,
                None,
            )
        }
    };
    report.graphs_built += 1;

    let (loss, parts) = bc_loss(
        &mut graph,
        action_logits,
        Some(class_logits),
        progress,
        demo,
        config.w_class,
        config.w_progress,
    )?;
    if !parts.total.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            epoch: 0,
            batch: 0,
            detail: format!("episode loss {parts:?}"),
        });
    }
    graph.backward(loss)?;
    store.accumulate(&graph, &binds, scale);

    let a_count = params.config().action_count;
    let logits = graph.data(action_logits);
    let mut correct = 0;
    for (t, &target) in demo.action_targets.iter().enumerate() {
        let row = &logits[t * a_count..(t + 1) * a_count];
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        if best == target {
            correct += 1;
        }
    }
    Ok(BatchOutcome {
        parts,
        correct,
        steps: demo.action_targets.len(),
    })
}

/// Reshuffled round-robin over dataset indices; deterministic given the
/// caller's RNG stream.
struct ShuffledCycle {
    order: Vec<usize>,
    cursor: usize,
}

impl ShuffledCycle {
    fn new(len: usize) -> Self {
        ShuffledCycle {
            order: (0..len).collect(),
            cursor: 0,
        }
    }

    fn next(&mut self, r: &mut rand_chacha::ChaCha8Rng) -> usize {
        if self.cursor == 0 {
            for i in (1..self.order.len()).rev() {
                self.order.swap(i, rng::index(r, i + 1));
            }
        }
        let v = self.order[self.cursor];
        self.cursor = (self.cursor + 1) % self.order.len();
        v
    }
}

#[cfg(test)]
mod tests;
