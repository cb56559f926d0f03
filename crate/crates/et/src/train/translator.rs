//! Seq2seq pretraining on (natural, synthetic) pairs and token-level F1.

use super::{apply_update, lr_schedule, GradStore, TrainConfig, TrainError, TrainReport};
use crate::lang::{BOS, EOS};
use crate::model::{greedy_decode, translator_forward, ModelConfig, TranslatorParams};
use crate::rng::{self, CounterRng};
use crate::tensor::AdamWState;

/// Id-encoded (natural, synthetic) pairs.
pub type PairDataset = Vec<(Vec<usize>, Vec<usize>)>;

/// Micro-averaged token F1 between predictions and references (multiset
/// overlap per pair, aggregated counts).
pub fn token_f1(pairs: &[(Vec<usize>, Vec<usize>)]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (pred, gold) in pairs {
        let mut counts = std::collections::HashMap::new();
        for &g in gold {
            *counts.entry(g).or_insert(0usize) += 1;
        }
        let mut overlap = 0usize;
        for &p in pred {
            if let Some(c) = counts.get_mut(&p) {
                if *c > 0 {
                    *c -= 1;
                    overlap += 1;
                }
            }
        }
        tp += overlap;
        fp += pred.len() - overlap;
        fn_ += gold.len() - overlap;
    }
    if 2 * tp + fp + fn_ == 0 {
        return 1.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

/// Decode every source and score against the references.
pub fn decode_f1(params: &TranslatorParams, pairs: &[(Vec<usize>, Vec<usize>)]) -> f64 {
    let decoded: Vec<(Vec<usize>, Vec<usize>)> = pairs
        .iter()
        .map(|(x, y)| {
            let pred = greedy_decode(x, params, y.len() * 2 + 8).unwrap_or_default();
            (pred, y.clone())
        })
        .collect();
    token_f1(&decoded)
}

/// Teacher-forced cross-entropy training of the translator.
///
/// A small dev slice is carved off the train pairs; every second epoch it is
/// decoded and training stops early once dev F1 passes 0.99 (the schedule is
/// otherwise the shared two-phase one). Returns held-out F1.
pub fn pretrain_translator(
    train_pairs: &PairDataset,
    held_out: &PairDataset,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<(TranslatorParams, f64, TrainReport), TrainError> {
    if train_pairs.is_empty() || held_out.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let dev_len = (train_pairs.len() / 10).clamp(1, 64);
    let dev = &train_pairs[train_pairs.len() - dev_len..];
    let fit = &train_pairs[..train_pairs.len() - dev_len];

    let mut init_rng = rng::seeded(rng::derive(config.seed, "translator_init"));
    let mut params = TranslatorParams::init(model_config, &mut init_rng)?;
    let mut state = AdamWState::new(config.lr_first_half, config.weight_decay);
    let mut store = GradStore::new();
    let mut report = TrainReport::default();

    let mut order_rng = rng::seeded(rng::derive(config.seed, "translator_order"));
    let mut cursor = 0usize;
    let mut order: Vec<usize> = (0..fit.len()).collect();

    for epoch in 0..config.epochs {
        let start = std::time::Instant::now();
        state.lr = lr_schedule(epoch, config);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut tokens = 0usize;

        for batch in 0..config.batches_per_epoch {
            store.zero();
            let mut batch_loss = 0.0;
            for item in 0..config.batch_size {
                if cursor == 0 {
                    for i in (1..order.len()).rev() {
                        order.swap(i, rng::index(&mut order_rng, i + 1));
                    }
                }
                let (x, y) = &fit[order[cursor]];
                cursor = (cursor + 1) % order.len();

                let mut shifted = Vec::with_capacity(y.len() + 1);
                shifted.push(BOS);
                shifted.extend_from_slice(y);
                let mut targets = y.clone();
                targets.push(EOS);

                let key = rng::derive(config.seed, &format!("tdrop.{epoch}.{batch}.{item}"));
                let mut drop_rng = CounterRng::new(key);
                let mut out = translator_forward(x, &shifted, &params, true, &mut drop_rng)?;
                let loss = out.graph.cross_entropy(out.logits, &targets, None)?;
                let lval = out.graph.data(loss)[0];
                out.graph.backward(loss)?;
                store.accumulate(&out.graph, &out.binds, 1.0 / config.batch_size as f64);
                batch_loss += lval / config.batch_size as f64;
                report.forward_passes += 1;
                report.graphs_built += 1;
                report.demos_processed += 1;

                let v = params.config.vocab_synthetic;
                let logits = out.graph.data(out.logits);
                for (t, &target) in targets.iter().enumerate() {
                    let row = &logits[t * v..(t + 1) * v];
                    let mut best = 0;
                    for (i, &val) in row.iter().enumerate() {
                        if val > row[best] {
                            best = i;
                        }
                    }
                    if best == target {
                        correct += 1;
                    }
                    tokens += 1;
                }
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch,
                    detail: format!("translator loss {batch_loss}"),
                });
            }
            apply_update(params.named_mut(), &store, &mut state, config.grad_clip)?;
            loss_sum += batch_loss;
        }

        report.epochs.push(super::EpochStats {
            epoch,
            lr: state.lr,
            loss_total: loss_sum / config.batches_per_epoch as f64,
            ce_action: loss_sum / config.batches_per_epoch as f64,
            ce_class: 0.0,
            mse_progress: 0.0,
            action_accuracy: correct as f64 / tokens.max(1) as f64,
            seconds: start.elapsed().as_secs_f64(),
        });

        // Convergence check every 2nd epoch.
        if (epoch + 1) % 2 == 0 && decode_f1(&params, dev) >= 0.99 {
            break;
        }
    }

    let f1 = decode_f1(&params, held_out);
    Ok((params, f1, report))
}
