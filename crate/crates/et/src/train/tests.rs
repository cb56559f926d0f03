use super::*;
use crate::model::tests::{random_episode, tiny_config};
use crate::model::et_forward_episode;
use crate::rng::CounterRng;

fn prepared(cfg: &ModelConfig, seed: u64, t_len: usize) -> PreparedDemo {
    let input = random_episode(cfg, seed, t_len);
    let mut r = rng::seeded(seed ^ 0xbeef);
    let class_targets = (0..t_len)
        .map(|t| {
            if t % 3 == 0 {
                rng::index(&mut r, cfg.class_count)
            } else {
                IGNORE
            }
        })
        .collect();
    let overall = (1..=t_len).map(|t| t as f64 / t_len as f64).collect();
    let subgoal = (0..t_len).map(|t| ((t % 4) + 1) as f64 / 4.0).collect();
    PreparedDemo {
        action_targets: input.actions.clone(),
        input,
        class_targets,
        overall_progress: overall,
        subgoal_progress: subgoal,
    }
}

#[test]
fn lr_schedule_matches_two_phase_shape() {
    let mut cfg = TrainConfig::default();
    cfg.epochs = 20;
    assert_eq!(lr_schedule(0, &cfg), 1e-4);
    assert_eq!(lr_schedule(9, &cfg), 1e-4);
    assert_eq!(lr_schedule(10, &cfg), 1e-5);
    assert_eq!(lr_schedule(19, &cfg), 1e-5);
    cfg.epochs = 1;
    assert_eq!(lr_schedule(0, &cfg), 1e-4);
}

#[test]
fn bc_loss_uniform_action_logits() {
    let cfg = tiny_config();
    let demo = prepared(&cfg, 1, 5);
    let mut g = crate::tensor::Graph::new();
    let logits = g.constant(crate::tensor::Tensor::zeros(&[5, cfg.action_count]));
    let (_, parts) = bc_loss(&mut g, logits, None, None, &demo, 0.1, 0.1).unwrap();
    assert!((parts.ce_action - (cfg.action_count as f64).ln()).abs() < 1e-12);
    assert_eq!(parts.total, parts.ce_action);
}

#[test]
fn bc_loss_reduces_to_progress_when_actions_are_perfect() {
    let cfg = tiny_config();
    let mut demo = prepared(&cfg, 2, 4);
    demo.class_targets = vec![IGNORE; 4];
    let mut g = crate::tensor::Graph::new();
    let mut confident = crate::tensor::Tensor::zeros(&[4, cfg.action_count]);
    for (t, &a) in demo.action_targets.iter().enumerate() {
        confident.data[t * cfg.action_count + a] = 1e6;
    }
    let logits = g.constant(confident);
    let classes = g.constant(crate::tensor::Tensor::zeros(&[4, cfg.class_count]));
    let progress = g.constant(crate::tensor::Tensor::zeros(&[4, 2]));
    let (_, parts) = bc_loss(&mut g, logits, Some(classes), Some(progress), &demo, 0.1, 0.1).unwrap();
    assert!(parts.ce_action < 1e-9);
    assert_eq!(parts.ce_class, 0.0, "all class rows ignored");
    let expect_mse: f64 = {
        let o: f64 = demo.overall_progress.iter().map(|p| p * p).sum::<f64>() / 4.0;
        let s: f64 = demo.subgoal_progress.iter().map(|p| p * p).sum::<f64>() / 4.0;
        o + s
    };
    assert!((parts.mse_progress - expect_mse).abs() < 1e-12);
    assert!((parts.total - (parts.ce_action + 0.1 * parts.mse_progress)).abs() < 1e-12);
}

#[test]
fn bc_loss_total_is_the_weighted_sum() {
    let cfg = tiny_config();
    let demo = prepared(&cfg, 3, 6);
    let params = crate::model::ETParams::init(&cfg, &mut rng::seeded(3)).unwrap();
    let mut out = et_forward_episode(&demo.input, &params, false, &mut CounterRng::new(0), false)
        .unwrap();
    let (_, parts) = bc_loss(
        &mut out.graph,
        out.action_logits,
        Some(out.class_logits),
        Some(out.progress),
        &demo,
        0.1,
        0.1,
    )
    .unwrap();
    assert!(parts.ce_action >= 0.0 && parts.ce_class >= 0.0 && parts.mse_progress >= 0.0);
    let weighted = parts.ce_action + 0.1 * parts.ce_class + 0.1 * parts.mse_progress;
    assert!((parts.total - weighted).abs() < 1e-12);
}

#[test]
fn bc_loss_zero_weights_match_plain_cross_entropy() {
    let cfg = tiny_config();
    let demo = prepared(&cfg, 4, 5);
    let params = crate::model::ETParams::init(&cfg, &mut rng::seeded(4)).unwrap();
    let mut out = et_forward_episode(&demo.input, &params, false, &mut CounterRng::new(0), false)
        .unwrap();
    let (_, parts) = bc_loss(
        &mut out.graph,
        out.action_logits,
        Some(out.class_logits),
        Some(out.progress),
        &demo,
        0.0,
        0.0,
    )
    .unwrap();
    let plain = out
        .graph
        .cross_entropy(out.action_logits, &demo.action_targets, None)
        .unwrap();
    assert_eq!(parts.total, out.graph.data(plain)[0]);
}

#[test]
fn bc_loss_rejects_length_mismatch() {
    let cfg = tiny_config();
    let mut demo = prepared(&cfg, 5, 4);
    demo.action_targets.pop();
    let mut g = crate::tensor::Graph::new();
    let logits = g.constant(crate::tensor::Tensor::zeros(&[4, cfg.action_count]));
    assert!(bc_loss(&mut g, logits, None, None, &demo, 0.1, 0.1).is_err());
}

fn smoke_train_config() -> TrainConfig {
    TrainConfig {
        epochs: 10,
        batches_per_epoch: 1,
        batch_size: 8,
        lr_first_half: 1e-3,
        lr_second_half: 1e-3,
        weight_decay: 0.0,
        w_class: 0.1,
        w_progress: 0.1,
        joint: false,
        grad_clip: 5.0,
        checkpoint_every: 100,
        seed: 7,
    }
}

#[test]
fn smoke_training_decreases_loss() {
    let cfg = tiny_config();
    let demos: Vec<PreparedDemo> = (0..8).map(|s| prepared(&cfg, 100 + s, 4)).collect();
    let (_, report) = train_agent(
        &demos,
        None,
        ModelKind::Et,
        &cfg,
        &smoke_train_config(),
        None,
        None,
    )
    .unwrap();
    let losses: Vec<f64> = report.epochs.iter().map(|e| e.loss_total).collect();
    for w in losses.windows(2) {
        assert!(w[1] < w[0], "loss not decreasing: {losses:?}");
    }
}

#[test]
fn same_seed_reproduces_report_and_checkpoint() {
    let cfg = tiny_config();
    let demos: Vec<PreparedDemo> = (0..6).map(|s| prepared(&cfg, 200 + s, 3)).collect();
    let mut train_cfg = smoke_train_config();
    train_cfg.epochs = 3;

    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let (params, report) = train_agent(
            &demos,
            None,
            ModelKind::Et,
            &cfg,
            &train_cfg,
            None,
            None,
        )
        .unwrap();
        let path = dir.path().join(format!("{tag}.bin"));
        params.save(&path).unwrap();
        (std::fs::read(&path).unwrap(), report)
    };
    let (bytes_a, report_a) = run("a");
    let (bytes_b, report_b) = run("b");
    assert_eq!(bytes_a, bytes_b, "checkpoints must be bit-identical");
    assert_eq!(report_a.numbers(), report_b.numbers());
}

#[test]
fn joint_step_touches_both_tables() {
    let cfg = tiny_config();
    let natural: Vec<PreparedDemo> = (0..4).map(|s| prepared(&cfg, 300 + s, 3)).collect();
    let synthetic: Vec<PreparedDemo> = (0..4)
        .map(|s| {
            let mut d = prepared(&cfg, 400 + s, 3);
            d.input.kind = crate::model::InstructionKind::Synthetic;
            d.input.instruction = vec![4, 5, 6];
            d
        })
        .collect();
    let mut train_cfg = smoke_train_config();
    train_cfg.epochs = 1;
    train_cfg.joint = true;

    let before = crate::model::ETParams::init(
        &cfg,
        &mut rng::seeded(rng::derive(train_cfg.seed, "init")),
    )
    .unwrap();
    let (params, _) = train_agent(
        &natural,
        Some(&synthetic),
        ModelKind::Et,
        &cfg,
        &train_cfg,
        None,
        None,
    )
    .unwrap();
    let AgentParams::Et(after) = params else {
        panic!("expected transformer params")
    };
    let nat_moved = before
        .nat_embed
        .data
        .iter()
        .zip(&after.nat_embed.data)
        .any(|(a, b)| a != b);
    let syn_moved = before
        .syn_embed
        .data
        .iter()
        .zip(&after.syn_embed.data)
        .any(|(a, b)| a != b);
    assert!(nat_moved, "natural table untouched by joint step");
    assert!(syn_moved, "synthetic table untouched by joint step");
}

#[test]
fn joint_requires_even_batch_and_both_datasets() {
    let cfg = tiny_config();
    let demos: Vec<PreparedDemo> = (0..2).map(|s| prepared(&cfg, 500 + s, 3)).collect();
    let mut train_cfg = smoke_train_config();
    train_cfg.joint = true;
    assert!(matches!(
        train_agent(&demos, None, ModelKind::Et, &cfg, &train_cfg, None, None),
        Err(TrainError::JointNeedsBoth)
    ));
    train_cfg.batch_size = 3;
    assert!(matches!(
        train_agent(
            &demos,
            Some(&demos),
            ModelKind::Et,
            &cfg,
            &train_cfg,
            None,
            None
        ),
        Err(TrainError::OddJointBatch(3))
    ));
}

#[test]
fn forward_pass_accounting_distinguishes_architectures() {
    // One sequence-level pass per episode for the transformer; one pass per
    // timestep for the recurrent baseline.
    let cfg = tiny_config();
    let demos: Vec<PreparedDemo> = (0..3).map(|s| prepared(&cfg, 600 + s, 4)).collect();
    let mut train_cfg = smoke_train_config();
    train_cfg.epochs = 1;
    train_cfg.batches_per_epoch = 1;
    train_cfg.batch_size = 3;

    let (_, et_report) = train_agent(
        &demos,
        None,
        ModelKind::Et,
        &cfg,
        &train_cfg,
        None,
        None,
    )
    .unwrap();
    assert_eq!(et_report.demos_processed, 3);
    assert_eq!(et_report.forward_passes, 3);
    assert_eq!(et_report.graphs_built, 3);

    let (_, lstm_report) = train_agent(
        &demos,
        None,
        ModelKind::Lstm,
        &cfg,
        &train_cfg,
        None,
        None,
    )
    .unwrap();
    assert_eq!(lstm_report.demos_processed, 3);
    assert_eq!(lstm_report.forward_passes, 3 * 4);
    assert_eq!(lstm_report.graphs_built, 3);
}

#[test]
fn token_f1_definition_cases() {
    assert_eq!(token_f1(&[(vec![4, 5, 6], vec![4, 5, 6])]), 1.0);
    assert_eq!(token_f1(&[(vec![], vec![4, 5])]), 0.0);
    let half = token_f1(&[(vec![4, 9], vec![4, 5])]);
    assert!((half - 0.5).abs() < 1e-12);
    // Multiset semantics: a repeated predicted token counts once.
    let rep = token_f1(&[(vec![4, 4], vec![4])]);
    assert!((rep - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn translator_pretraining_on_tiny_copy_corpus() {
    let mut cfg = tiny_config();
    cfg.vocab_natural = 12;
    cfg.vocab_synthetic = 12;
    cfg.dropout = 0.0;
    let mut r = rng::seeded(9);
    let pairs: PairDataset = (0..40)
        .map(|_| {
            let seq: Vec<usize> = (0..4).map(|_| 4 + rng::index(&mut r, 8)).collect();
            (seq.clone(), seq)
        })
        .collect();
    let held: PairDataset = pairs[32..].to_vec();
    let train: PairDataset = pairs[..32].to_vec();
    let train_cfg = TrainConfig {
        epochs: 40,
        batches_per_epoch: 8,
        batch_size: 4,
        lr_first_half: 3e-3,
        lr_second_half: 1e-3,
        weight_decay: 0.0,
        w_class: 0.0,
        w_progress: 0.0,
        joint: false,
        grad_clip: 5.0,
        checkpoint_every: 100,
        seed: 11,
    };
    let (_, f1, report) = pretrain_translator(&train, &held, &cfg, &train_cfg).unwrap();
    assert!(f1 >= 0.95, "copy-task F1 {f1}");
    // Early stopping triggers well before the epoch cap.
    assert!(report.epochs.len() < 40);
}

#[test]
fn report_csv_has_the_documented_columns() {
    let report = TrainReport {
        epochs: vec![EpochStats {
            epoch: 0,
            lr: 1e-4,
            loss_total: 2.0,
            ce_action: 1.5,
            ce_class: 0.4,
            mse_progress: 0.1,
            action_accuracy: 0.5,
            seconds: 1.25,
        }],
        forward_passes: 1,
        graphs_built: 1,
        demos_processed: 1,
    };
    let csv = report.to_csv();
    assert!(csv.starts_with("epoch,ce_action,ce_class,mse_progress,acc,seconds\n"));
    assert!(csv.contains("0,1.5"));
}
