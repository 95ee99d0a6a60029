mod common;

use common::*;
use proptest::prelude::*;
use reward_forge::model::{init_parameters, ModelConfig, Parameters};
use reward_forge::training::*;

fn no_checkpoints(_: CheckpointEvent, _: &Parameters) -> Result<(), TrainError> {
    Ok(())
}

#[test]
fn adamw_first_step_matches_closed_form() {
    let cfg = tiny_config(8, 1, 2);
    let params = random_parameters(&cfg, 2);
    let batch = random_pairs(&cfg, 3, 2);
    let (grads, _) = backward(&params, &batch, &FreezeSet::default()).unwrap();
    let config = AdamWConfig::default();
    let mut state = OptimizerState::new(&params, &FreezeSet::default(), config);
    let mut updated = params.clone();
    let lr = 1e-3;
    adamw_step(&mut updated, &grads, &mut state, lr).unwrap();
    assert_eq!(state.step_count(), 1);

    for ((name, before), (_, after)) in params.named().into_iter().zip(updated.named()) {
        let g = grads.get(&name).unwrap();
        let decay = before.shape.len() == 2 || name == "reward_head.weight";
        for i in 0..before.len() {
            // m_hat = g and v_hat = g^2 after one step from zero state.
            let (p, gi) = (before.data[i], g.data[i]);
            let shrunk = if decay { p * (1.0 - lr * 0.01) } else { p };
            let expected = shrunk - lr * gi / (gi.abs() + 1e-8);
            assert!((after.data[i] - expected).abs() < 1e-15, "{name}[{i}]");
        }
    }
}

#[test]
fn zero_gradient_without_decay_is_a_no_op() {
    let cfg = tiny_config(8, 1, 2);
    let params = random_parameters(&cfg, 2);
    let (mut grads, _) = backward(&params, &random_pairs(&cfg, 1, 0), &FreezeSet::default()).unwrap();
    grads.scale(0.0);
    let config = AdamWConfig { weight_decay: 0.0, ..Default::default() };
    let mut state = OptimizerState::new(&params, &FreezeSet::default(), config);
    let mut updated = params.clone();
    adamw_step(&mut updated, &grads, &mut state, 0.1).unwrap();
    assert_eq!(updated, params);
}

#[test]
fn zero_gradient_with_decay_shrinks_matrices() {
    let cfg = tiny_config(8, 1, 2);
    let params = random_parameters(&cfg, 2);
    let (mut grads, _) = backward(&params, &random_pairs(&cfg, 1, 0), &FreezeSet::default()).unwrap();
    grads.scale(0.0);
    let config = AdamWConfig { weight_decay: 0.1, ..Default::default() };
    let mut state = OptimizerState::new(&params, &FreezeSet::default(), config);
    let mut updated = params.clone();
    adamw_step(&mut updated, &grads, &mut state, 0.5).unwrap();
    let factor = 1.0 - 0.5 * 0.1;
    for ((name, a), (_, b)) in params.named().into_iter().zip(updated.named()) {
        let decays = a.shape.len() == 2 || name == "reward_head.weight";
        for (x, y) in a.data.iter().zip(&b.data) {
            let want = if decays { x * factor } else { *x };
            assert!((y - want).abs() < 1e-15, "{name}");
        }
    }
}

#[test]
fn optimizer_rejects_mismatched_gradients() {
    let cfg = tiny_config(8, 1, 2);
    let params = random_parameters(&cfg, 2);
    let (grads, _) = backward(&params, &random_pairs(&cfg, 1, 0), &FreezeSet::new(["embed"])).unwrap();
    let mut state = OptimizerState::new(&params, &FreezeSet::default(), AdamWConfig::default());
    let mut p = params.clone();
    assert!(matches!(adamw_step(&mut p, &grads, &mut state, 1e-3), Err(TrainError::Shape(_))));
}

#[test]
fn loss_decreases_over_first_ten_steps() {
    let cfg = tiny_config(16, 1, 2);
    let set = synthetic_set(&cfg, 32, 3);
    let batch: Vec<_> = set.multimodal.iter().chain(&set.text).take(16).cloned().collect();
    let mut params = init_parameters(&cfg);
    let mut state = OptimizerState::new(&params, &FreezeSet::default(), AdamWConfig::default());
    let mut last = batch_loss(&params, &batch).unwrap();
    for step in 0..10 {
        let (grads, _) = backward(&params, &batch, &FreezeSet::default()).unwrap();
        adamw_step(&mut params, &grads, &mut state, 1e-3).unwrap();
        let loss = batch_loss(&params, &batch).unwrap();
        assert!(loss < last, "step {step}: {loss} >= {last}");
        last = loss;
    }
}

fn stages(lr1: f64, lr2: f64, freeze: &[&str]) -> Vec<StageConfig> {
    let freeze: Vec<String> = freeze.iter().map(|s| s.to_string()).collect();
    vec![
        StageConfig { learning_rate: lr1, freeze: freeze.clone(), ..StageConfig::stage1() },
        StageConfig { learning_rate: lr2, freeze, ..StageConfig::stage2() },
    ]
}

#[test]
fn frozen_groups_are_bit_identical_after_two_stages() {
    let cfg = tiny_config(8, 1, 2);
    let set = synthetic_set(&cfg, 60, 5);
    let init = random_parameters(&cfg, 5);
    let (trained, log) = train_two_stage(
        init.clone(),
        &set.multimodal,
        &set.text,
        &stages(1e-5, 1e-6, &["projector", "embed"]),
        &TrainOptions::default(),
        &mut no_checkpoints,
    )
    .unwrap();
    assert_eq!(trained.projector_weight, init.projector_weight);
    assert_eq!(trained.projector_bias, init.projector_bias);
    assert_eq!(trained.token_embedding, init.token_embedding);
    assert_eq!(trained.position_embedding, init.position_embedding);
    assert_ne!(trained.blocks[0].qkv_weight, init.blocks[0].qkv_weight);
    assert_eq!(log.stage_learning_rates(), vec![(1, 1e-5), (2, 1e-6)]);
    for e in log.steps() {
        if let LogEntry::Step { loss, accuracy, .. } = e {
            assert!(*loss >= 0.0 && (0.0..=1.0).contains(accuracy));
        }
    }
}

#[test]
fn empty_stage_fails_before_any_step() {
    let cfg = tiny_config(8, 1, 2);
    let set = synthetic_set(&cfg, 10, 1);
    let mut calls = 0;
    let err = train_two_stage(
        init_parameters(&cfg),
        &[],
        &set.text,
        &stages(1e-5, 1e-6, &[]),
        &TrainOptions::default(),
        &mut |_, _| {
            calls += 1;
            Ok(())
        },
    )
    .unwrap_err();
    assert!(matches!(err, TrainError::EmptyStage(1)));
    assert_eq!(calls, 0);
}

#[test]
fn wrong_data_filter_for_stage_is_rejected() {
    let cfg = tiny_config(8, 1, 2);
    let set = synthetic_set(&cfg, 10, 1);
    let mut s = stages(1e-5, 1e-6, &[]);
    s[0].data_filter = DataFilter::MultimodalPlusText;
    let r = train_two_stage(init_parameters(&cfg), &set.multimodal, &set.text, &s, &TrainOptions::default(), &mut no_checkpoints);
    assert!(matches!(r, Err(TrainError::Config(_))));
}

#[test]
fn training_is_deterministic_and_checkpoints_fire() {
    let cfg = tiny_config(8, 1, 2);
    let set = synthetic_set(&cfg, 40, 2);
    let run = || {
        let mut events = Vec::new();
        let options = TrainOptions { checkpoint_every: Some(2), ..Default::default() };
        let (p, log) = train_two_stage(
            init_parameters(&cfg),
            &set.multimodal,
            &set.text,
            &stages(1e-3, 1e-4, &[]),
            &options,
            &mut |e, _| {
                events.push(e);
                Ok(())
            },
        )
        .unwrap();
        (p, log, events)
    };
    let (a, log_a, events) = run();
    let (b, log_b, _) = run();
    assert_eq!(a, b);
    assert_eq!(log_a, log_b);
    assert!(events.contains(&CheckpointEvent::StageEnd(1)));
    assert_eq!(events.last(), Some(&CheckpointEvent::StageEnd(2)));
    assert!(events.contains(&CheckpointEvent::Step(2)));
}

#[test]
fn stage_one_learns_planted_reward() {
    let cfg = ModelConfig::default();
    let train = synthetic_set(&cfg, 1200, 10);
    let held_out = synthetic_set(&cfg, 300, 11);
    let held: Vec<_> = held_out.multimodal.iter().chain(&held_out.text).cloned().collect();
    let (params, _) = train_two_stage(
        init_parameters(&cfg),
        &train.multimodal,
        &train.text,
        &stages(3e-3, 3e-4, &[])[..1],
        &TrainOptions::default(),
        &mut no_checkpoints,
    )
    .unwrap();
    let acc = pairwise_accuracy(&params, &held);
    assert!(acc >= 0.95, "held-out accuracy {acc}");
}

#[test]
fn loss_examples() {
    assert!((pairwise_loss(0.0, 0.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-9);
    let l = pairwise_loss(3f64.ln(), 0.0).unwrap();
    assert!((l - 0.287_682_072_451_780_9).abs() < 1e-12);
    assert!((pairwise_loss(-1000.0, 0.0).unwrap() - 1000.0).abs() < 1e-9);
    assert!(pairwise_loss(1000.0, 0.0).unwrap() >= 0.0);
    assert!(pairwise_loss(f64::NAN, 0.0).is_err());
    assert_eq!(loss_score_gradients(0.0, 0.0), (-0.5, 0.5));
    assert_eq!(loss_score_gradients(1000.0, 0.0), (0.0, 0.0));
}

proptest! {
    #[test]
    fn loss_is_shift_invariant(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -50.0f64..50.0) {
        let l1 = pairwise_loss(a + c, b + c).unwrap();
        let l0 = pairwise_loss(a, b).unwrap();
        prop_assert!((l1 - l0).abs() < 1e-9);
    }

    #[test]
    fn loss_positive_and_decreasing(a in -100.0f64..100.0, d in 1e-3f64..10.0) {
        let l = pairwise_loss(a, 0.0).unwrap();
        prop_assert!(l > 0.0);
        prop_assert!(pairwise_loss(a + d, 0.0).unwrap() < l);
    }

    #[test]
    fn swapping_scores_shifts_loss_by_margin(a in -30.0f64..30.0, b in -30.0f64..30.0) {
        // L(b, a) = L(a, b) + (a - b), so the swapped gradients are the
        // originals swapped and offset by -1 / +1.
        let (gp, gm) = loss_score_gradients(a, b);
        let (sp, sm) = loss_score_gradients(b, a);
        prop_assert_eq!(gp + gm, 0.0);
        prop_assert!((sp - (gm - 1.0)).abs() < 1e-12 && (sm - (gp + 1.0)).abs() < 1e-12);
        let swapped = pairwise_loss(b, a).unwrap();
        prop_assert!((swapped - pairwise_loss(a, b).unwrap() - (a - b)).abs() < 1e-9);
        let s = reward_forge::numeric::sigmoid(a - b) + reward_forge::numeric::sigmoid(b - a);
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn score_gradient_matches_difference_quotient(a in -8.0f64..8.0, b in -8.0f64..8.0) {
        let h = 1e-5;
        let (gp, gm) = loss_score_gradients(a, b);
        let fp = (pairwise_loss(a + h, b).unwrap() - pairwise_loss(a - h, b).unwrap()) / (2.0 * h);
        let fm = (pairwise_loss(a, b + h).unwrap() - pairwise_loss(a, b - h).unwrap()) / (2.0 * h);
        prop_assert!(rel_close(gp, fp, 1e-6) || (gp - fp).abs() < 1e-10);
        prop_assert!(rel_close(gm, fm, 1e-6) || (gm - fm).abs() < 1e-10);
    }
}
