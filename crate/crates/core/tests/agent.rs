mod common;

use std::fs;

use crossflow::agent::{double_td_errors, epsilon_at, train, DqnLearner, ReplayBuffer, TrainConfig, Transition};
use crossflow::encoder::PartialDtse;
use crossflow::neural::{load_checkpoint, AdamConfig, Arch, QNetwork};
use crossflow::rng::RngStream;
use crossflow::sim::ScenarioTag;
use proptest::prelude::*;

fn transition(rng: &mut RngStream, tag: f32) -> Transition {
    let mut s = PartialDtse::zeros(8, 20);
    for x in s.data.iter_mut() {
        if rng.uniform() < 0.2 {
            *x = 1.0;
        }
    }
    let mut next = s.clone();
    next.data[0] = 1.0 - next.data[0];
    Transition {
        state: s.pack(),
        action: rng.index(2) as u8,
        next_state: next.pack(),
        reward: tag,
        terminal: rng.uniform() < 0.05,
    }
}

fn smoke_config(steps: u64, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::new(ScenarioTag::A).desk_scale(steps);
    cfg.seed = seed;
    cfg.warmup = 300;
    cfg.buffer_capacity = 5_000;
    cfg
}

#[test]
fn smoke_run_has_finite_losses() {
    let out = train(&smoke_config(1000, 2), None).unwrap();
    assert_eq!(out.log.last().unwrap().step, 1000);
    let decisions: u64 = out.log.iter().map(|r| r.decisions).sum();
    assert_eq!(decisions, 1000);
    assert!(out.log.iter().all(|r| r.loss.is_finite() && r.loss >= 0.0));
    assert!(out.log.iter().all(|r| (0.0..=1.0).contains(&r.mean_reward)));
    assert!(out.network.params().iter().all(|p| p.is_finite()));
}

#[test]
fn outputs_written_and_reloadable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(400, 5);
    let out = train(&cfg, Some(dir.path())).unwrap();
    let bytes = fs::read(out.checkpoint_path.as_ref().unwrap()).unwrap();
    let (net, meta) = load_checkpoint(&bytes).unwrap();
    assert_eq!(meta.step, 400);
    assert_eq!(net.params(), out.network.params());
    let log = fs::read_to_string(out.log_path.unwrap()).unwrap();
    assert_eq!(log.lines().count(), out.log.len() + 1);
    assert!(log.starts_with("step,episode,"));
}

#[test]
fn zero_steps_writes_initial_checkpoint_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&smoke_config(0, 1), Some(dir.path())).unwrap();
    assert!(out.log.is_empty());
    let (net, meta) = load_checkpoint(&fs::read(out.checkpoint_path.unwrap()).unwrap()).unwrap();
    assert_eq!(meta.step, 0);
    let fresh = QNetwork::<f32>::new(Arch::for_scenario(ScenarioTag::A), &mut RngStream::with_stream(1, 48));
    assert_eq!(net.params(), fresh.params());
}

#[test]
fn missing_output_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert!(train(&smoke_config(10, 1), Some(&missing)).is_err());
}

#[test]
fn target_lags_online_by_tau() {
    let arch = Arch::for_scenario(ScenarioTag::A);
    let mut rng = RngStream::new(4);
    let mut buffer = ReplayBuffer::new(500, 64);
    for i in 0..200 {
        buffer.push(transition(&mut rng, (i % 7) as f32 / 7.0));
    }
    let online = QNetwork::new(arch, &mut rng);
    let mut learner = DqnLearner::new(online, AdamConfig { lr: 1e-2, ..AdamConfig::default() }, 0.99, 1e-3, 32);
    for _ in 0..20 {
        let old = learner.target.params().to_vec();
        learner.update(&buffer, &mut rng).unwrap();
        let gap = old
            .iter()
            .zip(learner.online.params())
            .map(|(t, o)| (t - o).abs())
            .fold(0.0f32, f32::max);
        let moved = old
            .iter()
            .zip(learner.target.params())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        // the blend is rounded to f32, so allow a few ulps of the largest weight
        let scale = old.iter().fold(0.0f32, |m, p| m.max(p.abs()));
        assert!(moved <= 1e-3 * gap + 4.0 * f32::EPSILON * scale, "moved {moved} gap {gap}");
    }
}

#[test]
fn update_refuses_cold_buffer() {
    let arch = Arch::for_scenario(ScenarioTag::A);
    let mut rng = RngStream::new(4);
    let mut buffer = ReplayBuffer::new(500, 100);
    for i in 0..99 {
        buffer.push(transition(&mut rng, i as f32 / 99.0));
    }
    let mut learner = DqnLearner::new(QNetwork::new(arch, &mut rng), AdamConfig::default(), 0.99, 1e-3, 32);
    let before = learner.online.params().to_vec();
    assert!(learner.update(&buffer, &mut rng).is_err());
    assert_eq!(learner.online.params(), &before[..]);
}

#[test]
fn equal_networks_give_self_selected_target() {
    // with the target equal to the online network the double target is
    // r + γ max_a Q(s', a)
    let q_next = [0.3f32, 0.9, -0.2, 0.1];
    let d = double_td_errors(&[0.0; 4], &q_next, &q_next, &[0, 1], &[0.5, 0.25], &[false, false], 0.99, 2);
    assert_eq!(d, vec![0.5 + 0.99 * 0.9, 0.25 + 0.99 * 0.1]);
}

proptest! {
    #![proptest_config(common::cases(64))]

    #[test]
    fn replay_drops_oldest_first(capacity in 1usize..40, extra in 0usize..40) {
        let mut rng = RngStream::new(0);
        let mut b = ReplayBuffer::new(capacity, 1);
        for i in 0..capacity + extra {
            b.push(transition(&mut rng, i as f32));
        }
        let kept: Vec<f32> = b.iter().map(|t| t.reward).collect();
        let want: Vec<f32> = (extra..capacity + extra).map(|i| i as f32).collect();
        prop_assert_eq!(kept, want);
    }

    #[test]
    fn terminal_rows_ignore_next_state(
        q_s in prop::collection::vec(-5.0f32..5.0, 4),
        a in prop::collection::vec(-5.0f32..5.0, 4),
        b in prop::collection::vec(-5.0f32..5.0, 4),
        r in prop::collection::vec(0.0f32..1.0, 2),
    ) {
        let terminal = [true, true];
        let d1 = double_td_errors(&q_s, &a, &b, &[0, 1], &r, &terminal, 0.99, 2);
        let d2 = double_td_errors(&q_s, &b, &a, &[0, 1], &r, &terminal, 0.99, 2);
        prop_assert_eq!(&d1, &d2);
        prop_assert_eq!(d1, vec![r[0] - q_s[0], r[1] - q_s[3]]);
    }

    #[test]
    fn epsilon_nonincreasing(t in 0u64..5_000_000, dt in 0u64..100_000) {
        let (e0, e1) = (epsilon_at(t, 0.01, 2e6), epsilon_at(t + dt, 0.01, 2e6));
        prop_assert!(e1 <= e0 && e1 >= 0.01 && e0 <= 1.0);
    }
}

#[test]
fn same_seed_same_run() {
    let (a, b) = (train(&smoke_config(600, 9), None).unwrap(), train(&smoke_config(600, 9), None).unwrap());
    assert_eq!(a.log, b.log);
    assert_eq!(a.network.params(), b.network.params());
    let c = train(&smoke_config(600, 10), None).unwrap();
    assert_ne!(a.network.params(), c.network.params());
}

#[test]
fn reloaded_checkpoint_predicts_identically() {
    let out = train(&smoke_config(300, 3), None).unwrap();
    let bytes = crossflow::neural::save_checkpoint(&out.network, &out.meta);
    let (net, _) = load_checkpoint(&bytes).unwrap();
    let mut rng = RngStream::new(8);
    for _ in 0..5 {
        let t = transition(&mut rng, 0.0);
        let x = t.state.unpack();
        assert_eq!(out.network.q_values(&x.data).unwrap(), net.q_values(&x.data).unwrap());
    }
}
