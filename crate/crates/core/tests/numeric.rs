mod common;

use crossflow::neural::{elu, huber_loss, polyak_update, Adam, AdamConfig, Arch, QNetwork};
use crossflow::rng::RngStream;
use proptest::prelude::*;

#[test]
fn analytic_gradients_match_finite_differences() {
    for seed in 0..5 {
        let g = common::gradient_check(seed, 150, 1e-3);
        eprintln!("seed {seed}: {g:?}");
        assert!(g.worst < 1e-4, "seed {seed}: relative error {}", g.worst);
        assert!(g.checked >= 500, "seed {seed}: only {} parameters compared", g.checked);
    }
}

#[test]
fn hand_values_exact_in_f32() {
    assert_eq!(elu(0.0f32), 0.0);
    assert_eq!(elu(2.0f32), 2.0);
    assert_eq!(elu(-1.0f32), (-1.0f32).exp() - 1.0);
    assert_eq!(huber_loss(&[0.5f32]).unwrap(), 0.125);
    assert_eq!(huber_loss(&[-3.0f32]).unwrap(), 2.5);
    assert_eq!(huber_loss(&[0.0f32, 0.0]).unwrap(), 0.0);
    let mut target = [0.0f32; 4];
    polyak_update(&mut target, &[1.0; 4], 1e-3).unwrap();
    assert_eq!(target, [1e-3f32; 4]);
    let mut same = [0.25f32, -3.0];
    polyak_update(&mut same, &[0.25, -3.0], 1e-3).unwrap();
    assert_eq!(same, [0.25, -3.0]);
}

#[test]
fn adam_counts_steps_and_ignores_zero_gradients() {
    let mut params = vec![0.5f32, -0.5];
    let mut adam = Adam::new(2, AdamConfig::default());
    adam.update(&mut params, &[0.0, 0.0]);
    assert_eq!(params, vec![0.5, -0.5]);
    assert_eq!(adam.step, 1);
}

fn dueling_gap(net: &QNetwork<f32>, state: &[f32]) -> f32 {
    let out = net.evaluate(state).unwrap();
    let n = out.q.len() as f32;
    out.q.iter().map(|q| q - out.value).sum::<f32>() / n
}

proptest! {
    #![proptest_config(common::cases(48))]

    #[test]
    fn dueling_mean_is_zero(seed in 0u64..10_000, actions in prop::sample::select(vec![2usize, 4])) {
        let arch = Arch::new(3, 12, 20, actions).unwrap();
        let mut rng = RngStream::new(seed);
        let mut net = QNetwork::<f32>::new(arch, &mut rng);
        // inflate the heads so the identity is tested away from zero
        for range in arch.blocks().into_iter().skip(8) {
            for p in &mut net.params_mut()[range] {
                *p *= 100.0;
            }
        }
        let state: Vec<f32> = (0..arch.input_len()).map(|_| rng.uniform() as f32).collect();
        prop_assert!(dueling_gap(&net, &state).abs() < 1e-5);
    }

    #[test]
    fn shifting_advantage_bias_keeps_argmax(seed in 0u64..10_000, shift in -50.0f32..50.0) {
        let arch = Arch::new(3, 8, 20, 4).unwrap();
        let mut rng = RngStream::new(seed);
        let mut net = QNetwork::<f32>::new(arch, &mut rng);
        let state: Vec<f32> = (0..arch.input_len()).map(|_| rng.uniform() as f32).collect();
        let before = net.evaluate(&state).unwrap();
        let ab = arch.blocks()[11].clone();
        for p in &mut net.params_mut()[ab] {
            *p += shift;
        }
        let after = net.evaluate(&state).unwrap();
        prop_assert_eq!(crossflow::neural::argmax(&before.q), crossflow::neural::argmax(&after.q));
        for (a, b) in before.q.iter().zip(&after.q) {
            prop_assert!((a - b).abs() <= 1e-3 * (1.0 + shift.abs()));
        }
    }

    #[test]
    fn polyak_moves_at_most_tau_of_the_gap(
        target in prop::collection::vec(-5.0f32..5.0, 16),
        online in prop::collection::vec(-5.0f32..5.0, 16),
        tau in 1e-4f32..1.0,
    ) {
        let mut t = target.clone();
        polyak_update(&mut t, &online, tau).unwrap();
        let gap = target.iter().zip(&online).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        let moved = target.iter().zip(&t).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        prop_assert!(moved <= tau * gap * (1.0 + 1e-5) + 1e-6);
    }
}

