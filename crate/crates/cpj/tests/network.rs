use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salbench_core::synth::random_map;
use salbench_core::SaliencyMap;
use salbench_cpj::gradcheck::{gradient_check, jitter_biases, GradCheckOptions};
use salbench_cpj::*;

fn tiny() -> CpjConfig {
    CpjConfig::tiny()
}

fn input(net: &CpjNetwork, seed: u64) -> Arc<CpjInput> {
    let e = random_map(2 * seed, 32, 32);
    let g = random_map(2 * seed + 1, 32, 32);
    Arc::new(net.prepare(&e, &g).unwrap())
}

/// Smooth blob maps so activations are not dominated by noise.
fn blob(seed: u64, side: usize) -> SaliencyMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, cy) = (rng.random_range(0.2..0.8) * side as f64, rng.random_range(0.2..0.8) * side as f64);
    let s = rng.random_range(0.1..0.3) * side as f64;
    SaliencyMap::from_fn(side, side, |x, y| {
        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        (-d2 / (2.0 * s * s)).exp()
    })
    .unwrap()
}

fn batch(net: &CpjNetwork, n: usize) -> Vec<PreparedTriplet> {
    (0..n as u64)
        .map(|i| {
            let g = blob(100 + i, 32);
            let t = if i == 0 {
                TrainingTriplet::anchor(g, random_map(i, 32, 32))
            } else {
                TrainingTriplet::new(blob(200 + i, 32), blob(300 + i, 32), g, 0.6 - 0.3 * i as f64).unwrap()
            };
            net.prepare_triplet(&t).unwrap()
        })
        .collect()
}

#[test]
fn init_is_seeded_and_shaped() {
    let a = CpjNetwork::init(&tiny()).unwrap();
    assert_eq!(a, CpjNetwork::init(&tiny()).unwrap());
    assert_ne!(a, CpjNetwork::init(&CpjConfig { seed: 1, ..tiny() }).unwrap());
    assert_eq!(CpjNetwork::init(&CpjConfig::desk()).unwrap().first_conv_channels(), 8);
    let bad = CpjConfig { input_res: 48, ..tiny() };
    assert!(matches!(CpjNetwork::init(&bad), Err(CpjError::InvalidConfig(_))));
    // 13 convolutions and 3 dense layers, each with weight and bias.
    assert_eq!(a.blocks().len(), 32);
    assert_eq!(a.blocks()[0].len, 4 * 2 * 9);
    for b in a.blocks().iter().filter(|b| !b.is_weight) {
        assert!(a.params()[b.range()].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn wrong_input_size_is_rejected() {
    let net = CpjNetwork::init(&tiny()).unwrap();
    let x = CpjInput::prepare(&blob(1, 64), &blob(2, 64), 64).unwrap();
    assert!(matches!(net.score_input(&x), Err(CpjError::DimensionMismatch { .. })));
    let err = CpjInput::from_prepared(&blob(1, 32), &blob(2, 16)).unwrap_err();
    assert!(matches!(err, CpjError::DimensionMismatch { .. }));
    // Maps of other sizes are resampled by `score`.
    let s = net.score(&blob(1, 50), &blob(2, 40)).unwrap();
    assert!(s > 0.0 && s < 1.0);
}

#[test]
fn streams_are_exactly_antisymmetric() {
    for init in [InitScheme::GlorotUniform, InitScheme::HeUniform] {
        let net = CpjNetwork::init(&CpjConfig { init, seed: 3, ..tiny() }).unwrap();
        for i in 0..100u64 {
            let (a, b, g) = (random_map(3 * i, 32, 32), random_map(3 * i + 1, 32, 32), blob(i, 32));
            let d = net.forward_pair(&a, &b, &g).unwrap();
            let e = net.forward_pair(&b, &a, &g).unwrap();
            assert!((d + e).abs() < 1e-12);
            assert!(d.abs() < 1.0);
            assert_eq!(net.forward_pair(&a, &a, &g).unwrap(), 0.0);
            let s = net.score(&a, &g).unwrap();
            assert!(s > 0.0 && s < 1.0);
            assert_eq!(s, net.score(&a, &g).unwrap());
        }
    }
}

#[test]
fn loss_follows_the_definitions() {
    let net = CpjNetwork::init(&tiny()).unwrap();
    let g = blob(5, 32);
    let a = blob(6, 32);
    // d = 0 against r = 0.5.
    let t = TrainingTriplet::new(a.clone(), a.clone(), g.clone(), 0.5).unwrap();
    assert_eq!(net.loss(&t).unwrap(), 0.125);
    let anchor = TrainingTriplet::anchor(g.clone(), random_map(1, 32, 32));
    let (sa, sb) = (net.score(&g, &g).unwrap(), net.score(&anchor.b, &g).unwrap());
    let want = 0.5 * (sa - sb - 1.0).powi(2) + 0.5 * (1.0 - sa).powi(2) + 0.5 * sb * sb;
    assert!((net.loss(&anchor).unwrap() - want).abs() < 1e-15);
    assert!(TrainingTriplet::new(a.clone(), a, g, 1.5).is_err());
}

#[test]
fn zero_loss_gives_zero_gradient() {
    let net = CpjNetwork::init(&CpjConfig { init: InitScheme::HeUniform, ..tiny() }).unwrap();
    let x = input(&net, 1);
    let t = PreparedTriplet {
        xa: x.clone(),
        xb: x,
        r: 0.0,
        is_anchor: false,
    };
    let (loss, grad) = net.loss_and_gradients(&[t]).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|&g| g == 0.0));
}

#[test]
fn swapping_every_triplet_leaves_gradients_unchanged() {
    let net = CpjNetwork::init(&CpjConfig { init: InitScheme::HeUniform, ..tiny() }).unwrap();
    let b: Vec<_> = batch(&net, 4).into_iter().filter(|t| !t.is_anchor).collect();
    let sw: Vec<_> = b.iter().map(PreparedTriplet::swapped).collect();
    let (l1, g1) = net.loss_and_gradients(&b).unwrap();
    let (l2, g2) = net.loss_and_gradients(&sw).unwrap();
    assert_eq!(l1, l2);
    let scale = g1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(scale > 0.0);
    for (x, y) in g1.iter().zip(&g2) {
        assert!((x - y).abs() <= 1e-12 * scale);
    }
}

#[test]
fn backprop_matches_central_differences() {
    for init in [InitScheme::GlorotUniform, InitScheme::HeUniform] {
        let mut net = CpjNetwork::init(&CpjConfig { init, ..tiny() }).unwrap();
        // Zero biases sit on rectifier kinks.
        jitter_biases(&mut net, 0.05, 11);
        let b = batch(&net, 3);
        let report = gradient_check(&net, &b, &GradCheckOptions::default()).unwrap();
        assert!(report.max_rel_error < 1e-4, "{init:?}: {report:?}");
        assert!(report.checked >= report.skipped_kinks, "{report:?}");
        // A bias moves every unit of its channel, so in the wide early
        // layers some unit almost always crosses a kink.
        for block in report.blocks.iter().filter(|b| b.name.ends_with("weight")) {
            assert!(block.checked > 0, "nothing checked in {}", block.name);
        }
    }
}

#[test]
fn training_is_deterministic_and_logs_history() {
    let config = CpjConfig {
        init: InitScheme::HeUniform,
        batch_size: 4,
        max_iterations: 250,
        learning_rate: 0.003,
        ..tiny()
    };
    let net0 = CpjNetwork::init(&config).unwrap();
    let b = batch(&net0, 5);
    let mut n1 = net0.clone();
    let r1 = train(&mut n1, &b).unwrap();
    let mut n2 = net0.clone();
    let r2 = train(&mut n2, &b).unwrap();
    assert_eq!(n1, n2);
    assert_eq!(r1, r2);
    assert_eq!(r1.history.len(), 3);
    assert_eq!(r1.iterations, 250);
    assert_ne!(n1, net0);
    // Parameters stay f32-representable, so a checkpoint is lossless.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.cpj");
    n1.save(&path).unwrap();
    let back = CpjNetwork::load(&path).unwrap();
    assert_eq!(back, n1);
    assert_eq!(back.score_input(&b[1].xa).unwrap(), n1.score_input(&b[1].xa).unwrap());
}

#[test]
fn plateau_drops_learning_rate_at_most_twice() {
    let config = CpjConfig {
        learning_rate: 0.0,
        weight_decay: 0.0,
        batch_size: 2,
        max_iterations: 30,
        plateau_window: 5,
        ..tiny()
    };
    let mut net = CpjNetwork::init(&config).unwrap();
    // One regular triplet and its swap have equal loss, so every window
    // mean is identical and none improves.
    let b = batch(&net, 2)[1..].to_vec();
    let r = train(&mut net, &b).unwrap();
    assert_eq!(r.lr_drops, vec![10, 15]);
    assert_eq!(r.history.len(), 1);
}

#[test]
fn early_stop_shortens_history() {
    let config = CpjConfig {
        batch_size: 2,
        max_iterations: 1000,
        ..tiny()
    };
    let mut net = CpjNetwork::init(&config).unwrap();
    let b = batch(&net, 3);
    let r = train_with(&mut net, &b, |_, p| p.iteration < 200).unwrap();
    assert_eq!(r.iterations, 200);
    assert_eq!(r.history.len(), 2);
}

#[test]
fn huge_steps_diverge() {
    let config = CpjConfig {
        init: InitScheme::HeUniform,
        learning_rate: 1e300,
        batch_size: 2,
        max_iterations: 50,
        ..tiny()
    };
    let mut net = CpjNetwork::init(&config).unwrap();
    let b = batch(&net, 3);
    assert!(matches!(train(&mut net, &b), Err(CpjError::Diverged { .. })));
}

#[test]
fn empty_batches_are_rejected() {
    let mut net = CpjNetwork::init(&tiny()).unwrap();
    assert!(matches!(net.loss_and_gradients(&[]), Err(CpjError::EmptyBatch)));
    assert!(matches!(train(&mut net, &[]), Err(CpjError::EmptyBatch)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scores_stay_inside_the_unit_interval(seed in 0u64..1000, scale in 0.0f64..50.0) {
        let net = CpjNetwork::init(&CpjConfig { init: InitScheme::HeUniform, seed, ..tiny() }).unwrap();
        let a = random_map(seed, 32, 32).map_values(|v| v * scale).unwrap();
        let g = blob(seed, 32);
        let s = net.score(&a, &g).unwrap();
        prop_assert!(s > 0.0 && s < 1.0);
        let d = net.forward_pair(&a, &g, &g).unwrap();
        prop_assert!(d.abs() < 1.0);
        prop_assert_eq!(d, -net.forward_pair(&g, &a, &g).unwrap());
    }
}
