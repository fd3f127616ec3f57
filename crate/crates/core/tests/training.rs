use rand::Rng;
use rand_distr::StandardNormal;
use uvm_core::rng::{self, Stream};
use uvm_core::simworld::{ProblemConfig, ShiftTag, World, WorldSpec};
use uvm_core::training::{
    build_value_dataset, ovm_loss_encoded, train_uvm_encoded, uvm_loss_encoded, EncodedExample, Optimizer,
};
use uvm_core::{derive_ovm, AnswerChecker, HeadConfig, PrefixEncoder, Representation, TrainConfig, UvmHead};

fn normals(n: usize, rng: &mut Stream) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_head(d: usize, m: usize, rng: &mut Stream) -> UvmHead {
    let cfg = HeadConfig {
        d,
        m,
        u: rng.random_range(0.2..2.0),
        p0: rng.random_range(0.2..2.0),
        prior_seed: rng.random(),
    };
    UvmHead::from_parts(cfg, normals(d, rng), normals(d * m, rng), normals(d * m, rng)).unwrap()
}

fn random_example(d: usize, t: usize, rng: &mut Stream) -> EncodedExample {
    EncodedExample {
        prefixes: (0..t).map(|_| Representation::new(normals(d, rng)).unwrap()).collect(),
        label: f64::from(rng.random_range(0..2u8)),
    }
}

#[test]
fn uvm_loss_expands_into_ovm_loss_plus_spread() {
    let mut rng = rng::stream(1);
    for _ in 0..200 {
        let (d, m) = (rng.random_range(1..8), rng.random_range(1..8));
        let head = random_head(d, m, &mut rng);
        let ex = random_example(d, rng.random_range(1..5), &mut rng);
        let spread: f64 = ex
            .prefixes
            .iter()
            .map(|x| {
                let l = head.project(x).unwrap().loading;
                l.iter().map(|v| v * v).sum::<f64>() / m as f64
            })
            .sum();
        let lhs = uvm_loss_encoded(&head, &ex).unwrap();
        let rhs = ovm_loss_encoded(&head, &ex).unwrap() + spread;
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0), "{lhs} vs {rhs}");
    }
}

#[test]
fn cancelled_uncertainty_gives_ovm_loss() {
    let mut rng = rng::stream(2);
    for _ in 0..50 {
        let (d, m) = (rng.random_range(1..6), rng.random_range(1..6));
        let (u, p0) = (2.0, 0.5);
        let w0 = normals(d * m, &mut rng);
        let w: Vec<f64> = w0.iter().map(|v| -(p0 / u) * v).collect();
        let cfg = HeadConfig { d, m, u, p0, prior_seed: 0 };
        let head = UvmHead::from_parts(cfg, normals(d, &mut rng), w, w0).unwrap();
        let ex = random_example(d, 2, &mut rng);
        let (a, b) = (uvm_loss_encoded(&head, &ex).unwrap(), ovm_loss_encoded(&head, &ex).unwrap());
        assert!((a - b).abs() <= 1e-12 * b.max(1.0));
    }
}

fn small_world(seed: u64) -> World {
    World::new(WorldSpec {
        problem: ProblemConfig {
            branching: 3,
            depth: 4,
            correct_fraction: 0.1,
            ..ProblemConfig::default()
        },
        shift_tag: ShiftTag::Id,
        train_problems: 20,
        test_problems: 5,
        seed,
        ..WorldSpec::default()
    })
    .unwrap()
}

#[test]
fn dataset_labels_come_from_the_answer_check() {
    let world = small_world(3);
    let data = build_value_dataset(&world, &world, &world.train_ids(), 10, 4, 5).unwrap();
    assert_eq!(data.len(), 200);
    for ex in &data {
        assert!(ex.path.is_complete() && !ex.incomplete);
        assert_eq!(ex.label, world.check(&ex.path).unwrap());
    }
    assert!(data.iter().any(|e| e.label == 1) && data.iter().any(|e| e.label == 0));

    // a step cap below the depth leaves every rollout unfinished
    let capped = build_value_dataset(&world, &world, &world.train_ids()[..2], 3, 2, 5).unwrap();
    assert!(capped.iter().all(|e| e.incomplete && e.label == 0 && e.path.len() == 2));
}

#[test]
fn dataset_file_round_trip() {
    let world = small_world(4);
    let data = build_value_dataset(&world, &world, &world.train_ids()[..3], 4, 4, 6).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.jsonl");
    uvm_core::training::write_dataset(&path, &data).unwrap();
    assert_eq!(uvm_core::training::read_dataset(&path).unwrap(), data);
}

/// Labels are `1[w·x > 0]` for a hidden `w`.
fn separable(d: usize, n: usize, seed: u64) -> Vec<EncodedExample> {
    let mut rng = rng::stream(seed);
    let w = normals(d, &mut rng);
    (0..n)
        .map(|_| {
            let x = normals(d, &mut rng);
            let y = f64::from(u8::from(x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() > 0.0));
            EncodedExample {
                prefixes: vec![Representation::new(x).unwrap()],
                label: y,
            }
        })
        .collect()
}

#[test]
fn loss_decreases_on_separable_data() {
    for seed in 0..3 {
        let data = separable(8, 2000, seed);
        let head = UvmHead::new(HeadConfig {
            d: 8,
            prior_seed: seed,
            ..HeadConfig::default()
        })
        .unwrap();
        for optimizer in [Optimizer::adamw(), Optimizer::Sgd] {
            let cfg = TrainConfig {
                epochs: 4,
                optimizer,
                seed,
                ..TrainConfig::default()
            };
            let means = train_uvm_encoded(&head, &data, &cfg).unwrap().epoch_means();
            assert!(means.last().unwrap() < &means[0], "seed {seed} {optimizer:?}: {means:?}");
        }
    }
}

#[test]
fn training_is_deterministic_and_leaves_the_prior_alone() {
    let data = separable(6, 500, 9);
    let head = UvmHead::new(HeadConfig {
        d: 6,
        prior_seed: 1,
        ..HeadConfig::default()
    })
    .unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        seed: 5,
        ..TrainConfig::default()
    };
    let a = train_uvm_encoded(&head, &data, &cfg).unwrap();
    let b = train_uvm_encoded(&head, &data, &cfg).unwrap();
    assert_eq!(a.head.to_json().unwrap(), b.head.to_json().unwrap());
    assert_eq!(a.loss_trace, b.loss_trace);
    assert_eq!(a.loss_trace.len(), 2 * 500usize.div_ceil(32));
    assert_eq!(a.head.prior_fingerprint(), head.prior_fingerprint());
    assert_eq!(a.head.prior_matrix(), head.prior_matrix());
    assert_ne!(a.head.mean_weights(), head.mean_weights());

    let other = train_uvm_encoded(&head, &data, &TrainConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(other.head.to_json().unwrap(), a.head.to_json().unwrap());
}

#[test]
fn zero_head_ovm_is_constant_zero() {
    let world = small_world(7);
    let head = UvmHead::new(HeadConfig {
        d: world.dim(),
        prior_seed: 3,
        ..HeadConfig::default()
    })
    .unwrap();
    let ovm = derive_ovm(&head, &world);
    let data = build_value_dataset(&world, &world, &world.train_ids()[..2], 3, 4, 1).unwrap();
    for ex in &data {
        assert_eq!(ovm.score(&world.encode(&ex.path).unwrap()).unwrap(), 0.0);
    }
}
