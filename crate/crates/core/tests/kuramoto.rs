use cail_core::kuramoto::{make_dataset, sample_dag, DatasetConfig, Mode, Scale, Split, SplitRatio};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn edge_density_matches_the_probability() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 1000;
    let total: usize = (0..draws).map(|_| sample_dag(10, 0.5, &mut rng).edge_count()).sum();
    let mean = total as f64 / draws as f64;
    assert!((mean - 22.5).abs() < 0.5, "mean edges {mean}");
}

#[test]
fn default_kura5_dataset_shape() {
    let ds = make_dataset(&DatasetConfig::new(Scale::Kura5, Mode::Static, 7)).unwrap();
    assert_eq!(ds.sequences.len(), 500);
    assert_eq!((ds.n_state, ds.n_action, ds.n_nodes()), (4, 1, 5));
    assert_eq!(ds.gt_graphs.len(), 1);
    assert!(ds.gt_graphs[0].is_acyclic());
    for s in &ds.sequences {
        assert_eq!(s.states.shape(), (100, 4));
        assert_eq!(s.actions.shape(), (100, 1));
        assert!(s.regimes.iter().all(|&r| r == 0));
        assert!(s.states.as_slice().iter().chain(s.actions.as_slice()).all(|v| (-1.0..=1.0).contains(v)));
    }
    let counts = [Split::Train, Split::Val, Split::Test].map(|sp| ds.split(sp).count());
    assert_eq!(counts, [100, 150, 250]);
    ds.validate().unwrap();
}

#[test]
fn kura10_vary_is_reproducible() {
    let mut config = DatasetConfig::new(Scale::Kura10, Mode::Vary, 3);
    config.sequences = 12;
    config.split = SplitRatio([3, 2, 5]);
    let a = make_dataset(&config).unwrap();
    assert_eq!(a, make_dataset(&config).unwrap());
    assert_eq!((a.n_state, a.n_action, a.gt_graphs.len()), (8, 2, 3));
    assert!(a.gt_graphs.iter().all(|g| g.is_acyclic()));
    assert!(a.sequences.iter().any(|s| s.regimes.windows(2).any(|w| w[0] != w[1])));
    config.seed = 4;
    assert_ne!(a, make_dataset(&config).unwrap());
}

#[test]
fn sequences_depend_only_on_their_index() {
    let mut config = DatasetConfig::new(Scale::Kura5, Mode::Vary, 9);
    config.sequences = 4;
    let short = make_dataset(&config).unwrap();
    config.sequences = 8;
    let long = make_dataset(&config).unwrap();
    assert_eq!(short.gt_graphs, long.gt_graphs);
    for (a, b) in short.sequences.iter().zip(&long.sequences) {
        assert_eq!((&a.states, &a.actions, &a.regimes), (&b.states, &b.actions, &b.regimes));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sampled_graphs_are_acyclic(seed in any::<u64>(), n in 1usize..15, p in 0.0f64..=1.0) {
        let g = sample_dag(n, p, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(g.is_acyclic());
        prop_assert!(g.edges().all(|(a, b)| a != b));
    }
}
