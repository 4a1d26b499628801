mod common;

use std::time::Instant;

use proptest::prelude::*;
use semistream::linkcut::{bcco, Objective};
use semistream::ResourceMeter;

#[test]
fn differential_against_tree_walk() {
    let start = Instant::now();
    for seed in 0..3 {
        assert_eq!(common::linkcut_differential(seed, 200, 10_000), 0, "seed {seed}");
    }
    assert!(start.elapsed().as_secs_f64() <= 30.0);
}

#[test]
fn small_forests_stress_rerooting() {
    for seed in 10..40 {
        assert_eq!(common::linkcut_differential(seed, 8, 2_000), 0, "seed {seed}");
    }
}

#[test]
fn bcco_on_random_bipartite_multiflow() {
    let mut rng = common::rng(4);
    for _ in 0..20 {
        let recs = common::random_records(&mut rng, 15, 15, 60);
        let x: Vec<_> = recs.iter().map(|r| (r.u, r.v, r.value)).collect();
        let w = |l: usize, r: usize| ((l * 7 + r * 3) % 5) as f64;
        let out = bcco(15, 15, &x, w, Objective::Maximize, &ResourceMeter::new()).unwrap();
        assert!(out.len() <= 30);
        assert!(common::is_forest(15, 15, &out));
        common::check_cycle_cancel(15, 15, recs, w).unwrap();
    }
}

#[test]
fn cancelling_keeps_workspace_linear_in_n() {
    let mut rng = common::rng(6);
    let peak = |len: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let recs = common::random_records(rng, 50, 50, len);
        let src = semistream::stream::emit_stream(recs).unwrap();
        let meter = ResourceMeter::new();
        semistream::linkcut::cycle_cancel_stream(&src, 50, 50, |_, _| 1.0, Objective::Maximize, &meter).unwrap();
        meter.peak_words()
    };
    let (small, large) = (peak(1_000, &mut rng), peak(10_000, &mut rng));
    assert!(large as f64 <= 1.1 * small as f64, "{small} vs {large}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn cancel_invariants(seed in any::<u64>(), nl in 1usize..10, nr in 1usize..10, len in 0usize..80) {
        let mut rng = common::rng(seed);
        let recs = common::random_records(&mut rng, nl, nr, len);
        let w = move |l: usize, r: usize| ((seed as usize).wrapping_add(l * 31 + r * 17) % 7) as f64 + 0.5;
        prop_assert_eq!(common::check_cycle_cancel(nl, nr, recs, w), Ok(()));
    }

    #[test]
    fn random_operation_sequences(seed in any::<u64>(), n in 1usize..30) {
        prop_assert_eq!(common::linkcut_differential(seed, n, 300), 0);
    }
}
