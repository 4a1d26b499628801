mod common;

use proptest::prelude::*;
use rand::Rng;
use semistream::matching::{
    forest_mcm, greedy_matching, mcm_approx, mcm_approx_with, mcm_exact, vertex_reduction, BipartiteGraph,
    Rounding,
};
use semistream::oracles::hopcroft_karp;
use semistream::{Config, ResourceMeter, SparseFlow};

fn opt(g: &BipartiteGraph) -> usize {
    hopcroft_karp(g.n_left, g.n_right, &g.pairs()).value as usize
}

#[test]
fn greedy_is_at_least_half_of_optimum() {
    let mut rng = common::rng(1);
    for _ in 0..20 {
        let m = rng.gen_range(20..400);
        let g = common::random_bipartite(&mut rng, 50, 50, m);
        let m = greedy_matching(&g, &ResourceMeter::new());
        m.validate(&g).unwrap();
        assert!(2 * m.size() >= opt(&g));
    }
}

#[test]
fn reduced_vertex_set_keeps_most_of_the_matching() {
    let mut rng = common::rng(2);
    for _ in 0..10 {
        let g = common::random_bipartite(&mut rng, 120, 120, 150);
        let meter = ResourceMeter::new();
        let seed = greedy_matching(&g, &meter);
        let eps = 0.1;
        let keep = vertex_reduction(&g, &seed, eps, &meter);
        let induced: Vec<_> = g.pairs().into_iter().filter(|&(l, r)| keep.left[l] && keep.right[r]).collect();
        let sub = hopcroft_karp(g.n_left, g.n_right, &induced).value;
        assert!(sub >= (1.0 - eps) * opt(&g) as f64);
    }
}

#[test]
fn forest_matching_matches_hopcroft_karp() {
    let mut rng = common::rng(3);
    for _ in 0..50 {
        let (nl, nr) = (rng.gen_range(1..15), rng.gen_range(1..15));
        let recs = common::random_records(&mut rng, nl, nr, 40);
        let src = semistream::stream::emit_stream(recs).unwrap();
        let forest = semistream::linkcut::cycle_cancel_stream(
            &src,
            nl,
            nr,
            |_, _| 1.0,
            semistream::linkcut::Objective::Maximize,
            &ResourceMeter::new(),
        )
        .unwrap();
        let pairs: Vec<_> = forest.iter().map(|(l, r, _)| (l, r)).collect();
        let m = forest_mcm(&forest, nl, nr).unwrap();
        assert_eq!(m.size(), hopcroft_karp(nl, nr, &pairs).value as usize);
    }
}

#[test]
fn forest_matching_rejects_cycles() {
    let f: SparseFlow = [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)].into_iter().collect();
    assert!(forest_mcm(&f, 2, 2).is_err());
}

#[test]
fn perfect_matching_is_recovered() {
    let mut pairs: Vec<_> = (0..8).map(|i| (i, i)).collect();
    pairs.extend((0..7).map(|i| (i, i + 1)));
    let g = BipartiteGraph::from_pairs(8, 8, &pairs).unwrap();
    let m = mcm_approx(&g, 0.1, &Config::default(), &ResourceMeter::new()).unwrap();
    m.validate(&g).unwrap();
    assert_eq!(m.size(), 8);
}

#[test]
fn approximation_holds_on_random_graphs() {
    let mut rng = common::rng(4);
    for &eps in &[0.1, 0.2] {
        for _ in 0..5 {
            let n = rng.gen_range(10..60);
            let m = rng.gen_range(n..4 * n);
            let g = common::random_bipartite(&mut rng, n, n, m);
            let m = mcm_approx(&g, eps, &Config::default(), &ResourceMeter::new()).unwrap();
            m.validate(&g).unwrap();
            assert!(m.size() as f64 >= ((1.0 - eps) * opt(&g) as f64).ceil());
        }
    }
}

#[test]
fn cancel_and_sample_roundings_are_valid() {
    let mut rng = common::rng(5);
    let g = common::random_bipartite(&mut rng, 12, 12, 40);
    for rounding in [Rounding::Cancel, Rounding::Sample { seed: 3 }] {
        let m = mcm_approx_with(&g, 0.2, &Config::default(), rounding, &ResourceMeter::new()).unwrap();
        m.validate(&g).unwrap();
        if matches!(rounding, Rounding::Cancel) {
            assert!(m.size() as f64 >= (0.8 * opt(&g) as f64).ceil());
        }
    }
}

#[test]
fn workspace_does_not_grow_with_m() {
    let mut rng = common::rng(6);
    let peak = |m: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let g = common::random_bipartite(rng, 50, 50, m);
        let meter = ResourceMeter::new();
        mcm_approx(&g, 0.2, &Config::default(), &meter).unwrap();
        meter.peak_words() as f64
    };
    let (small, large) = (peak(1000, &mut rng), peak(2500, &mut rng));
    assert!(large / small <= 1.1 && small / large <= 1.1, "{small} vs {large}");
}

#[test]
fn exact_matching_on_random_graphs() {
    let mut rng = common::rng(7);
    for _ in 0..10 {
        let n = rng.gen_range(2..40);
        let m = rng.gen_range(1..3 * n);
        let g = common::random_bipartite(&mut rng, n, n + 3, m);
        let m = mcm_exact(&g, &Config::default(), &ResourceMeter::new()).unwrap();
        m.validate(&g).unwrap();
        assert_eq!(m.size(), opt(&g));
    }
}

#[test]
fn grid_has_a_perfect_matching() {
    // 4x4 grid, black squares on the left.
    let id = |r: usize, c: usize| (r * 4 + c) / 2;
    let mut pairs = Vec::new();
    for r in 0..4 {
        for c in 0..4 {
            if (r + c) % 2 == 0 {
                for (dr, dc) in [(0i32, 1i32), (1, 0), (0, -1), (-1, 0)] {
                    let (rr, cc) = (r as i32 + dr, c as i32 + dc);
                    if (0..4).contains(&rr) && (0..4).contains(&cc) {
                        pairs.push((id(r, c), id(rr as usize, cc as usize)));
                    }
                }
            }
        }
    }
    let g = BipartiteGraph::from_pairs(8, 8, &pairs).unwrap();
    assert_eq!(mcm_exact(&g, &Config::default(), &ResourceMeter::new()).unwrap().size(), 8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn remove_overflow_postconditions(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (nl, nr, x, d) = common::random_flow_case(&mut rng);
        prop_assert_eq!(common::check_remove_overflow(nl, nr, &x, &d), Ok(()));
    }
}
