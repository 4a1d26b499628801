mod common;

use proptest::prelude::*;
use rand::Rng;
use semistream::matching::{BipartiteGraph, Demand};
use semistream::oracles::{exact_lp, hungarian, transport_value, LinearProgram};
use semistream::stream::EdgeRecord;
use semistream::weighted::{
    matching_weight, mwm_solve, ot_solve, remove_overflow_weighted, solve_weighted, WeightedInstance,
};
use semistream::{Config, ResourceMeter, StreamSource};

fn weighted_graph(nl: usize, nr: usize, edges: &[(usize, usize, f64)]) -> BipartiteGraph {
    let recs = edges.iter().map(|&(l, r, w)| EdgeRecord::new(l, r, w)).collect();
    BipartiteGraph::new(nl, nr, StreamSource::from_records(recs)).unwrap()
}

/// max w^T x subject to B^T x <= d, sum x = s, x >= 0.
fn lp_optimum(g: &BipartiteGraph, d: &Demand, s: f64) -> f64 {
    let recs = g.edges.records();
    let m = recs.len();
    let mut lp = LinearProgram { c: recs.iter().map(|e| -e.w).collect(), ..Default::default() };
    lp.eq.push((vec![1.0; m], s));
    for l in 0..g.n_left {
        lp.le.push((recs.iter().map(|e| f64::from(u8::from(e.u == l))).collect(), d.left[l]));
    }
    for r in 0..g.n_right {
        lp.le.push((recs.iter().map(|e| f64::from(u8::from(e.v == r))).collect(), d.right[r]));
    }
    -exact_lp(&lp).value().unwrap()
}

#[test]
fn single_edge_flow() {
    let g = weighted_graph(1, 1, &[(0, 0, 5.0)]);
    let inst = WeightedInstance::new(g, Demand::ones(1, 1), 1.0).unwrap();
    let f = solve_weighted(&inst, 0.25, &Config::default(), &ResourceMeter::new()).unwrap();
    assert!(f.weight() >= 5.0 - 0.25);
}

#[test]
fn two_by_two_matches_lp() {
    let g = weighted_graph(2, 2, &[(0, 0, 1.0), (0, 1, 0.2), (1, 0, 0.6), (1, 1, 0.9)]);
    let d = Demand { left: vec![0.5; 2], right: vec![0.5; 2] };
    let want = lp_optimum(&g, &d, 1.0);
    let inst = WeightedInstance::new(g, d, 1.0).unwrap();
    let eps = 0.05;
    let f = solve_weighted(&inst, eps, &Config::default(), &ResourceMeter::new()).unwrap();
    assert!(f.weight() >= want - eps, "{} vs {want}", f.weight());
}

#[test]
fn zero_weights_give_zero_value() {
    let g = weighted_graph(2, 2, &[(0, 0, 0.0), (1, 1, 0.0)]);
    let inst = WeightedInstance::new(g, Demand::ones(2, 2), 1.0).unwrap();
    let f = solve_weighted(&inst, 0.1, &Config::default(), &ResourceMeter::new()).unwrap();
    assert_eq!(f.weight(), 0.0);
}

#[test]
fn weighted_flows_are_feasible_and_sparse() {
    let mut rng = common::rng(1);
    for _ in 0..8 {
        let (nl, nr) = (rng.gen_range(2..8), rng.gen_range(2..8));
        let g = common::random_weighted_bipartite(&mut rng, nl, nr, 3 * (nl + nr));
        let d = Demand {
            left: (0..nl).map(|_| rng.gen_range(0.1..1.0)).collect(),
            right: (0..nr).map(|_| rng.gen_range(0.1..1.0)).collect(),
        };
        let s = 0.5 * d.left.iter().sum::<f64>().min(d.right.iter().sum());
        let want = lp_optimum(&g, &d, s);
        let eps = 0.1;
        let inst = WeightedInstance::new(g, d.clone(), s).unwrap();
        let f = solve_weighted(&inst, eps, &Config::default(), &ResourceMeter::new()).unwrap();
        let (ml, mr) = f.flow().marginals(nl, nr);
        assert!(ml.iter().zip(&d.left).chain(mr.iter().zip(&d.right)).all(|(x, y)| *x <= y + 1e-9));
        assert!(f.edges.len() <= nl + nr);
        assert!(f.step.unwrap().within_bound(1e-9));
        assert!(f.weight() >= want - eps, "{} vs {want}", f.weight());
    }
}

#[test]
fn transport_between_point_masses() {
    let costs = vec![vec![0.0, 3.0], vec![1.0, 2.0]];
    let plan = ot_solve(&costs, &[1.0, 0.0], &[0.0, 1.0], 0.05, &Config::default(), &ResourceMeter::new()).unwrap();
    assert!((plan.entries.get(0, 1) - 1.0).abs() <= 1e-9);
    assert!((plan.cost - 3.0).abs() <= 1e-9);
}

#[test]
fn transport_with_negative_costs() {
    let costs = vec![vec![-1.0, 1.0], vec![1.0, -1.0]];
    let u = [0.5, 0.5];
    let plan = ot_solve(&costs, &u, &u, 0.05, &Config::default(), &ResourceMeter::new()).unwrap();
    assert!(plan.marginal_error(&u, &u) <= 1e-9);
    assert!(plan.cost <= -1.0 + 0.05 * 2.0 + 1e-9, "{}", plan.cost);
}

#[test]
fn random_transport_is_near_optimal() {
    let mut rng = common::rng(2);
    for _ in 0..3 {
        let n = 10;
        let costs: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let prob = |rng: &mut rand_chacha::ChaCha8Rng| {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let (ell, r) = (prob(&mut rng), prob(&mut rng));
        let plan = ot_solve(&costs, &ell, &r, 0.05, &Config::default(), &ResourceMeter::new()).unwrap();
        let c_inf = costs.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
        assert!(plan.marginal_error(&ell, &r) <= 1e-9);
        assert!(plan.cost <= transport_value(&costs, &ell, &r) + 0.05 * c_inf);
        assert!(plan.entries.len() <= 2 * n);
    }
}

#[test]
fn mwm_prefers_two_edges_over_one() {
    let g = weighted_graph(2, 2, &[(0, 0, 3.0), (1, 1, 4.0), (0, 1, 6.0)]);
    let m = mwm_solve(&g, 0.1, &Config::default(), &ResourceMeter::new()).unwrap();
    m.validate(&g).unwrap();
    assert_eq!(matching_weight(&g, &m), 7.0);
}

#[test]
fn mwm_on_random_graphs() {
    let mut rng = common::rng(3);
    for _ in 0..5 {
        let n = rng.gen_range(3..15);
        let g = common::random_weighted_bipartite(&mut rng, n, n, 3 * n);
        let edges: Vec<_> = g.edges.records().iter().map(|e| (e.u, e.v, e.w)).collect();
        let best = hungarian(n, n, &edges).value;
        let eps = 0.05;
        let m = mwm_solve(&g, eps, &Config::default(), &ResourceMeter::new()).unwrap();
        m.validate(&g).unwrap();
        assert!(matching_weight(&g, &m) >= best - eps);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn overflow_removal_loses_at_most_width_times_overflow(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (_, _, x, d) = common::random_flow_case(&mut rng);
        let w = move |l: usize, r: usize| ((seed as usize).wrapping_add(3 * l + 5 * r) % 11) as f64;
        let (_, step) = remove_overflow_weighted(&x, &d, w);
        prop_assert!(step.within_bound(1e-9));
    }
}
