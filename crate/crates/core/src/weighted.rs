//! Weighted bipartite matching under an l1 budget, and the two problems built
//! on it: optimal transport with exact marginals and maximum weight matching.
//!
//! The game has one row per edge, `A_e = (S W / 2) (1_l + 1_r)`, cost
//! `S (W - w_e)` and `b = W d / 2`, plus an empty zero-cost row that absorbs
//! unused mass. For a flow `f = S x` restricted to the edges the objective is
//! `W |d|_1 / 2 - w^T f + W * overflow(f)`, so minimizing it maximizes the
//! weight of a nearly feasible flow.

use std::collections::HashMap;

use crate::boxsimplex::{for_each_averaged_coordinate, solve, BoxSimplexInstance, RowSource};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::flow::SparseFlow;
use crate::linkcut::{CycleCanceller, Objective};
use crate::matching::{remove_overflow, BipartiteGraph, Demand, Matching};
use crate::stream::{EdgeRecord, ResourceMeter, StreamSource};

/// Weighted graph, per-vertex demands and the l1 norm `S` of an optimal
/// feasible flow.
#[derive(Clone, Debug)]
pub struct WeightedInstance {
    pub g: BipartiteGraph,
    pub d: Demand,
    pub s: f64,
}

impl WeightedInstance {
    pub fn new(g: BipartiteGraph, d: Demand, s: f64) -> Result<Self> {
        if d.left.len() != g.n_left || d.right.len() != g.n_right {
            return Err(Error::arg("demand length does not match the graph"));
        }
        if d.left.iter().chain(&d.right).any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::arg("demands must be finite and nonnegative"));
        }
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::arg(format!("S must be positive, got {s}")));
        }
        if let Some(e) = g.edges.records().iter().find(|e| !(e.w.is_finite() && e.w >= 0.0)) {
            return Err(Error::arg(format!("edge ({}, {}) has weight {}", e.u, e.v, e.w)));
        }
        Ok(WeightedInstance { g, d, s })
    }

    /// `|w|_inf`.
    pub fn w_inf(&self) -> f64 {
        self.g.edges.records().iter().map(|e| e.w).fold(0.0, f64::max)
    }
}

struct WeightedRows<'a> {
    inst: &'a WeightedInstance,
    w_inf: f64,
}

impl RowSource for WeightedRows<'_> {
    fn n_cols(&self) -> usize {
        self.inst.g.n()
    }

    fn n_rows(&self) -> usize {
        self.inst.g.m() + 1
    }

    fn scan(&self, meter: &ResourceMeter, visit: &mut dyn FnMut(usize, &[(usize, f64)], f64)) {
        let (s, w) = (self.inst.s, self.w_inf);
        let a = 0.5 * s * w;
        let nl = self.inst.g.n_left;
        self.inst.g.edges.for_each_pass(meter, |i, e| {
            visit(i, &[(e.u, a), (nl + e.v, a)], s * (w - e.w));
        });
        visit(self.inst.g.m(), &[], 0.0);
        meter.add_work(2 * self.inst.g.m() as u64);
    }
}

/// Bookkeeping of one overflow-removal step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverflowStep {
    pub overflow: f64,
    pub w_inf: f64,
    pub weight_before: f64,
    pub weight_after: f64,
}

impl OverflowStep {
    /// The step lost at most `|w|_inf` times the overflow it removed.
    pub fn within_bound(&self, tol: f64) -> bool {
        self.weight_after >= self.weight_before - self.w_inf * self.overflow - tol
    }
}

/// Overflow removal with the weight bookkeeping needed to check
/// `<w, x~> >= <w, x> - |w|_inf * overflow(x)`.
pub fn remove_overflow_weighted(
    x: &SparseFlow,
    d: &Demand,
    w: impl Fn(usize, usize) -> f64,
) -> (SparseFlow, OverflowStep) {
    let overflow = crate::matching::overflow(x, d);
    let out = remove_overflow(x, d);
    let w_inf = x.iter().map(|(l, r, _)| w(l, r).abs()).fold(0.0, f64::max);
    let step = OverflowStep { overflow, w_inf, weight_before: x.weight(&w), weight_after: out.weight(&w) };
    (out, step)
}

/// Sparse flow returned by [`solve_weighted`], with the weight of every edge.
#[derive(Clone, Debug, Default)]
pub struct WeightedFlow {
    /// `(l, r, value, weight)`, sorted by edge.
    pub edges: Vec<(usize, usize, f64, f64)>,
    /// The overflow-removal step applied to the cancelled flow.
    pub step: Option<OverflowStep>,
}

impl WeightedFlow {
    pub fn flow(&self) -> SparseFlow {
        self.edges.iter().map(|&(l, r, v, _)| (l, r, v)).collect()
    }

    pub fn weight(&self) -> f64 {
        self.edges.iter().map(|&(_, _, v, w)| v * w).sum()
    }
}

/// Flow with support at most `n`, `B^T x <= d`, and weight within `eps` of
/// the best flow of l1 norm `S` (up to solver accuracy).
pub fn solve_weighted(inst: &WeightedInstance, eps: f64, cfg: &Config, meter: &ResourceMeter) -> Result<WeightedFlow> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::arg(format!("eps must be positive, got {eps}")));
    }
    let w_inf = inst.w_inf();
    let (nl, nr) = (inst.g.n_left, inst.g.n_right);
    if w_inf == 0.0 || inst.g.m() == 0 {
        return Ok(WeightedFlow::default());
    }
    let rows = WeightedRows { inst, w_inf };
    let b: Vec<f64> = inst.d.left.iter().chain(&inst.d.right).map(|&x| 0.5 * w_inf * x).collect();
    let game = BoxSimplexInstance::new(rows, b)?;
    // Accuracies above the width S W carry no information.
    let mut report = solve(&game, eps.min(inst.s * w_inf), cfg, meter)?;

    let mut cc = CycleCanceller::new(nl, nr, Objective::Maximize, meter);
    let mut err = None;
    let m = inst.g.m();
    for_each_averaged_coordinate(&mut report, &game, meter, |i, _, x| {
        if i < m && x > 0.0 && err.is_none() {
            let e = inst.g.edges.get(i);
            if let Err(er) = cc.push(e.u, e.v, inst.s * x, e.w) {
                err = Some(er);
            }
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let cancelled = cc.weighted_edges();
    let weights: HashMap<(usize, usize), f64> = cancelled.iter().map(|&(l, r, _, w)| ((l, r), w)).collect();
    let flow: SparseFlow = cancelled.iter().map(|&(l, r, v, _)| (l, r, v)).collect();
    let (trimmed, step) = remove_overflow_weighted(&flow, &inst.d, |l, r| weights[&(l, r)]);
    let edges = trimmed.iter().map(|(l, r, v)| (l, r, v, weights[&(l, r)])).collect();
    Ok(WeightedFlow { edges, step: Some(step) })
}

/// A transport plan and its marginals.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    pub entries: SparseFlow,
    pub marginals_left: Vec<f64>,
    pub marginals_right: Vec<f64>,
    /// `sum c_ij plan_ij` under the original costs.
    pub cost: f64,
    /// Amount added to every cost to make them nonnegative.
    pub shift: f64,
}

impl TransportPlan {
    fn new(entries: SparseFlow, costs: &[Vec<f64>], n_left: usize, n_right: usize, shift: f64) -> Self {
        let (marginals_left, marginals_right) = entries.marginals(n_left, n_right);
        let cost = entries.weight(|l, r| costs[l][r]);
        TransportPlan { entries, marginals_left, marginals_right, cost, shift }
    }

    /// Largest absolute marginal error against `(ell, r)`.
    pub fn marginal_error(&self, ell: &[f64], r: &[f64]) -> f64 {
        let left = self.marginals_left.iter().zip(ell).map(|(a, b)| (a - b).abs());
        let right = self.marginals_right.iter().zip(r).map(|(a, b)| (a - b).abs());
        left.chain(right).fold(0.0, f64::max)
    }
}

fn check_distribution(name: &str, p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::arg(format!("{name} is empty")));
    }
    if p.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(Error::arg(format!("{name} must be finite and nonnegative")));
    }
    Ok(p.iter().sum())
}

/// North-west corner plan; exact marginals, support at most `n - 1`.
fn north_west(ell: &[f64], r: &[f64]) -> SparseFlow {
    let (mut a, mut b) = (ell.to_vec(), r.to_vec());
    let (mut i, mut j) = (0, 0);
    let mut out = SparseFlow::new();
    while i < a.len() && j < b.len() {
        let q = a[i].min(b[j]);
        if q > 0.0 {
            out.add(i, j, q);
        }
        a[i] -= q;
        b[j] -= q;
        if a[i] <= 0.0 && i + 1 < a.len() {
            i += 1;
        } else if b[j] <= 0.0 {
            j += 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Transport plan between probability vectors `ell` and `r` with cost at most
/// `OPT + eps * |c|_inf` and marginals exact up to rounding error.
pub fn ot_solve(
    costs: &[Vec<f64>],
    ell: &[f64],
    r: &[f64],
    eps: f64,
    cfg: &Config,
    meter: &ResourceMeter,
) -> Result<TransportPlan> {
    let (nl, nr) = (ell.len(), r.len());
    if costs.len() != nl || costs.iter().any(|row| row.len() != nr) {
        return Err(Error::arg(format!("cost matrix must be {nl}x{nr}")));
    }
    if costs.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::arg("costs must be finite"));
    }
    let (sl, sr) = (check_distribution("left marginal", ell)?, check_distribution("right marginal", r)?);
    if (sl - sr).abs() > 1e-12 {
        return Err(Error::arg(format!("marginals have different totals {sl} and {sr}")));
    }
    if (sl - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("marginals must sum to 1, got {sl}")));
    }
    let c_min = costs.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let shift = (-c_min).max(0.0);
    let c_max = costs.iter().flatten().map(|c| c + shift).fold(0.0, f64::max);
    if c_max == 0.0 {
        return Ok(TransportPlan::new(north_west(ell, r), costs, nl, nr, shift));
    }
    let weight = |i: usize, j: usize| c_max - (costs[i][j] + shift);
    let recs = (0..nl).flat_map(|i| (0..nr).map(move |j| (i, j))).map(|(i, j)| EdgeRecord::new(i, j, weight(i, j)));
    let g = BipartiteGraph::new(nl, nr, StreamSource::from_records(recs.collect()))?;
    let demand = Demand { left: ell.to_vec(), right: r.to_vec() };
    let inst = WeightedInstance::new(g, demand, 1.0)?;
    let approx = solve_weighted(&inst, eps * c_max, cfg, meter)?;

    // Spread the missing mass as the outer product of the two residuals.
    let (rows, cols) = approx.flow().marginals(nl, nr);
    let e_r: Vec<f64> = ell.iter().zip(&rows).map(|(a, b)| (a - b).max(0.0)).collect();
    let e_c: Vec<f64> = r.iter().zip(&cols).map(|(a, b)| (a - b).max(0.0)).collect();
    let delta: f64 = e_c.iter().sum();
    let mut cc = CycleCanceller::new(nl, nr, Objective::Maximize, meter);
    for &(l, rr, v, _) in &approx.edges {
        cc.push(l, rr, v, weight(l, rr))?;
    }
    if delta > 0.0 {
        let mut err = None;
        inst.g.edges.for_each_pass(meter, |_, e| {
            let v = e_r[e.u] * e_c[e.v] / delta;
            if v > 0.0 && err.is_none() {
                if let Err(er) = cc.push(e.u, e.v, v, e.w) {
                    err = Some(er);
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(TransportPlan::new(cc.finish(), costs, nl, nr, shift))
}

/// Weight of a matching, taking the heaviest of any parallel edges.
pub fn matching_weight(g: &BipartiteGraph, m: &Matching) -> f64 {
    let mut best: HashMap<(usize, usize), f64> = HashMap::new();
    for e in g.edges.records() {
        let w = best.entry((e.u, e.v)).or_insert(f64::NEG_INFINITY);
        *w = w.max(e.w);
    }
    m.pairs.iter().map(|p| best.get(p).copied().unwrap_or(0.0)).sum()
}

/// Maximum weight matching of a forest given as `(l, r, weight)` edges.
pub fn forest_mwm(edges: &[(usize, usize, f64)], n_left: usize, n_right: usize) -> Result<Matching> {
    let n = n_left + n_right;
    let mut sorted = edges.to_vec();
    sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut uf: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(l, r, w) in &sorted {
        let (a, b) = (l, n_left + r);
        let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
        if ra == rb {
            return Err(Error::arg("edge set contains a cycle"));
        }
        uf[ra] = rb;
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    // free[v]: best in v's subtree with v unmatched below; best[v]: overall.
    let mut free = vec![0.0; n];
    let mut best = vec![0.0; n];
    let mut pick = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            order.push(v);
            for &(u, _) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    parent[u] = v;
                    stack.push(u);
                }
            }
        }
    }
    for &v in order.iter().rev() {
        let children = adj[v].iter().filter(|&&(u, _)| parent[u] == v);
        let base: f64 = children.clone().map(|&(u, _)| best[u]).sum();
        free[v] = base;
        best[v] = base;
        for &(u, w) in children {
            let with = base - best[u] + free[u] + w;
            if with > best[v] {
                best[v] = with;
                pick[v] = u;
            }
        }
    }
    // Walk down, matching `v` to `pick[v]` whenever `v` is still available.
    let mut mate = vec![usize::MAX; n];
    let mut pairs = Vec::new();
    for &v in &order {
        if mate[v] != usize::MAX || pick[v] == usize::MAX {
            continue;
        }
        let u = pick[v];
        mate[v] = u;
        mate[u] = v;
        pairs.push(if v < n_left { (v, u - n_left) } else { (u, v - n_left) });
    }
    pairs.sort_unstable();
    Ok(Matching { pairs })
}

/// Matching of weight at least `MWM - eps`. The game is solved to
/// `eps_split * eps` and the tree rounding recovers the difference.
///
/// Adds a left vertex joined to every right vertex, a right vertex joined to
/// every left vertex, and an edge between the two, all of weight zero. Every
/// matching then extends to a flow of l1 norm exactly `n` meeting all demands.
pub fn mwm_solve(g: &BipartiteGraph, eps: f64, cfg: &Config, meter: &ResourceMeter) -> Result<Matching> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::arg(format!("eps must be positive, got {eps}")));
    }
    let (nl, nr) = (g.n_left, g.n_right);
    let mut recs: Vec<EdgeRecord> = Vec::with_capacity(g.m() + nl + nr + 1);
    g.edges.for_each_pass(meter, |_, e| {
        if e.w > 0.0 {
            recs.push(*e);
        }
    });
    if recs.is_empty() {
        return Ok(Matching::default());
    }
    recs.extend((0..nr).map(|j| EdgeRecord::new(nl, j, 0.0)));
    recs.extend((0..nl).map(|i| EdgeRecord::new(i, nr, 0.0)));
    recs.push(EdgeRecord::new(nl, nr, 0.0));
    let padded = BipartiteGraph::new(nl + 1, nr + 1, StreamSource::from_records(recs))?;
    let mut left = vec![1.0; nl + 1];
    let mut right = vec![1.0; nr + 1];
    left[nl] = nr as f64;
    right[nr] = nl as f64;
    let inst = WeightedInstance::new(padded, Demand { left, right }, (nl + nr) as f64)?;
    let flow = solve_weighted(&inst, cfg.eps_split * eps, cfg, meter)?;
    let real: Vec<(usize, usize, f64)> =
        flow.edges.iter().filter(|e| e.0 < nl && e.1 < nr && e.3 > 0.0).map(|&(l, r, _, w)| (l, r, w)).collect();
    forest_mwm(&real, nl, nr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::enumerate_matchings;

    #[test]
    fn overflow_step_on_single_edge() {
        let x: SparseFlow = [(0, 0, 2.0)].into_iter().collect();
        let (y, step) = remove_overflow_weighted(&x, &Demand::ones(1, 1), |_, _| 3.0);
        assert_eq!(y.get(0, 0), 1.0);
        assert_eq!(step.overflow, 2.0);
        assert_eq!(step.weight_before - step.weight_after, 3.0);
        assert!(step.within_bound(0.0));
    }

    #[test]
    fn forest_dp_prefers_two_light_edges() {
        // Path l0 - r0 - l1 - r1 with weights 3, 6, 4.
        let m = forest_mwm(&[(0, 0, 3.0), (1, 0, 6.0), (1, 1, 4.0)], 2, 2).unwrap();
        assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn forest_dp_matches_enumeration_on_a_star() {
        let edges = [(0, 0, 1.0), (0, 1, 5.0), (0, 2, 2.0), (1, 2, 2.5)];
        let m = forest_mwm(&edges, 2, 3).unwrap();
        let w: f64 = m.pairs.iter().map(|p| edges.iter().find(|e| (e.0, e.1) == *p).unwrap().2).sum();
        assert_eq!(w, enumerate_matchings(2, 3, &edges).value);
    }

    #[test]
    fn north_west_has_exact_marginals() {
        let plan = north_west(&[0.5, 0.25, 0.25], &[0.25, 0.75]);
        let (a, b) = plan.marginals(3, 2);
        assert_eq!(a, vec![0.5, 0.25, 0.25]);
        assert_eq!(b, vec![0.25, 0.75]);
    }

    #[test]
    fn ot_rejects_unequal_mass() {
        let c = vec![vec![0.0; 2]; 2];
        let e = ot_solve(&c, &[0.5, 0.5], &[0.5, 0.6], 0.1, &Config::default(), &ResourceMeter::new());
        assert!(matches!(e, Err(Error::Argument(_))));
    }

    #[test]
    fn ot_diagonal_cost_is_free() {
        let c = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let plan = ot_solve(&c, &[0.5, 0.5], &[0.5, 0.5], 0.05, &Config::default(), &ResourceMeter::new()).unwrap();
        assert!(plan.marginal_error(&[0.5, 0.5], &[0.5, 0.5]) < 1e-9);
        assert!(plan.cost <= 0.05);
    }

    #[test]
    fn mwm_single_edge() {
        let g = BipartiteGraph::new(1, 1, StreamSource::from_records(vec![EdgeRecord::new(0, 0, 5.0)])).unwrap();
        let m = mwm_solve(&g, 0.25, &Config::default(), &ResourceMeter::new()).unwrap();
        assert_eq!(matching_weight(&g, &m), 5.0);
    }
}
