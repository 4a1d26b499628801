//! Maximum-cardinality bipartite matching in the semi-streaming model.
//!
//! [`mcm_approx`] runs greedy, vertex reduction, a box-simplex solve of the
//! l1-regression form of the overflow objective, streamed cycle cancelling,
//! overflow removal and an exact matching on the resulting forest.
//! [`mcm_exact`] finishes with augmenting paths found by layered passes.

use std::collections::HashSet;

use crate::boxsimplex::{for_each_averaged_coordinate, solve, solve_with_sink, BoxSimplexInstance, RowSource};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::flow::SparseFlow;
use crate::linkcut::{bcco, CycleCanceller, Objective};
use crate::sampling::{sample_count, Sampler};
use crate::stream::{EdgeRecord, ResourceMeter, StreamSource};

const NONE: usize = usize::MAX;

/// Bipartite graph given as an edge stream; `u` is the left endpoint.
#[derive(Clone, Debug)]
pub struct BipartiteGraph {
    pub n_left: usize,
    pub n_right: usize,
    pub edges: StreamSource<EdgeRecord>,
}

impl BipartiteGraph {
    pub fn new(n_left: usize, n_right: usize, edges: StreamSource<EdgeRecord>) -> Result<Self> {
        for (i, e) in edges.records().iter().enumerate() {
            if e.u >= n_left || e.v >= n_right {
                return Err(Error::arg(format!("edge {i} ({}, {}) outside {n_left}x{n_right}", e.u, e.v)));
            }
        }
        Ok(BipartiteGraph { n_left, n_right, edges })
    }

    /// Sides taken from the stream header, or inferred from the largest ids.
    pub fn from_stream(edges: StreamSource<EdgeRecord>) -> Result<Self> {
        let (nl, nr) = edges.bipartite_dims();
        Self::new(nl, nr, edges)
    }

    pub fn from_pairs(n_left: usize, n_right: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let recs = pairs.iter().map(|&(l, r)| EdgeRecord::unit(l, r)).collect();
        Self::new(n_left, n_right, StreamSource::from_records(recs))
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn n(&self) -> usize {
        self.n_left + self.n_right
    }

    /// Edge list for offline oracles.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.edges.records().iter().map(|e| (e.u, e.v)).collect()
    }
}

/// A set of vertex-disjoint `(left, right)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.pairs.len()
    }

    /// Checks disjointness and that every pair is an edge of `g`.
    pub fn validate(&self, g: &BipartiteGraph) -> Result<()> {
        let edges: HashSet<(usize, usize)> = g.pairs().into_iter().collect();
        let mut seen_l = HashSet::new();
        let mut seen_r = HashSet::new();
        for &(l, r) in &self.pairs {
            if !edges.contains(&(l, r)) {
                return Err(Error::Infeasible(format!("({l}, {r}) is not an edge")));
            }
            if !seen_l.insert(l) || !seen_r.insert(r) {
                return Err(Error::Infeasible(format!("vertex of ({l}, {r}) matched twice")));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.pairs.iter().map(|(l, r)| format!("{l} {r}\n")).collect()
    }
}

/// Maximal matching in one pass.
pub fn greedy_matching(g: &BipartiteGraph, meter: &ResourceMeter) -> Matching {
    let _words = meter.reserve(g.n() + 2 * g.n_left.min(g.n_right));
    let mut used_l = vec![false; g.n_left];
    let mut used_r = vec![false; g.n_right];
    let mut pairs = Vec::new();
    g.edges.for_each_pass(meter, |_, e| {
        if !used_l[e.u] && !used_r[e.v] {
            used_l[e.u] = true;
            used_r[e.v] = true;
            pairs.push((e.u, e.v));
        }
    });
    Matching { pairs }
}

/// Vertex subset kept by [`vertex_reduction`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexSet {
    pub left: Vec<bool>,
    pub right: Vec<bool>,
}

impl VertexSet {
    pub fn len(&self) -> usize {
        self.left.iter().chain(&self.right).filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Number of growth passes used by [`vertex_reduction`].
pub fn reduction_passes(eps: f64) -> usize {
    (3.0 * (1.0 / eps).ln()).ceil().max(0.0) as usize + 1
}

/// Grows the vertex set of `seed` by a maximal matching between the current
/// set and its complement in each of `reduction_passes(eps)` passes.
pub fn vertex_reduction(g: &BipartiteGraph, seed: &Matching, eps: f64, meter: &ResourceMeter) -> VertexSet {
    let _words = meter.reserve(2 * g.n());
    let mut left = vec![false; g.n_left];
    let mut right = vec![false; g.n_right];
    for &(l, r) in &seed.pairs {
        left[l] = true;
        right[r] = true;
    }
    for _ in 0..reduction_passes(eps) {
        let mut used_l = vec![false; g.n_left];
        let mut used_r = vec![false; g.n_right];
        let mut add_l = Vec::new();
        let mut add_r = Vec::new();
        g.edges.for_each_pass(meter, |_, e| {
            if left[e.u] == right[e.v] || used_l[e.u] || used_r[e.v] {
                return;
            }
            used_l[e.u] = true;
            used_r[e.v] = true;
            if left[e.u] {
                add_r.push(e.v);
            } else {
                add_l.push(e.u);
            }
        });
        if add_l.is_empty() && add_r.is_empty() {
            break;
        }
        add_l.into_iter().for_each(|l| left[l] = true);
        add_r.into_iter().for_each(|r| right[r] = true);
    }
    VertexSet { left, right }
}

/// Per-vertex demand on each side.
#[derive(Clone, Debug)]
pub struct Demand {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl Demand {
    pub fn ones(n_left: usize, n_right: usize) -> Self {
        Demand { left: vec![1.0; n_left], right: vec![1.0; n_right] }
    }
}

/// Total violation `|(B^T x - d)_+|_1`.
pub fn overflow(x: &SparseFlow, d: &Demand) -> f64 {
    let (dl, dr) = x.marginals(d.left.len(), d.right.len());
    let l: f64 = dl.iter().zip(&d.left).map(|(a, b)| (a - b).max(0.0)).sum();
    let r: f64 = dr.iter().zip(&d.right).map(|(a, b)| (a - b).max(0.0)).sum();
    l + r
}

/// Scales each edge down by the worse of its endpoints' relative overflow:
/// `x_e (1 - max(f_a / dx_a, f_b / dx_b))` with `dx = B^T x`, `f = (dx - d)_+`.
pub fn remove_overflow(x: &SparseFlow, d: &Demand) -> SparseFlow {
    let (dl, dr) = x.marginals(d.left.len(), d.right.len());
    let ratio = |dx: f64, dem: f64| if dx > dem { (dx - dem) / dx } else { 0.0 };
    let mut out = SparseFlow::new();
    for (l, r, v) in x.iter() {
        if v <= 0.0 {
            continue;
        }
        let keep = v * (1.0 - ratio(dl[l], d.left[l]).max(ratio(dr[r], d.right[r])));
        if keep > 0.0 {
            out.add(l, r, keep);
        }
    }
    out
}

/// Exact maximum matching of a forest-supported flow by peeling leaves.
pub fn forest_mcm(flow: &SparseFlow, n_left: usize, n_right: usize) -> Result<Matching> {
    let n = n_left + n_right;
    let mut adj = vec![Vec::new(); n];
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (l, r, v) in flow.iter() {
        if v <= 0.0 {
            continue;
        }
        let (a, b) = (l, n_left + r);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return Err(Error::arg("flow support contains a cycle"));
        }
        parent[ra] = rb;
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut alive = vec![true; n];
    let mut queue: Vec<usize> = (0..n).filter(|&v| deg[v] == 1).collect();
    let mut pairs = Vec::new();
    while let Some(v) = queue.pop() {
        if !alive[v] || deg[v] != 1 {
            continue;
        }
        let u = *adj[v].iter().find(|&&u| alive[u]).expect("leaf has a live neighbour");
        alive[v] = false;
        alive[u] = false;
        pairs.push(if v < n_left { (v, u - n_left) } else { (u, v - n_left) });
        for &w in &adj[u] {
            if alive[w] {
                deg[w] -= 1;
                if deg[w] == 1 {
                    queue.push(w);
                }
            }
        }
    }
    pairs.sort_unstable();
    Ok(Matching { pairs })
}

/// Compact relabelling of the kept vertices.
struct Relabel {
    left: Vec<usize>,
    right: Vec<usize>,
    back_left: Vec<usize>,
    back_right: Vec<usize>,
}

impl Relabel {
    fn new(set: &VertexSet) -> Self {
        let mut back_left = Vec::new();
        let left = set
            .left
            .iter()
            .enumerate()
            .map(|(i, &k)| if k { back_left.push(i); back_left.len() - 1 } else { NONE })
            .collect();
        let mut back_right = Vec::new();
        let right = set
            .right
            .iter()
            .enumerate()
            .map(|(i, &k)| if k { back_right.push(i); back_right.len() - 1 } else { NONE })
            .collect();
        Relabel { left, right, back_left, back_right }
    }

    fn full(g: &BipartiteGraph) -> Self {
        Relabel {
            left: (0..g.n_left).collect(),
            right: (0..g.n_right).collect(),
            back_left: (0..g.n_left).collect(),
            back_right: (0..g.n_right).collect(),
        }
    }

    fn nl(&self) -> usize {
        self.back_left.len()
    }

    fn nr(&self) -> usize {
        self.back_right.len()
    }

    fn edge(&self, e: &EdgeRecord) -> Option<(usize, usize)> {
        let (l, r) = (self.left[e.u], self.right[e.v]);
        (l != NONE && r != NONE).then_some((l, r))
    }

    fn words(&self) -> usize {
        self.left.len() + self.right.len() + self.nl() + self.nr()
    }
}

/// Rows of the regression instance `A = M B~`, built from the edge stream on
/// the fly. Row `i < m` is edge `i` (empty if an endpoint was dropped by the
/// reduction); row `m` is the dummy edge with a zero row and zero cost.
struct McmRows<'a> {
    g: &'a BipartiteGraph,
    map: &'a Relabel,
    scale: f64,
}

impl RowSource for McmRows<'_> {
    fn n_cols(&self) -> usize {
        self.map.nl() + self.map.nr() + 2
    }

    fn n_rows(&self) -> usize {
        self.g.m() + 1
    }

    fn scan(&self, meter: &ResourceMeter, visit: &mut dyn FnMut(usize, &[(usize, f64)], f64)) {
        let nl = self.map.nl();
        self.g.edges.for_each_pass(meter, |i, e| {
            if let Some((l, r)) = self.map.edge(e) {
                visit(i, &[(l, self.scale), (nl + r, self.scale)], 0.0);
            }
        });
        visit(self.g.m(), &[], 0.0);
        meter.add_work(2 * self.g.m() as u64);
    }
}

/// How the fractional solution is turned into a sparse one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rounding {
    /// One replay pass sums each row's contributions over all iterates, and
    /// the resulting `m` records are cycle-cancelled.
    Average,
    /// Cycle cancelling of every iterate contribution as it is produced.
    Cancel,
    /// Scaled-Bernoulli sampling of the averaged iterate, then cancelling.
    Sample { seed: u64 },
}

/// `(1 - eps)`-approximate maximum-cardinality matching.
pub fn mcm_approx(g: &BipartiteGraph, eps: f64, cfg: &Config, meter: &ResourceMeter) -> Result<Matching> {
    mcm_approx_with(g, eps, cfg, Rounding::Average, meter)
}

pub fn mcm_approx_with(
    g: &BipartiteGraph,
    eps: f64,
    cfg: &Config,
    rounding: Rounding,
    meter: &ResourceMeter,
) -> Result<Matching> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::arg(format!("eps must lie in (0, 1/2], got {eps}")));
    }
    let greedy = greedy_matching(g, meter);
    let big_m = greedy.size();
    if big_m == 0 {
        return Ok(Matching::default());
    }
    let map = if big_m as f64 * (1.0 / eps).ln() <= g.n() as f64 {
        Relabel::new(&vertex_reduction(g, &greedy, eps, meter))
    } else {
        Relabel::full(g)
    };
    let _map_words = meter.reserve(map.words());
    let (nl, nr) = (map.nl(), map.nr());
    let mf = big_m as f64;
    let rows = McmRows { g, map: &map, scale: mf };
    let mut b = vec![0.5; nl + nr];
    b.extend([0.0, 0.0]);
    let inst = BoxSimplexInstance::new(rows, b)?;
    // The solver rejects accuracies above the width 2M.
    let solver_eps = (cfg.eps_split * eps).min(1.0) * mf;

    let forest = match rounding {
        Rounding::Average => {
            let mut report = solve(&inst, solver_eps, cfg, meter)?;
            let mut cc = CycleCanceller::new(nl, nr, Objective::Maximize, meter);
            let mut err = None;
            let m = g.m();
            for_each_averaged_coordinate(&mut report, &inst, meter, |i, _, x| {
                if i < m && x > 0.0 && err.is_none() {
                    let (l, r) = map.edge(g.edges.get(i)).expect("row of a kept edge");
                    if let Err(e) = cc.push(l, r, 2.0 * mf * x, 1.0) {
                        err = Some(e);
                    }
                }
            })?;
            if let Some(e) = err {
                return Err(e);
            }
            cc.finish()
        }
        Rounding::Cancel => {
            let mut cc = CycleCanceller::new(nl, nr, Objective::Maximize, meter);
            let mut err = None;
            let m = g.m();
            solve_with_sink(&inst, solver_eps, cfg, meter, &mut |i, x| {
                if i < m && x > 0.0 && err.is_none() {
                    let (l, r) = map.edge(g.edges.get(i)).expect("row of a kept edge");
                    if let Err(e) = cc.push(l, r, 2.0 * mf * x, 1.0) {
                        err = Some(e);
                    }
                }
            })?;
            if let Some(e) = err {
                return Err(e);
            }
            cc.finish()
        }
        Rounding::Sample { seed } => {
            let mut report = solve(&inst, solver_eps, cfg, meter)?;
            let n_cols = nl + nr + 2;
            let mut load = vec![0.0; n_cols];
            let _load_words = meter.reserve(n_cols);
            for_each_averaged_coordinate(&mut report, &inst, meter, |_, entries, x| {
                for &(j, a) in entries {
                    load[j] += a * x;
                }
            })?;
            let k = sample_count(g.m() + 1, n_cols, eps);
            let mut sampler = Sampler::new(k, seed);
            let mut picked = Vec::new();
            let mut err = None;
            for_each_averaged_coordinate(&mut report, &inst, meter, |i, entries, x| {
                if entries.is_empty() || err.is_some() {
                    return;
                }
                let cap = entries.iter().map(|&(j, a)| load[j] / a.abs()).fold(f64::INFINITY, f64::min);
                match sampler.sample(x, cap) {
                    Ok(v) if v > 0.0 => picked.push((i, v)),
                    Ok(_) => {}
                    Err(e) => err = Some(e),
                }
            })?;
            if let Some(e) = err {
                return Err(e);
            }
            let x: Vec<(usize, usize, f64)> = picked
                .iter()
                .map(|&(i, v)| {
                    let (l, r) = map.edge(g.edges.get(i)).expect("row of a kept edge");
                    (l, r, 2.0 * mf * v)
                })
                .collect();
            bcco(nl, nr, &x, |_, _| 1.0, Objective::Maximize, meter)?
        }
    };
    let trimmed = remove_overflow(&forest, &Demand::ones(nl, nr));
    let local = forest_mcm(&trimmed, nl, nr)?;
    let mut pairs: Vec<(usize, usize)> =
        local.pairs.iter().map(|&(l, r)| (map.back_left[l], map.back_right[r])).collect();
    pairs.sort_unstable();
    Ok(Matching { pairs })
}

/// Accuracy used by [`mcm_exact`] before augmenting.
pub fn exact_start_eps(n: usize, cfg: &Config) -> f64 {
    (n.max(1) as f64).powf(-0.75).max(cfg.exact_eps_floor).min(0.5)
}

/// Exact maximum-cardinality matching: the approximate pipeline followed by
/// augmenting paths, each found by a layered search using one pass per layer.
pub fn mcm_exact(g: &BipartiteGraph, cfg: &Config, meter: &ResourceMeter) -> Result<Matching> {
    let start = mcm_approx(g, exact_start_eps(g.n(), cfg), cfg, meter)?;
    let (nl, nr) = (g.n_left, g.n_right);
    let _words = meter.reserve(4 * (nl + nr));
    let mut mate_l = vec![NONE; nl];
    let mut mate_r = vec![NONE; nr];
    for &(l, r) in &start.pairs {
        mate_l[l] = r;
        mate_r[r] = l;
    }
    loop {
        // Left vertices reached so far and the edge that reached each right vertex.
        let mut seen_l: Vec<bool> = mate_l.iter().map(|&r| r == NONE).collect();
        let mut via_r = vec![NONE; nr];
        let mut frontier: Vec<bool> = seen_l.clone();
        let mut end = NONE;
        while end == NONE && frontier.iter().any(|&b| b) {
            let mut next = vec![false; nl];
            g.edges.for_each_pass(meter, |_, e| {
                if end != NONE || !frontier[e.u] || via_r[e.v] != NONE || mate_l[e.u] == e.v {
                    return;
                }
                via_r[e.v] = e.u;
                match mate_r[e.v] {
                    NONE => end = e.v,
                    l2 if !seen_l[l2] => {
                        seen_l[l2] = true;
                        next[l2] = true;
                    }
                    _ => {}
                }
            });
            frontier = next;
        }
        if end == NONE {
            break;
        }
        let mut r = end;
        loop {
            let l = via_r[r];
            let prev = mate_l[l];
            mate_l[l] = r;
            mate_r[r] = l;
            if prev == NONE {
                break;
            }
            r = prev;
        }
    }
    let pairs = (0..nl).filter(|&l| mate_l[l] != NONE).map(|l| (l, mate_l[l])).collect();
    Ok(Matching { pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(nl: usize, nr: usize, e: &[(usize, usize)]) -> BipartiteGraph {
        BipartiteGraph::from_pairs(nl, nr, e).unwrap()
    }

    #[test]
    fn greedy_traces() {
        let m = ResourceMeter::new();
        assert_eq!(greedy_matching(&graph(2, 1, &[(0, 0), (1, 0)]), &m).pairs, vec![(0, 0)]);
        let g = graph(2, 2, &[(0, 0), (0, 1), (1, 1)]);
        assert_eq!(greedy_matching(&g, &m).pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(m.passes(), 2);
    }

    #[test]
    fn star_reduction_stays_small() {
        let m = ResourceMeter::new();
        let g = graph(1, 10, &(0..10).map(|r| (0, r)).collect::<Vec<_>>());
        let greedy = greedy_matching(&g, &m);
        let set = vertex_reduction(&g, &greedy, 0.1, &m);
        assert!(set.len() <= 2 + reduction_passes(0.1));
        assert!(set.left[0]);
    }

    #[test]
    fn overflow_formula() {
        let x: SparseFlow = [(0, 0, 2.0)].into_iter().collect();
        let y = remove_overflow(&x, &Demand::ones(1, 1));
        assert_eq!(y.get(0, 0), 1.0);
        let star: SparseFlow = [(0, 0, 1.0), (0, 1, 1.0)].into_iter().collect();
        let y = remove_overflow(&star, &Demand::ones(1, 2));
        assert_eq!(y.get(0, 0), 0.5);
        assert_eq!(y.get(0, 1), 0.5);
        assert_eq!(overflow(&star, &Demand::ones(1, 2)), 1.0);
    }

    #[test]
    fn forest_matching_on_paths() {
        // l0 - r0 - l1 - r1 as a path of three edges.
        let f: SparseFlow = [(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0)].into_iter().collect();
        let m = forest_mcm(&f, 2, 2).unwrap();
        assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);
        let one: SparseFlow = [(0, 0, 0.3)].into_iter().collect();
        assert_eq!(forest_mcm(&one, 1, 1).unwrap().size(), 1);
        let cyc: SparseFlow = [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)].into_iter().collect();
        assert!(forest_mcm(&cyc, 2, 2).is_err());
    }

    #[test]
    fn empty_graph_gives_empty_matching() {
        let g = graph(3, 3, &[]);
        let m = mcm_approx(&g, 0.1, &Config::default(), &ResourceMeter::new()).unwrap();
        assert_eq!(m.size(), 0);
    }

    #[test]
    fn k33_minus_perfect_matching() {
        let e: Vec<_> = (0..3).flat_map(|l| (0..3).filter(move |&r| r != l).map(move |r| (l, r))).collect();
        let g = graph(3, 3, &e);
        let m = mcm_approx(&g, 0.05, &Config::default(), &ResourceMeter::new()).unwrap();
        m.validate(&g).unwrap();
        assert_eq!(m.size(), 3);
    }

    #[test]
    fn exact_on_small_graph() {
        let g = graph(3, 3, &[(0, 0), (0, 1), (1, 0), (2, 1), (2, 2)]);
        let m = mcm_exact(&g, &Config::default(), &ResourceMeter::new()).unwrap();
        m.validate(&g).unwrap();
        assert_eq!(m.size(), 3);
    }
}
