//! Approximate undirected transshipment and s-t shortest paths.
//!
//! The pipeline stores a greedy spanner `H`, stacks random hierarchical tree
//! embeddings of `H` into a stretch approximator `R`, and binary-searches the
//! flow budget `t` of the game `min_{|f|_1 <= t} |R B^T W^-1 f - R d|_1`. The
//! last certified probe is rounded on the double cover, its residual demand is
//! routed exactly on `H`, and the sum is rounded once more.
//!
//! Edges are oriented from the smaller to the larger vertex id; a positive
//! flow value moves units from `u` to `v`. Demands are net outflows, so
//! `d = 1_s - 1_t` ships one unit from `s` to `t`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boxsimplex::{for_each_averaged_coordinate, solve_to_target, BoxSimplexInstance, RowSource};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::linkcut::{CycleCanceller, Objective};
use crate::stream::{EdgeRecord, FlowRecord, ResourceMeter, StreamSource};

/// Undirected graph with nonnegative weights and a balanced demand vector.
#[derive(Clone, Debug)]
pub struct TransshipInstance {
    pub n: usize,
    /// Oriented `u < v`, without self-loops or parallel edges.
    pub edges: StreamSource<EdgeRecord>,
    pub d: Vec<f64>,
}

impl TransshipInstance {
    /// Orients every edge as `(min, max)`, drops self-loops and keeps the
    /// lightest of any parallel edges.
    pub fn new(n: usize, edges: StreamSource<EdgeRecord>, d: Vec<f64>) -> Result<Self> {
        if d.len() != n {
            return Err(Error::arg(format!("demand has {} entries for {n} vertices", d.len())));
        }
        if d.iter().any(|x| !x.is_finite()) {
            return Err(Error::arg("demands must be finite"));
        }
        let total: f64 = d.iter().sum();
        let scale: f64 = d.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        if total.abs() > 1e-9 * scale {
            return Err(Error::arg(format!("demands sum to {total}, not zero")));
        }
        let mut slot: HashMap<(usize, usize), usize> = HashMap::new();
        let mut kept: Vec<EdgeRecord> = Vec::new();
        for e in edges.records() {
            if e.u >= n || e.v >= n {
                return Err(Error::arg(format!("edge ({}, {}) outside {n} vertices", e.u, e.v)));
            }
            if !(e.w.is_finite() && e.w >= 0.0) {
                return Err(Error::arg(format!("edge ({}, {}) has weight {}", e.u, e.v, e.w)));
            }
            if e.u == e.v {
                continue;
            }
            let key = (e.u.min(e.v), e.u.max(e.v));
            match slot.get(&key) {
                Some(&i) => kept[i].w = kept[i].w.min(e.w),
                None => {
                    slot.insert(key, kept.len());
                    kept.push(EdgeRecord::new(key.0, key.1, e.w));
                }
            }
        }
        Ok(TransshipInstance { n, edges: StreamSource::from_records(kept), d })
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// `(u, v, w)` triples, for offline use.
    pub fn edge_list(&self) -> Vec<(usize, usize, f64)> {
        self.edges.records().iter().map(|e| (e.u, e.v, e.w)).collect()
    }

    /// Weight of the edge `{u, v}`, if present.
    pub fn weight_map(&self) -> HashMap<(usize, usize), f64> {
        self.edges.records().iter().map(|e| ((e.u, e.v), e.w)).collect()
    }
}

/// Signed flow on undirected edges, keyed by `(min, max)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SignedFlow {
    values: BTreeMap<(usize, usize), f64>,
}

impl SignedFlow {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `x` units moving from `u` to `v`.
    pub fn add(&mut self, u: usize, v: usize, x: f64) {
        if u == v || x == 0.0 {
            return;
        }
        let (key, x) = if u < v { ((u, v), x) } else { ((v, u), -x) };
        let e = self.values.entry(key).or_insert(0.0);
        *e += x;
        if *e == 0.0 {
            self.values.remove(&key);
        }
    }

    /// Net flow from `u` to `v`.
    pub fn get(&self, u: usize, v: usize) -> f64 {
        if u <= v {
            self.values.get(&(u, v)).copied().unwrap_or(0.0)
        } else {
            -self.values.get(&(v, u)).copied().unwrap_or(0.0)
        }
    }

    /// `(u, v, x)` with `u < v`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values.iter().map(|(&(u, v), &x)| (u, v, x))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Net outflow `B^T f` at every vertex.
    pub fn divergence(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (u, v, x) in self.iter() {
            out[u] += x;
            out[v] -= x;
        }
        out
    }

    /// `sum_e w_e |f_e|`.
    pub fn cost(&self, w: impl Fn(usize, usize) -> f64) -> f64 {
        self.iter().map(|(u, v, x)| w(u, v) * x.abs()).sum()
    }

    /// Lines `u v value`.
    pub fn to_text(&self) -> String {
        self.iter().map(|(u, v, x)| format!("{u} {v} {x:.17e}\n")).collect()
    }

    /// Parses [`SignedFlow::to_text`] output; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut f = SignedFlow::new();
        for (i, raw) in text.lines().enumerate() {
            let toks: Vec<&str> = raw.split('#').next().unwrap_or("").split_whitespace().collect();
            if toks.is_empty() {
                continue;
            }
            let bad = || Error::Parse { line: i + 1, msg: format!("expected `u v value`, got {:?}", raw.trim()) };
            if toks.len() != 3 {
                return Err(bad());
            }
            let u: usize = toks[0].parse().map_err(|_| bad())?;
            let v: usize = toks[1].parse().map_err(|_| bad())?;
            let x: f64 = toks[2].parse().map_err(|_| bad())?;
            if !x.is_finite() {
                return Err(bad());
            }
            f.add(u, v, x);
        }
        Ok(f)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    // Reversed, so the max-heap pops the smallest distance.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

type Adjacency = Vec<Vec<(usize, f64)>>;

fn adjacency(n: usize, edges: &[(usize, usize, f64)]) -> Adjacency {
    let mut adj = vec![Vec::new(); n];
    for &(u, v, w) in edges {
        adj[u].push((v, w));
        adj[v].push((u, w));
    }
    adj
}

/// Distances and parent pointers from `s`, exploring only up to `limit`.
fn dijkstra(adj: &Adjacency, s: usize, limit: f64) -> (Vec<f64>, Vec<usize>) {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(Key(0.0, s));
    while let Some(Key(d, u)) = heap.pop() {
        if d > dist[u] || d > limit {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                parent[v] = u;
                heap.push(Key(nd, v));
            }
        }
    }
    (dist, parent)
}

/// Greedy spanner kept in memory.
#[derive(Clone, Debug)]
pub struct Spanner {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    /// Stretch parameter; distances grow by at most `2k - 1`.
    pub k: usize,
}

impl Spanner {
    pub fn stretch(&self) -> f64 {
        (2 * self.k - 1) as f64
    }
}

/// Greedy `(2k - 1)`-spanner with `k = ceil(log2 n)`. After one pass for the
/// weight range, pass `j` considers edges of weight in `(w_min 2^(j-1), w_min 2^j]`
/// and admits those whose endpoints are more than `(2k - 1) w` apart in `H`.
pub fn build_spanner(n: usize, edges: &StreamSource<EdgeRecord>, meter: &ResourceMeter) -> Spanner {
    let k = ((n.max(2) as f64).log2().ceil() as usize).max(1);
    let stretch = (2 * k - 1) as f64;
    let (mut w_min, mut w_max) = (f64::INFINITY, 0.0f64);
    edges.for_each_pass(meter, |_, e| {
        if e.w > 0.0 {
            w_min = w_min.min(e.w);
        }
        w_max = w_max.max(e.w);
    });
    let mut adj: Adjacency = vec![Vec::new(); n];
    let mut kept = Vec::new();
    let mut guard = meter.reserve(0);
    let admit = |adj: &mut Adjacency, kept: &mut Vec<(usize, usize, f64)>, e: &EdgeRecord| {
        let reach = dijkstra(adj, e.u, stretch * e.w).0[e.v];
        if reach > stretch * e.w {
            adj[e.u].push((e.v, e.w));
            adj[e.v].push((e.u, e.w));
            kept.push((e.u, e.v, e.w));
        }
    };
    // Zero-weight edges first; they never lengthen a path.
    edges.for_each_pass(meter, |_, e| {
        if e.w == 0.0 {
            admit(&mut adj, &mut kept, e);
        }
    });
    if w_min.is_finite() {
        let mut hi = w_min;
        let mut lo = 0.0;
        loop {
            edges.for_each_pass(meter, |_, e| {
                if e.w > lo && e.w <= hi {
                    admit(&mut adj, &mut kept, e);
                }
            });
            if hi >= w_max {
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
    }
    guard.resize(3 * kept.len());
    Spanner { n, edges: kept, k }
}

/// Stacked tree embeddings, stored by column.
#[derive(Clone, Debug)]
pub struct StretchApprox {
    pub n: usize,
    /// Number of rows `K`.
    pub rows: usize,
    pub trees: usize,
    cols: Vec<Vec<(usize, f64)>>,
    /// Measured `max_e |R (1_u - 1_v)|_1 / w_e` over the graph's edges.
    pub alpha: f64,
    /// Measured `max(sum_v deg(v) nnz(R_v) / m, nnz(R) / K)`.
    pub beta: f64,
}

impl StretchApprox {
    /// Nonzeros of column `v` as `(row, value)`, sorted by row.
    pub fn column(&self, v: usize) -> &[(usize, f64)] {
        &self.cols[v]
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    /// `R d`.
    pub fn apply(&self, d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (v, col) in self.cols.iter().enumerate() {
            for &(row, x) in col {
                out[row] += x * d[v];
            }
        }
        out
    }

    /// `|R d|_1`, an upper bound on the transshipment cost of `d`.
    pub fn norm(&self, d: &[f64]) -> f64 {
        self.apply(d).iter().map(|x| x.abs()).sum()
    }

    /// Writes `scale * (R_u - R_v)` into `out`, skipping cancelled rows.
    fn edge_column(&self, u: usize, v: usize, scale: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let (a, b) = (&self.cols[u], &self.cols[v]);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let ra = a.get(i).map_or(usize::MAX, |x| x.0);
            let rb = b.get(j).map_or(usize::MAX, |x| x.0);
            let (row, x) = match ra.cmp(&rb) {
                Ordering::Less => {
                    i += 1;
                    (ra, a[i - 1].1)
                }
                Ordering::Greater => {
                    j += 1;
                    (rb, -b[j - 1].1)
                }
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                    (ra, a[i - 1].1 - b[j - 1].1)
                }
            };
            if x != 0.0 {
                out.push((row, scale * x));
            }
        }
    }
}

/// Appends the rows of one hierarchical tree embedding of a connected
/// component. Each tree edge becomes a row carrying its length on every vertex
/// below it; nested clusters with equal vertex sets share one row.
fn embed_tree(
    members: &[usize],
    dist: &[Vec<f64>],
    weight: f64,
    rng: &mut ChaCha8Rng,
    cols: &mut [Vec<(usize, f64)>],
    rows: &mut usize,
) {
    if members.len() < 2 {
        return;
    }
    let mut d_min = f64::INFINITY;
    let mut diam = 0.0f64;
    for &a in members {
        for &b in members {
            let x = dist[a][b];
            if a != b && x > 0.0 {
                d_min = d_min.min(x);
            }
            diam = diam.max(x);
        }
    }
    let beta: f64 = rng.gen_range(1.0..2.0);
    let mut order = members.to_vec();
    order.shuffle(rng);
    // Level i uses radius beta 2^(i-1) in units of d_min; the top level holds everything.
    let mut top = 0i32;
    while beta * 2f64.powi(top - 1) < diam / d_min {
        top += 1;
    }
    let mut label: Vec<usize> = vec![0; members.len()];
    let mut size_of_parent: Vec<usize> = vec![members.len()];
    let mut row_of_parent: Vec<Option<usize>> = vec![None];
    for level in (0..top).rev() {
        let radius = beta * 2f64.powi(level - 1) * d_min;
        let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(members.len());
        for (i, &v) in members.iter().enumerate() {
            let center = order.iter().position(|&c| dist[v][c] <= radius).expect("v is its own center");
            let fresh = ids.len();
            next.push(*ids.entry((label[i], center)).or_insert(fresh));
        }
        let mut sizes = vec![0usize; ids.len()];
        for &c in &next {
            sizes[c] += 1;
        }
        // The parent's radius; vertices split at this level are within twice it.
        let edge_len = beta * 2f64.powi(level) * d_min * weight;
        let mut row_of = vec![None; ids.len()];
        let mut parent_of = vec![0usize; ids.len()];
        for (i, &c) in next.iter().enumerate() {
            parent_of[c] = label[i];
        }
        for c in 0..ids.len() {
            let p = parent_of[c];
            if sizes[c] == members.len() {
                continue;
            }
            if sizes[c] == size_of_parent[p] {
                row_of[c] = row_of_parent[p];
            } else {
                row_of[c] = Some(*rows);
                *rows += 1;
            }
        }
        for (i, &c) in next.iter().enumerate() {
            if let Some(r) = row_of[c] {
                let col = &mut cols[members[i]];
                match col.last_mut() {
                    Some(last) if last.0 == r => last.1 += edge_len,
                    _ => col.push((r, edge_len)),
                }
            }
        }
        label = next;
        size_of_parent = sizes;
        row_of_parent = row_of;
    }
}

/// Connected components of an adjacency structure, as sorted member lists.
fn components(adj: &Adjacency) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            for &(v, _) in &adj[comp[i]] {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                }
            }
            i += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Stacks `tree_count` (default `ceil(4 ln n)`) random tree embeddings of the
/// shortest-path metric of `h`, scaled by `1 / tree_count`, one set per
/// connected component. Tree distances dominate graph distances, so
/// `|opt(d)|_1 <= |R d|_1` for every balanced `d`.
pub fn build_stretch_approx(
    h: &Spanner,
    edges: &StreamSource<EdgeRecord>,
    seed: u64,
    cfg: &Config,
    meter: &ResourceMeter,
) -> StretchApprox {
    let n = h.n;
    let adj = adjacency(n, &h.edges);
    let dist: Vec<Vec<f64>> = (0..n).map(|s| dijkstra(&adj, s, f64::INFINITY).0).collect();
    let trees = cfg.tree_count.unwrap_or_else(|| (4.0 * (n.max(2) as f64).ln()).ceil() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = vec![Vec::new(); n];
    let mut rows = 0;
    let comps = components(&adj);
    for _ in 0..trees {
        for comp in &comps {
            embed_tree(comp, &dist, 1.0 / trees as f64, &mut rng, &mut cols, &mut rows);
        }
    }
    let mut r = StretchApprox { n, rows, trees, cols, alpha: 0.0, beta: 0.0 };
    let nnz = r.nnz();
    let mut buf = Vec::new();
    let (mut alpha, mut spread, mut m) = (0.0f64, 0usize, 0usize);
    edges.for_each_pass(meter, |_, e| {
        if e.w > 0.0 {
            r.edge_column(e.u, e.v, 1.0 / e.w, &mut buf);
            alpha = alpha.max(buf.iter().map(|x| x.1.abs()).sum());
        }
        spread += r.cols[e.u].len() + r.cols[e.v].len();
        m += 1;
    });
    r.alpha = alpha;
    r.beta = (spread as f64 / m.max(1) as f64).max(nnz as f64 / rows.max(1) as f64);
    meter.reserve(2 * nnz).resize(2 * nnz);
    r
}

/// Rows of the flow-constrained game. Edge `e` owns rows `2e` (flow along
/// its orientation) and `2e + 1` (against it), with entries
/// `+-t (R_u - R_v) / w_e` and zero cost.
pub struct TransshipRows<'a> {
    edges: &'a StreamSource<EdgeRecord>,
    r: &'a StretchApprox,
    t: f64,
}

impl RowSource for TransshipRows<'_> {
    fn n_cols(&self) -> usize {
        self.r.rows
    }

    fn n_rows(&self) -> usize {
        2 * self.edges.len()
    }

    fn scan(&self, meter: &ResourceMeter, visit: &mut dyn FnMut(usize, &[(usize, f64)], f64)) {
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        let mut work = 0u64;
        self.edges.for_each_pass(meter, |i, e| {
            self.r.edge_column(e.u, e.v, self.t / e.w, &mut plus);
            minus.clear();
            minus.extend(plus.iter().map(|&(j, x)| (j, -x)));
            work += 2 * plus.len() as u64;
            visit(2 * i, &plus, 0.0);
            visit(2 * i + 1, &minus, 0.0);
        });
        meter.add_work(work);
    }
}

/// The game `min_{x in simplex(2E)} |t A^T x - R d|_1`, whose value is
/// `min_{|f|_1 <= t} |R B^T W^-1 f - R d|_1`. Needs positive weights.
pub fn flow_constrained_game<'a>(
    inst: &'a TransshipInstance,
    r: &'a StretchApprox,
    t: f64,
) -> Result<BoxSimplexInstance<TransshipRows<'a>>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::arg(format!("flow budget must be nonnegative, got {t}")));
    }
    if inst.edges.records().iter().any(|e| e.w <= 0.0) {
        return Err(Error::arg("the game needs positive edge weights"));
    }
    BoxSimplexInstance::new(TransshipRows { edges: &inst.edges, r, t }, r.apply(&inst.d))
}

/// Cycle cancelling of signed flows on the bipartite double cover. A unit
/// moving from `a` to `b` is the cover edge `(a_out, b_in)`; flows along and
/// against the stored orientation go to separate cancellers.
pub struct SignedCanceller {
    along: CycleCanceller,
    against: CycleCanceller,
}

impl SignedCanceller {
    pub fn new(n: usize, meter: &ResourceMeter) -> Self {
        SignedCanceller {
            along: CycleCanceller::new(n, n, Objective::Minimize, meter),
            against: CycleCanceller::new(n, n, Objective::Minimize, meter),
        }
    }

    /// Adds `x` units from `u` to `v` on an edge of weight `w`.
    pub fn push(&mut self, u: usize, v: usize, x: f64, w: f64) -> Result<()> {
        let (a, b, x) = if x >= 0.0 { (u, v, x) } else { (v, u, -x) };
        if a < b {
            self.along.push(a, b, x, w)
        } else {
            self.against.push(a, b, x, w)
        }
    }

    pub fn finish(mut self) -> Result<SignedFlow> {
        let mut out = SignedFlow::new();
        for (a, b, x, _) in self.along.weighted_edges() {
            out.add(a, b, x);
        }
        // Opposite copies of one edge net out, which only lowers the cost.
        for (a, b, x, _) in self.against.weighted_edges() {
            out.add(a, b, x);
        }
        Ok(out)
    }
}

/// Rounds nonnegative contribution streams along (`f_plus`) and against
/// (`f_minus`) the stored orientation into a flow with the same divergence,
/// support `O(n)` and weighted cost at most the inputs' total.
pub fn round_stream(
    n: usize,
    f_plus: &StreamSource<FlowRecord>,
    f_minus: &StreamSource<FlowRecord>,
    w: impl Fn(usize, usize) -> f64,
    meter: &ResourceMeter,
) -> Result<SignedFlow> {
    let mut cc = SignedCanceller::new(n, meter);
    let mut err = None;
    for (src, sign) in [(f_plus, 1.0), (f_minus, -1.0)] {
        src.for_each_pass(meter, |_, r| {
            if err.is_none() {
                let (u, v) = (r.u.min(r.v), r.u.max(r.v));
                let x = if r.u <= r.v { sign * r.value } else { -sign * r.value };
                if let Err(e) = cc.push(u, v, x, w(u, v)) {
                    err = Some(e);
                }
            }
        });
    }
    match err {
        Some(e) => Err(e),
        None => cc.finish(),
    }
}

fn round_flow(n: usize, f: &SignedFlow, w: &HashMap<(usize, usize), f64>, meter: &ResourceMeter) -> Result<SignedFlow> {
    let mut cc = SignedCanceller::new(n, meter);
    for (u, v, x) in f.iter() {
        cc.push(u, v, x, w[&(u, v)])?;
    }
    cc.finish()
}

/// Uncapacitated transport from `supply` to `demand` under `cost` by
/// successive shortest paths with potentials. Returns `(i, j, amount)`.
fn transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> Result<Vec<(usize, usize, f64)>> {
    let (ns, nt) = (supply.len(), demand.len());
    let nv = ns + nt;
    let mut rem_s = supply.to_vec();
    let mut rem_t = demand.to_vec();
    let mut x = vec![vec![0.0; nt]; ns];
    let mut pi = vec![0.0; nv];
    let total: f64 = supply.iter().sum();
    let tol = 1e-14 * total.max(1.0);
    while rem_s.iter().any(|&r| r > tol) {
        let mut dist = vec![f64::INFINITY; nv];
        let mut prev = vec![usize::MAX; nv];
        let mut done = vec![false; nv];
        for i in 0..ns {
            if rem_s[i] > tol {
                dist[i] = 0.0;
            }
        }
        loop {
            let mut u = usize::MAX;
            for v in 0..nv {
                if !done[v] && dist[v].is_finite() && (u == usize::MAX || dist[v] < dist[u]) {
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < ns {
                for j in 0..nt {
                    let c = cost[u][j];
                    if c.is_finite() {
                        let nd = dist[u] + (c + pi[u] - pi[ns + j]).max(0.0);
                        if nd < dist[ns + j] {
                            dist[ns + j] = nd;
                            prev[ns + j] = u;
                        }
                    }
                }
            } else {
                let j = u - ns;
                for i in 0..ns {
                    if x[i][j] > 0.0 {
                        let nd = dist[u] + (-cost[i][j] + pi[u] - pi[i]).max(0.0);
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = u;
                        }
                    }
                }
            }
        }
        let target = (0..nt)
            .filter(|&j| rem_t[j] > tol && dist[ns + j].is_finite())
            .min_by(|&a, &b| dist[ns + a].total_cmp(&dist[ns + b]))
            .ok_or_else(|| Error::Infeasible("demand cannot be routed within its component".into()))?;
        let end = ns + target;
        // Walk back to the source, collecting the bottleneck.
        let mut amount = rem_t[target];
        let mut v = end;
        while prev[v] != usize::MAX {
            let p = prev[v];
            if p >= ns {
                amount = amount.min(x[v][p - ns]);
            }
            v = p;
        }
        amount = amount.min(rem_s[v]);
        rem_s[v] -= amount;
        rem_t[target] -= amount;
        let mut v = end;
        while prev[v] != usize::MAX {
            let p = prev[v];
            if p < ns {
                x[p][v - ns] += amount;
            } else {
                x[v][p - ns] -= amount;
            }
            v = p;
        }
        let cap = dist[end];
        for v in 0..nv {
            pi[v] += dist[v].min(cap);
        }
    }
    let mut out = Vec::new();
    for (i, row) in x.iter().enumerate() {
        for (j, &a) in row.iter().enumerate() {
            if a > 0.0 {
                out.push((i, j, a));
            }
        }
    }
    Ok(out)
}

/// Minimum-cost routing of a balanced demand on a stored graph: transport
/// between sources and sinks under shortest-path distances, each pair then
/// routed along one shortest path.
fn route_exact(adj: &Adjacency, d: &[f64]) -> Result<SignedFlow> {
    let sources: Vec<usize> = (0..d.len()).filter(|&v| d[v] > 0.0).collect();
    let sinks: Vec<usize> = (0..d.len()).filter(|&v| d[v] < 0.0).collect();
    let mut flow = SignedFlow::new();
    if sources.is_empty() || sinks.is_empty() {
        return Ok(flow);
    }
    let trees: Vec<(Vec<f64>, Vec<usize>)> = sources.iter().map(|&s| dijkstra(adj, s, f64::INFINITY)).collect();
    let cost: Vec<Vec<f64>> = trees.iter().map(|(dist, _)| sinks.iter().map(|&t| dist[t]).collect()).collect();
    let supply: Vec<f64> = sources.iter().map(|&s| d[s]).collect();
    let demand: Vec<f64> = sinks.iter().map(|&t| -d[t]).collect();
    for (i, j, a) in transport(&supply, &demand, &cost)? {
        let parent = &trees[i].1;
        let mut v = sinks[j];
        while v != sources[i] {
            let p = parent[v];
            flow.add(p, v, a);
            v = p;
        }
    }
    Ok(flow)
}

/// One probe of the binary search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub t: f64,
    /// Game value at the averaged minimizer.
    pub value: f64,
    /// Lower bound on the game optimum from the averaged maximizer.
    pub lower: f64,
    pub threshold: f64,
    pub certified: bool,
    pub iterations: usize,
    pub passes: u64,
}

/// Result of [`approx_transshipment`].
#[derive(Clone, Debug)]
pub struct TransshipSolution {
    pub flow: SignedFlow,
    /// `sum_e w_e |f_e|`.
    pub value: f64,
    /// Initial bracket `(t_min, t_max)` of the search.
    pub bracket: (f64, f64),
    pub probes: Vec<Probe>,
    pub spanner_edges: usize,
    pub alpha: f64,
    pub beta: f64,
}

/// Zero-weight edges merged into single vertices.
struct Contraction {
    core: TransshipInstance,
    /// Original endpoints of every core edge.
    origin: Vec<(usize, usize)>,
    forest: Vec<(usize, usize)>,
}

fn contract(inst: &TransshipInstance) -> Result<Contraction> {
    let n = inst.n;
    let mut uf: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut forest = Vec::new();
    for e in inst.edges.records() {
        if e.w == 0.0 {
            let (a, b) = (find(&mut uf, e.u), find(&mut uf, e.v));
            if a != b {
                uf[a] = b;
                forest.push((e.u, e.v));
            }
        }
    }
    let mut id = vec![usize::MAX; n];
    let mut rep = vec![0; n];
    let mut count = 0;
    for v in 0..n {
        let r = find(&mut uf, v);
        if id[r] == usize::MAX {
            id[r] = count;
            count += 1;
        }
        rep[v] = id[r];
    }
    let mut d = vec![0.0; count];
    for v in 0..n {
        d[rep[v]] += inst.d[v];
    }
    let mut best: HashMap<(usize, usize), (f64, usize, usize)> = HashMap::new();
    for e in inst.edges.records() {
        let (a, b) = (rep[e.u], rep[e.v]);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        let cand = (e.w, e.u, e.v);
        best.entry(key).and_modify(|c| if e.w < c.0 { *c = cand }).or_insert(cand);
    }
    let mut list: Vec<((usize, usize), (f64, usize, usize))> = best.into_iter().collect();
    list.sort_by(|a, b| a.0.cmp(&b.0));
    let mut recs = Vec::with_capacity(list.len());
    let mut origin = Vec::with_capacity(list.len());
    for ((a, b), (w, u, v)) in list {
        recs.push(EdgeRecord::new(a, b, w));
        origin.push(if rep[u] == a { (u, v) } else { (v, u) });
    }
    let core = TransshipInstance { n: count, edges: StreamSource::from_records(recs), d };
    Ok(Contraction { core, origin, forest })
}

/// Maps a core flow back to the original vertices and settles each merged
/// vertex's demand along its zero-weight forest.
fn expand(c: &Contraction, inst: &TransshipInstance, core_flow: &SignedFlow) -> SignedFlow {
    let index: HashMap<(usize, usize), usize> =
        c.core.edges.records().iter().enumerate().map(|(i, e)| ((e.u, e.v), i)).collect();
    let mut flow = SignedFlow::new();
    for (a, b, x) in core_flow.iter() {
        let (u, v) = c.origin[index[&(a, b)]];
        flow.add(u, v, x);
    }
    if c.forest.is_empty() {
        return flow;
    }
    let div = flow.divergence(inst.n);
    let mut excess: Vec<f64> = (0..inst.n).map(|v| inst.d[v] - div[v]).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); inst.n];
    for &(u, v) in &c.forest {
        adj[u].push(v);
        adj[v].push(u);
    }
    // Peel leaves, pushing each leaf's excess to its neighbour.
    let mut deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut gone = vec![false; inst.n];
    let mut stack: Vec<usize> = (0..inst.n).filter(|&v| deg[v] == 1).collect();
    while let Some(v) = stack.pop() {
        if gone[v] || deg[v] != 1 {
            continue;
        }
        gone[v] = true;
        let p = *adj[v].iter().find(|&&p| !gone[p]).expect("leaf has a neighbour");
        flow.add(v, p, excess[v]);
        excess[p] += excess[v];
        excess[v] = 0.0;
        deg[p] -= 1;
        if deg[p] == 1 {
            stack.push(p);
        }
    }
    flow
}

fn check_components(adj: &Adjacency, d: &[f64]) -> Result<()> {
    for comp in components(adj) {
        let total: f64 = comp.iter().map(|&v| d[v]).sum();
        let scale: f64 = comp.iter().map(|&v| d[v].abs()).sum::<f64>().max(1.0);
        if total.abs() > 1e-9 * scale {
            return Err(Error::Infeasible(format!(
                "demand on the component of vertex {} sums to {total}",
                comp[0]
            )));
        }
    }
    Ok(())
}

/// Flow meeting `d` exactly with cost at most `(1 + eps) opt(d)` when the
/// probes certify budgets close to the optimum.
pub fn approx_transshipment(
    inst: &TransshipInstance,
    eps: f64,
    seed: u64,
    cfg: &Config,
    meter: &ResourceMeter,
) -> Result<TransshipSolution> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::arg(format!("eps must lie in (0, 1), got {eps}")));
    }
    let c = contract(inst)?;
    let core = &c.core;
    let h = build_spanner(core.n, &core.edges, meter);
    let h_adj = adjacency(core.n, &h.edges);
    check_components(&h_adj, &core.d)?;
    let weights = core.weight_map();
    let w = |u: usize, v: usize| weights[&(u, v)];

    let routed = route_exact(&h_adj, &core.d)?;
    let t_top = routed.cost(w);
    let mut solution = TransshipSolution {
        flow: SignedFlow::new(),
        value: 0.0,
        bracket: (t_top / h.stretch(), t_top),
        probes: Vec::new(),
        spanner_edges: h.edges.len(),
        alpha: 0.0,
        beta: 0.0,
    };
    if t_top == 0.0 {
        solution.flow = expand(&c, inst, &routed);
        return Ok(solution);
    }
    let r = build_stretch_approx(&h, &core.edges, seed, cfg, meter);
    solution.alpha = r.alpha;
    solution.beta = r.beta;
    let log_n = (core.n.max(3) as f64).ln();
    let (mut t_min, mut t_max) = solution.bracket;
    let mut best = None;
    while t_max >= (1.0 + cfg.search_guard * eps / log_n) * t_min {
        let t = 0.5 * (t_min + t_max);
        let game = flow_constrained_game(core, &r, t)?;
        let threshold = eps * t / (cfg.c_l * log_n);
        let before = meter.passes();
        let report = solve_to_target(&game, threshold.min(t * r.alpha), threshold, cfg, meter)?;
        let certified = report.value <= threshold;
        solution.probes.push(Probe {
            t,
            value: report.value,
            lower: report.lower,
            threshold,
            certified,
            iterations: report.t,
            passes: meter.passes() - before,
        });
        if certified {
            t_max = t;
            best = Some((t, report));
        } else {
            t_min = t;
        }
    }

    let head = match best {
        Some((t, mut report)) => {
            let game = flow_constrained_game(core, &r, t)?;
            let mut cc = SignedCanceller::new(core.n, meter);
            let mut pending: Option<(usize, f64)> = None;
            let mut err = None;
            let mut flush = |cc: &mut SignedCanceller, edge: usize, net: f64| {
                let e = core.edges.get(edge);
                let x = t * net / e.w;
                if x != 0.0 && err.is_none() {
                    if let Err(er) = cc.push(e.u, e.v, x, e.w) {
                        err = Some(er);
                    }
                }
            };
            for_each_averaged_coordinate(&mut report, &game, meter, |row, _, x| {
                let (edge, sign) = (row / 2, if row % 2 == 0 { 1.0 } else { -1.0 });
                match pending {
                    Some((e, acc)) if e == edge => pending = Some((e, acc + sign * x)),
                    Some((e, acc)) => {
                        flush(&mut cc, e, acc);
                        pending = Some((edge, sign * x));
                    }
                    None => pending = Some((edge, sign * x)),
                }
            })?;
            if let Some((e, acc)) = pending {
                flush(&mut cc, e, acc);
            }
            if let Some(e) = err {
                return Err(e);
            }
            cc.finish()?
        }
        None => routed,
    };
    let div = head.divergence(core.n);
    let residual: Vec<f64> = core.d.iter().zip(&div).map(|(a, b)| a - b).collect();
    let mut total = head;
    for (u, v, x) in route_exact(&h_adj, &residual)?.iter() {
        total.add(u, v, x);
    }
    let rounded = round_flow(core.n, &total, &weights, meter)?;
    solution.flow = expand(&c, inst, &rounded);
    let all = inst.weight_map();
    solution.value = solution.flow.cost(|u, v| all[&(u, v)]);
    Ok(solution)
}

/// An `s`-`t` path of length at most `(1 + eps) d(s, t)`: the shortest path
/// inside the support of an approximate unit `s`-`t` flow.
pub fn shortest_path(
    inst: &TransshipInstance,
    s: usize,
    t: usize,
    eps: f64,
    seed: u64,
    cfg: &Config,
    meter: &ResourceMeter,
) -> Result<(Vec<usize>, f64)> {
    if s >= inst.n || t >= inst.n {
        return Err(Error::arg(format!("endpoints must be below {}", inst.n)));
    }
    if s == t {
        return Err(Error::arg("source and target coincide"));
    }
    let mut comp: Vec<usize> = (0..inst.n).collect();
    let _words = meter.reserve(inst.n);
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    inst.edges.for_each_pass(meter, |_, e| {
        let (a, b) = (find(&mut comp, e.u), find(&mut comp, e.v));
        comp[a] = b;
    });
    if find(&mut comp, s) != find(&mut comp, t) {
        return Err(Error::Infeasible(format!("{t} is unreachable from {s}")));
    }
    let mut d = vec![0.0; inst.n];
    d[s] = 1.0;
    d[t] = -1.0;
    let unit = TransshipInstance { n: inst.n, edges: inst.edges.clone(), d };
    let sol = approx_transshipment(&unit, eps, seed, cfg, meter)?;
    let all = inst.weight_map();
    let support: Vec<(usize, usize, f64)> = sol.flow.iter().map(|(u, v, _)| (u, v, all[&(u, v)])).collect();
    let adj = adjacency(inst.n, &support);
    let (dist, parent) = dijkstra(&adj, s, f64::INFINITY);
    if !dist[t].is_finite() {
        return Err(Error::Infeasible(format!("{t} is unreachable from {s}")));
    }
    let mut path = vec![t];
    let mut v = t;
    while v != s {
        v = parent[v];
        path.push(v);
    }
    path.reverse();
    Ok((path, dist[t]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(n: usize, edges: &[(usize, usize, f64)], d: Vec<f64>) -> TransshipInstance {
        let recs = edges.iter().map(|&(u, v, w)| EdgeRecord::new(u, v, w)).collect();
        TransshipInstance::new(n, StreamSource::from_records(recs), d).unwrap()
    }

    #[test]
    fn ingestion_orients_and_dedups() {
        let g = inst(3, &[(2, 0, 4.0), (0, 2, 3.0), (1, 1, 1.0)], vec![0.0; 3]);
        assert_eq!(g.edge_list(), vec![(0, 2, 3.0)]);
    }

    #[test]
    fn unbalanced_demand_is_rejected() {
        let recs = vec![EdgeRecord::new(0, 1, 1.0)];
        assert!(TransshipInstance::new(2, StreamSource::from_records(recs), vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn spanner_of_a_tree_is_the_tree() {
        let g = inst(4, &[(0, 1, 1.0), (1, 2, 2.0), (1, 3, 5.0)], vec![0.0; 4]);
        let h = build_spanner(4, &g.edges, &ResourceMeter::new());
        assert_eq!(h.edges.len(), 3);
    }

    #[test]
    fn transport_matches_hand_solution() {
        let plan = transport(&[1.0, 1.0], &[1.0, 1.0], &[vec![1.0, 3.0], vec![1.0, 10.0]]).unwrap();
        let cost: f64 = plan.iter().map(|&(i, j, a)| a * [[1.0, 3.0], [1.0, 10.0]][i][j]).sum();
        assert_eq!(cost, 4.0);
    }

    #[test]
    fn stretch_rows_dominate_distances() {
        let g = inst(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 2.5)], vec![0.0; 4]);
        let m = ResourceMeter::new();
        let h = build_spanner(4, &g.edges, &m);
        let r = build_stretch_approx(&h, &g.edges, 3, &Config::default(), &m);
        assert!(r.norm(&[1.0, 0.0, -1.0, 0.0]) >= 2.0 - 1e-12);
        assert!(r.norm(&[1.0, 0.0, 0.0, -1.0]) >= 2.5 - 1e-12);
    }

    #[test]
    fn single_edge_and_path() {
        let m = ResourceMeter::new();
        let cfg = Config::default();
        let s = approx_transshipment(&inst(2, &[(0, 1, 7.0)], vec![1.0, -1.0]), 0.1, 0, &cfg, &m).unwrap();
        assert!((s.value - 7.0).abs() < 1e-9);
        let p = inst(3, &[(0, 1, 1.0), (1, 2, 1.0)], vec![1.0, 0.0, -1.0]);
        let s = approx_transshipment(&p, 0.1, 0, &cfg, &m).unwrap();
        assert!((s.value - 2.0).abs() < 1e-9);
        assert!((s.flow.get(0, 1) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_weight_edges_are_contracted() {
        let g = inst(3, &[(0, 1, 0.0), (1, 2, 2.0)], vec![1.0, 0.0, -1.0]);
        let s = approx_transshipment(&g, 0.1, 0, &Config::default(), &ResourceMeter::new()).unwrap();
        let div = s.flow.divergence(3);
        assert!((div[0] - 1.0).abs() < 1e-12 && div[1].abs() < 1e-12);
        assert!((s.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn triangle_path_avoids_heavy_edge() {
        let g = inst(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 3.0)], vec![0.0; 3]);
        let (path, len) = shortest_path(&g, 0, 2, 0.1, 0, &Config::default(), &ResourceMeter::new()).unwrap();
        assert_eq!(path, vec![0, 1, 2]);
        assert!((len - 2.0).abs() < 1e-12);
    }
}
