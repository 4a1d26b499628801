//! Exact dense baselines for checking the streaming pipelines.
//!
//! Nothing here touches the meter or shares code with the metered modules.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

/// How an oracle value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    HopcroftKarp,
    Hungarian,
    Simplex,
    Enumeration,
    Dijkstra,
    BellmanFord,
}

/// An exact value together with the object that attains it.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult<C> {
    pub value: f64,
    pub certificate: C,
    pub method: Method,
}

/// Maximum-cardinality bipartite matching.
pub fn hopcroft_karp(n_left: usize, n_right: usize, edges: &[(usize, usize)]) -> OracleResult<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); n_left];
    for &(l, r) in edges {
        adj[l].push(r);
    }
    const FREE: usize = usize::MAX;
    let mut mate_l = vec![FREE; n_left];
    let mut mate_r = vec![FREE; n_right];
    let mut dist = vec![0usize; n_left];
    loop {
        let mut queue = VecDeque::new();
        let mut found = false;
        for l in 0..n_left {
            if mate_l[l] == FREE {
                dist[l] = 0;
                queue.push_back(l);
            } else {
                dist[l] = usize::MAX;
            }
        }
        while let Some(l) = queue.pop_front() {
            for &r in &adj[l] {
                let next = mate_r[r];
                if next == FREE {
                    found = true;
                } else if dist[next] == usize::MAX {
                    dist[next] = dist[l] + 1;
                    queue.push_back(next);
                }
            }
        }
        if !found {
            break;
        }
        fn augment(
            l: usize,
            adj: &[Vec<usize>],
            mate_l: &mut [usize],
            mate_r: &mut [usize],
            dist: &mut [usize],
        ) -> bool {
            for i in 0..adj[l].len() {
                let r = adj[l][i];
                let next = mate_r[r];
                if next == usize::MAX || (dist[next] == dist[l] + 1 && augment(next, adj, mate_l, mate_r, dist)) {
                    mate_l[l] = r;
                    mate_r[r] = l;
                    return true;
                }
            }
            dist[l] = usize::MAX;
            false
        }
        for l in 0..n_left {
            if mate_l[l] == FREE {
                augment(l, &adj, &mut mate_l, &mut mate_r, &mut dist);
            }
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n_left).filter(|&l| mate_l[l] != FREE).map(|l| (l, mate_l[l])).collect();
    OracleResult { value: pairs.len() as f64, certificate: pairs, method: Method::HopcroftKarp }
}

/// Best matching by exhaustive search over left vertices. Exponential.
pub fn enumerate_matchings(
    n_left: usize,
    n_right: usize,
    edges: &[(usize, usize, f64)],
) -> OracleResult<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); n_left];
    for &(l, r, w) in edges {
        adj[l].push((r, w));
    }
    fn go(
        l: usize,
        adj: &[Vec<(usize, f64)>],
        used: &mut [bool],
        cur: &mut Vec<(usize, usize)>,
        cur_w: f64,
        best: &mut (f64, Vec<(usize, usize)>),
    ) {
        if l == adj.len() {
            if cur_w > best.0 {
                *best = (cur_w, cur.clone());
            }
            return;
        }
        go(l + 1, adj, used, cur, cur_w, best);
        for &(r, w) in &adj[l] {
            if !used[r] {
                used[r] = true;
                cur.push((l, r));
                go(l + 1, adj, used, cur, cur_w + w, best);
                cur.pop();
                used[r] = false;
            }
        }
    }
    let mut best = (0.0, Vec::new());
    go(0, &adj, &mut vec![false; n_right], &mut Vec::new(), 0.0, &mut best);
    OracleResult { value: best.0, certificate: best.1, method: Method::Enumeration }
}

/// Maximum-weight bipartite matching (not necessarily perfect) for
/// nonnegative weights, by the O(N^3) assignment algorithm on a padded square.
pub fn hungarian(n_left: usize, n_right: usize, edges: &[(usize, usize, f64)]) -> OracleResult<Vec<(usize, usize)>> {
    let n = n_left.max(n_right);
    if n == 0 {
        return OracleResult { value: 0.0, certificate: Vec::new(), method: Method::Hungarian };
    }
    let mut cost = vec![vec![0.0f64; n + 1]; n + 1];
    let mut real = vec![vec![false; n + 1]; n + 1];
    for &(l, r, w) in edges {
        if -w < cost[l + 1][r + 1] {
            cost[l + 1][r + 1] = -w;
            real[l + 1][r + 1] = true;
        }
    }
    // Potentials-based shortest augmenting path assignment (1-indexed).
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0][j] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs = Vec::new();
    let mut value = 0.0;
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && real[i][j] && cost[i][j] < 0.0 {
            pairs.push((i - 1, j - 1));
            value -= cost[i][j];
        }
    }
    pairs.sort_unstable();
    OracleResult { value, certificate: pairs, method: Method::Hungarian }
}

/// `min c^T z` subject to `eq` rows (`a z = b`), `le` rows (`a z <= b`) and `z >= 0`.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub le: Vec<(Vec<f64>, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal(OracleResult<Vec<f64>>),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal(r) => Some(r.value),
            _ => None,
        }
    }
}

const LP_TOL: f64 = 1e-9;

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.rows[r][c];
        for k in 0..=w {
            self.rows[r][k] /= p;
        }
        let pr = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for k in 0..=w {
                        row[k] -= f * pr[k];
                    }
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `obj^T z` over the current basis with Bland's rule; only the
    /// first `allowed` columns may enter. Returns false when unbounded.
    fn optimize(&mut self, obj: &[f64], allowed: usize) -> bool {
        let w = self.width;
        loop {
            let mut enter = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut red = obj[j];
                for (i, &bj) in self.basis.iter().enumerate() {
                    red -= obj[bj] * self.rows[i][j];
                }
                if red < -LP_TOL {
                    enter = Some(j);
                    break;
                }
            }
            let Some(c) = enter else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > LP_TOL {
                    let ratio = self.rows[i][w] / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - LP_TOL || (ratio <= lr + LP_TOL && self.basis[i] < self.basis[li]) {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                None => return false,
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }
}

/// Two-phase dense simplex with Bland's rule.
pub fn exact_lp(lp: &LinearProgram) -> LpOutcome {
    let nv = lp.c.len();
    let n_le = lp.le.len();
    let rows_in: Vec<(Vec<f64>, f64, Option<usize>)> = lp
        .eq
        .iter()
        .map(|(a, b)| (a.clone(), *b, None))
        .chain(lp.le.iter().enumerate().map(|(k, (a, b))| (a.clone(), *b, Some(k))))
        .collect();
    let nr = rows_in.len();
    // Columns: originals, slacks for <= rows, artificials per row.
    let width = nv + n_le + nr;
    let mut rows = Vec::with_capacity(nr);
    for (i, (a, b, slack)) in rows_in.iter().enumerate() {
        let mut row = vec![0.0; width + 1];
        row[..a.len()].copy_from_slice(a);
        if let Some(k) = slack {
            row[nv + k] = 1.0;
        }
        row[width] = *b;
        if *b < 0.0 {
            row.iter_mut().for_each(|x| *x = -*x);
        }
        row[nv + n_le + i] = 1.0;
        rows.push(row);
    }
    let mut tab = Tableau { rows, basis: (0..nr).map(|i| nv + n_le + i).collect(), width };
    let mut phase1 = vec![0.0; width];
    phase1[nv + n_le..].iter_mut().for_each(|x| *x = 1.0);
    tab.optimize(&phase1, width);
    let infeas: f64 = tab.basis.iter().enumerate().filter(|(_, &b)| b >= nv + n_le).map(|(i, _)| tab.rows[i][width]).sum();
    if infeas > 1e-7 {
        return LpOutcome::Infeasible;
    }
    // Drive artificials out of the basis or drop redundant rows.
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= nv + n_le {
            match (0..nv + n_le).find(|&j| tab.rows[i][j].abs() > 1e-9) {
                Some(j) => tab.pivot(i, j),
                None => {
                    tab.rows.remove(i);
                    tab.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    let mut obj = vec![0.0; width];
    obj[..nv].copy_from_slice(&lp.c);
    if !tab.optimize(&obj, nv + n_le) {
        return LpOutcome::Unbounded;
    }
    let mut z = vec![0.0; nv];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < nv {
            z[b] = tab.rows[i][width];
        }
    }
    let value = lp.c.iter().zip(&z).map(|(c, x)| c * x).sum();
    LpOutcome::Optimal(OracleResult { value, certificate: z, method: Method::Simplex })
}

/// Optimum of `min_{x in simplex} c^T x + |A^T x - b|_1` for dense `A` (`m x n`).
pub fn box_simplex_value(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let m = a.len();
    let n = b.len();
    // Variables: x (m), s (n). s_j >= +-(A^T x - b)_j.
    let mut lp = LinearProgram { c: c.iter().copied().chain(std::iter::repeat(1.0).take(n)).collect(), ..Default::default() };
    lp.eq.push(((0..m + n).map(|i| if i < m { 1.0 } else { 0.0 }).collect(), 1.0));
    for j in 0..n {
        for sign in [1.0, -1.0] {
            let mut row = vec![0.0; m + n];
            for i in 0..m {
                row[i] = sign * a[i][j];
            }
            row[m + j] = -1.0;
            lp.le.push((row, sign * b[j]));
        }
    }
    exact_lp(&lp).value().expect("simplex-constrained program is feasible and bounded")
}

/// Exact optimal transport cost between marginals `ell` and `r`.
pub fn transport_value(cost: &[Vec<f64>], ell: &[f64], r: &[f64]) -> f64 {
    let (nl, nr) = (ell.len(), r.len());
    let mut lp = LinearProgram { c: cost.iter().flatten().copied().collect(), ..Default::default() };
    for i in 0..nl {
        let row = (0..nl * nr).map(|k| if k / nr == i { 1.0 } else { 0.0 }).collect();
        lp.eq.push((row, ell[i]));
    }
    for j in 0..nr {
        let row = (0..nl * nr).map(|k| if k % nr == j { 1.0 } else { 0.0 }).collect();
        lp.eq.push((row, r[j]));
    }
    exact_lp(&lp).value().expect("balanced transport is feasible")
}

/// Exact undirected transshipment cost `min sum w_e |f_e|` with net outflow `d`.
/// Returns `None` when the demand cannot be routed.
pub fn transshipment_value(n: usize, edges: &[(usize, usize, f64)], d: &[f64]) -> Option<f64> {
    let m = edges.len();
    // f = p - q per edge, oriented u -> v.
    let mut lp = LinearProgram { c: edges.iter().chain(edges).map(|e| e.2).collect(), ..Default::default() };
    for v in 0..n {
        let mut row = vec![0.0; 2 * m];
        for (k, &(a, b, _)) in edges.iter().enumerate() {
            let s = if a == v { 1.0 } else if b == v { -1.0 } else { 0.0 };
            row[k] = s;
            row[m + k] = -s;
        }
        lp.eq.push((row, d[v]));
    }
    exact_lp(&lp).value()
}

#[derive(Copy, Clone, PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(self.1.cmp(&o.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Single-source distances on an undirected graph; unreachable is infinite.
pub fn dijkstra(n: usize, edges: &[(usize, usize, f64)], s: usize) -> OracleResult<Vec<f64>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v, w) in edges {
        adj[u].push((v, w));
        adj[v].push((u, w));
    }
    let mut dist = vec![f64::INFINITY; n];
    dist[s] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Item(0.0, s));
    while let Some(Item(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            if d + w < dist[v] {
                dist[v] = d + w;
                heap.push(Item(d + w, v));
            }
        }
    }
    OracleResult { value: 0.0, certificate: dist, method: Method::Dijkstra }
}

pub fn bellman_ford(n: usize, edges: &[(usize, usize, f64)], s: usize) -> OracleResult<Vec<f64>> {
    let mut dist = vec![f64::INFINITY; n];
    dist[s] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for &(u, v, w) in edges {
            if dist[u] + w < dist[v] {
                dist[v] = dist[u] + w;
                changed = true;
            }
            if dist[v] + w < dist[u] {
                dist[u] = dist[v] + w;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    OracleResult { value: 0.0, certificate: dist, method: Method::BellmanFord }
}

/// Which proximal step a dense reference iterate belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DenseStep {
    W,
    Z,
}

/// Dense mirror-prox with alternating minimization, holding `x` explicitly
/// and updating it multiplicatively. Calls `trace(outer, step, k, x, y)` after
/// every inner step with the simplex iterate (indexed by original row, zero on
/// rows dropped by the cost cutoff) and the box iterate computed from it.
/// Returns the objective `c^T x̄ + |A^T x̄ - b|_1` of the averaged iterate.
pub fn dense_mirror_prox(
    a: &[Vec<f64>],
    b: &[f64],
    c: &[f64],
    outer: usize,
    inner: usize,
    mut trace: impl FnMut(usize, DenseStep, usize, &[f64], &[f64]),
) -> f64 {
    let m = a.len();
    let n = b.len();
    let width = a.iter().map(|row| row.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let c_min = c.iter().copied().fold(f64::INFINITY, f64::min);
    let keep: Vec<bool> = c.iter().map(|&ci| ci <= c_min + 2.0 * width).collect();
    let cs: Vec<f64> = c.iter().map(|&ci| ci - c_min).collect();
    let bc: Vec<f64> = b.iter().map(|&x| x.clamp(-width, width)).collect();
    let scale = if width > 0.0 { width } else { 1.0 };
    let kept = keep.iter().filter(|&&k| k).count() as f64;
    let atx = |x: &[f64], absolute: bool| -> Vec<f64> {
        (0..n)
            .map(|j| (0..m).map(|i| x[i] * if absolute { a[i][j].abs() } else { a[i][j] }).sum())
            .collect()
    };
    let median = |g: f64, d: f64| -> f64 {
        if d > 0.0 {
            (-g / d).max(-1.0).min(1.0)
        } else if g == 0.0 {
            0.0
        } else {
            -g.signum()
        }
    };
    let step = |xt: &[f64], yt: &[f64], ysrc: &[f64], ycur: &[f64]| -> Vec<f64> {
        let mut logs = vec![f64::NEG_INFINITY; m];
        for i in 0..m {
            if keep[i] {
                let mut g = cs[i] / 3.0;
                for j in 0..n {
                    g += a[i][j] * ysrc[j] / 3.0 + a[i][j].abs() * (ycur[j] * ycur[j] - yt[j] * yt[j]);
                }
                logs[i] = xt[i].ln() - g / (10.0 * scale);
            }
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut x: Vec<f64> = logs.iter().map(|&l| (l - top).exp()).collect();
        let s: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= s);
        x
    };
    let mut xt: Vec<f64> = keep.iter().map(|&k| if k { 1.0 / kept } else { 0.0 }).collect();
    let mut yt = vec![0.0; n];
    let mut xbar = vec![0.0; m];
    for t in 0..outer {
        let ax_t = atx(&xt, false);
        let abs_t = atx(&xt, true);
        let mut run = |gamma: &[f64], ysrc: &[f64], tag: DenseStep| -> (Vec<f64>, Vec<f64>) {
            let mut x = xt.clone();
            let mut y = yt.clone();
            for k in 0..inner {
                x = step(&xt, &yt, ysrc, &y);
                let d: Vec<f64> = atx(&x, true).iter().map(|v| 2.0 * v).collect();
                y = (0..n).map(|j| median(gamma[j], d[j])).collect();
                trace(t, tag, k, &x, &y);
            }
            (x, y)
        };
        let gw: Vec<f64> = (0..n).map(|j| (bc[j] - ax_t[j]) / 3.0 - 2.0 * yt[j] * abs_t[j]).collect();
        let (xw, yw) = run(&gw, &yt.clone(), DenseStep::W);
        let ax_w = atx(&xw, false);
        let gz: Vec<f64> = (0..n).map(|j| (bc[j] - ax_w[j]) / 3.0 - 2.0 * yt[j] * abs_t[j]).collect();
        let (xz, yz) = run(&gz, &yw, DenseStep::Z);
        for i in 0..m {
            xbar[i] += xw[i] / outer as f64;
        }
        xt = xz;
        yt = yz;
    }
    let ax = atx(&xbar, false);
    let lin: f64 = (0..m).map(|i| c[i] * xbar[i]).sum();
    lin + (0..n).map(|j| (ax[j] - b[j]).abs()).sum::<f64>()
}
