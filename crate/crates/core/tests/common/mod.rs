#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semistream::linkcut::{cycle_cancel_stream, DynForest, Objective};
use semistream::matching::{overflow, remove_overflow, BipartiteGraph, Demand};
use semistream::stream::{emit_stream, EdgeRecord, FlowRecord};
use semistream::{ResourceMeter, SparseFlow, StreamSource};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random bipartite graph with distinct edges.
pub fn random_bipartite(rng: &mut ChaCha8Rng, n_left: usize, n_right: usize, m: usize) -> BipartiteGraph {
    let mut all: Vec<(usize, usize)> = (0..n_left).flat_map(|l| (0..n_right).map(move |r| (l, r))).collect();
    all.shuffle(rng);
    all.truncate(m.min(all.len()));
    BipartiteGraph::from_pairs(n_left, n_right, &all).unwrap()
}

pub fn random_weighted_bipartite(rng: &mut ChaCha8Rng, n_left: usize, n_right: usize, m: usize) -> BipartiteGraph {
    let g = random_bipartite(rng, n_left, n_right, m);
    let recs: Vec<EdgeRecord> =
        g.pairs().into_iter().map(|(l, r)| EdgeRecord::new(l, r, rng.gen_range(0.0..1.0))).collect();
    BipartiteGraph::new(n_left, n_right, StreamSource::from_records(recs)).unwrap()
}

/// Connected undirected graph: a random spanning tree plus extra edges.
pub fn random_connected(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> Vec<(usize, usize, f64)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 1..n {
        let p = order[rng.gen_range(0..i)];
        edges.push((p.min(order[i]), p.max(order[i]), rng.gen_range(1.0..10.0)));
    }
    for _ in 0..extra {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            edges.push((a.min(b), a.max(b), rng.gen_range(1.0..10.0)));
        }
    }
    edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    edges.dedup_by(|x, y| (x.0, x.1) == (y.0, y.1));
    edges
}

/// Parent-pointer forest with one value per child edge, answering every
/// query by walking to the root.
pub struct NaiveForest {
    parent: Vec<Option<usize>>,
    value: Vec<f64>,
}

impl NaiveForest {
    pub fn new(n: usize) -> Self {
        NaiveForest { parent: vec![None; n], value: vec![0.0; n] }
    }

    pub fn path(&self, v: usize) -> Vec<usize> {
        let mut p = vec![v];
        let mut x = v;
        while let Some(q) = self.parent[x] {
            p.push(q);
            x = q;
        }
        p
    }

    pub fn root(&self, v: usize) -> usize {
        *self.path(v).last().unwrap()
    }

    pub fn change_root(&mut self, r: usize) {
        let p = self.path(r);
        let vals: Vec<f64> = p.iter().map(|&x| self.value[x]).collect();
        for i in (0..p.len() - 1).rev() {
            self.parent[p[i + 1]] = Some(p[i]);
            self.value[p[i + 1]] = vals[i];
        }
        self.parent[r] = None;
    }

    pub fn link(&mut self, v: usize, w: usize, value: f64) -> bool {
        if self.root(v) == self.root(w) {
            return false;
        }
        self.change_root(v);
        self.parent[v] = Some(w);
        self.value[v] = value;
        true
    }

    pub fn cut(&mut self, v: usize) -> bool {
        self.parent[v].take().is_some()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn lca(&self, a: usize, b: usize) -> Option<usize> {
        let pa = self.path(a);
        self.path(b).into_iter().find(|x| pa.contains(x))
    }

    pub fn path_min(&self, v: usize) -> Option<f64> {
        let p = self.path(v);
        p[..p.len() - 1].iter().map(|&x| self.value[x]).reduce(f64::min)
    }

    pub fn path_sum(&self, v: usize) -> f64 {
        let p = self.path(v);
        p[..p.len() - 1].iter().map(|&x| self.value[x]).sum()
    }

    pub fn path_add(&mut self, v: usize, d: f64) {
        let p = self.path(v);
        for &x in &p[..p.len() - 1] {
            self.value[x] += d;
        }
    }
}

/// Runs `ops` random operations on both forests and returns the number of
/// disagreeing answers.
pub fn linkcut_differential(seed: u64, n: usize, ops: usize) -> usize {
    let mut rng = rng(seed);
    let mut fast = DynForest::new(n);
    let mut slow = NaiveForest::new(n);
    let mut bad = 0;
    for _ in 0..ops {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        match rng.gen_range(0..9) {
            0 | 1 => {
                let val = rng.gen_range(0..20) as f64;
                let ok = slow.link(a, b, val);
                bad += usize::from(fast.link(a, b, val).is_ok() != ok);
            }
            2 => {
                let ok = slow.cut(a);
                bad += usize::from(fast.cut(a).is_ok() != ok);
            }
            3 => {
                slow.change_root(a);
                fast.change_root(a);
            }
            4 => {
                let want = if slow.root(a) == slow.root(b) { slow.lca(a, b) } else { None };
                bad += usize::from(fast.lca(a, b) != want);
            }
            5 => bad += usize::from(fast.path_min(a) != slow.path_min(a)),
            6 => {
                let d = rng.gen_range(-3..4) as f64;
                slow.path_add(a, d);
                fast.path_add(a, d);
            }
            7 => bad += usize::from(fast.path_sum(a) != slow.path_sum(a)),
            _ => {
                bad += usize::from(fast.parent(a) != slow.parent(a));
                bad += usize::from(fast.find_root(a) != slow.root(a));
                bad += usize::from(fast.connected(a, b) != (slow.root(a) == slow.root(b)));
            }
        }
    }
    bad
}

/// Random nonnegative sparse flow with a demand vector it usually overshoots.
pub fn random_flow_case(rng: &mut ChaCha8Rng) -> (usize, usize, SparseFlow, Demand) {
    let (nl, nr) = (rng.gen_range(1..8), rng.gen_range(1..8));
    let mut x = SparseFlow::new();
    for _ in 0..rng.gen_range(0..3 * (nl + nr)) {
        x.add(rng.gen_range(0..nl), rng.gen_range(0..nr), rng.gen_range(0.0..2.0));
    }
    let d = Demand {
        left: (0..nl).map(|_| rng.gen_range(0.0..3.0)).collect(),
        right: (0..nr).map(|_| rng.gen_range(0.0..3.0)).collect(),
    };
    (nl, nr, x, d)
}

/// Checks the three overflow-removal postconditions; returns a description
/// of the first violation.
pub fn check_remove_overflow(nl: usize, nr: usize, x: &SparseFlow, d: &Demand) -> Result<(), String> {
    let y = remove_overflow(x, d);
    for (l, r, v) in y.iter() {
        if v > x.get(l, r) + 1e-9 || v < 0.0 {
            return Err(format!("edge ({l}, {r}) grew from {} to {v}", x.get(l, r)));
        }
    }
    let (ml, mr) = y.marginals(nl, nr);
    for (got, want) in ml.iter().zip(&d.left).chain(mr.iter().zip(&d.right)) {
        if *got > want + 1e-9 {
            return Err(format!("marginal {got} exceeds demand {want}"));
        }
    }
    if y.total() < x.total() - overflow(x, d) - 1e-9 {
        return Err(format!("mass {} below {} - {}", y.total(), x.total(), overflow(x, d)));
    }
    Ok(())
}

/// Random multiflow records, with duplicates, for cancelling.
pub fn random_records(rng: &mut ChaCha8Rng, nl: usize, nr: usize, len: usize) -> Vec<FlowRecord> {
    (0..len)
        .map(|_| FlowRecord { u: rng.gen_range(0..nl), v: rng.gen_range(0..nr), value: rng.gen_range(0.0..1.0) })
        .collect()
}

/// Cancels `recs` and checks marginals, weight, support and acyclicity.
pub fn check_cycle_cancel(
    nl: usize,
    nr: usize,
    recs: Vec<FlowRecord>,
    w: impl Fn(usize, usize) -> f64,
) -> Result<(), String> {
    let mut input = SparseFlow::new();
    for r in &recs {
        input.add(r.u, r.v, r.value);
    }
    let src = emit_stream(recs).map_err(|e| e.to_string())?;
    let out = cycle_cancel_stream(&src, nl, nr, &w, Objective::Maximize, &ResourceMeter::new())
        .map_err(|e| e.to_string())?;
    let (al, ar) = input.marginals(nl, nr);
    let (bl, br) = out.marginals(nl, nr);
    for (p, q) in al.iter().chain(&ar).zip(bl.iter().chain(&br)) {
        if (p - q).abs() > 1e-6 {
            return Err(format!("marginal moved from {p} to {q}"));
        }
    }
    let (wi, wo) = (input.weight(&w), out.weight(&w));
    if wo < wi * (1.0 - 1e-9) {
        return Err(format!("weight fell from {wi} to {wo}"));
    }
    if out.len() > nl + nr {
        return Err(format!("support {} exceeds n = {}", out.len(), nl + nr));
    }
    if !is_forest(nl, nr, &out) {
        return Err("support has a cycle".into());
    }
    Ok(())
}

pub fn is_forest(nl: usize, nr: usize, f: &SparseFlow) -> bool {
    let mut p: Vec<usize> = (0..nl + nr).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (l, r, v) in f.iter() {
        if v <= 0.0 {
            continue;
        }
        let (a, b) = (find(&mut p, l), find(&mut p, nl + r));
        if a == b {
            return false;
        }
        p[a] = b;
    }
    true
}
