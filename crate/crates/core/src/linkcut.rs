//! Link/cut forests and bipartite cycle cancelling.
//!
//! Trees are stored with one splay node per vertex and one per edge, so edge
//! values live on their own nodes and survive re-rooting without fix-ups.
//! Every edge node also remembers whether its left-side endpoint is the
//! shallower one under the current root. Re-rooting reverses a path and flips
//! that bit lazily, which lets the cancelling oracle read the alternating sign
//! pattern of any cycle from two class aggregates instead of separate trees.

use rustc_hash::FxHashMap as HashMap;

use crate::error::{Error, Result};
use crate::flow::SparseFlow;
use crate::stream::{FlowRecord, ResourceMeter, StreamSource, WordGuard};

const NIL: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct ClassAgg {
    min: f64,
    argmin: u32,
    sum_w: f64,
    sum_v: f64,
    cnt: u32,
}

impl ClassAgg {
    const EMPTY: ClassAgg = ClassAgg { min: f64::INFINITY, argmin: NIL, sum_w: 0.0, sum_v: 0.0, cnt: 0 };

    fn merge(self, o: ClassAgg) -> ClassAgg {
        let (min, argmin) = if o.min < self.min { (o.min, o.argmin) } else { (self.min, self.argmin) };
        ClassAgg { min, argmin, sum_w: self.sum_w + o.sum_w, sum_v: self.sum_v + o.sum_v, cnt: self.cnt + o.cnt }
    }
}

#[derive(Clone, Debug)]
struct Node {
    ch: [u32; 2],
    p: u32,
    rev: bool,
    is_edge: bool,
    // Edge payload. `ends` holds the two vertex nodes, `ends[0]` being the
    // left-side endpoint; `lpar` says whether it is currently the shallower one.
    ends: [u32; 2],
    lpar: bool,
    val: f64,
    w: f64,
    agg: [ClassAgg; 2],
    lazy: [f64; 2],
}

impl Node {
    fn vertex() -> Node {
        Node {
            ch: [NIL; 2],
            p: NIL,
            rev: false,
            is_edge: false,
            ends: [NIL; 2],
            lpar: false,
            val: 0.0,
            w: 0.0,
            agg: [ClassAgg::EMPTY; 2],
            lazy: [0.0; 2],
        }
    }
}

/// Node-level link/cut tree with per-class path aggregates.
#[derive(Clone, Debug)]
struct Lct {
    nodes: Vec<Node>,
    free: Vec<u32>,
    n_vertices: usize,
    stack: Vec<u32>,
}

impl Lct {
    fn new(n: usize) -> Self {
        Lct { nodes: vec![Node::vertex(); n], free: Vec::new(), n_vertices: n, stack: Vec::new() }
    }

    fn live_nodes(&self) -> usize {
        self.nodes.len() - self.free.len()
    }

    fn alloc_edge(&mut self, left_end: u32, right_end: u32, val: f64, w: f64) -> u32 {
        let mut node = Node::vertex();
        node.is_edge = true;
        node.ends = [left_end, right_end];
        node.val = val;
        node.w = w;
        let id = match self.free.pop() {
            Some(id) => {
                self.nodes[id as usize] = node;
                id
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        };
        self.pull(id);
        id
    }

    fn release(&mut self, id: u32) {
        self.nodes[id as usize] = Node::vertex();
        self.free.push(id);
    }

    #[inline]
    fn is_root(&self, x: u32) -> bool {
        let p = self.nodes[x as usize].p;
        p == NIL || (self.nodes[p as usize].ch[0] != x && self.nodes[p as usize].ch[1] != x)
    }

    fn apply_rev(&mut self, x: u32) {
        if x == NIL {
            return;
        }
        let n = &mut self.nodes[x as usize];
        n.rev = !n.rev;
        n.ch.swap(0, 1);
        n.agg.swap(0, 1);
        n.lazy.swap(0, 1);
        if n.is_edge {
            n.lpar = !n.lpar;
        }
    }

    fn apply_add(&mut self, x: u32, class: usize, delta: f64) {
        if x == NIL || delta == 0.0 {
            return;
        }
        let n = &mut self.nodes[x as usize];
        let a = &mut n.agg[class];
        if a.cnt > 0 {
            a.min += delta;
            a.sum_v += delta * a.cnt as f64;
        }
        n.lazy[class] += delta;
        if n.is_edge && (if n.lpar { 0 } else { 1 }) == class {
            n.val += delta;
        }
    }

    fn push(&mut self, x: u32) {
        let (ch, rev, lazy) = {
            let n = &self.nodes[x as usize];
            (n.ch, n.rev, n.lazy)
        };
        if rev {
            self.apply_rev(ch[0]);
            self.apply_rev(ch[1]);
            self.nodes[x as usize].rev = false;
        }
        for class in 0..2 {
            if lazy[class] != 0.0 {
                self.apply_add(ch[0], class, lazy[class]);
                self.apply_add(ch[1], class, lazy[class]);
                self.nodes[x as usize].lazy[class] = 0.0;
            }
        }
    }

    fn pull(&mut self, x: u32) {
        let n = &self.nodes[x as usize];
        let mut agg = [ClassAgg::EMPTY; 2];
        if n.ch[0] != NIL {
            agg = self.nodes[n.ch[0] as usize].agg;
        }
        if n.is_edge {
            let c = if n.lpar { 0 } else { 1 };
            agg[c] = agg[c].merge(ClassAgg { min: n.val, argmin: x, sum_w: n.w, sum_v: n.val, cnt: 1 });
        }
        if n.ch[1] != NIL {
            let r = self.nodes[n.ch[1] as usize].agg;
            agg[0] = agg[0].merge(r[0]);
            agg[1] = agg[1].merge(r[1]);
        }
        self.nodes[x as usize].agg = agg;
    }

    fn rotate(&mut self, x: u32) {
        let p = self.nodes[x as usize].p;
        let g = self.nodes[p as usize].p;
        let d = (self.nodes[p as usize].ch[1] == x) as usize;
        if !self.is_root(p) {
            let gn = &mut self.nodes[g as usize];
            if gn.ch[0] == p {
                gn.ch[0] = x;
            } else {
                gn.ch[1] = x;
            }
        }
        self.nodes[x as usize].p = g;
        let b = self.nodes[x as usize].ch[d ^ 1];
        self.nodes[p as usize].ch[d] = b;
        if b != NIL {
            self.nodes[b as usize].p = p;
        }
        self.nodes[x as usize].ch[d ^ 1] = p;
        self.nodes[p as usize].p = x;
        self.pull(p);
        self.pull(x);
    }

    fn splay(&mut self, x: u32) {
        let mut stack = std::mem::take(&mut self.stack);
        let mut y = x;
        stack.push(y);
        while !self.is_root(y) {
            y = self.nodes[y as usize].p;
            stack.push(y);
        }
        while let Some(z) = stack.pop() {
            self.push(z);
        }
        self.stack = stack;
        while !self.is_root(x) {
            let p = self.nodes[x as usize].p;
            if !self.is_root(p) {
                let g = self.nodes[p as usize].p;
                let zigzig = (self.nodes[g as usize].ch[0] == p) == (self.nodes[p as usize].ch[0] == x);
                if zigzig {
                    self.rotate(p);
                } else {
                    self.rotate(x);
                }
            }
            self.rotate(x);
        }
    }

    /// Makes the root-to-`x` path preferred; returns the last path-parent jump target.
    fn access(&mut self, x: u32) -> u32 {
        let mut last = NIL;
        let mut y = x;
        while y != NIL {
            self.splay(y);
            self.nodes[y as usize].ch[1] = last;
            self.pull(y);
            last = y;
            y = self.nodes[y as usize].p;
        }
        self.splay(x);
        last
    }

    fn evert(&mut self, x: u32) {
        self.access(x);
        self.apply_rev(x);
    }

    fn find_root(&mut self, x: u32) -> u32 {
        self.access(x);
        let mut y = x;
        loop {
            self.push(y);
            let l = self.nodes[y as usize].ch[0];
            if l == NIL {
                break;
            }
            y = l;
        }
        self.splay(y);
        y
    }

    fn connected(&mut self, a: u32, b: u32) -> bool {
        a == b || self.find_root(a) == self.find_root(b)
    }

    /// Reroots at `a` and exposes the path `a..b`. Returns the splay root
    /// holding the path aggregate, or `None` when `a` and `b` are in different trees.
    fn expose(&mut self, a: u32, b: u32) -> Option<u32> {
        self.evert(a);
        self.access(b);
        let mut y = b;
        loop {
            self.push(y);
            let l = self.nodes[y as usize].ch[0];
            if l == NIL {
                break;
            }
            y = l;
        }
        self.splay(y);
        (y == a).then_some(y)
    }

    /// Attaches tree root `x` below `y`.
    fn attach(&mut self, x: u32, y: u32) {
        self.evert(x);
        self.nodes[x as usize].p = y;
    }

    /// Links vertices `child` and `parent` through a new edge node.
    fn link_edge(&mut self, child: u32, parent: u32, left_end: u32, val: f64, w: f64) -> u32 {
        let right_end = if left_end == child { parent } else { child };
        let e = self.alloc_edge(left_end, right_end, val, w);
        self.nodes[e as usize].lpar = left_end == parent;
        self.pull(e);
        self.attach(child, e);
        self.nodes[e as usize].p = parent;
        e
    }

    /// Removes edge node `e`, the parent edge of `x`, keeping the root of the
    /// remaining tree.
    fn cut_above(&mut self, x: u32, e: u32) {
        self.access(x);
        let l = self.nodes[x as usize].ch[0];
        self.nodes[x as usize].ch[0] = NIL;
        self.nodes[l as usize].p = NIL;
        self.pull(x);
        self.splay(e);
        debug_assert_eq!(self.nodes[e as usize].ch[1], NIL);
        let rest = self.nodes[e as usize].ch[0];
        if rest != NIL {
            self.nodes[rest as usize].p = NIL;
        }
        self.release(e);
    }

    /// Links the represented root `child` below `parent` through a new edge node.
    /// Unlike [`Lct::link_edge`] this skips re-rooting, so `child` must already
    /// be the root of its tree.
    fn link_root(&mut self, child: u32, parent: u32, left_end: u32, val: f64, w: f64) -> u32 {
        let right_end = if left_end == child { parent } else { child };
        let e = self.alloc_edge(left_end, right_end, val, w);
        self.nodes[e as usize].lpar = left_end == parent;
        self.pull(e);
        self.splay(child);
        debug_assert_eq!(self.nodes[child as usize].ch[0], NIL);
        self.nodes[child as usize].p = e;
        self.nodes[e as usize].p = parent;
        e
    }

    /// Removes edge node `e` from a root splay tree, splitting it in two.
    /// Returns the splay roots of the shallow and deep parts.
    fn split_out(&mut self, e: u32) -> (u32, u32) {
        self.splay(e);
        debug_assert_eq!(self.nodes[e as usize].p, NIL);
        let [l, r] = self.nodes[e as usize].ch;
        for c in [l, r] {
            if c != NIL {
                self.nodes[c as usize].p = NIL;
            }
        }
        self.release(e);
        (l, r)
    }

    fn edge_value(&mut self, e: u32) -> f64 {
        self.splay(e);
        self.nodes[e as usize].val
    }

    fn add_to_edge(&mut self, e: u32, delta: f64) {
        self.splay(e);
        self.nodes[e as usize].val += delta;
        self.pull(e);
    }

    /// Aggregates of the current root-to-`x` path.
    fn path_agg(&mut self, x: u32) -> [ClassAgg; 2] {
        self.access(x);
        self.nodes[x as usize].agg
    }
}

/// Identifier of a forest edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EdgeId(u32);

/// Dynamic forest over vertices `0..n` with one value per edge.
///
/// Path operations act on the path from a vertex to the root of its tree.
#[derive(Clone, Debug)]
pub struct DynForest {
    lct: Lct,
}

impl DynForest {
    pub fn new(n: usize) -> Self {
        DynForest { lct: Lct::new(n) }
    }

    pub fn vertex_count(&self) -> usize {
        self.lct.n_vertices
    }

    fn check(&self, v: usize) {
        assert!(v < self.lct.n_vertices, "vertex {v} out of range");
    }

    /// Adds edge `(v, w)`; `v`'s tree is re-rooted at `v` and hung below `w`.
    pub fn link(&mut self, v: usize, w: usize, value: f64) -> Result<EdgeId> {
        self.check(v);
        self.check(w);
        if self.lct.connected(v as u32, w as u32) {
            return Err(Error::WouldCreateCycle);
        }
        Ok(EdgeId(self.lct.link_edge(v as u32, w as u32, v as u32, value, 0.0)))
    }

    /// Removes the edge from `v` to its parent.
    pub fn cut(&mut self, v: usize) -> Result<()> {
        self.check(v);
        let e = self.parent_edge(v).ok_or(Error::CutRoot)?;
        self.lct.cut_above(v as u32, e);
        Ok(())
    }

    fn parent_edge(&mut self, v: usize) -> Option<u32> {
        let x = v as u32;
        self.lct.access(x);
        let mut y = self.lct.nodes[x as usize].ch[0];
        if y == NIL {
            return None;
        }
        loop {
            self.lct.push(y);
            let r = self.lct.nodes[y as usize].ch[1];
            if r == NIL {
                break;
            }
            y = r;
        }
        self.lct.splay(y);
        Some(y)
    }

    pub fn parent(&mut self, v: usize) -> Option<usize> {
        let e = self.parent_edge(v)?;
        let [a, b] = self.lct.nodes[e as usize].ends;
        Some(if a as usize == v { b } else { a } as usize)
    }

    pub fn change_root(&mut self, r: usize) {
        self.check(r);
        self.lct.evert(r as u32);
    }

    pub fn find_root(&mut self, v: usize) -> usize {
        self.check(v);
        self.lct.find_root(v as u32) as usize
    }

    pub fn connected(&mut self, a: usize, b: usize) -> bool {
        self.check(a);
        self.check(b);
        self.lct.connected(a as u32, b as u32)
    }

    /// Lowest common ancestor under the current root, if `v` and `w` share a tree.
    pub fn lca(&mut self, v: usize, w: usize) -> Option<usize> {
        if !self.connected(v, w) {
            return None;
        }
        self.lct.access(v as u32);
        Some(self.lct.access(w as u32) as usize)
    }

    /// Minimum edge value on the path from `v` to its root; `None` at a root.
    pub fn path_min(&mut self, v: usize) -> Option<f64> {
        self.check(v);
        let agg = self.lct.path_agg(v as u32);
        let m = agg[0].min.min(agg[1].min);
        (agg[0].cnt + agg[1].cnt > 0).then_some(m)
    }

    pub fn path_add(&mut self, v: usize, delta: f64) {
        self.check(v);
        let x = v as u32;
        self.lct.access(x);
        self.lct.apply_add(x, 0, delta);
        self.lct.apply_add(x, 1, delta);
    }

    pub fn path_sum(&mut self, v: usize) -> f64 {
        self.check(v);
        let agg = self.lct.path_agg(v as u32);
        agg[0].sum_v + agg[1].sum_v
    }

    pub fn edge_value(&mut self, e: EdgeId) -> f64 {
        self.lct.edge_value(e.0)
    }
}

/// Direction in which cancelling may move the weighted value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Never decrease `<w, x>` (matching, transport).
    Maximize,
    /// Never increase `<w, x>` (transshipment).
    Minimize,
}

/// Values at or below this fraction of the largest value seen are treated as zero.
pub const ZERO_TOL: f64 = 1e-12;

const WORDS_PER_NODE: usize = 24;
const WORDS_PER_KEY: usize = 4;

/// Incremental bipartite cycle canceller.
///
/// Holds a forest-supported flow on `n_left + n_right` vertices. Each pushed
/// contribution either merges into an existing edge, joins two trees, or
/// closes an even cycle that is cancelled right away, so the support never
/// exceeds `n - 1` edges.
pub struct CycleCanceller {
    n_left: usize,
    n_right: usize,
    lct: Lct,
    index: HashMap<(usize, usize), u32>,
    objective: Objective,
    scale: f64,
    guard: WordGuard,
}

impl CycleCanceller {
    pub fn new(n_left: usize, n_right: usize, objective: Objective, meter: &ResourceMeter) -> Self {
        let n = n_left + n_right;
        let guard = meter.reserve(n * WORDS_PER_NODE);
        CycleCanceller {
            n_left,
            n_right,
            lct: Lct::new(n),
            index: HashMap::default(),
            objective,
            scale: 0.0,
            guard,
        }
    }

    pub fn support(&self) -> usize {
        self.index.len()
    }

    fn threshold(&self) -> f64 {
        ZERO_TOL * self.scale
    }

    fn touch_meter(&mut self) {
        let words = self.lct.live_nodes() * WORDS_PER_NODE + self.index.len() * WORDS_PER_KEY;
        if words > self.guard.words() {
            self.guard.resize(words);
        }
    }

    /// Adds `value` units on edge `(l, r)` with weight `weight`.
    pub fn push(&mut self, l: usize, r: usize, value: f64, weight: f64) -> Result<()> {
        if !value.is_finite() || value < 0.0 || !weight.is_finite() {
            return Err(Error::arg(format!("bad contribution {value} (weight {weight}) on ({l}, {r})")));
        }
        if l >= self.n_left || r >= self.n_right {
            return Err(Error::arg(format!("edge ({l}, {r}) outside {}x{}", self.n_left, self.n_right)));
        }
        if value == 0.0 {
            return Ok(());
        }
        self.scale = self.scale.max(value);
        if let Some(&e) = self.index.get(&(l, r)) {
            self.lct.add_to_edge(e, value);
            let v = self.lct.nodes[e as usize].val;
            self.scale = self.scale.max(v);
            return Ok(());
        }
        let a = l as u32;
        let b = (self.n_left + r) as u32;
        let Some(top) = self.lct.expose(a, b) else {
            self.link_rooted(l, r, value, weight);
            return Ok(());
        };
        let [p, q] = self.lct.nodes[top as usize].agg;
        // Option one raises the new edge and class Q, lowers class P.
        let gain = weight + q.sum_w - p.sum_w;
        let forward = match self.objective {
            Objective::Maximize => gain >= 0.0,
            Objective::Minimize => gain <= 0.0,
        };
        let remaining = if forward {
            let delta = p.min.max(0.0);
            self.lct.apply_add(top, 0, -delta);
            self.lct.apply_add(top, 1, delta);
            value + delta
        } else {
            let delta = value.min(q.min).max(0.0);
            self.lct.apply_add(top, 0, delta);
            self.lct.apply_add(top, 1, -delta);
            value - delta
        };
        for m in [p.min, q.min, remaining] {
            if m.is_finite() {
                self.scale = self.scale.max(m);
            }
        }
        let cut_any = self.prune_exposed(top);
        if remaining > self.threshold() {
            if !cut_any {
                return Err(Error::Internal("cycle survived cancellation".into()));
            }
            self.link_rooted(l, r, remaining, weight);
        }
        Ok(())
    }

    /// Links `(l, r)` while `l` is the root of its tree.
    fn link_rooted(&mut self, l: usize, r: usize, value: f64, weight: f64) {
        let a = l as u32;
        let b = (self.n_left + r) as u32;
        let e = self.lct.link_root(a, b, a, value, weight);
        self.index.insert((l, r), e);
        self.touch_meter();
    }

    /// Cuts every edge at or below the zero threshold on the exposed path
    /// held by splay root `top`. Returns whether anything was cut.
    fn prune_exposed(&mut self, top: u32) -> bool {
        let thr = self.threshold();
        let mut cut_any = false;
        let mut pieces = vec![top];
        while let Some(root) = pieces.pop() {
            if root == NIL {
                continue;
            }
            let agg = self.lct.nodes[root as usize].agg;
            let (min, arg) = if agg[0].min <= agg[1].min {
                (agg[0].min, agg[0].argmin)
            } else {
                (agg[1].min, agg[1].argmin)
            };
            if arg == NIL || min > thr {
                continue;
            }
            let [le, re] = self.lct.nodes[arg as usize].ends;
            self.index.remove(&(le as usize, re as usize - self.n_left));
            let (shallow, deep) = self.lct.split_out(arg);
            cut_any = true;
            pieces.push(shallow);
            pieces.push(deep);
        }
        cut_any
    }

    /// Current forest-supported flow.
    pub fn flow(&mut self) -> SparseFlow {
        let thr = self.threshold();
        let keys: Vec<((usize, usize), u32)> = self.index.iter().map(|(&k, &e)| (k, e)).collect();
        let mut f = SparseFlow::new();
        for ((l, r), e) in keys {
            let v = self.lct.edge_value(e);
            if v > thr {
                f.add(l, r, v);
            }
        }
        f
    }

    /// Forest edges as `(l, r, value, weight)`, sorted by edge.
    pub fn weighted_edges(&mut self) -> Vec<(usize, usize, f64, f64)> {
        let thr = self.threshold();
        let keys: Vec<((usize, usize), u32)> = self.index.iter().map(|(&k, &e)| (k, e)).collect();
        let mut out = Vec::with_capacity(keys.len());
        for ((l, r), e) in keys {
            let v = self.lct.edge_value(e);
            if v > thr {
                out.push((l, r, v, self.lct.nodes[e as usize].w));
            }
        }
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }

    pub fn finish(mut self) -> SparseFlow {
        self.flow()
    }
}

/// Bipartite cycle-cancelling oracle: maps a sparse flow to a forest-supported
/// flow with the same vertex marginals and no worse weighted value.
pub fn bcco<W: Fn(usize, usize) -> f64>(
    n_left: usize,
    n_right: usize,
    x: &[(usize, usize, f64)],
    w: W,
    objective: Objective,
    meter: &ResourceMeter,
) -> Result<SparseFlow> {
    let mut cc = CycleCanceller::new(n_left, n_right, objective, meter);
    for &(l, r, v) in x {
        cc.push(l, r, v, w(l, r))?;
    }
    Ok(cc.finish())
}

/// Folds a stream of nonnegative contributions into a forest-supported flow
/// in one pass, buffering at most `n` records at a time.
pub fn cycle_cancel_stream<W: Fn(usize, usize) -> f64>(
    src: &StreamSource<FlowRecord>,
    n_left: usize,
    n_right: usize,
    w: W,
    objective: Objective,
    meter: &ResourceMeter,
) -> Result<SparseFlow> {
    let n = (n_left + n_right).max(1);
    let mut cc = CycleCanceller::new(n_left, n_right, objective, meter);
    let _chunk_words = meter.reserve(3 * n);
    let mut chunk: Vec<FlowRecord> = Vec::with_capacity(n);
    let mut err = None;
    let flush = |chunk: &mut Vec<FlowRecord>, cc: &mut CycleCanceller, err: &mut Option<Error>| {
        for rec in chunk.drain(..) {
            if err.is_none() {
                if let Err(e) = cc.push(rec.u, rec.v, rec.value, w(rec.u, rec.v)) {
                    *err = Some(e);
                }
            }
        }
    };
    src.for_each_pass(meter, |_, rec| {
        chunk.push(*rec);
        if chunk.len() == n {
            flush(&mut chunk, &mut cc, &mut err);
        }
    });
    flush(&mut chunk, &mut cc, &mut err);
    if let Some(e) = err {
        return Err(e);
    }
    meter.add_work((src.len() as f64 * (n as f64).log2().max(1.0)) as u64);
    Ok(cc.finish())
}
