//! Low-space mirror-prox solver for box-simplex games
//!
//! ```text
//! min_{x in simplex(m)} max_{y in [-1,1]^n}  y^T A^T x + c^T x - b^T y
//! ```
//!
//! equivalently `min_x c^T x + |A^T x - b|_1`. The simplex iterate is never
//! stored: it is kept as `(v, u, lambda)` with `x ∝ exp(A v + |A| u + lambda c)`
//! and every quantity the method needs is recomputed in one pass over the rows.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::stream::{emit_stream, ResourceMeter, RowRecord, StreamSource};

/// Read access to the rows of `A` together with their costs.
pub trait RowSource {
    fn n_cols(&self) -> usize;
    fn n_rows(&self) -> usize;
    /// One sequential pass: `visit(row_id, entries, cost)` for every row.
    /// Must charge exactly one pass to `meter`.
    fn scan(&self, meter: &ResourceMeter, visit: &mut dyn FnMut(usize, &[(usize, f64)], f64));
}

/// Rows read from a row stream with an explicit column count.
#[derive(Clone, Debug)]
pub struct MatrixRows {
    pub src: StreamSource<RowRecord>,
    pub n: usize,
}

impl MatrixRows {
    pub fn new(src: StreamSource<RowRecord>, n: usize) -> Result<Self> {
        for (i, r) in src.records().iter().enumerate() {
            if let Some(&(c, _)) = r.entries.last() {
                if c >= n {
                    return Err(Error::arg(format!("row {i} references column {c} >= {n}")));
                }
            }
            if !r.cost.is_finite() || r.entries.iter().any(|e| !e.1.is_finite()) {
                return Err(Error::arg(format!("row {i} has a non-finite entry")));
            }
        }
        Ok(MatrixRows { src, n })
    }

    /// Builds rows from a dense `m x n` matrix and cost vector.
    pub fn from_dense(a: &[Vec<f64>], c: &[f64]) -> Result<Self> {
        let n = a.first().map_or(0, Vec::len);
        let recs = a
            .iter()
            .zip(c)
            .map(|(row, &cost)| RowRecord {
                entries: row.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(j, &v)| (j, v)).collect(),
                cost,
            })
            .collect();
        MatrixRows::new(StreamSource::from_records(recs), n)
    }
}

impl RowSource for MatrixRows {
    fn n_cols(&self) -> usize {
        self.n
    }

    fn n_rows(&self) -> usize {
        self.src.len()
    }

    fn scan(&self, meter: &ResourceMeter, visit: &mut dyn FnMut(usize, &[(usize, f64)], f64)) {
        let mut nnz = 0u64;
        self.src.for_each_pass(meter, |i, r| {
            nnz += r.entries.len() as u64;
            visit(i, &r.entries, r.cost)
        });
        meter.add_work(nnz);
    }
}

/// A game instance: streamed rows of `A` with costs, and a dense target `b`.
#[derive(Clone, Debug)]
pub struct BoxSimplexInstance<R> {
    pub rows: R,
    pub b: Vec<f64>,
}

impl<R: RowSource> BoxSimplexInstance<R> {
    pub fn new(rows: R, b: Vec<f64>) -> Result<Self> {
        if b.len() != rows.n_cols() {
            return Err(Error::arg(format!("b has {} entries, A has {} columns", b.len(), rows.n_cols())));
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::arg("b must be finite"));
        }
        Ok(BoxSimplexInstance { rows, b })
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn m(&self) -> usize {
        self.rows.n_rows()
    }
}

/// Scalars produced by the preprocessing pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepInfo {
    /// Largest row l1 norm.
    pub a_inf: f64,
    pub c_min: f64,
    pub c_max: f64,
    /// Rows with cost above this are dropped.
    pub cutoff: f64,
    /// Added to the preprocessed objective to recover the original one.
    pub shift: f64,
    pub m: usize,
}

impl PrepInfo {
    /// Exponents more than this far below the running maximum are raised to it.
    pub fn floor_gap(&self) -> f64 {
        10.0 * (self.m.max(2) as f64).ln()
    }

    /// Scale used by the step sizes; equals `a_inf` unless `A = 0`.
    pub fn step_scale(&self) -> f64 {
        if self.a_inf > 0.0 {
            self.a_inf
        } else {
            1.0
        }
    }
}

/// View of an instance after cost filtering, cost shifting and clamping of `b`.
pub struct Preprocessed<'a, R> {
    inst: &'a BoxSimplexInstance<R>,
    pub info: PrepInfo,
    pub b: Vec<f64>,
}

/// One pass computing `min c`, `max c` and `|A|_inf`; the returned view drops
/// rows with `c_i > min c + 2|A|_inf` on every replay, shifts costs to start at
/// zero, and clamps `b` into `[-|A|_inf, |A|_inf]`.
pub fn preprocess<'a, R: RowSource>(
    inst: &'a BoxSimplexInstance<R>,
    meter: &ResourceMeter,
) -> Result<Preprocessed<'a, R>> {
    let (mut a_inf, mut c_min, mut c_max) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    inst.rows.scan(meter, &mut |_, entries, cost| {
        a_inf = a_inf.max(entries.iter().map(|e| e.1.abs()).sum());
        c_min = c_min.min(cost);
        c_max = c_max.max(cost);
    });
    if inst.m() == 0 {
        return Err(Error::EmptyInstance);
    }
    let b: Vec<f64> = inst.b.iter().map(|&x| x.clamp(-a_inf, a_inf)).collect();
    let excess: f64 = inst.b.iter().map(|&x| (x.abs() - a_inf).max(0.0)).sum();
    let info = PrepInfo { a_inf, c_min, c_max, cutoff: c_min + 2.0 * a_inf, shift: c_min + excess, m: inst.m() };
    Ok(Preprocessed { inst, info, b })
}

impl<R: RowSource> RowSource for Preprocessed<'_, R> {
    fn n_cols(&self) -> usize {
        self.inst.n()
    }

    fn n_rows(&self) -> usize {
        self.info.m
    }

    fn scan(&self, meter: &ResourceMeter, visit: &mut dyn FnMut(usize, &[(usize, f64)], f64)) {
        let (cut, c0) = (self.info.cutoff, self.info.c_min);
        self.inst.rows.scan(meter, &mut |i, entries, cost| {
            if cost <= cut {
                visit(i, entries, cost - c0)
            }
        });
    }
}

/// `x ∝ exp(A v + |A| u + lambda c)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImplicitSimplexPoint {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub lambda: f64,
}

impl ImplicitSimplexPoint {
    pub fn zeros(n: usize) -> Self {
        ImplicitSimplexPoint { v: vec![0.0; n], u: vec![0.0; n], lambda: 0.0 }
    }

    #[inline]
    pub fn exponent(&self, entries: &[(usize, f64)], cost: f64) -> f64 {
        let mut e = self.lambda * cost;
        for &(j, a) in entries {
            e += a * self.v[j] + a.abs() * self.u[j];
        }
        e
    }
}

/// Result of one implicit matrix-vector pass. Vectors are normalized by the
/// simplex mass, so `at_x = A^T x` for the represented `x`.
#[derive(Clone, Debug)]
pub struct Matvec {
    pub log_norm1: f64,
    pub at_x: Vec<f64>,
    pub abs_at_x: Vec<f64>,
    pub c_x: f64,
}

impl Matvec {
    pub fn norm1(&self) -> f64 {
        self.log_norm1.exp()
    }
}

/// Raises exponents that sit more than `gap` below the running maximum.
/// Deterministic given the row order, so every replay sees the same values.
#[derive(Clone, Copy, Debug)]
pub struct ExpFloor {
    gap: f64,
    running: f64,
}

impl ExpFloor {
    pub fn new(gap: f64) -> Self {
        ExpFloor { gap, running: f64::NEG_INFINITY }
    }

    #[inline]
    pub fn apply(&mut self, e: f64) -> f64 {
        self.running = self.running.max(e);
        e.max(self.running - self.gap)
    }
}

const RESCALE_AT: f64 = 40.0;

/// `|exp(A v + |A| u + lambda c)|_1`, `A^T x` and `|A|^T x` in one pass.
pub fn implicit_matvec<R: RowSource + ?Sized>(
    rows: &R,
    p: &ImplicitSimplexPoint,
    floor_gap: f64,
    meter: &ResourceMeter,
) -> Matvec {
    let n = rows.n_cols();
    let mut at_x = vec![0.0; n];
    let mut abs_at_x = vec![0.0; n];
    let (mut sum, mut c_x) = (0.0f64, 0.0f64);
    let mut reference = f64::NAN;
    let mut floor = ExpFloor::new(floor_gap);
    rows.scan(meter, &mut |_, entries, cost| {
        let e = floor.apply(p.exponent(entries, cost));
        if reference.is_nan() {
            reference = e;
        } else if e > reference + RESCALE_AT {
            let s = (reference - e).exp();
            sum *= s;
            c_x *= s;
            at_x.iter_mut().for_each(|x| *x *= s);
            abs_at_x.iter_mut().for_each(|x| *x *= s);
            reference = e;
        }
        let w = (e - reference).exp();
        sum += w;
        c_x += w * cost;
        for &(j, a) in entries {
            at_x[j] += w * a;
            abs_at_x[j] += w * a.abs();
        }
    });
    if sum == 0.0 {
        return Matvec { log_norm1: f64::NEG_INFINITY, at_x, abs_at_x, c_x: 0.0 };
    }
    let inv = 1.0 / sum;
    at_x.iter_mut().for_each(|x| *x *= inv);
    abs_at_x.iter_mut().for_each(|x| *x *= inv);
    Matvec { log_norm1: reference + sum.ln(), at_x, abs_at_x, c_x: c_x * inv }
}

/// Dense `x` represented by `p`, indexed by original row id (zero on dropped
/// rows). Materializes `m` entries, so only for checks on small instances.
pub fn materialize<R: RowSource>(rows: &R, p: &ImplicitSimplexPoint, floor_gap: f64) -> Vec<f64> {
    let meter = ResourceMeter::new();
    let mut x = vec![0.0; rows.n_rows()];
    let mut floor = ExpFloor::new(floor_gap);
    let mut exps = Vec::new();
    rows.scan(&meter, &mut |i, entries, cost| exps.push((i, floor.apply(p.exponent(entries, cost)))));
    let top = exps.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for &(i, e) in &exps {
        x[i] = (e - top).exp();
        sum += x[i];
    }
    x.iter_mut().for_each(|v| *v /= sum);
    x
}

/// `y_j = med(-1, 1, -gamma_j / d_j)`, with the limit of the linear problem when `d_j = 0`.
pub fn box_step(gamma: &[f64], d: &[f64]) -> Vec<f64> {
    gamma
        .iter()
        .zip(d)
        .map(|(&g, &dj)| {
            if dj > 0.0 {
                (-g / dj).clamp(-1.0, 1.0)
            } else if g > 0.0 {
                -1.0
            } else if g < 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Anchor of a proximal step: the current iterate `(x_t, y_t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub point: ImplicitSimplexPoint,
    pub y: Vec<f64>,
}

/// Which proximal step an inner event belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    W,
    Z,
}

/// One inner step, reported to tracing callers after its pass.
#[derive(Debug)]
pub struct InnerStep<'a> {
    pub outer: usize,
    pub phase: Phase,
    pub k: usize,
    /// Point whose matvec was just computed, `x^(k+1)`.
    pub point: &'a ImplicitSimplexPoint,
    /// Box iterate the point was built from, `y^(k)`.
    pub y_in: &'a [f64],
    /// Box iterate computed from the point, `y^(k+1)`.
    pub y_out: &'a [f64],
    pub matvec: &'a Matvec,
}

/// Output of [`alt_min`].
pub struct AltMinResult {
    pub point: ImplicitSimplexPoint,
    pub y: Vec<f64>,
    /// Matvec at `point`; `None` when `K = 0` and the anchor is returned.
    pub matvec: Option<Matvec>,
}

/// Alternating minimization of one proximal subproblem.
///
/// The simplex block has the closed form `v = v_t - y_src / (30a)`,
/// `lambda = lambda_t - 1/(30a)`, `u = u_t + (y_t^2 - y_k^2)/(10a)`; the box block
/// is `med(-1, 1, -gamma / (2 |A|^T x))`. Uses exactly `K` passes.
#[allow(clippy::too_many_arguments)]
pub fn alt_min<R: RowSource + ?Sized>(
    rows: &R,
    a: f64,
    floor_gap: f64,
    gamma: &[f64],
    anchor: &Iterate,
    y_src: &[f64],
    k_steps: usize,
    meter: &ResourceMeter,
    mut on_step: impl FnMut(usize, &ImplicitSimplexPoint, &[f64], &[f64], &Matvec),
) -> AltMinResult {
    if k_steps == 0 {
        return AltMinResult { point: anchor.point.clone(), y: anchor.y.clone(), matvec: None };
    }
    let n = anchor.y.len();
    let scale = 30.0 * a;
    let mut point = ImplicitSimplexPoint {
        v: (0..n).map(|j| anchor.point.v[j] - y_src[j] / scale).collect(),
        u: anchor.point.u.clone(),
        lambda: anchor.point.lambda - 1.0 / scale,
    };
    let mut y = anchor.y.clone();
    let mut last = None;
    for k in 0..k_steps {
        for j in 0..n {
            point.u[j] = anchor.point.u[j] + (anchor.y[j] * anchor.y[j] - y[j] * y[j]) / (10.0 * a);
        }
        let mv = implicit_matvec(rows, &point, floor_gap, meter);
        meter.add_work(4 * n as u64);
        let d: Vec<f64> = mv.abs_at_x.iter().map(|v| 2.0 * v).collect();
        let next = box_step(gamma, &d);
        on_step(k, &point, &y, &next, &mv);
        y = next;
        last = Some(mv);
    }
    AltMinResult { point, y, matvec: last }
}

/// Iteration counts for an instance with the given scalars.
pub fn iteration_counts(info: &PrepInfo, b_l1: f64, eps: f64, cfg: &Config) -> (usize, usize) {
    let m = info.m.max(2) as f64;
    let t = cfg
        .iterations
        .unwrap_or_else(|| (cfg.c_t * info.a_inf * m.ln() / eps).ceil() as usize)
        .max(1);
    let k = cfg.inner_steps.unwrap_or_else(|| {
        let big = info.a_inf.max(b_l1).max(1.0) * (info.m as f64).max(1.0 / eps);
        (cfg.c_k * big.ln()).ceil().max(0.0) as usize + 2
    });
    (t, k)
}

/// Stored certificate of one outer iteration: the `w` iterate and its log-mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub point: ImplicitSimplexPoint,
    pub y: Vec<f64>,
    pub log_norm1: f64,
}

enum Store {
    Memory(Vec<Certificate>),
    Disk { file: BufWriter<File>, count: usize, n: usize },
}

/// Per-iteration certificates, kept in memory or in an anonymous temporary file.
pub struct CertificateStore {
    store: Store,
}

impl CertificateStore {
    fn new(n: usize, t: usize, cap_words: usize) -> Result<Self> {
        let words = t.saturating_mul(3 * n + 2);
        let store = if words > cap_words {
            Store::Disk { file: BufWriter::new(tempfile::tempfile()?), count: 0, n }
        } else {
            Store::Memory(Vec::with_capacity(t))
        };
        Ok(CertificateStore { store })
    }

    fn push(&mut self, c: Certificate) -> Result<()> {
        match &mut self.store {
            Store::Memory(v) => v.push(c),
            Store::Disk { file, count, .. } => {
                let mut put = |x: f64| file.write_all(&x.to_le_bytes());
                for &x in c.point.v.iter().chain(&c.point.u).chain(&c.y) {
                    put(x)?;
                }
                put(c.point.lambda)?;
                put(c.log_norm1)?;
                *count += 1;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        match &self.store {
            Store::Memory(v) => v.len(),
            Store::Disk { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spilled(&self) -> bool {
        matches!(self.store, Store::Disk { .. })
    }

    /// Visits the certificates in iteration order.
    pub fn for_each(&mut self, mut f: impl FnMut(usize, &Certificate) -> Result<()>) -> Result<()> {
        match &mut self.store {
            Store::Memory(v) => {
                for (t, c) in v.iter().enumerate() {
                    f(t, c)?;
                }
            }
            Store::Disk { file, count, n } => {
                file.flush()?;
                let mut inner = file.get_ref().try_clone()?;
                inner.seek(SeekFrom::Start(0))?;
                let mut rd = BufReader::new(inner);
                let mut buf = [0u8; 8];
                let mut get = |rd: &mut BufReader<File>| -> Result<f64> {
                    rd.read_exact(&mut buf)?;
                    Ok(f64::from_le_bytes(buf))
                };
                for t in 0..*count {
                    let mut vecs = [vec![0.0; *n], vec![0.0; *n], vec![0.0; *n]];
                    for vec in vecs.iter_mut() {
                        for x in vec.iter_mut() {
                            *x = get(&mut rd)?;
                        }
                    }
                    let lambda = get(&mut rd)?;
                    let log_norm1 = get(&mut rd)?;
                    let [v, u, y] = vecs;
                    f(t, &Certificate { point: ImplicitSimplexPoint { v, u, lambda }, y, log_norm1 })?;
                }
                file.get_mut().seek(SeekFrom::End(0))?;
            }
        }
        Ok(())
    }

    pub fn to_vec(&mut self) -> Result<Vec<Certificate>> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each(|_, c| {
            out.push(c.clone());
            Ok(())
        })?;
        Ok(out)
    }
}

/// Outcome of [`solve`].
pub struct SolveReport {
    /// `c^T x̄ + |A^T x̄ - b|_1` of the original instance at the averaged iterate.
    pub value: f64,
    /// Part of `value` contributed by preprocessing (cost offset and clamped `b`).
    pub shift: f64,
    pub t: usize,
    pub k: usize,
    pub eps: f64,
    pub info: PrepInfo,
    /// `A^T x̄` in original units.
    pub at_x_bar: Vec<f64>,
    /// `None` when the run streamed its iterates to a sink instead.
    pub certificates: Option<CertificateStore>,
    /// Lower bound on the game value from the averaged maximizer; only
    /// computed by [`solve_to_target`], `-inf` otherwise.
    pub lower: f64,
}

impl SolveReport {
    /// `{value, shift, T, K, eps, iterates: [{v, u, lambda, y}]}`.
    pub fn to_json(&mut self) -> Result<serde_json::Value> {
        let mut iterates = Vec::new();
        if let Some(store) = self.certificates.as_mut() {
            store.for_each(|_, c| {
                iterates.push(json!({"v": c.point.v, "u": c.point.u, "lambda": c.point.lambda, "y": c.y}));
                Ok(())
            })?;
        }
        Ok(json!({
            "value": self.value,
            "shift": self.shift,
            "T": self.t,
            "K": self.k,
            "eps": self.eps,
            "iterates": iterates,
        }))
    }
}

/// What to do with each outer iterate.
enum Output<'s> {
    Store,
    /// One extra pass per iteration emitting `(row, x'_t[row] / T)`.
    Sink(&'s mut dyn FnMut(usize, f64)),
}

/// Solves the game to additive accuracy `eps`, keeping per-iteration
/// certificates so [`stream_minimizer`] can replay the averaged minimizer.
pub fn solve<R: RowSource>(
    inst: &BoxSimplexInstance<R>,
    eps: f64,
    cfg: &Config,
    meter: &ResourceMeter,
) -> Result<SolveReport> {
    run(inst, eps, None, cfg, meter, Output::Store, &mut |_| {})
}

/// Like [`solve`] but streams every contribution `(row, x'_t[row] / T)` to
/// `sink` during the run and stores no certificates.
pub fn solve_with_sink<R: RowSource>(
    inst: &BoxSimplexInstance<R>,
    eps: f64,
    cfg: &Config,
    meter: &ResourceMeter,
    sink: &mut dyn FnMut(usize, f64),
) -> Result<SolveReport> {
    run(inst, eps, None, cfg, meter, Output::Sink(sink), &mut |_| {})
}

/// Like [`solve`], reporting every inner step to `trace`.
pub fn solve_traced<R: RowSource>(
    inst: &BoxSimplexInstance<R>,
    eps: f64,
    cfg: &Config,
    meter: &ResourceMeter,
    trace: &mut dyn FnMut(&InnerStep),
) -> Result<SolveReport> {
    run(inst, eps, None, cfg, meter, Output::Store, trace)
}

/// Like [`solve`], but stops as soon as the game value is decided against
/// `target`: the averaged iterate's value drops to `target` or below, or the
/// averaged maximizer proves the optimum exceeds it. The lower bound is
/// evaluated at iterations growing geometrically, one extra pass each. When
/// neither happens the run lasts the usual `T` iterations.
pub fn solve_to_target<R: RowSource>(
    inst: &BoxSimplexInstance<R>,
    eps: f64,
    target: f64,
    cfg: &Config,
    meter: &ResourceMeter,
) -> Result<SolveReport> {
    run(inst, eps, Some(target), cfg, meter, Output::Store, &mut |_| {})
}

/// `min_i (A y + c)_i - b^T y` over the preprocessed rows.
fn dual_bound<R: RowSource>(prep: &Preprocessed<'_, R>, b: &[f64], y: &[f64], meter: &ResourceMeter) -> f64 {
    let mut best = f64::INFINITY;
    prep.scan(meter, &mut |_, entries, cost| {
        let v = entries.iter().map(|&(j, a)| a * y[j]).sum::<f64>() + cost;
        best = best.min(v);
    });
    best - b.iter().zip(y).map(|(bj, yj)| bj * yj).sum::<f64>()
}

fn run<R: RowSource>(
    inst: &BoxSimplexInstance<R>,
    eps: f64,
    target: Option<f64>,
    cfg: &Config,
    meter: &ResourceMeter,
    mut output: Output,
    trace: &mut dyn FnMut(&InnerStep),
) -> Result<SolveReport> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::arg(format!("eps must be positive, got {eps}")));
    }
    let prep = preprocess(inst, meter)?;
    let info = prep.info;
    if info.a_inf > 0.0 && eps > info.a_inf {
        return Err(Error::arg(format!("eps {eps} exceeds |A|_inf = {}", info.a_inf)));
    }
    let n = inst.n();
    let b_l1: f64 = inst.b.iter().map(|x| x.abs()).sum();
    let (t_iters, k_steps) = iteration_counts(&info, b_l1, eps, cfg);
    let a = info.step_scale();
    let gap = info.floor_gap();
    let b = &prep.b;

    // Working set: anchor (3n + 1), y and its successor, gammas, d, matvec
    // vectors for anchor and w step, and the running sum of A^T x'.
    let _work = meter.reserve(16 * n + 16);
    let mut certs = match output {
        Output::Store => Some(CertificateStore::new(n, t_iters, cfg.certificate_cap_words)?),
        Output::Sink(_) => None,
    };

    let mut anchor = Iterate { point: ImplicitSimplexPoint::zeros(n), y: vec![0.0; n] };
    let mut mv_anchor = implicit_matvec(&prep, &anchor.point, gap, meter);
    let mut sum_at_x = vec![0.0; n];
    let mut sum_cx = 0.0;
    let mut sum_y = vec![0.0; n];
    let mut lower = f64::NEG_INFINITY;
    let mut next_check = 1usize;
    let mut done = t_iters;

    for t in 0..t_iters {
        let gamma_w: Vec<f64> =
            (0..n).map(|j| (b[j] - mv_anchor.at_x[j]) / 3.0 - 2.0 * anchor.y[j] * mv_anchor.abs_at_x[j]).collect();
        let w = alt_min(&prep, a, gap, &gamma_w, &anchor, &anchor.y, k_steps, meter, |k, p, yi, yo, mv| {
            trace(&InnerStep { outer: t, phase: Phase::W, k, point: p, y_in: yi, y_out: yo, matvec: mv })
        });
        let mv_w = w.matvec.as_ref().unwrap_or(&mv_anchor);
        if !mv_w.log_norm1.is_finite() || mv_w.at_x.iter().any(|x| !x.is_finite()) {
            return Err(Error::Internal(format!("non-finite iterate at outer step {t}")));
        }
        for j in 0..n {
            sum_at_x[j] += mv_w.at_x[j];
        }
        sum_cx += mv_w.c_x;
        for j in 0..n {
            sum_y[j] += w.y[j];
        }
        match &mut output {
            Output::Store => certs.as_mut().expect("store mode").push(Certificate {
                point: w.point.clone(),
                y: w.y.clone(),
                log_norm1: mv_w.log_norm1,
            })?,
            Output::Sink(sink) => {
                let mut floor = ExpFloor::new(gap);
                let (p, ln) = (&w.point, mv_w.log_norm1);
                let inv_t = 1.0 / t_iters as f64;
                prep.scan(meter, &mut |i, entries, cost| {
                    let e = floor.apply(p.exponent(entries, cost));
                    sink(i, (e - ln).exp() * inv_t);
                });
            }
        }
        let gamma_z: Vec<f64> =
            (0..n).map(|j| (b[j] - mv_w.at_x[j]) / 3.0 - 2.0 * anchor.y[j] * mv_anchor.abs_at_x[j]).collect();
        let z = alt_min(&prep, a, gap, &gamma_z, &anchor, &w.y, k_steps, meter, |k, p, yi, yo, mv| {
            trace(&InnerStep { outer: t, phase: Phase::Z, k, point: p, y_in: yi, y_out: yo, matvec: mv })
        });
        if let Some(mv) = z.matvec {
            mv_anchor = mv;
        }
        anchor = Iterate { point: z.point, y: z.y };
        if let Some(target) = target {
            let k = (t + 1) as f64;
            let residual: f64 = sum_at_x.iter().zip(b).map(|(s, bj)| (s / k - bj).abs()).sum();
            if sum_cx / k + residual + info.shift <= target {
                done = t + 1;
                break;
            }
            if t + 1 == next_check {
                next_check = (next_check * 3).div_ceil(2).max(next_check + 1);
                let y_bar: Vec<f64> = sum_y.iter().map(|s| s / k).collect();
                lower = lower.max(dual_bound(&prep, b, &y_bar, meter) + info.shift);
                if lower > target {
                    done = t + 1;
                    break;
                }
            }
        }
    }

    let inv_t = 1.0 / done as f64;
    let at_x_bar: Vec<f64> = sum_at_x.iter().map(|s| s * inv_t).collect();
    let residual: f64 = at_x_bar.iter().zip(b).map(|(ax, bj)| (ax - bj).abs()).sum();
    let value = sum_cx * inv_t + residual + info.shift;
    Ok(SolveReport { value, shift: info.shift, t: done, k: k_steps, eps, info, at_x_bar, certificates: certs, lower })
}

fn check_report<R: RowSource>(report: &SolveReport, inst: &BoxSimplexInstance<R>) -> Result<()> {
    if report.info.m != inst.m() || report.at_x_bar.len() != inst.n() {
        return Err(Error::arg("report was produced for a different instance"));
    }
    if report.certificates.is_none() {
        return Err(Error::arg("report holds no certificates (solved with a sink)"));
    }
    Ok(())
}

fn filtered<'a, R: RowSource>(report: &SolveReport, inst: &'a BoxSimplexInstance<R>) -> Preprocessed<'a, R> {
    let b = inst.b.iter().map(|&x| x.clamp(-report.info.a_inf, report.info.a_inf)).collect();
    Preprocessed { inst, info: report.info, b }
}

/// Replays the averaged minimizer as `(row, x'_t[row] / T)` records over `T` passes.
pub fn for_each_minimizer_record<R: RowSource>(
    report: &mut SolveReport,
    inst: &BoxSimplexInstance<R>,
    meter: &ResourceMeter,
    mut emit: impl FnMut(usize, f64),
) -> Result<()> {
    check_report(report, inst)?;
    let prep = filtered(report, inst);
    let gap = prep.info.floor_gap();
    let inv_t = 1.0 / report.t as f64;
    let store = report.certificates.as_mut().expect("checked");
    store.for_each(|_, c| {
        let mut floor = ExpFloor::new(gap);
        prep.scan(meter, &mut |i, entries, cost| {
            let e = floor.apply(c.point.exponent(entries, cost));
            emit(i, (e - c.log_norm1).exp() * inv_t);
        });
        Ok(())
    })
}

/// The averaged minimizer as an emitted stream of `T * m` one-sparse records.
pub fn stream_minimizer<R: RowSource>(
    report: &mut SolveReport,
    inst: &BoxSimplexInstance<R>,
    meter: &ResourceMeter,
) -> Result<StreamSource<(usize, f64)>> {
    let mut out = Vec::new();
    for_each_minimizer_record(report, inst, meter, |i, v| out.push((i, v)))?;
    emit_stream(out)
}

/// Visits `(row, x̄_row)` for every kept row in one pass, evaluating all `T`
/// stored iterates per row.
pub fn for_each_averaged_coordinate<R: RowSource>(
    report: &mut SolveReport,
    inst: &BoxSimplexInstance<R>,
    meter: &ResourceMeter,
    mut visit: impl FnMut(usize, &[(usize, f64)], f64),
) -> Result<()> {
    check_report(report, inst)?;
    let certs = report.certificates.as_mut().expect("checked").to_vec()?;
    let prep = filtered(report, inst);
    let gap = prep.info.floor_gap();
    let inv_t = 1.0 / report.t as f64;
    let mut floors = vec![ExpFloor::new(gap); certs.len()];
    prep.scan(meter, &mut |i, entries, cost| {
        let mut x = 0.0;
        for (c, floor) in certs.iter().zip(floors.iter_mut()) {
            x += (floor.apply(c.point.exponent(entries, cost)) - c.log_norm1).exp();
        }
        visit(i, entries, x * inv_t);
    });
    meter.add_work((certs.len() * inst.m()) as u64);
    Ok(())
}
