//! Replayable record streams and the pass/space/work meter.
//!
//! A [`StreamSource`] stands in for the external stream of the semi-streaming
//! model: it replays the same records in the same order on every pass. Its
//! buffer is never charged to the meter. Everything an algorithm keeps between
//! records must be registered through [`ResourceMeter::reserve`].

use std::cell::Cell;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use serde::Serialize;

use crate::error::{read_file, Error, Result};

/// One edge `(u, v)` with an optional weight (1.0 when absent).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeRecord {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

impl EdgeRecord {
    pub fn new(u: usize, v: usize, w: f64) -> Self {
        EdgeRecord { u, v, w }
    }

    pub fn unit(u: usize, v: usize) -> Self {
        EdgeRecord { u, v, w: 1.0 }
    }
}

/// One matrix row delivered together with its cost.
#[derive(Clone, Debug, PartialEq)]
pub struct RowRecord {
    pub entries: Vec<(usize, f64)>,
    pub cost: f64,
}

/// A nonnegative contribution to the flow on the edge `(u, v)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowRecord {
    pub u: usize,
    pub v: usize,
    pub value: f64,
}

/// How to interpret the two endpoints of an edge file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    /// `u` indexes the left side and `v` the right side.
    Bipartite,
    /// Undirected graph on one vertex set; self loops are rejected.
    Graph,
}

/// Declared or inferred vertex counts of an edge stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dims {
    Bipartite { n_left: usize, n_right: usize },
    Graph { n: usize },
}

/// Replayable in-memory stream of records.
#[derive(Clone, Debug)]
pub struct StreamSource<T> {
    records: Vec<T>,
    origin: Option<PathBuf>,
    dims: Option<Dims>,
}

impl<T> StreamSource<T> {
    pub fn from_records(records: Vec<T>) -> Self {
        StreamSource { records, origin: None, dims: None }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn origin(&self) -> Option<&Path> {
        self.origin.as_deref()
    }

    pub fn dims(&self) -> Option<Dims> {
        self.dims
    }

    /// Reads record `i` of the replay buffer. Used by adapters that walk the
    /// buffer inside a pass they already paid for.
    pub fn get(&self, i: usize) -> &T {
        &self.records[i]
    }

    /// The replay buffer itself, for offline consumers such as oracles.
    pub fn records(&self) -> &[T] {
        &self.records
    }

    /// One sequential pass. Charges exactly one pass and `len` units of work.
    pub fn for_each_pass<F: FnMut(usize, &T)>(&self, meter: &ResourceMeter, mut visit: F) {
        meter.record_pass();
        meter.add_work(self.records.len() as u64);
        for (i, r) in self.records.iter().enumerate() {
            visit(i, r);
        }
    }
}

impl StreamSource<EdgeRecord> {
    pub fn with_dims(mut self, dims: Dims) -> Self {
        self.dims = Some(dims);
        self
    }

    /// Declared dimensions, or `1 + max id` per side when no header was given.
    pub fn bipartite_dims(&self) -> (usize, usize) {
        match self.dims {
            Some(Dims::Bipartite { n_left, n_right }) => (n_left, n_right),
            _ => {
                let nl = self.records.iter().map(|e| e.u + 1).max().unwrap_or(0);
                let nr = self.records.iter().map(|e| e.v + 1).max().unwrap_or(0);
                (nl, nr)
            }
        }
    }

    pub fn graph_order(&self) -> usize {
        match self.dims {
            Some(Dims::Graph { n }) => n,
            _ => self.records.iter().map(|e| e.u.max(e.v) + 1).max().unwrap_or(0),
        }
    }
}

/// Records that carry a nonnegative value.
pub trait Valued {
    fn value(&self) -> f64;
}

impl Valued for (usize, f64) {
    fn value(&self) -> f64 {
        self.1
    }
}

impl Valued for FlowRecord {
    fn value(&self) -> f64 {
        self.value
    }
}

/// Wraps emitted `(key, value)` records as a stream for the next stage.
pub fn emit_stream<T: Valued>(records: Vec<T>) -> Result<StreamSource<T>> {
    for (i, r) in records.iter().enumerate() {
        let v = r.value();
        if !v.is_finite() || v < 0.0 {
            return Err(Error::arg(format!("record {i}: value {v} is not finite and nonnegative")));
        }
    }
    Ok(StreamSource::from_records(records))
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(p) => &line[..p],
        None => line,
    }
}

fn parse_id(tok: &str, line: usize) -> Result<usize> {
    if tok.starts_with('-') {
        return Err(Error::Parse { line, msg: format!("negative vertex id {tok}") });
    }
    tok.parse::<usize>()
        .map_err(|_| Error::Parse { line, msg: format!("bad vertex id {tok:?}") })
}

fn parse_float(tok: &str, line: usize, what: &str) -> Result<f64> {
    let x: f64 = tok
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("bad {what} {tok:?}") })?;
    if x.is_nan() {
        return Err(Error::Parse { line, msg: format!("{what} is NaN") });
    }
    Ok(x)
}

/// Parses the edge-list format: `u v [w]` per line, `#` comments, and an
/// optional header `p n_left n_right` (bipartite) or `p n` (graph).
pub fn parse_edges(text: &str, kind: EdgeKind) -> Result<StreamSource<EdgeRecord>> {
    let mut records = Vec::new();
    let mut dims = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks: Vec<&str> = strip_comment(raw).split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks[0] == "p" {
            if dims.is_some() || !records.is_empty() {
                return Err(Error::Parse { line, msg: "header must precede all edges".into() });
            }
            dims = Some(match (kind, toks.len()) {
                (EdgeKind::Bipartite, 3) => Dims::Bipartite {
                    n_left: parse_id(toks[1], line)?,
                    n_right: parse_id(toks[2], line)?,
                },
                (EdgeKind::Graph, 2) => Dims::Graph { n: parse_id(toks[1], line)? },
                _ => return Err(Error::Parse { line, msg: "malformed header".into() }),
            });
            continue;
        }
        if toks.len() != 2 && toks.len() != 3 {
            return Err(Error::Parse { line, msg: format!("expected `u v [w]`, got {} tokens", toks.len()) });
        }
        let u = parse_id(toks[0], line)?;
        let v = parse_id(toks[1], line)?;
        let w = if toks.len() == 3 { parse_float(toks[2], line, "weight")? } else { 1.0 };
        if w < 0.0 || w.is_infinite() {
            return Err(Error::Parse { line, msg: format!("weight {w} must be finite and nonnegative") });
        }
        if kind == EdgeKind::Graph && u == v {
            return Err(Error::Parse { line, msg: "self loop".into() });
        }
        match dims {
            Some(Dims::Bipartite { n_left, n_right }) if u >= n_left || v >= n_right => {
                return Err(Error::Parse { line, msg: "vertex id outside declared sides".into() });
            }
            Some(Dims::Graph { n }) if u >= n || v >= n => {
                return Err(Error::Parse { line, msg: "vertex id outside declared range".into() });
            }
            _ => {}
        }
        records.push(EdgeRecord { u, v, w });
    }
    Ok(StreamSource { records, origin: None, dims })
}

/// Parses the row format: `cost k col:val col:val ...` per line.
pub fn parse_rows(text: &str) -> Result<StreamSource<RowRecord>> {
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks: Vec<&str> = strip_comment(raw).split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() < 2 {
            return Err(Error::Parse { line, msg: "expected `cost k col:val ...`".into() });
        }
        let cost = parse_float(toks[0], line, "cost")?;
        let k: usize = toks[1]
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("bad entry count {:?}", toks[1]) })?;
        if toks.len() != k + 2 {
            return Err(Error::Parse { line, msg: format!("declared {k} entries, found {}", toks.len() - 2) });
        }
        let mut entries = Vec::with_capacity(k);
        for tok in &toks[2..] {
            let (c, v) = tok
                .split_once(':')
                .ok_or_else(|| Error::Parse { line, msg: format!("bad entry {tok:?}") })?;
            let col = parse_id(c, line)?;
            let val = parse_float(v, line, "entry")?;
            if let Some(&(prev, _)) = entries.last() {
                if col <= prev {
                    return Err(Error::Parse { line, msg: "column ids must be strictly increasing".into() });
                }
            }
            entries.push((col, val));
        }
        records.push(RowRecord { entries, cost });
    }
    Ok(StreamSource::from_records(records))
}

/// Opens an edge-list file as a replayable source.
pub fn open_edge_stream(path: &Path, kind: EdgeKind) -> Result<StreamSource<EdgeRecord>> {
    let text = read_file(path)?;
    let mut s = parse_edges(&text, kind)?;
    s.origin = Some(path.to_path_buf());
    Ok(s)
}

/// Opens a row file as a replayable source.
pub fn open_row_stream(path: &Path) -> Result<StreamSource<RowRecord>> {
    let text = read_file(path)?;
    let mut s = parse_rows(&text)?;
    s.origin = Some(path.to_path_buf());
    Ok(s)
}

#[derive(Debug, Default)]
struct MeterState {
    passes: Cell<u64>,
    work: Cell<u64>,
    words: Cell<u64>,
    peak: Cell<u64>,
}

/// Shared counters for passes, arithmetic work and auxiliary words.
///
/// Cloning yields another handle to the same counters.
#[derive(Clone, Debug, Default)]
pub struct ResourceMeter {
    state: Rc<MeterState>,
}

/// Snapshot of a meter, for reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MeterReading {
    pub passes: u64,
    pub peak_words: u64,
    pub work: u64,
}

impl ResourceMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_pass(&self) {
        self.state.passes.set(self.state.passes.get() + 1);
    }

    pub fn add_work(&self, units: u64) {
        self.state.work.set(self.state.work.get().saturating_add(units));
    }

    pub fn passes(&self) -> u64 {
        self.state.passes.get()
    }

    pub fn work(&self) -> u64 {
        self.state.work.get()
    }

    pub fn peak_words(&self) -> u64 {
        self.state.peak.get()
    }

    pub fn live_words(&self) -> u64 {
        self.state.words.get()
    }

    pub fn reading(&self) -> MeterReading {
        MeterReading { passes: self.passes(), peak_words: self.peak_words(), work: self.work() }
    }

    /// Registers `words` of auxiliary storage until the guard is dropped.
    pub fn reserve(&self, words: usize) -> WordGuard {
        let mut g = WordGuard { meter: self.clone(), words: 0 };
        g.resize(words);
        g
    }

    fn shift(&self, delta: i64) {
        let cur = self.state.words.get() as i64 + delta;
        debug_assert!(cur >= 0);
        let cur = cur.max(0) as u64;
        self.state.words.set(cur);
        if cur > self.state.peak.get() {
            self.state.peak.set(cur);
        }
    }
}

/// Live registration of auxiliary words; releases them on drop.
#[derive(Debug)]
pub struct WordGuard {
    meter: ResourceMeter,
    words: usize,
}

impl WordGuard {
    pub fn resize(&mut self, words: usize) {
        self.meter.shift(words as i64 - self.words as i64);
        self.words = words;
    }

    pub fn words(&self) -> usize {
        self.words
    }
}

impl Drop for WordGuard {
    fn drop(&mut self) {
        self.meter.shift(-(self.words as i64));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_edges() {
        let s = parse_edges("0 1\n0 2\n", EdgeKind::Graph).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(*s.get(1), EdgeRecord::unit(0, 2));
    }

    #[test]
    fn parses_weight() {
        let s = parse_edges("0 1 2.5\n", EdgeKind::Graph).unwrap();
        assert_eq!(s.get(0).w, 2.5);
    }

    #[test]
    fn rejects_self_loop_in_graph_kind() {
        let err = parse_edges("0 0\n", EdgeKind::Graph).unwrap_err();
        assert!(err.to_string().contains("self loop"));
        assert!(parse_edges("0 0\n", EdgeKind::Bipartite).is_ok());
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_edges("# c\n0 1\n1 -2\n", EdgeKind::Graph).unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("negative"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_edges("0 1 nan\n", EdgeKind::Graph).is_err());
    }

    #[test]
    fn empty_file_is_valid() {
        assert_eq!(parse_edges("", EdgeKind::Graph).unwrap().len(), 0);
        assert_eq!(parse_rows("").unwrap().len(), 0);
    }

    #[test]
    fn header_sets_dims() {
        let s = parse_edges("p 3 4\n0 1\n", EdgeKind::Bipartite).unwrap();
        assert_eq!(s.bipartite_dims(), (3, 4));
        let s = parse_edges("0 1\n2 0\n", EdgeKind::Bipartite).unwrap();
        assert_eq!(s.bipartite_dims(), (3, 2));
    }

    #[test]
    fn parses_rows() {
        let s = parse_rows("1.5 2 0:1 3:-2\n0 0\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.get(0).entries, vec![(0, 1.0), (3, -2.0)]);
        assert!(parse_rows("0 2 3:1 1:1\n").is_err());
        assert!(parse_rows("0 2 1:1\n").is_err());
    }

    #[test]
    fn passes_are_counted_and_replayed() {
        let s = StreamSource::from_records(vec![1, 2, 3]);
        let m = ResourceMeter::new();
        let mut first = Vec::new();
        s.for_each_pass(&m, |_, r| first.push(*r));
        let mut second = Vec::new();
        s.for_each_pass(&m, |_, r| second.push(*r));
        assert_eq!(first, second);
        assert_eq!(m.passes(), 2);
        let empty: StreamSource<u8> = StreamSource::from_records(vec![]);
        let mut calls = 0;
        empty.for_each_pass(&m, |_, _| calls += 1);
        assert_eq!(calls, 0);
        assert_eq!(m.passes(), 3);
    }

    #[test]
    fn emit_checks_values() {
        let s = emit_stream(vec![(1usize, 0.5), (1, 0.5)]).unwrap();
        let total: f64 = s.records().iter().map(|r| r.1).sum();
        assert_eq!(total, 1.0);
        assert!(emit_stream(vec![(0usize, -1.0)]).is_err());
        assert!(emit_stream(vec![(0usize, f64::INFINITY)]).is_err());
        assert!(emit_stream::<(usize, f64)>(vec![]).unwrap().is_empty());
    }

    #[test]
    fn guards_track_peak() {
        let m = ResourceMeter::new();
        {
            let mut a = m.reserve(10);
            let _b = m.reserve(5);
            a.resize(20);
            assert_eq!(m.live_words(), 25);
        }
        assert_eq!(m.live_words(), 0);
        assert_eq!(m.peak_words(), 25);
    }
}
