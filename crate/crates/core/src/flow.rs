//! Explicit sparse flows on bipartite edge sets.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Nonnegative values on `(left, right)` edges with bounded support.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseFlow {
    entries: BTreeMap<(usize, usize), f64>,
}

impl SparseFlow {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `value` to edge `(l, r)`, accumulating duplicates.
    pub fn add(&mut self, l: usize, r: usize, value: f64) {
        *self.entries.entry((l, r)).or_insert(0.0) += value;
    }

    pub fn set(&mut self, l: usize, r: usize, value: f64) {
        if value == 0.0 {
            self.entries.remove(&(l, r));
        } else {
            self.entries.insert((l, r), value);
        }
    }

    pub fn get(&self, l: usize, r: usize) -> f64 {
        self.entries.get(&(l, r)).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(l, r), &v)| (l, r, v))
    }

    /// Drops entries whose value is at most `tol`.
    pub fn prune(&mut self, tol: f64) {
        self.entries.retain(|_, v| *v > tol);
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.entries.values().fold(0.0, |a, &b| a.max(b))
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.entries.values_mut() {
            *v *= s;
        }
    }

    /// Per-vertex sums on each side: `(B^T x)` split into left and right.
    pub fn marginals(&self, n_left: usize, n_right: usize) -> (Vec<f64>, Vec<f64>) {
        let mut left = vec![0.0; n_left];
        let mut right = vec![0.0; n_right];
        for (l, r, v) in self.iter() {
            left[l] += v;
            right[r] += v;
        }
        (left, right)
    }

    pub fn weight<W: Fn(usize, usize) -> f64>(&self, w: W) -> f64 {
        self.iter().map(|(l, r, v)| w(l, r) * v).sum()
    }

    /// `l r value` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (l, r, v) in self.iter() {
            let _ = writeln!(s, "{l} {r} {v:.17e}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut f = SparseFlow::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse { line: i + 1, msg: format!("expected `l r value`, got {line:?}") };
            if toks.len() != 3 {
                return Err(bad());
            }
            let l: usize = toks[0].parse().map_err(|_| bad())?;
            let r: usize = toks[1].parse().map_err(|_| bad())?;
            let v: f64 = toks[2].parse().map_err(|_| bad())?;
            if !v.is_finite() || v < 0.0 {
                return Err(bad());
            }
            f.add(l, r, v);
        }
        Ok(f)
    }
}

impl FromIterator<(usize, usize, f64)> for SparseFlow {
    fn from_iter<I: IntoIterator<Item = (usize, usize, f64)>>(iter: I) -> Self {
        let mut f = SparseFlow::new();
        for (l, r, v) in iter {
            f.add(l, r, v);
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulates_and_roundtrips() {
        let mut f = SparseFlow::new();
        f.add(0, 1, 0.5);
        f.add(0, 1, 0.25);
        f.add(2, 0, 1.0);
        assert_eq!(f.get(0, 1), 0.75);
        let g = SparseFlow::from_text(&f.to_text()).unwrap();
        assert_eq!(f, g);
        let (l, r) = f.marginals(3, 2);
        assert_eq!(l, vec![0.75, 0.0, 1.0]);
        assert_eq!(r, vec![1.0, 0.75]);
    }
}
