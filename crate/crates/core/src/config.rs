//! Tunable constants, overridable from a flat `key = value` file.

use crate::error::{Error, Result};

/// Constants used by the solver and the pipelines built on it.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    /// Outer iterations: `T = ceil(c_t * a_inf * ln(max(m, 2)) / eps)`.
    pub c_t: f64,
    /// Inner steps: `K = ceil(c_k * ln(max(a_inf, |b|_1, 1) * max(m, 1/eps))) + 2`.
    pub c_k: f64,
    /// Fixes `T` regardless of the formula.
    pub iterations: Option<usize>,
    /// Fixes `K` regardless of the formula.
    pub inner_steps: Option<usize>,
    /// Solver accuracy multiplier for the rounding-backed matching pipelines:
    /// cardinality matching solves to `eps_split * eps * M` (capped at `M`),
    /// weighted matching to `eps_split * eps`.
    pub eps_split: f64,
    /// Lower bound on the accuracy used by exact matching before augmenting.
    pub exact_eps_floor: f64,
    /// Denominator constant in the transshipment probe accuracy `eps * t / (c_l * ln n)`.
    pub c_l: f64,
    /// The budget search stops once `t_max < (1 + search_guard * eps / ln n) * t_min`.
    pub search_guard: f64,
    /// Number of stacked tree embeddings; `ceil(4 ln n)` when unset.
    pub tree_count: Option<usize>,
    /// Stored certificates spill to a temporary file above this many words.
    pub certificate_cap_words: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            c_t: 35.0,
            c_k: 1.0,
            iterations: None,
            inner_steps: None,
            eps_split: 8.0,
            exact_eps_floor: 0.1,
            c_l: 8.0,
            search_guard: 1.0,
            tree_count: None,
            certificate_cap_words: 1 << 24,
        }
    }
}

impl Config {
    /// Parses `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key = value, got {line:?}") })?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn pos(key: &str, value: &str) -> Result<f64> {
            let x: f64 = value.parse().map_err(|_| Error::arg(format!("{key}: bad number {value:?}")))?;
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::arg(format!("{key}: must be positive")));
            }
            Ok(x)
        }
        fn count(key: &str, value: &str) -> Result<usize> {
            value.parse().map_err(|_| Error::arg(format!("{key}: bad integer {value:?}")))
        }
        match key {
            "C_T" | "c_t" => self.c_t = pos(key, value)?,
            "C_K" | "c_k" => self.c_k = pos(key, value)?,
            "T" | "iterations" => self.iterations = Some(count(key, value)?),
            "K" | "inner_steps" => self.inner_steps = Some(count(key, value)?),
            "eps_split" => self.eps_split = pos(key, value)?,
            "search_guard" => self.search_guard = pos(key, value)?,
            "exact_eps_floor" => self.exact_eps_floor = pos(key, value)?,
            "c_L" | "c_l" => self.c_l = pos(key, value)?,
            "tree_count" => self.tree_count = Some(count(key, value)?.max(1)),
            "certificate_cap_words" => self.certificate_cap_words = count(key, value)?,
            _ => return Err(Error::arg(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_named_constants() {
        let cfg = Config::parse("# tuning\nC_T = 2\nc_L=4 # inline\neps_split = 0.5\n").unwrap();
        assert_eq!(cfg.c_t, 2.0);
        assert_eq!(cfg.c_l, 4.0);
        assert_eq!(cfg.eps_split, 0.5);
        assert_eq!(cfg.c_k, Config::default().c_k);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Config::parse("nope = 1").is_err());
        assert!(Config::parse("C_T = -1").is_err());
        assert!(Config::parse("C_T").is_err());
    }
}
