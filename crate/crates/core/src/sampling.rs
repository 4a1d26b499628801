//! Sparsification of simplex points by scaled-Bernoulli sampling.
//!
//! Coordinate `i` becomes `M_i / K` times a `Binomial(K, x_i / M_i)` draw, which
//! is the sum of `K` independent scaled Bernoulli variables in one draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::boxsimplex::RowSource;
use crate::error::{Error, Result};
use crate::stream::{ResourceMeter, StreamSource};

/// `ceil(12 ln(m n) / eps^2)`, at least 1.
pub fn sample_count(m: usize, n: usize, eps: f64) -> usize {
    let mn = (m.max(1) * n.max(1)).max(2) as f64;
    ((12.0 * mn.ln() / (eps * eps)).ceil() as usize).max(1)
}

/// Sample count and seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleSpec {
    pub k: usize,
    pub seed: u64,
}

/// Draws coordinates one at a time from a seeded stream of randomness.
pub struct Sampler {
    k: u64,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(k: usize, seed: u64) -> Self {
        Sampler { k: k.max(1) as u64, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// `(M / K) * Binomial(K, x / M)`. Errors when `x > M`.
    pub fn sample(&mut self, x: f64, scale: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        if !(x.is_finite() && x > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(Error::arg(format!("cannot sample x = {x} with scale {scale}")));
        }
        let p = x / scale;
        if p > 1.0 + 1e-12 {
            return Err(Error::arg(format!("x = {x} exceeds its scale {scale}")));
        }
        let draws = Binomial::new(self.k, p.min(1.0))
            .map_err(|e| Error::Internal(e.to_string()))?
            .sample(&mut self.rng);
        Ok(draws as f64 * scale / self.k as f64)
    }
}

/// One pass over streamed coordinates `(i, x_i)` with scales `scale(i)`.
/// Returns the nonzero samples.
pub fn random_sample(
    x: &StreamSource<(usize, f64)>,
    scale: impl Fn(usize) -> f64,
    spec: SampleSpec,
    meter: &ResourceMeter,
) -> Result<Vec<(usize, f64)>> {
    let mut sampler = Sampler::new(spec.k, spec.seed);
    let mut out = Vec::new();
    let mut err = None;
    x.for_each_pass(meter, |_, &(i, xi)| {
        if err.is_some() {
            return;
        }
        match sampler.sample(xi, scale(i)) {
            Ok(v) if v > 0.0 => out.push((i, v)),
            Ok(_) => {}
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// `B_j = [|A|^T x]_j` in one pass; `x` is dense over row ids.
pub fn column_loads<R: RowSource>(rows: &R, x: &[f64], meter: &ResourceMeter) -> Vec<f64> {
    let mut b = vec![0.0; rows.n_cols()];
    rows.scan(meter, &mut |i, entries, _| {
        for &(j, a) in entries {
            b[j] += a.abs() * x[i];
        }
    });
    b
}

/// `M_i = min_j B_j / |A_ij|` over the nonzeros of a row.
pub fn row_scale(entries: &[(usize, f64)], loads: &[f64]) -> f64 {
    entries
        .iter()
        .filter(|e| e.1 != 0.0)
        .map(|&(j, a)| loads[j] / a.abs())
        .fold(f64::INFINITY, f64::min)
}

/// Measured deviations of a sample from its source point.
#[derive(Clone, Debug)]
pub struct SampleReport {
    pub k: usize,
    pub eps: f64,
    /// `|[A^T x̂ - A^T x]_j|` per column.
    pub col_dev: Vec<f64>,
    pub loads: Vec<f64>,
    pub mass_dev: f64,
    pub cost_dev: f64,
    pub c_inf: f64,
    /// `max_i M_i`.
    pub big_b: f64,
    pub support: usize,
    /// `sum_i x_i max_j |A_ij| / B_j`.
    pub spread: f64,
}

impl SampleReport {
    /// `max_j |[A^T x̂ - A^T x]_j| / B_j` over columns with positive load.
    pub fn max_relative_col_dev(&self) -> f64 {
        self.col_dev
            .iter()
            .zip(&self.loads)
            .filter(|(_, &b)| b > 0.0)
            .map(|(d, b)| d / b)
            .fold(0.0, f64::max)
    }

    /// Which of the four concentration conclusions hold: column loads, total
    /// mass, cost, and support at most `2K + 2K * spread`.
    pub fn conclusions(&self) -> [bool; 4] {
        let slack = self.eps * self.big_b.max(1.0);
        let tol = 1e-12;
        [
            self.col_dev.iter().zip(&self.loads).all(|(d, b)| *d <= self.eps * b + tol),
            self.mass_dev <= slack + tol,
            self.cost_dev <= slack * self.c_inf + tol,
            (self.support as f64) <= 2.0 * self.k as f64 * (1.0 + self.spread),
        ]
    }
}

/// Samples a dense point `x` with the tight scales `M_i = min_j B_j / |A_ij|`,
/// `B_j = [|A|^T x]_j` (or caller-provided `loads`), and measures the result.
pub fn sample_and_verify<R: RowSource>(
    x: &[f64],
    rows: &R,
    loads: Option<&[f64]>,
    eps: f64,
    spec: SampleSpec,
    meter: &ResourceMeter,
) -> Result<(Vec<(usize, f64)>, SampleReport)> {
    let loads: Vec<f64> = match loads {
        Some(b) => b.to_vec(),
        None => column_loads(rows, x, meter),
    };
    let mut sampler = Sampler::new(spec.k, spec.seed);
    let n = rows.n_cols();
    let mut at_x = vec![0.0; n];
    let mut at_hat = vec![0.0; n];
    let (mut mass, mut mass_hat, mut cost, mut cost_hat) = (0.0, 0.0, 0.0, 0.0);
    let (mut c_inf, mut big_b, mut spread) = (0.0f64, 0.0f64, 0.0);
    let mut out = Vec::new();
    let mut err = None;
    rows.scan(meter, &mut |i, entries, c| {
        let scale = row_scale(entries, &loads);
        let xi = x[i];
        if scale.is_finite() {
            big_b = big_b.max(scale);
        }
        c_inf = c_inf.max(c.abs());
        if xi > 0.0 {
            spread += xi * entries.iter().map(|&(j, a)| a.abs() / loads[j]).fold(0.0, f64::max);
        }
        let v = match sampler.sample(xi, scale) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        if v > 0.0 {
            out.push((i, v));
        }
        mass += xi;
        mass_hat += v;
        cost += c * xi;
        cost_hat += c * v;
        for &(j, a) in entries {
            at_x[j] += a * xi;
            at_hat[j] += a * v;
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let report = SampleReport {
        k: spec.k,
        eps,
        col_dev: at_x.iter().zip(&at_hat).map(|(p, q)| (p - q).abs()).collect(),
        loads,
        mass_dev: (mass - mass_hat).abs(),
        cost_dev: (cost - cost_hat).abs(),
        c_inf,
        big_b,
        support: out.len(),
        spread,
    };
    Ok((out, report))
}
