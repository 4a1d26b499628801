//! Scaled-Bernoulli sparsification of a dense point on the simplex, with the
//! measured deviations of column loads, mass and cost.
//!
//!     cargo run --release --example sampling

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semistream::boxsimplex::MatrixRows;
use semistream::sampling::{sample_and_verify, sample_count, SampleSpec};
use semistream::ResourceMeter;

fn main() -> semistream::Result<()> {
    let (m, n, eps) = (400, 8, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let c: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let x: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let rows = MatrixRows::from_dense(&a, &c)?;

    let k = sample_count(m, n, eps);
    let meter = ResourceMeter::new();
    let (sample, report) = sample_and_verify(&x, &rows, None, eps, SampleSpec { k, seed: 7 }, &meter)?;
    println!("K = {k}: kept {} of {m} coordinates", sample.len());
    println!("max relative column deviation {:.4} (eps {eps})", report.max_relative_col_dev());
    println!("mass deviation {:.4}, cost deviation {:.4}", report.mass_dev, report.cost_dev);
    println!("conclusions hold: {:?}", report.conclusions());
    Ok(())
}
