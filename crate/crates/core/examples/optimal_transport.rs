//! Optimal transport between two random histograms.
//!
//!     cargo run --release --example optimal_transport

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semistream::oracles::transport_value;
use semistream::weighted::ot_solve;
use semistream::{Config, ResourceMeter};

fn histogram(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn main() -> semistream::Result<()> {
    let n = 10;
    let eps = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // Points on a line; cost is the distance between positions.
    let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let costs: Vec<Vec<f64>> = xs.iter().map(|x| ys.iter().map(|y| (x - y).abs()).collect()).collect();
    let (ell, r) = (histogram(&mut rng, n), histogram(&mut rng, n));

    let meter = ResourceMeter::new();
    let plan = ot_solve(&costs, &ell, &r, eps, &Config::default(), &meter)?;
    let c_max = costs.iter().flatten().cloned().fold(0.0, f64::max);
    println!("plan cost {:.6}, optimum {:.6}, allowed slack {:.6}", plan.cost, transport_value(&costs, &ell, &r), eps * c_max);
    println!("support {} entries, marginal error {:.1e}", plan.entries.len(), plan.marginal_error(&ell, &r));
    println!("passes {}", meter.passes());
    Ok(())
}
