//! Solving a small box-simplex game `min_x max_y y^T (A^T x - b) + c^T x`
//! and reading back the averaged minimizer.
//!
//!     cargo run --release --example box_simplex

use semistream::boxsimplex::{for_each_averaged_coordinate, solve, BoxSimplexInstance, MatrixRows};
use semistream::oracles::box_simplex_value;
use semistream::{Config, ResourceMeter};

fn main() -> semistream::Result<()> {
    let a = vec![vec![1.0, 0.0, -0.5], vec![0.0, 1.0, 0.5], vec![0.5, 0.5, 0.0], vec![-1.0, 0.0, 1.0]];
    let c = vec![0.3, 0.1, 0.0, 0.2];
    let b = vec![0.2, 0.4, 0.1];
    let inst = BoxSimplexInstance::new(MatrixRows::from_dense(&a, &c)?, b.clone())?;

    let eps = 0.02 * 2.0;
    let meter = ResourceMeter::new();
    let mut report = solve(&inst, eps, &Config::default(), &meter)?;
    println!("value {:.5} (optimum {:.5}, eps {eps})", report.value, box_simplex_value(&a, &b, &c));
    println!("T = {}, K = {}, passes {}", report.t, report.k, meter.passes());

    for_each_averaged_coordinate(&mut report, &inst, &meter, |row, _, x| println!("  x[{row}] = {x:.4}"))?;
    Ok(())
}
