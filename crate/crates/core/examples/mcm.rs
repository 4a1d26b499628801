//! Approximate maximum-cardinality matching on a random bipartite graph,
//! checked against Hopcroft-Karp.
//!
//!     cargo run --release --example mcm -- [n_left] [n_right] [m] [eps]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semistream::matching::{mcm_approx, BipartiteGraph};
use semistream::oracles::hopcroft_karp;
use semistream::{Config, ResourceMeter};

fn main() -> semistream::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let nl = args.first().map_or(60, |&x| x as usize);
    let nr = args.get(1).map_or(60, |&x| x as usize);
    let m = args.get(2).map_or(600, |&x| x as usize);
    let eps = args.get(3).copied().unwrap_or(0.1);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pairs: Vec<(usize, usize)> = (0..m).map(|_| (rng.gen_range(0..nl), rng.gen_range(0..nr))).collect();
    let g = BipartiteGraph::from_pairs(nl, nr, &pairs)?;

    let meter = ResourceMeter::new();
    let matching = mcm_approx(&g, eps, &Config::default(), &meter)?;
    matching.validate(&g)?;
    let best = hopcroft_karp(nl, nr, &pairs).value;

    println!("graph: {nl} x {nr}, {m} edges, eps = {eps}");
    println!("matching size {} (maximum {best}, target {})", matching.size(), ((1.0 - eps) * best).ceil());
    let r = meter.reading();
    println!("passes {}, peak words {}, work {}", r.passes, r.peak_words, r.work);
    Ok(())
}
