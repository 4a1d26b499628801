//! Exact maximum matching: an approximate start finished by augmenting paths.
//!
//!     cargo run --release --example mcm_exact

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semistream::matching::{mcm_exact, BipartiteGraph};
use semistream::oracles::hopcroft_karp;
use semistream::{Config, ResourceMeter};

fn main() -> semistream::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..5 {
        let (nl, nr) = (rng.gen_range(10..=50), rng.gen_range(10..=50));
        let m = rng.gen_range(nl..=4 * nl);
        let pairs: Vec<(usize, usize)> = (0..m).map(|_| (rng.gen_range(0..nl), rng.gen_range(0..nr))).collect();
        let g = BipartiteGraph::from_pairs(nl, nr, &pairs)?;
        let meter = ResourceMeter::new();
        let matching = mcm_exact(&g, &Config::default(), &meter)?;
        matching.validate(&g)?;
        println!(
            "trial {trial}: {nl}x{nr}, {m} edges -> size {} (Hopcroft-Karp {}), {} passes",
            matching.size(),
            hopcroft_karp(nl, nr, &pairs).value,
            meter.passes()
        );
    }
    Ok(())
}
