//! Maximum-weight matching with additive error `eps * max weight`, compared
//! with the Hungarian algorithm.
//!
//!     cargo run --release --example mwm

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semistream::matching::BipartiteGraph;
use semistream::oracles::hungarian;
use semistream::stream::{EdgeRecord, StreamSource};
use semistream::weighted::{matching_weight, mwm_solve};
use semistream::{Config, ResourceMeter};

fn main() -> semistream::Result<()> {
    let (nl, nr, m, eps) = (20, 20, 120, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let edges: Vec<(usize, usize, f64)> =
        (0..m).map(|_| (rng.gen_range(0..nl), rng.gen_range(0..nr), rng.gen_range(0.0..10.0))).collect();
    let recs = edges.iter().map(|&(l, r, w)| EdgeRecord::new(l, r, w)).collect();
    let g = BipartiteGraph::new(nl, nr, StreamSource::from_records(recs))?;

    let meter = ResourceMeter::new();
    let matching = mwm_solve(&g, eps, &Config::default(), &meter)?;
    matching.validate(&g)?;
    let got = matching_weight(&g, &matching);
    let best = hungarian(nl, nr, &edges).value;
    let w_max = edges.iter().map(|e| e.2).fold(0.0, f64::max);
    println!("weight {got:.4}, optimum {best:.4}, allowed loss {:.4}", eps * w_max);
    println!("{} pairs, {} passes", matching.size(), meter.passes());
    Ok(())
}
