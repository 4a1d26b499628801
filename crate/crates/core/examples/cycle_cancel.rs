//! Sparsifying a dense fractional bipartite flow with the link/cut cycle
//! canceller: marginals stay put, the weight never drops, the support
//! becomes a forest.
//!
//!     cargo run --release --example cycle_cancel

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semistream::flow::SparseFlow;
use semistream::linkcut::{bcco, Objective};
use semistream::ResourceMeter;

fn main() -> semistream::Result<()> {
    let (nl, nr) = (30, 30);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut weights = vec![vec![0.0; nr]; nl];
    let mut records = Vec::new();
    for (l, row) in weights.iter_mut().enumerate() {
        for (r, w) in row.iter_mut().enumerate() {
            *w = rng.gen_range(0.0..1.0);
            records.push((l, r, rng.gen_range(0.0..1.0)));
        }
    }
    let before: SparseFlow = records.iter().copied().collect();
    let meter = ResourceMeter::new();
    let after = bcco(nl, nr, &records, |l, r| weights[l][r], Objective::Maximize, &meter)?;

    let (bl, br) = before.marginals(nl, nr);
    let (al, ar) = after.marginals(nl, nr);
    let drift = bl.iter().zip(&al).chain(br.iter().zip(&ar)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    println!("support {} -> {} (vertices {})", before.len(), after.len(), nl + nr);
    println!("weight {:.4} -> {:.4}", before.weight(|l, r| weights[l][r]), after.weight(|l, r| weights[l][r]));
    println!("largest marginal change {drift:.1e}, peak words {}", meter.peak_words());
    Ok(())
}
