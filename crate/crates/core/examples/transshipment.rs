//! Approximate transshipment on a small weighted graph, with the probe log of
//! the budget search.
//!
//!     cargo run --release --example transshipment

use semistream::oracles::transshipment_value;
use semistream::stream::{EdgeRecord, StreamSource};
use semistream::transshipment::{approx_transshipment, TransshipInstance};
use semistream::{Config, ResourceMeter};

fn main() -> semistream::Result<()> {
    // A 4-cycle with one chord.
    let list = [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 0, 2.0), (0, 2, 2.5)];
    let edges = list.iter().map(|&(u, v, w)| EdgeRecord::new(u, v, w)).collect();
    let d = vec![1.0, 0.5, -1.0, -0.5];
    let inst = TransshipInstance::new(4, StreamSource::from_records(edges), d.clone())?;

    let meter = ResourceMeter::new();
    let sol = approx_transshipment(&inst, 0.1, 0, &Config::default(), &meter)?;
    println!("cost {:.4}, optimum {:.4}", sol.value, transshipment_value(4, &inst.edge_list(), &d).expect("connected"));
    println!("initial bracket ({:.3}, {:.3}), alpha {:.2}", sol.bracket.0, sol.bracket.1, sol.alpha);
    for p in &sol.probes {
        println!(
            "  t = {:.4}: value {:.5}, threshold {:.5}, {} after {} iterations",
            p.t,
            p.value,
            p.threshold,
            if p.certified { "certified" } else { "rejected" },
            p.iterations
        );
    }
    for (u, v, x) in sol.flow.iter() {
        println!("  {u} -> {v}: {x:.4}");
    }
    Ok(())
}
