//! Approximate s-t shortest path from the support of an approximate unit
//! flow. The triangle has a direct edge of length 3 and a two-hop path of
//! length 2.
//!
//!     cargo run --release --example shortest_path

use semistream::stream::{EdgeRecord, StreamSource};
use semistream::transshipment::{shortest_path, TransshipInstance};
use semistream::{Config, ResourceMeter};

fn main() -> semistream::Result<()> {
    let edges = vec![EdgeRecord::new(0, 1, 1.0), EdgeRecord::new(1, 2, 1.0), EdgeRecord::new(0, 2, 3.0)];
    let inst = TransshipInstance::new(3, StreamSource::from_records(edges), vec![0.0; 3])?;
    let meter = ResourceMeter::new();
    let (path, length) = shortest_path(&inst, 0, 2, 0.1, 0, &Config::default(), &meter)?;
    println!("path {path:?}, length {length}, passes {}", meter.passes());
    Ok(())
}
