//! Dynamic forest operations: link, cut, re-root, LCA and path aggregates.
//!
//!     cargo run --release --example link_cut

use semistream::linkcut::DynForest;

fn main() -> semistream::Result<()> {
    // 0 - 1 - 2 - 3 with 1 - 4 hanging off; edge values in brackets.
    let mut f = DynForest::new(5);
    f.link(1, 0, 5.0)?;
    f.link(2, 1, 3.0)?;
    let e = f.link(3, 2, 7.0)?;
    f.link(4, 1, 1.0)?;

    println!("root of 3: {}", f.find_root(3));
    println!("min / sum on the path 3 -> root: {:?} / {}", f.path_min(3), f.path_sum(3));
    println!("lca(3, 4) = {:?}", f.lca(3, 4));
    f.path_add(3, 2.0);
    println!("after adding 2 along it: edge 3-2 holds {}", f.edge_value(e));

    f.change_root(3);
    println!("re-rooted at 3: parent of 2 is {:?}, of 0 is {:?}", f.parent(2), f.parent(0));
    println!("linking 0 to 4 again: {:?}", f.link(0, 4, 1.0).err().map(|e| e.to_string()));
    f.cut(1)?;
    println!("after cutting 1 from its parent: connected(0, 3) = {}", f.connected(0, 3));
    Ok(())
}
