//! Overlap matrix between two hierarchy levels and its truncation data.
//!
//! ```text
//! cargo run --release --example overlaps
//! ```

use susy_quench::basis::{BoxGeometry, HierarchyBasis};
use susy_quench::overlap::{build_overlap, intertwined_overlap, Truncation};
use susy_quench::quadrature::QuadratureRule;
use susy_quench::Result;

fn main() -> Result<()> {
    let geom = BoxGeometry::new(4.0)?;
    let basis = HierarchyBasis::new(geom, 4)?;

    for (to, columns) in [(2, 80), (2, 400), (3, 400)] {
        let u = build_overlap(&basis, 1, to, 30, Truncation::Fixed { columns })?;
        println!("1->{to}, K = 30, M = {columns}: max defect {:.3e}", u.max_defect());
    }

    let u = build_overlap(&basis, 1, 2, 30, Truncation::default())?;
    println!("adaptive truncation picked M = {} (defect {:.2e})", u.cols(), u.max_defect());

    println!("U[1][1..5] = {:?}", (0..5).map(|m| format!("{:+.6}", u.entries[(0, m)])).collect::<Vec<_>>());
    println!("U[2][1] = {} (parity)", u.entries[(1, 0)]);

    // same entries from A applied to the box states
    let rule = QuadratureRule::for_index_sum(64, &geom);
    for (k, m) in [(1, 1), (3, 1), (2, 4)] {
        let direct = u.entries[(k - 1, m - 1)];
        let ladder = intertwined_overlap(k, m, &geom, &rule)?;
        println!("U[{k}][{m}]: quadrature {direct:+.12} ladder {ladder:+.12}");
    }
    Ok(())
}
