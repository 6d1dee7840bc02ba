//! Zero-temperature survival probability of N = 30 fermions after quenching
//! the box to its partners.
//!
//! ```text
//! cargo run --release --example survival
//! ```

use susy_quench::basis::{BoxGeometry, HierarchyBasis};
use susy_quench::dynamics::{Evolution, InitialState};
use susy_quench::overlap::{build_overlap, Truncation};
use susy_quench::Result;

fn main() -> Result<()> {
    let geom = BoxGeometry::new(4.0)?;
    let basis = HierarchyBasis::new(geom, 4)?;
    let sea = InitialState::FermiSea { particles: 30 };

    for to in 2..=4 {
        let u = build_overlap(&basis, 1, to, 30, Truncation::default())?;
        let evo = Evolution::new(u);
        println!("1->{to} (t_r = {:.4})", evo.revival_time());
        for tau in [0.125, 0.25, 0.375, 0.5, 0.75, 1.0] {
            let f = evo.survival_at_fraction(tau, &sea)?;
            println!("  t/t_r = {tau:<5}  F = {:.10}  ln F = {:+.4}", f.value, f.log);
        }
    }
    Ok(())
}
