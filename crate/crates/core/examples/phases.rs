//! Diagonal overlaps at a quarter revival and the true/quasi classification.
//!
//! ```text
//! cargo run --release --example phases
//! ```

use susy_quench::basis::{BoxGeometry, HierarchyBasis};
use susy_quench::dynamics::{Evolution, InitialState};
use susy_quench::overlap::{build_overlap, Truncation};
use susy_quench::Result;

fn main() -> Result<()> {
    let basis = HierarchyBasis::new(BoxGeometry::new(4.0)?, 3)?;
    let sea = InitialState::FermiSea { particles: 8 };
    for to in [2, 3] {
        let evo = Evolution::new(build_overlap(&basis, 1, to, 8, Truncation::default())?);
        for tau in [0.25, 1.0] {
            let s = evo.snapshot(tau, &sea, false)?;
            let phases: Vec<String> = s.diagonal.iter().map(|z| format!("{:+.3}", z.arg())).collect();
            println!(
                "1->{to} at {tau} t_r: {} (max offdiag {:.1e})\n  phases {}",
                s.classification.label(),
                s.max_offdiag,
                phases.join(" ")
            );
        }
    }
    Ok(())
}
