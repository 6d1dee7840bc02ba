//! Sudden expansion L' = 3.9 -> L = 4, the reference quench: every quarter
//! revival is a quasi revival and temperature removes them all.
//!
//! ```text
//! cargo run --release --example talbot
//! ```

use susy_quench::basis::BoxGeometry;
use susy_quench::dynamics::{Evolution, InitialState};
use susy_quench::overlap::{Spectrum, Truncation};
use susy_quench::talbot::{box_box_overlap, talbot_overlap_matrix, ExpansionSpec};
use susy_quench::thermal::ThermalState;
use susy_quench::Result;

fn main() -> Result<()> {
    println!("<1|1> = {:.10}", box_box_overlap(1, 1, 3.9, 4.0));
    let narrow = Spectrum { scale: BoxGeometry::new(3.9)?.ground_energy(), shift: 0 };
    let hot = InitialState::Thermal(ThermalState::at_temperature(&narrow, 30, 0.05)?);
    let spec = ExpansionSpec {
        length_initial: 3.9,
        length_final: 4.0,
        particles: 30,
        rows: hot.required_rows(),
        truncation: Truncation::default(),
    };
    let u = talbot_overlap_matrix(&spec)?;
    println!("K = {}, M = {}, max defect {:.2e}", u.rows(), u.cols(), u.max_defect());
    let evo = Evolution::new(u);
    let sea = InitialState::FermiSea { particles: 30 };
    for p in 1..=8 {
        let tau = p as f64 / 4.0;
        let cold = evo.snapshot(tau, &sea, false)?;
        let warm = evo.survival_at_fraction(tau, &hot)?;
        println!(
            "t = {p}/4 t_r: F(T=0) = {:.8} [{}], F(0.05 T_F) = {:.4}",
            cold.survival,
            cold.classification.label(),
            warm.value
        );
    }
    Ok(())
}
