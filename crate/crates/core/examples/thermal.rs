//! Survival at finite temperature: the quarter revivals of 1->2 fade while
//! those of 1->3 do not.
//!
//! ```text
//! cargo run --release --example thermal
//! ```

use susy_quench::basis::{BoxGeometry, HierarchyBasis, HierarchyLevel};
use susy_quench::dynamics::{Evolution, InitialState};
use susy_quench::overlap::{build_overlap, Spectrum, Truncation};
use susy_quench::thermal::ThermalState;
use susy_quench::Result;

fn main() -> Result<()> {
    let geom = BoxGeometry::new(4.0)?;
    let basis = HierarchyBasis::new(geom, 3)?;
    let spectrum = Spectrum::hierarchy(&geom, HierarchyLevel::BOX);
    let hot = ThermalState::at_temperature(&spectrum, 30, 0.1)?;
    println!(
        "T = 0.1 T_F: beta = {:.4e}, mu = {:.3} E1, {} levels",
        hot.beta,
        hot.mu / geom.ground_energy(),
        hot.levels()
    );
    let state = InitialState::Thermal(hot);

    for to in [2, 3] {
        let u = build_overlap(&basis, 1, to, state.required_rows(), Truncation::default())?;
        let evo = Evolution::new(u);
        let f: Vec<String> = (1..=4)
            .map(|p| evo.survival_at_fraction(p as f64 / 4.0, &state).map(|s| format!("{:.6}", s.value)))
            .collect::<Result<_>>()?;
        println!("1->{to}: F at t_r/4, t_r/2, 3t_r/4, t_r = {}", f.join(", "));
    }
    Ok(())
}
