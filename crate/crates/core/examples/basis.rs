//! The box eigenbasis and its supersymmetric hierarchy.
//!
//! ```text
//! cargo run --example basis
//! ```

use susy_quench::basis::{
    apply_annihilation, superpotential, BoxGeometry, Evaluate, HierarchyBasis, HierarchyLevel,
};
use susy_quench::Result;

fn main() -> Result<()> {
    let geom = BoxGeometry::new(4.0)?;
    let basis = HierarchyBasis::new(geom, 4)?;
    println!("E1 = {:.6}", geom.ground_energy());

    // level α keeps the box spectrum with its lowest α−1 levels removed
    for alpha in 1..=4 {
        let e: Vec<String> = basis
            .energies(alpha, 5)?
            .iter()
            .map(|e| format!("{:.0}", e / geom.ground_energy()))
            .collect();
        println!("level {alpha}: E/E1 = {}", e.join(" "));
    }

    for alpha in 1..=3 {
        let ground = basis.state(alpha, 1)?;
        let a = apply_annihilation(HierarchyLevel::new(alpha)?, &ground, &geom);
        let worst = (1..20)
            .map(|i| -1.9 + 3.8 * i as f64 / 20.0)
            .map(|x| a.value(x).abs())
            .fold(0.0, f64::max);
        println!("A_{alpha} psi^({alpha})_1: max |value| on a grid = {worst:.1e}");
    }

    let w = superpotential(HierarchyLevel::new(2)?, &geom)?;
    for x in [-1.5, 0.0, 1.5] {
        println!("W2({x:+.1}) = {:+.6}  psi^(2)_1 = {:.6}", w.eval(x)?, basis.state(2, 1)?.eval(x)?);
    }
    Ok(())
}
