//! Work probability distribution of the 1->2 quench by particle-hole
//! enumeration, at zero and finite temperature.
//!
//! ```text
//! cargo run --release --example wpd -- 12
//! ```

use susy_quench::basis::{BoxGeometry, HierarchyBasis, HierarchyLevel};
use susy_quench::overlap::{build_overlap, Spectrum, Truncation};
use susy_quench::thermal::ThermalState;
use susy_quench::work::{
    average_work, enumerate_final_states, overlap_for_work, wpd_finite_t, MomentTruncation, ThermalWpdOptions,
    WpdOptions,
};
use susy_quench::Result;

fn main() -> Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(12);
    let geom = BoxGeometry::new(4.0)?;
    let basis = HierarchyBasis::new(geom, 2)?;
    let e1 = geom.ground_energy();

    let u = overlap_for_work(&vec![1.0; n], MomentTruncation::default(), |m| {
        build_overlap(&basis, 1, 2, n, Truncation::Fixed { columns: m })
    })?;
    let s = enumerate_final_states(&u, n, &WpdOptions::default())?;
    let w = average_work(HierarchyLevel::new(2)?, n, &geom);
    println!("T = 0, N = {n}, M = {}: {} records", u.cols(), s.records.len());
    println!("  sum P = {:.6}, <W> = {:.4} E1 (closed form {:.0} E1)", s.total_probability, s.first_moment / e1, w / e1);
    let ground = s.ground_record().expect("order-0 record");
    println!("  ground to ground: W = {} E1, P = {:.6}", ground.work_quanta.unwrap(), ground.probability);
    for (order, p) in s.probability_by_order().iter().enumerate() {
        println!("  order {order}: P = {p:.6}");
    }
    let top = s.records.iter().max_by(|a, b| a.probability.total_cmp(&b.probability)).unwrap();
    println!("  most likely: W = {} E1, P = {:.4}", top.work_quanta.unwrap(), top.probability);

    let n = n.min(8);
    let th = ThermalState::at_temperature(&Spectrum::hierarchy(&geom, HierarchyLevel::BOX), n, 0.05)?;
    let rows = th.levels().max(n + 1);
    let u = overlap_for_work(&th.resized(rows).occupations, MomentTruncation::default(), |m| {
        build_overlap(&basis, 1, 2, rows, Truncation::Fixed { columns: m })
    })?;
    let opts = ThermalWpdOptions { max_order_initial: 2, max_order_final: 2, ..Default::default() };
    let s = wpd_finite_t(&u, &th, &opts)?;
    println!(
        "T = 0.05 T_F, N = {n}: {} records from {} initial configurations (coverage {:.4}), sum P = {:.6}",
        s.records.len(),
        s.initial_configurations,
        s.initial_weight_coverage,
        s.total_probability
    );
    Ok(())
}
