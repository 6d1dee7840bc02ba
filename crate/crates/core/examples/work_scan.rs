//! Closed-form average and irreversible work against particle number.
//!
//! ```text
//! cargo run --example work_scan
//! ```

use susy_quench::basis::BoxGeometry;
use susy_quench::work::work_scan;
use susy_quench::Result;

fn main() -> Result<()> {
    let geom = BoxGeometry::new(4.0)?;
    let e1 = geom.ground_energy();
    println!("{:>4} {:>5} {:>10} {:>10} {:>10}", "N", "alpha", "<W>/E1", "W_irr/E1", "dE0/E1");
    for row in work_scan(&[2, 3, 4], 1..=50, &geom)?.iter().filter(|r| r.particles % 10 == 0 || r.particles == 1) {
        println!(
            "{:>4} {:>5} {:>10.0} {:>10.0} {:>10.0}",
            row.particles,
            row.alpha,
            row.average_work / e1,
            row.irreversible_work / e1,
            row.ground_state_shift / e1
        );
    }
    Ok(())
}
