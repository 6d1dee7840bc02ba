//! Sudden expansion of the box from width L′ to L, the non-supersymmetric
//! reference quench. Overlaps between the two box bases are elementary
//! integrals over the narrow box.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::basis::BoxGeometry;
use crate::error::{Error, Result};
use crate::overlap::{adaptive_columns, assemble, OverlapMatrix, OverlapSource, Spectrum, Truncation};

/// Below this frequency mismatch (in units of π/L) the resonant limit is used.
const RESONANCE: f64 = 1e-10;

/// Widths and basis sizes of an expansion quench.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExpansionSpec {
    pub length_initial: f64,
    pub length_final: f64,
    pub particles: usize,
    /// Initial states retained (K).
    pub rows: usize,
    pub truncation: Truncation,
}

impl ExpansionSpec {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.length_initial, self.length_final);
        if !(a > 0.0 && a.is_finite() && b.is_finite()) || a > b {
            return Err(Error::Domain(format!("need 0 < L' <= L, got L' = {a}, L = {b}")));
        }
        if self.particles == 0 || self.rows < self.particles {
            return Err(Error::Domain(format!(
                "need 1 <= N <= K, got N = {}, K = {}",
                self.particles, self.rows
            )));
        }
        Ok(())
    }

    pub fn initial_geometry(&self) -> Result<BoxGeometry> {
        BoxGeometry::new(self.length_initial)
    }

    pub fn final_geometry(&self) -> Result<BoxGeometry> {
        BoxGeometry::new(self.length_final)
    }
}

/// ⟨ψ^{L′}_k | ψ^{L}_l⟩, the narrow-box state extended by zero.
pub fn box_box_overlap(k: usize, l: usize, length_initial: f64, length_final: f64) -> f64 {
    if k == 0 || l == 0 || (k + l) % 2 == 1 {
        return 0.0;
    }
    let h = 0.5 * length_initial;
    let a = k as f64 * PI / length_initial;
    let b = l as f64 * PI / length_final;
    // ∫_{−h}^{h} cos(ωx) dx / 2 with the ω → 0 limit
    let half_integral = |w: f64| {
        if w.abs() < RESONANCE * PI / length_final {
            h
        } else {
            (w * h).sin() / w
        }
    };
    let norm = 2.0 / (length_initial * length_final).sqrt();
    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
    norm * (half_integral(a - b) + sign * half_integral(a + b))
}

fn raw_overlaps(spec: &ExpansionSpec, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(spec.rows, cols, |k, l| {
        box_box_overlap(k + 1, l + 1, spec.length_initial, spec.length_final)
    })
}

/// Overlap matrix of the expansion quench, consumable by the dynamics and
/// work modules.
pub fn talbot_overlap_matrix(spec: &ExpansionSpec) -> Result<OverlapMatrix> {
    spec.validate()?;
    let cols = match spec.truncation {
        Truncation::Fixed { columns } => {
            if columns < spec.rows {
                return Err(Error::Domain(format!("need K <= M, got K = {}, M = {columns}", spec.rows)));
            }
            columns
        }
        Truncation::Adaptive { tolerance, step, cap } => {
            adaptive_columns(spec.rows, tolerance, step, cap, |m| Ok(raw_overlaps(spec, m)))?
        }
    };
    Ok(expansion_overlap(spec, cols))
}

/// The expansion overlap matrix with exactly `cols` final states.
pub fn expansion_overlap(spec: &ExpansionSpec, cols: usize) -> OverlapMatrix {
    let initial = Spectrum { scale: PI * PI / (2.0 * spec.length_initial.powi(2)), shift: 0 };
    let final_spectrum = Spectrum { scale: PI * PI / (2.0 * spec.length_final.powi(2)), shift: 0 };
    // the narrow-box states keep their kinetic energy under the wide-box
    // Hamiltonian, so ⟨ψ_k|H|ψ_l⟩ = E′_k δ_kl
    let energy_moment = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(initial.energies(spec.rows)));
    assemble(
        OverlapSource::Expansion { length_initial: spec.length_initial, length_final: spec.length_final },
        raw_overlaps(spec, cols),
        energy_moment,
        initial,
        final_spectrum,
        0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{box_wavefunction, Evaluate};
    use crate::quadrature::QuadratureRule;

    #[test]
    fn identical_widths_give_identity() {
        for k in 1..12 {
            for l in 1..12 {
                let v = box_box_overlap(k, l, 4.0, 4.0);
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-14, "{k},{l}: {v}");
            }
        }
    }

    #[test]
    fn parity_and_ground_value() {
        assert_eq!(box_box_overlap(1, 2, 3.9, 4.0), 0.0);
        assert_eq!(box_box_overlap(4, 7, 3.9, 4.0), 0.0);
        let v = box_box_overlap(1, 1, 3.9, 4.0);
        assert!(v > 0.99 && v < 1.0, "{v}");
    }

    #[test]
    fn closed_form_matches_quadrature() {
        // oracle: Gauss-Legendre over the narrow box, where both factors are smooth
        let narrow = BoxGeometry::new(3.9).unwrap();
        let wide = BoxGeometry::new(4.0).unwrap();
        let rule = QuadratureRule::gauss_legendre(400, &narrow);
        for k in [1usize, 2, 5, 30] {
            for l in [1usize, 3, 4, 6, 31, 120] {
                let f = box_wavefunction(k, &narrow).unwrap();
                let g = box_wavefunction(l, &wide).unwrap();
                let q = rule.integrate(&|x: f64| f.value(x) * g.value(x));
                let c = box_box_overlap(k, l, 3.9, 4.0);
                assert!((q - c).abs() < 1e-12, "k={k} l={l}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn resonant_limit_is_continuous() {
        // L' close to L makes a − b tiny for k = l
        let lp = 4.0 * (1.0 - 1e-13);
        let v = box_box_overlap(7, 7, lp, 4.0);
        assert!((v - 1.0).abs() < 1e-10);
        let lp = 4.0 * (1.0 - 1e-6);
        let v = box_box_overlap(7, 7, lp, 4.0);
        assert!((v - 1.0).abs() < 1e-6);
    }

    #[test]
    fn matrix_and_validation() {
        let spec = ExpansionSpec {
            length_initial: 3.9,
            length_final: 4.0,
            particles: 30,
            rows: 30,
            truncation: Truncation::Fixed { columns: 200 },
        };
        let u = talbot_overlap_matrix(&spec).unwrap();
        assert_eq!((u.rows(), u.cols()), (30, 200));
        assert!(u.max_defect() > 0.0 && u.max_defect() < 1e-4);
        // discarded states sit above every retained level
        assert!(u.tail_energy[(0, 0)] > u.final_spectrum.energy(200) * u.tail_weight[(0, 0)]);
        let bad = ExpansionSpec { length_initial: 4.1, ..spec };
        assert!(talbot_overlap_matrix(&bad).is_err());
        let bad = ExpansionSpec { truncation: Truncation::Fixed { columns: 10 }, ..spec };
        assert!(talbot_overlap_matrix(&bad).is_err());
    }
}
