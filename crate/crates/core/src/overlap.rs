//! Cross-level overlap matrices and their truncation diagnostics.
//!
//! The expansion of a box state in the eigenbasis of a partner level (or of a
//! wider box) converges only algebraically: the squared overlaps fall off as
//! m⁻⁴, so the completeness defect of a row decays like M⁻³. Two exact
//! sum rules are therefore stored next to the truncated matrix U:
//!
//! * the weight of the discarded columns, `R = 1 − U Uᵀ` (completeness of the
//!   final basis), and
//! * their energy, `Q = S − U diag(E_to) Uᵀ`, where `S = ⟨ψ_k|H_to|ψ_l⟩` is
//!   integrated directly.
//!
//! The dynamics module uses them to close the truncated sum over final states.

use nalgebra::DMatrix;

use crate::basis::{box_energy, BoxGeometry, HierarchyBasis, HierarchyLevel};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

/// Quadratic level ladder E(m) = scale · (m + shift)², m ≥ 1.
///
/// Every spectrum in this crate is of that form: level α of a box of width L
/// has scale E₁(L) and shift α − 1.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Spectrum {
    pub scale: f64,
    pub shift: usize,
}

impl Spectrum {
    pub fn hierarchy(geom: &BoxGeometry, level: HierarchyLevel) -> Self {
        Self { scale: geom.ground_energy(), shift: level.get() as usize - 1 }
    }

    /// Integer (m + shift)², i.e. the energy in units of `scale`.
    pub fn quanta(&self, m: usize) -> u64 {
        let n = (m + self.shift) as u64;
        n * n
    }

    pub fn energy(&self, m: usize) -> f64 {
        self.scale * self.quanta(m) as f64
    }

    pub fn energies(&self, count: usize) -> Vec<f64> {
        (1..=count).map(|m| self.energy(m)).collect()
    }
}

/// Which pair of single-particle bases the overlaps connect.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OverlapSource {
    Hierarchy { length: f64, from_level: u32, to_level: u32 },
    Expansion { length_initial: f64, length_final: f64 },
}

/// Real overlap matrix U[k][m] = ⟨ψ^from_k | ψ^to_m⟩ with truncation data.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    pub source: OverlapSource,
    pub entries: DMatrix<f64>,
    /// 1 − Σ_m U[k][m]² per row.
    pub completeness_defect: Vec<f64>,
    pub initial: Spectrum,
    pub final_spectrum: Spectrum,
    /// Weight of the discarded columns, δ_kl − Σ_m U_km U_lm.
    pub tail_weight: DMatrix<f64>,
    /// Energy of the discarded columns, S_kl − Σ_m U_km U_lm E_m.
    pub tail_energy: DMatrix<f64>,
    /// Quadrature order used for the entries (0 for closed forms).
    pub rule_order: usize,
}

impl OverlapMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn max_defect(&self) -> f64 {
        self.completeness_defect.iter().copied().fold(0.0, f64::max)
    }

    pub fn initial_energies(&self) -> Vec<f64> {
        self.initial.energies(self.rows())
    }

    pub fn final_energies(&self) -> Vec<f64> {
        self.final_spectrum.energies(self.cols())
    }

    /// Keep only the first `rows` initial states.
    pub fn leading_rows(&self, rows: usize) -> Result<OverlapMatrix> {
        if rows > self.rows() {
            return Err(Error::Dimension(format!(
                "requested {rows} rows from a matrix with {}",
                self.rows()
            )));
        }
        Ok(OverlapMatrix {
            source: self.source,
            entries: self.entries.rows(0, rows).into_owned(),
            completeness_defect: self.completeness_defect[..rows].to_vec(),
            initial: self.initial,
            final_spectrum: self.final_spectrum,
            tail_weight: self.tail_weight.view((0, 0), (rows, rows)).into_owned(),
            tail_energy: self.tail_energy.view((0, 0), (rows, rows)).into_owned(),
            rule_order: self.rule_order,
        })
    }
}

/// Per-row defects and their maximum.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DefectReport {
    pub per_row: Vec<f64>,
    pub max: f64,
}

pub fn completeness_defect_report(u: &OverlapMatrix) -> DefectReport {
    let per_row = row_defects(&u.entries);
    let max = per_row.iter().copied().fold(0.0, f64::max);
    DefectReport { per_row, max }
}

pub(crate) fn row_defects(u: &DMatrix<f64>) -> Vec<f64> {
    (0..u.nrows()).map(|k| 1.0 - u.row(k).iter().map(|v| v * v).sum::<f64>()).collect()
}

/// How many final states to keep.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Truncation {
    Fixed { columns: usize },
    /// Smallest multiple of `step` whose largest row defect is below
    /// `tolerance`; fails past `cap`.
    Adaptive { tolerance: f64, step: usize, cap: usize },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Adaptive { tolerance: DEFAULT_DEFECT_TOLERANCE, step: 40, cap: 4000 }
    }
}

pub const DEFAULT_DEFECT_TOLERANCE: f64 = 1e-5;

/// U[k][m] = ⟨ψ^(from)_k | ψ^(to)_m⟩ for k ≤ K, m ≤ M by quadrature.
///
/// Entries forbidden by parity are set to exactly zero.
pub fn overlap_matrix(
    basis: &HierarchyBasis,
    from_level: u32,
    to_level: u32,
    rows: usize,
    cols: usize,
    rule: &QuadratureRule,
) -> Result<OverlapMatrix> {
    let from = basis.level(from_level)?;
    let to = basis.level(to_level)?;
    let u = raw_overlaps(basis, from_level, to_level, rows, cols, rule)?;
    let s = hierarchy_energy_moment(basis, from, to, rows, rule)?;
    let geom = basis.geometry();
    Ok(assemble(
        OverlapSource::Hierarchy { length: geom.length(), from_level, to_level },
        u,
        s,
        Spectrum::hierarchy(geom, from),
        Spectrum::hierarchy(geom, to),
        rule.order(),
    ))
}

/// Overlap matrix with the final-basis size picked by `truncation`.
pub fn build_overlap(
    basis: &HierarchyBasis,
    from_level: u32,
    to_level: u32,
    rows: usize,
    truncation: Truncation,
) -> Result<OverlapMatrix> {
    let geom = *basis.geometry();
    let shift = (from_level.max(to_level)) as usize;
    let build = |cols: usize| {
        let rule = QuadratureRule::for_index_sum(rows + cols + 2 * shift, &geom);
        overlap_matrix(basis, from_level, to_level, rows, cols, &rule)
    };
    match truncation {
        Truncation::Fixed { columns } => build(columns),
        Truncation::Adaptive { tolerance, step, cap } => {
            let cols = adaptive_columns(rows, tolerance, step, cap, |m| {
                raw_overlaps(
                    basis,
                    from_level,
                    to_level,
                    rows,
                    m,
                    &QuadratureRule::for_index_sum(rows + m + 2 * shift, &geom),
                )
            })?;
            build(cols)
        }
    }
}

/// Smallest multiple of `step` (≥ rows) meeting the defect tolerance.
///
/// Probes doubling sizes, then scans column prefixes of the first adequate
/// probe; prefix defects are exact because entries do not depend on M.
pub(crate) fn adaptive_columns<F>(
    rows: usize,
    tolerance: f64,
    step: usize,
    cap: usize,
    mut raw: F,
) -> Result<usize>
where
    F: FnMut(usize) -> Result<DMatrix<f64>>,
{
    let step = step.max(1);
    let first = rows.div_ceil(step).max(1) * step;
    let mut probe = first;
    loop {
        let probe_cols = probe.min(cap);
        let u = raw(probe_cols)?;
        let mut partial = vec![0.0; rows];
        let mut cols = 0;
        while cols + step <= probe_cols {
            for m in cols..cols + step {
                for (k, acc) in partial.iter_mut().enumerate() {
                    *acc += u[(k, m)] * u[(k, m)];
                }
            }
            cols += step;
            if cols >= first && partial.iter().all(|p| 1.0 - p < tolerance) {
                return Ok(cols);
            }
        }
        if probe_cols >= cap {
            let worst = partial.iter().map(|p| 1.0 - p).fold(0.0, f64::max);
            return Err(Error::TruncationInsufficient(format!(
                "max completeness defect {worst:.3e} at M = {probe_cols} exceeds tolerance {tolerance:.1e}"
            )));
        }
        probe *= 2;
    }
}

fn raw_overlaps(
    basis: &HierarchyBasis,
    from_level: u32,
    to_level: u32,
    rows: usize,
    cols: usize,
    rule: &QuadratureRule,
) -> Result<DMatrix<f64>> {
    let mut left = basis.tabulate(from_level, rows, rule.nodes())?;
    for (j, &w) in rule.weights().iter().enumerate() {
        left.column_mut(j).scale_mut(w);
    }
    let right = basis.tabulate(to_level, cols, rule.nodes())?;
    let mut u = left * right.transpose();
    enforce_parity_selection(&mut u);
    Ok(u)
}

/// States of opposite parity have vanishing overlap; that happens exactly
/// when k + m is odd for every pair of bases in this crate.
pub(crate) fn enforce_parity_selection(u: &mut DMatrix<f64>) {
    for m in 0..u.ncols() {
        for k in 0..u.nrows() {
            if (k + m) % 2 == 1 {
                u[(k, m)] = 0.0;
            }
        }
    }
}

/// S_kl = ⟨ψ^(from)_k | H^(to) | ψ^(from)_l⟩ with physical (unshifted) energies.
///
/// H^(to) − H^(from) = E₁ [α_t(α_t−1) − α_f(α_f−1)] sec²(πx/L) once the offsets
/// (α−1)²E₁ are restored, so only a sec² matrix element is needed.
fn hierarchy_energy_moment(
    basis: &HierarchyBasis,
    from: HierarchyLevel,
    to: HierarchyLevel,
    rows: usize,
    rule: &QuadratureRule,
) -> Result<DMatrix<f64>> {
    let geom = basis.geometry();
    let af = from.get() as f64;
    let at = to.get() as f64;
    let coupling = geom.ground_energy() * (at * (at - 1.0) - af * (af - 1.0));
    let tab = basis.tabulate(from.get(), rows, rule.nodes())?;
    let mut weighted = tab.clone();
    for (j, (&x, &w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        let c = geom.angle(x).cos();
        weighted.column_mut(j).scale_mut(w / (c * c));
    }
    let mut s = weighted * tab.transpose() * coupling;
    for k in 0..rows {
        s[(k, k)] += basis.energy(from.get(), k + 1)?;
        for l in 0..rows {
            if (k + l) % 2 == 1 {
                s[(k, l)] = 0.0;
            }
        }
    }
    Ok(s)
}

pub(crate) fn assemble(
    source: OverlapSource,
    u: DMatrix<f64>,
    energy_moment: DMatrix<f64>,
    initial: Spectrum,
    final_spectrum: Spectrum,
    rule_order: usize,
) -> OverlapMatrix {
    let rows = u.nrows();
    let e_to = final_spectrum.energies(u.ncols());
    let mut scaled = u.clone();
    for (m, e) in e_to.iter().enumerate() {
        scaled.column_mut(m).scale_mut(*e);
    }
    let gram = &u * u.transpose();
    let tail_weight = DMatrix::identity(rows, rows) - &gram;
    let tail_energy = energy_moment - &scaled * u.transpose();
    OverlapMatrix {
        source,
        completeness_defect: (0..rows).map(|k| tail_weight[(k, k)]).collect(),
        entries: u,
        initial,
        final_spectrum,
        tail_weight,
        tail_energy,
        rule_order,
    }
}

/// U_km by the intertwining route, ⟨ψ⁽¹⁾_k | A₁ ψ⁽¹⁾_{m+1}⟩ / √(E_{m+1} − E₁),
/// with A₁ applied analytically to the box state.
pub fn intertwined_overlap(k: usize, m: usize, geom: &BoxGeometry, rule: &QuadratureRule) -> Result<f64> {
    use crate::basis::{apply_annihilation, box_wavefunction, Evaluate};
    let left = box_wavefunction(k, geom)?;
    let source = box_wavefunction(m + 1, geom)?;
    let image = apply_annihilation(HierarchyLevel::BOX, &source, geom);
    let gap = box_energy(m + 1, geom)? - box_energy(1, geom)?;
    let raw: f64 = rule
        .nodes()
        .iter()
        .zip(rule.weights())
        .map(|(&x, &w)| w * left.value(x) * image.value(x))
        .sum();
    Ok(raw / gap.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Evaluate, HierarchyBasis};
    use crate::quadrature::{inner_product, DEFAULT_ORDER};

    fn basis() -> HierarchyBasis {
        HierarchyBasis::new(BoxGeometry::new(4.0).unwrap(), 4).unwrap()
    }

    #[test]
    fn same_level_is_identity() {
        let b = basis();
        let rule = QuadratureRule::gauss_legendre(DEFAULT_ORDER, b.geometry());
        for alpha in 1..=4 {
            let u = overlap_matrix(&b, alpha, alpha, 20, 20, &rule).unwrap();
            let err = (&u.entries - DMatrix::<f64>::identity(20, 20)).abs().max();
            assert!(err < 1e-12, "alpha {alpha}: {err}");
            assert!(u.max_defect().abs() < 1e-12);
        }
    }

    #[test]
    fn parity_selection_zeroes() {
        let b = basis();
        let rule = QuadratureRule::gauss_legendre(DEFAULT_ORDER, b.geometry());
        let u = overlap_matrix(&b, 1, 2, 10, 40, &rule).unwrap();
        assert_eq!(u.entries[(1, 0)], 0.0);
        let p1 = b.state(1, 2).unwrap();
        let p2 = b.state(2, 1).unwrap();
        assert!(inner_product(&p1, &p2, &rule).abs() < 1e-14);
        for k in 0..10 {
            for m in 0..40 {
                assert!(u.entries[(k, m)].abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn ground_overlap_between_first_two_levels() {
        let b = basis();
        let rule = QuadratureRule::gauss_legendre(DEFAULT_ORDER, b.geometry());
        let v = inner_product(&b.state(1, 1).unwrap(), &b.state(2, 1).unwrap(), &rule);
        assert!(v > 0.0 && v < 1.0);
        // ∫cos³θ dθ ∝ 4/3 against normalizations √(2/π)·√(8/(3π)) → 8/(3π)·... closed form
        let exact = (4.0 / 3.0) * (2.0 / std::f64::consts::PI).sqrt() * (8.0 / (3.0 * std::f64::consts::PI)).sqrt();
        assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
    }

    #[test]
    fn defect_report_for_identity_and_truncated_expansion() {
        let b = basis();
        let rule = QuadratureRule::gauss_legendre(DEFAULT_ORDER, b.geometry());
        let u = overlap_matrix(&b, 1, 1, 5, 5, &rule).unwrap();
        let rep = completeness_defect_report(&u);
        assert!(rep.max.abs() < 1e-12);

        // a two-term expansion truncated to one column
        let mut u2 = u.clone();
        let (a, c) = (0.6f64, 0.8f64);
        u2.entries = DMatrix::from_row_slice(1, 1, &[a]);
        let rep = completeness_defect_report(&u2);
        assert!((rep.per_row[0] - c * c).abs() < 1e-15);
    }

    #[test]
    fn adaptive_truncation_is_monotone_and_meets_tolerance() {
        let b = basis();
        let u = build_overlap(
            &b,
            1,
            2,
            10,
            Truncation::Adaptive { tolerance: 1e-4, step: 40, cap: 2000 },
        )
        .unwrap();
        assert_eq!(u.cols() % 40, 0);
        assert!(u.max_defect() < 1e-4);
        assert!(u.completeness_defect.iter().all(|&d| d >= -1e-10));
        let err = build_overlap(
            &b,
            1,
            4,
            10,
            Truncation::Adaptive { tolerance: 1e-12, step: 40, cap: 200 },
        );
        assert!(matches!(err, Err(Error::TruncationInsufficient(_))));
    }

    #[test]
    fn energy_moment_matches_direct_quadrature() {
        // S_kk = E_k + ⟨ψ_k|V^(α) + offset|ψ_k⟩
        let b = basis();
        let rule = QuadratureRule::for_index_sum(200, b.geometry());
        let u = overlap_matrix(&b, 1, 3, 6, 80, &rule).unwrap();
        let v = crate::basis::partner_potential(HierarchyLevel::new(3).unwrap(), b.geometry());
        for k in 1..=6 {
            let psi = b.state(1, k).unwrap();
            let direct = rule.integrate(&|x: f64| psi.value(x) * psi.value(x) * v.value(x))
                + v.energy_offset()
                + psi.energy;
            let truncated: f64 = (0..80)
                .map(|m| u.entries[(k - 1, m)].powi(2) * u.final_spectrum.energy(m + 1))
                .sum();
            let s = truncated + u.tail_energy[(k - 1, k - 1)];
            assert!((s - direct).abs() < 1e-9 * direct, "k={k}: {s} vs {direct}");
        }
    }
}
