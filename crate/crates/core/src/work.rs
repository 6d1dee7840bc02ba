//! Work statistics of a sudden quench: closed-form moments and the work
//! probability distribution P(W) from Slater-determinant amplitudes.
//!
//! Amplitudes are computed relative to a reference final configuration F₀.
//! With U_I = U[I, ·] the rows of the occupied initial states and
//! G = U[I, F₀]⁻¹ U_I, replacing the holes H ⊂ F₀ by particles P gives
//!
//! ```text
//! ⟨F₀ \ H ∪ P | I⟩ = ± det U[I, F₀] · det G[H, P]
//! ```
//!
//! so every amplitude is an r×r minor with r the excitation order. Because
//! overlaps vanish between states of opposite parity, G splits into an even
//! and an odd sector and the minor factorizes. Candidate particle sets are
//! pruned with Hadamard's bound |det G[H, P]| ≤ Πⱼ ‖G[H, pⱼ]‖.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{BoxGeometry, HierarchyLevel};
use crate::error::{Error, Result};
use crate::linalg::real_det;
use crate::overlap::{OverlapMatrix, OverlapSource};
use crate::thermal::ThermalState;

/// Largest supported excitation order.
pub const MAX_ORDER_LIMIT: usize = 4;
pub const DEFAULT_MAX_ORDER: usize = 3;
pub const DEFAULT_PROBABILITY_THRESHOLD: f64 = 1e-12;
/// Default limit on the number of minors evaluated in one enumeration.
pub const DEFAULT_CANDIDATE_CAP: u64 = 200_000_000;

/// ΔE₀ / E₁ = (α−1)(N² + αN).
pub fn ground_state_shift_quanta(alpha: HierarchyLevel, particles: usize) -> u64 {
    let a = alpha.get() as u64 - 1;
    let n = particles as u64;
    a * (n * n + (a + 1) * n)
}

/// ⟨W⟩ / E₁ = N(N+1)(α² − α).
pub fn average_work_quanta(alpha: HierarchyLevel, particles: usize) -> u64 {
    let a = alpha.get() as u64;
    let n = particles as u64;
    n * (n + 1) * (a * a - a)
}

/// ⟨W_irr⟩ / E₁ = N²(α−1)².
pub fn irreversible_work_quanta(alpha: HierarchyLevel, particles: usize) -> u64 {
    let a = alpha.get() as u64 - 1;
    let n = particles as u64;
    n * n * a * a
}

/// Energy difference between the N-particle ground states of level α and
/// of the box.
pub fn ground_state_energy_shift(alpha: HierarchyLevel, particles: usize, geom: &BoxGeometry) -> f64 {
    ground_state_shift_quanta(alpha, particles) as f64 * geom.ground_energy()
}

/// Mean work of the box → level α quench from the N-particle ground state.
pub fn average_work(alpha: HierarchyLevel, particles: usize, geom: &BoxGeometry) -> f64 {
    average_work_quanta(alpha, particles) as f64 * geom.ground_energy()
}

/// ⟨W⟩ − ΔE₀.
pub fn irreversible_work(alpha: HierarchyLevel, particles: usize, geom: &BoxGeometry) -> f64 {
    irreversible_work_quanta(alpha, particles) as f64 * geom.ground_energy()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WorkScanRow {
    pub particles: usize,
    pub alpha: u32,
    pub average_work: f64,
    pub irreversible_work: f64,
    pub ground_state_shift: f64,
}

/// Closed-form ⟨W⟩ and ⟨W_irr⟩ for every α in `alphas` and N in `particles`.
pub fn work_scan(alphas: &[u32], particles: RangeInclusive<usize>, geom: &BoxGeometry) -> Result<Vec<WorkScanRow>> {
    let levels = alphas.iter().map(|&a| HierarchyLevel::new(a)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for n in particles {
        for level in &levels {
            rows.push(WorkScanRow {
                particles: n,
                alpha: level.get(),
                average_work: average_work(*level, n, geom),
                irreversible_work: irreversible_work(*level, n, geom),
                ground_state_shift: ground_state_energy_shift(*level, n, geom),
            });
        }
    }
    Ok(rows)
}

/// ⟨Ψ_final | Ψ_initial⟩ = det U[initial_set, final_set] for 1-based level sets.
pub fn many_body_overlap(u: &OverlapMatrix, initial_set: &[usize], final_set: &[usize]) -> Result<f64> {
    if initial_set.len() != final_set.len() {
        return Err(Error::Dimension(format!(
            "{} initial vs {} final indices",
            initial_set.len(),
            final_set.len()
        )));
    }
    check_index_set(initial_set, u.rows(), "initial")?;
    check_index_set(final_set, u.cols(), "final")?;
    let n = initial_set.len();
    let sub = DMatrix::from_fn(n, n, |i, j| u.entries[(initial_set[i] - 1, final_set[j] - 1)]);
    Ok(real_det(&sub))
}

fn check_index_set(set: &[usize], bound: usize, what: &str) -> Result<()> {
    for (i, &k) in set.iter().enumerate() {
        if k == 0 || k > bound {
            return Err(Error::Domain(format!("{what} index {k} outside 1..={bound}")));
        }
        if set[..i].contains(&k) {
            return Err(Error::Domain(format!("duplicate {what} index {k}")));
        }
    }
    Ok(())
}

/// Holes and particles (1-based final levels) relative to a reference set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Excitation {
    len: u8,
    holes: [u16; MAX_ORDER_LIMIT],
    particles: [u16; MAX_ORDER_LIMIT],
}

impl Excitation {
    fn new(holes: &[usize], particles: &[usize]) -> Self {
        let mut e = Self { len: holes.len() as u8, holes: [0; MAX_ORDER_LIMIT], particles: [0; MAX_ORDER_LIMIT] };
        let mut h: Vec<usize> = holes.to_vec();
        let mut p: Vec<usize> = particles.to_vec();
        h.sort_unstable();
        p.sort_unstable();
        for i in 0..h.len() {
            e.holes[i] = (h[i] + 1) as u16;
            e.particles[i] = (p[i] + 1) as u16;
        }
        e
    }

    pub fn order(&self) -> usize {
        self.len as usize
    }

    pub fn holes(&self) -> &[u16] {
        &self.holes[..self.len as usize]
    }

    pub fn particles(&self) -> &[u16] {
        &self.particles[..self.len as usize]
    }

    /// `reference` with the holes replaced by the particles, sorted.
    pub fn apply(&self, reference: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> =
            reference.iter().copied().filter(|k| !self.holes().contains(&(*k as u16))).collect();
        out.extend(self.particles().iter().map(|&p| p as usize));
        out.sort_unstable();
        out
    }
}

/// One many-body transition (or, at finite temperature, a bin of them).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationRecord {
    /// Relative to {1..N}; `None` for records merged over several transitions.
    pub transition: Option<Excitation>,
    pub order: usize,
    pub work: f64,
    /// W / E₁ when the initial and final spectra share E₁.
    pub work_quanta: Option<i64>,
    pub probability: f64,
}

impl ExcitationRecord {
    /// Sorted 1-based final occupation, or `None` for a merged record.
    pub fn final_occupation(&self, particles: usize) -> Option<Vec<usize>> {
        let reference: Vec<usize> = (1..=particles).collect();
        self.transition.map(|t| t.apply(&reference))
    }
}

/// Truncations that shaped a [`WorkSpectrum`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WpdTruncation {
    pub max_order: usize,
    /// Excitation order of the enumerated initial configurations (0 at T = 0).
    pub max_order_initial: usize,
    pub columns: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkSpectrum {
    /// Sorted by W.
    pub records: Vec<ExcitationRecord>,
    pub total_probability: f64,
    pub first_moment: f64,
    pub truncation: WpdTruncation,
    pub particles: usize,
    /// E₁ of the final spectrum.
    pub energy_scale: f64,
    /// Minors evaluated during the enumeration.
    pub evaluated_candidates: u64,
    pub initial_configurations: usize,
    /// Grand-canonical weight of the enumerated initial configurations
    /// before renormalization (1 at T = 0).
    pub initial_weight_coverage: f64,
}

impl WorkSpectrum {
    /// 1 − Σ P.
    pub fn probability_deficit(&self) -> f64 {
        1.0 - self.total_probability
    }

    /// Σ P e^{iWt}.
    pub fn characteristic_function(&self, t: f64) -> Complex64 {
        self.records.iter().map(|r| Complex64::from_polar(r.probability, r.work * t)).sum()
    }

    /// Σ P over the records of each order.
    pub fn probability_by_order(&self) -> Vec<f64> {
        let max = self.records.iter().map(|r| r.order).max().unwrap_or(0);
        let mut out = vec![0.0; max + 1];
        for r in &self.records {
            out[r.order] += r.probability;
        }
        out
    }

    /// The order-0 (ground to ground) record of a zero-temperature spectrum.
    pub fn ground_record(&self) -> Option<&ExcitationRecord> {
        self.records.iter().find(|r| r.transition.is_some_and(|t| t.order() == 0))
    }
}

/// Options for [`enumerate_final_states`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WpdOptions {
    pub max_order: usize,
    pub threshold: f64,
    pub candidate_cap: u64,
}

impl Default for WpdOptions {
    fn default() -> Self {
        Self {
            max_order: DEFAULT_MAX_ORDER,
            threshold: DEFAULT_PROBABILITY_THRESHOLD,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
        }
    }
}

/// Options for [`wpd_finite_t`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ThermalWpdOptions {
    pub max_order_initial: usize,
    pub max_order_final: usize,
    pub threshold: f64,
    pub candidate_cap: u64,
}

impl Default for ThermalWpdOptions {
    fn default() -> Self {
        Self {
            max_order_initial: DEFAULT_MAX_ORDER,
            max_order_final: DEFAULT_MAX_ORDER,
            threshold: DEFAULT_PROBABILITY_THRESHOLD,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
        }
    }
}

fn check_options(max_order: usize, threshold: f64) -> Result<()> {
    if max_order > MAX_ORDER_LIMIT {
        return Err(Error::Domain(format!("max_order {max_order} exceeds {MAX_ORDER_LIMIT}")));
    }
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::Domain(format!("probability threshold must lie in [0, 1), got {threshold}")));
    }
    Ok(())
}

/// Energy bookkeeping of one quench, exact in units of E₁ when possible.
struct Energies {
    scale: f64,
    initial: Vec<f64>,
    final_: Vec<f64>,
    initial_q: Option<Vec<i64>>,
    final_q: Vec<i64>,
}

impl Energies {
    fn new(u: &OverlapMatrix) -> Self {
        let scale = u.final_spectrum.scale;
        let integer = u.initial.scale == scale;
        Self {
            scale,
            initial: u.initial_energies(),
            final_: u.final_energies(),
            initial_q: integer.then(|| (1..=u.rows()).map(|k| u.initial.quanta(k) as i64).collect()),
            final_q: (1..=u.cols()).map(|m| u.final_spectrum.quanta(m) as i64).collect(),
        }
    }

    fn work(&self, initial: &[usize], final_set: impl Iterator<Item = usize> + Clone) -> (f64, Option<i64>) {
        match &self.initial_q {
            Some(iq) => {
                let q = final_set.map(|m| self.final_q[m]).sum::<i64>() - initial.iter().map(|&k| iq[k]).sum::<i64>();
                (q as f64 * self.scale, Some(q))
            }
            None => {
                let w = final_set.map(|m| self.final_[m]).sum::<f64>() - initial.iter().map(|&k| self.initial[k]).sum::<f64>();
                (w, None)
            }
        }
    }
}

/// Zero-temperature P(W): every final configuration within `max_order`
/// particle-hole excitations of {1..N} with probability ≥ `threshold`.
pub fn enumerate_final_states(u: &OverlapMatrix, particles: usize, options: &WpdOptions) -> Result<WorkSpectrum> {
    check_options(options.max_order, options.threshold)?;
    if particles == 0 || particles > u.rows() || particles > u.cols() {
        return Err(Error::Dimension(format!(
            "N = {particles} needs a {}x{} overlap matrix with at least N rows and columns",
            u.rows(),
            u.cols()
        )));
    }
    check_label_range(u.cols())?;
    let energies = Energies::new(u);
    let initial: Vec<usize> = (0..particles).collect();
    let mut budget = Budget { evaluated: 0, cap: options.candidate_cap };
    let mut records = Vec::new();
    let reference = initial.clone();
    let engine = Engine::new(u, &initial, &reference)?;
    let base_set = reference.clone();
    engine.enumerate(options.max_order, 1.0, options.threshold, &mut budget, |holes, parts, p| {
        let finals = final_columns(&base_set, holes, parts);
        let (work, work_quanta) = energies.work(&initial, finals.iter().copied());
        let holes_cols: Vec<usize> = holes.iter().map(|&h| base_set[h]).collect();
        records.push(ExcitationRecord {
            transition: Some(Excitation::new(&holes_cols, parts)),
            order: holes.len(),
            work,
            work_quanta,
            probability: p,
        });
    })?;
    records.sort_by(|a, b| a.work.total_cmp(&b.work).then(a.transition.cmp(&b.transition)));
    Ok(finish(
        records,
        WpdTruncation { max_order: options.max_order, max_order_initial: 0, columns: u.cols(), threshold: options.threshold },
        particles,
        energies.scale,
        budget.evaluated,
        1,
        1.0,
    ))
}

/// Finite-temperature P(W) over an ensemble of initial configurations.
///
/// Initial configurations are the Fermi sea and its excitations up to
/// `max_order_initial`, weighted by Π_{k∈I} n_k Π_{k∉I} (1 − n_k) and
/// renormalized over the enumerated set. Each is paired with the lowest
/// final configuration of the same parity content, and excitations of that
/// up to `max_order_final` are enumerated. Records with equal W are merged.
pub fn wpd_finite_t(u: &OverlapMatrix, thermal: &ThermalState, options: &ThermalWpdOptions) -> Result<WorkSpectrum> {
    check_options(options.max_order_final, options.threshold)?;
    check_options(options.max_order_initial, options.threshold)?;
    let n = thermal.particles;
    let levels = thermal.levels().max(n + 1);
    if levels > u.rows() || n > u.cols() {
        return Err(Error::Dimension(format!(
            "{levels} thermal levels and N = {n} need a larger overlap matrix than {}x{}",
            u.rows(),
            u.cols()
        )));
    }
    check_label_range(u.cols())?;
    let occ = thermal.resized(levels).occupations;
    let energies = Energies::new(u);
    let configs = initial_configurations(&occ, n, options.max_order_initial, options.threshold)?;
    let norm: f64 = configs.iter().map(|c| c.1).sum();
    let ground_weight: f64 = occ
        .iter()
        .enumerate()
        .map(|(k, &x)| if k < n { x } else { 1.0 - x })
        .product();
    let coverage = ground_weight * norm;

    let mut budget = Budget { evaluated: 0, cap: options.candidate_cap };
    // key → (Σ P, Σ P·W, minimum order)
    let mut bins: BTreeMap<i128, (f64, f64, usize)> = BTreeMap::new();
    let bin_width = 1e-9 * energies.scale;
    for (rows, rel) in &configs {
        let weight = rel / norm;
        let reference = parity_reference(rows, u.cols())?;
        let engine = match Engine::new(u, rows, &reference) {
            Ok(e) => e,
            Err(Error::Numerical(_)) => continue,
            Err(e) => return Err(e),
        };
        engine.enumerate(options.max_order_final, weight, options.threshold, &mut budget, |holes, parts, p| {
            let finals = final_columns(&reference, holes, parts);
            let (work, quanta) = energies.work(rows, finals.iter().copied());
            let key = match quanta {
                Some(q) => q as i128,
                None => (work / bin_width).round() as i128,
            };
            let entry = bins.entry(key).or_insert((0.0, 0.0, usize::MAX));
            entry.0 += p;
            entry.1 += p * work;
            entry.2 = entry.2.min(holes.len());
        })?;
    }
    let integer = energies.initial_q.is_some();
    let records = bins
        .into_iter()
        .map(|(key, (p, pw, order))| ExcitationRecord {
            transition: None,
            order,
            work: if integer { key as f64 * energies.scale } else { pw / p },
            work_quanta: integer.then_some(key as i64),
            probability: p,
        })
        .collect();
    Ok(finish(
        records,
        WpdTruncation {
            max_order: options.max_order_final,
            max_order_initial: options.max_order_initial,
            columns: u.cols(),
            threshold: options.threshold,
        },
        n,
        energies.scale,
        budget.evaluated,
        configs.len(),
        coverage,
    ))
}

fn check_label_range(cols: usize) -> Result<()> {
    if cols > u16::MAX as usize {
        return Err(Error::Domain(format!("at most {} final states supported, got {cols}", u16::MAX)));
    }
    Ok(())
}

fn finish(
    records: Vec<ExcitationRecord>,
    truncation: WpdTruncation,
    particles: usize,
    energy_scale: f64,
    evaluated_candidates: u64,
    initial_configurations: usize,
    initial_weight_coverage: f64,
) -> WorkSpectrum {
    let total_probability = records.iter().map(|r| r.probability).sum();
    let first_moment = records.iter().map(|r| r.probability * r.work).sum();
    WorkSpectrum {
        records,
        total_probability,
        first_moment,
        truncation,
        particles,
        energy_scale,
        evaluated_candidates,
        initial_configurations,
        initial_weight_coverage,
    }
}

/// Reference set with holes removed and particles added (0-based, sorted).
fn final_columns(reference: &[usize], holes: &[usize], particles: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> =
        reference.iter().enumerate().filter(|(i, _)| !holes.contains(i)).map(|(_, &m)| m).collect();
    out.extend_from_slice(particles);
    out
}

/// Lowest final columns with the same numbers of even and odd indices as `rows`.
fn parity_reference(rows: &[usize], cols: usize) -> Result<Vec<usize>> {
    let even = rows.iter().filter(|k| *k % 2 == 0).count();
    let odd = rows.len() - even;
    let mut out: Vec<usize> = (0..even).map(|i| 2 * i).chain((0..odd).map(|i| 2 * i + 1)).collect();
    out.sort_unstable();
    if out.last().is_some_and(|&m| m >= cols) {
        return Err(Error::Dimension(format!("reference configuration needs more than {cols} final states")));
    }
    Ok(out)
}

/// Initial configurations (sorted 0-based rows) with weights relative to
/// the Fermi sea, keeping those above `threshold`.
fn initial_configurations(occ: &[f64], n: usize, max_order: usize, threshold: f64) -> Result<Vec<(Vec<usize>, f64)>> {
    let mut out = vec![((0..n).collect::<Vec<_>>(), 1.0)];
    let mut hole_f: Vec<(f64, usize)> = (0..n).map(|k| ((1.0 - occ[k]) / occ[k], k)).collect();
    let mut part_f: Vec<(f64, usize)> = (n..occ.len()).map(|k| (occ[k] / (1.0 - occ[k]), k)).collect();
    hole_f.sort_by(|a, b| b.0.total_cmp(&a.0));
    part_f.sort_by(|a, b| b.0.total_cmp(&a.0));
    let hf: Vec<f64> = hole_f.iter().map(|x| x.0).collect();
    let pf: Vec<f64> = part_f.iter().map(|x| x.0).collect();
    for r in 1..=max_order.min(n).min(pf.len()) {
        let best_p: f64 = pf.iter().take(r).product();
        let mut hole_sets = Vec::new();
        bounded_subsets(&hf, r, threshold / best_p, &mut |idx, w| {
            hole_sets.push((idx.to_vec(), w));
            Ok(())
        })?;
        for (hidx, hw) in hole_sets {
            bounded_subsets(&pf, r, threshold / hw, &mut |pidx, pw| {
                let mut rows: Vec<usize> =
                    (0..n).filter(|k| !hidx.iter().any(|&i| hole_f[i].1 == *k)).collect();
                rows.extend(pidx.iter().map(|&i| part_f[i].1));
                rows.sort_unstable();
                out.push((rows, hw * pw));
                Ok(())
            })?;
        }
    }
    Ok(out)
}

/// Visits every `size`-subset of indices into `factors` (sorted descending,
/// non-negative) whose product is at least `floor`.
fn bounded_subsets(
    factors: &[f64],
    size: usize,
    floor: f64,
    visit: &mut dyn FnMut(&[usize], f64) -> Result<()>,
) -> Result<()> {
    fn rec(
        factors: &[f64],
        size: usize,
        floor: f64,
        start: usize,
        prod: f64,
        chosen: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize], f64) -> Result<()>,
    ) -> Result<()> {
        if chosen.len() == size {
            return visit(chosen, prod);
        }
        let remaining = (size - chosen.len()) as i32;
        for j in start..factors.len() {
            if factors.len() - j < remaining as usize {
                break;
            }
            if prod * factors[j].powi(remaining) < floor {
                break;
            }
            chosen.push(j);
            rec(factors, size, floor, j + 1, prod * factors[j], chosen, visit)?;
            chosen.pop();
        }
        Ok(())
    }
    if size > factors.len() {
        return Ok(());
    }
    rec(factors, size, floor, 0, 1.0, &mut Vec::with_capacity(size), visit)
}

struct Budget {
    evaluated: u64,
    cap: u64,
}

impl Budget {
    fn spend(&mut self) -> Result<()> {
        self.evaluated += 1;
        if self.evaluated > self.cap {
            return Err(Error::CombinatorialCap { candidates: self.evaluated as u128, cap: self.cap as u128 });
        }
        Ok(())
    }
}

/// G = U[I, F₀]⁻¹ U[I, ·] split by parity, plus |det U[I, F₀]|².
struct Engine {
    g: DMatrix<f64>,
    /// Positions in the reference set, by parity of the referenced column.
    positions: [Vec<usize>; 2],
    /// Columns outside the reference set, by parity.
    candidates: [Vec<usize>; 2],
    base: f64,
}

/// Subset of same-parity hole positions with its candidate columns ordered
/// by descending ‖G[holes, p]‖².
struct HoleSet {
    holes: Vec<usize>,
    norms: Vec<f64>,
    columns: Vec<usize>,
    bound: f64,
}

/// Minor with its squared value and (0-based) particle columns.
struct Minor {
    value_sq: f64,
    columns: [u16; MAX_ORDER_LIMIT],
}

impl Engine {
    fn new(u: &OverlapMatrix, rows: &[usize], reference: &[usize]) -> Result<Self> {
        let n = rows.len();
        let ui = DMatrix::from_fn(n, u.cols(), |i, m| u.entries[(rows[i], m)]);
        let u0 = DMatrix::from_fn(n, n, |i, j| ui[(i, reference[j])]);
        let lu = u0.lu();
        let det = lu.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Numerical("reference overlap block is singular".into()));
        }
        let g = lu.solve(&ui).ok_or_else(|| Error::Numerical("reference overlap block is singular".into()))?;
        let mut positions = [Vec::new(), Vec::new()];
        for (i, &m) in reference.iter().enumerate() {
            positions[m % 2].push(i);
        }
        let mut candidates = [Vec::new(), Vec::new()];
        for m in 0..u.cols() {
            if !reference.contains(&m) {
                candidates[m % 2].push(m);
            }
        }
        Ok(Self { g, positions, candidates, base: det * det })
    }

    fn hole_sets(&self, class: usize, size: usize) -> Vec<HoleSet> {
        let mut out = Vec::new();
        let pos = &self.positions[class];
        let mut pick = Vec::new();
        combinations(pos.len(), size, &mut |idx| pick.push(idx.iter().map(|&i| pos[i]).collect::<Vec<_>>()));
        for holes in pick {
            let mut pairs: Vec<(f64, usize)> = self.candidates[class]
                .iter()
                .map(|&m| (holes.iter().map(|&h| self.g[(h, m)].powi(2)).sum::<f64>(), m))
                .collect();
            pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
            let bound = if pairs.len() < size { 0.0 } else { pairs.iter().take(size).map(|p| p.0).product() };
            out.push(HoleSet {
                holes,
                norms: pairs.iter().map(|p| p.0).collect(),
                columns: pairs.iter().map(|p| p.1).collect(),
                bound,
            });
        }
        out
    }

    /// Minors of one hole set with squared value ≥ `floor`, largest first.
    fn minors(&self, set: &HoleSet, floor: f64, budget: &mut Budget) -> Result<Vec<Minor>> {
        let size = set.holes.len();
        let mut out = Vec::new();
        if size == 0 {
            out.push(Minor { value_sq: 1.0, columns: [0; MAX_ORDER_LIMIT] });
            return Ok(out);
        }
        if set.bound < floor {
            return Ok(out);
        }
        bounded_subsets(&set.norms, size, floor, &mut |idx, _| {
            budget.spend()?;
            let mut cols = [0usize; MAX_ORDER_LIMIT];
            for (slot, &i) in cols.iter_mut().zip(idx) {
                *slot = set.columns[i];
            }
            let d = minor(&self.g, &set.holes, &cols[..size]);
            if d * d >= floor {
                out.push(Minor { value_sq: d * d, columns: cols.map(|c| c as u16) });
            }
            Ok(())
        })?;
        out.sort_by(|a, b| b.value_sq.total_cmp(&a.value_sq));
        Ok(out)
    }

    /// Calls `emit(hole positions, particle columns, P)` for every excitation
    /// up to `max_order` with P = weight·|amplitude|² ≥ threshold.
    fn enumerate<F>(&self, max_order: usize, weight: f64, threshold: f64, budget: &mut Budget, mut emit: F) -> Result<()>
    where
        F: FnMut(&[usize], &[usize], f64),
    {
        let scale = weight * self.base;
        if scale < threshold {
            return Ok(());
        }
        let floor = threshold / scale;
        let mut holes = Vec::with_capacity(MAX_ORDER_LIMIT);
        let mut parts = Vec::with_capacity(MAX_ORDER_LIMIT);
        for order in 0..=max_order {
            for even in 0..=order {
                let odd = order - even;
                if even > self.positions[0].len() || odd > self.positions[1].len() {
                    continue;
                }
                let sets_e = self.hole_sets(0, even);
                let sets_o = self.hole_sets(1, odd);
                let max_e = sets_e.iter().map(|s| s.bound).fold(0.0, f64::max);
                let max_o = sets_o.iter().map(|s| s.bound).fold(0.0, f64::max);
                if max_e * max_o < floor {
                    continue;
                }
                let minors_e =
                    sets_e.iter().map(|s| self.minors(s, floor / max_o, budget)).collect::<Result<Vec<_>>>()?;
                let minors_o =
                    sets_o.iter().map(|s| self.minors(s, floor / max_e, budget)).collect::<Result<Vec<_>>>()?;
                for (se, me) in sets_e.iter().zip(&minors_e) {
                    for (so, mo) in sets_o.iter().zip(&minors_o) {
                        let Some(top_o) = mo.first() else { continue };
                        for a in me {
                            if a.value_sq * top_o.value_sq < floor {
                                break;
                            }
                            for b in mo {
                                let v = a.value_sq * b.value_sq;
                                if v < floor {
                                    break;
                                }
                                holes.clear();
                                holes.extend_from_slice(&se.holes);
                                holes.extend_from_slice(&so.holes);
                                parts.clear();
                                parts.extend(a.columns[..even].iter().map(|&c| c as usize));
                                parts.extend(b.columns[..odd].iter().map(|&c| c as usize));
                                emit(&holes, &parts, scale * v);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn minor(g: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    let e = |i: usize, j: usize| g[(rows[i], cols[j])];
    match rows.len() {
        0 => 1.0,
        1 => e(0, 0),
        2 => e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0),
        3 => {
            e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
        }
        n => real_det(&DMatrix::from_fn(n, n, e)),
    }
}

/// Every `k`-subset of 0..n in lexicographic order.
fn combinations(n: usize, k: usize, visit: &mut dyn FnMut(&[usize])) {
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            visit(cur);
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            rec(n, k, i + 1, cur, visit);
            cur.pop();
        }
    }
    if k <= n {
        rec(n, k, 0, &mut Vec::with_capacity(k), visit);
    }
}

/// Column count chosen from the first spectral moment of the work.
///
/// The single-particle part of ⟨W⟩ carried by the discarded columns follows
/// exactly from the tail sums of an [`OverlapMatrix`]. The policy keeps the
/// smallest multiple of `step` for which that share, weighted by the
/// occupations, is below `tolerance`. The share is taken relative to ⟨W⟩ for
/// partner quenches and relative to the mean final energy otherwise (the
/// sudden expansion does no work on average).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MomentTruncation {
    pub tolerance: f64,
    pub step: usize,
    pub cap: usize,
}

impl Default for MomentTruncation {
    fn default() -> Self {
        Self { tolerance: 2.5e-3, step: 40, cap: 12_000 }
    }
}

/// Relative single-particle moment deficit of `u` for the given occupations.
pub fn moment_deficit(u: &OverlapMatrix, occupations: &[f64]) -> f64 {
    let (missing, denominator) = moment_parts(u, occupations);
    missing / denominator
}

/// (moment carried by the discarded columns, normalization).
fn moment_parts(u: &OverlapMatrix, occupations: &[f64]) -> (f64, f64) {
    let ei = u.initial_energies();
    let ef = u.final_energies();
    let mut missing = 0.0;
    let mut total = 0.0;
    let mut final_energy = 0.0;
    for (k, &n) in occupations.iter().enumerate().take(u.rows()) {
        let kept: f64 = (0..u.cols()).map(|m| u.entries[(k, m)].powi(2) * ef[m]).sum();
        let s = kept + u.tail_energy[(k, k)];
        missing += n * (u.tail_energy[(k, k)] - ei[k] * u.tail_weight[(k, k)]);
        total += n * (s - ei[k]);
        final_energy += n * s;
    }
    match u.source {
        OverlapSource::Hierarchy { .. } => (missing, total),
        OverlapSource::Expansion { .. } => (missing, final_energy),
    }
}

/// Builds overlaps with the column count from a [`MomentTruncation`].
pub fn overlap_for_work<F>(occupations: &[f64], policy: MomentTruncation, mut build: F) -> Result<OverlapMatrix>
where
    F: FnMut(usize) -> Result<OverlapMatrix>,
{
    let step = policy.step.max(1);
    let rows = occupations.len();
    let first = (rows + 1).div_ceil(step).max(1) * step;
    let mut probe = (10 * step).max(first);
    loop {
        let cols = probe.min(policy.cap);
        let u = build(cols)?;
        let (missing, total) = moment_parts(&u, occupations);
        let deficit = missing / total;
        if deficit < policy.tolerance {
            // walk back over whole steps while the tolerance still holds
            let ef = u.final_energies();
            let ei = u.initial_energies();
            let mut best = cols;
            let mut d = deficit;
            while best - step >= first {
                let lo = best - step;
                let extra: f64 = (lo..best)
                    .map(|m| {
                        occupations.iter().enumerate().map(|(k, &n)| n * u.entries[(k, m)].powi(2) * (ef[m] - ei[k])).sum::<f64>()
                    })
                    .sum();
                if d + extra / total >= policy.tolerance {
                    break;
                }
                d += extra / total;
                best = lo;
            }
            return if best == cols { Ok(u) } else { build(best) };
        }
        if cols >= policy.cap {
            return Err(Error::TruncationInsufficient(format!(
                "work moment deficit {deficit:.3e} at M = {cols} exceeds tolerance {:.1e}",
                policy.tolerance
            )));
        }
        probe *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::HierarchyBasis;
    use crate::overlap::{build_overlap, Truncation};

    fn geom() -> BoxGeometry {
        BoxGeometry::new(4.0).unwrap()
    }

    fn level(a: u32) -> HierarchyLevel {
        HierarchyLevel::new(a).unwrap()
    }

    #[test]
    fn closed_forms() {
        let g = geom();
        let e1 = g.ground_energy();
        assert_eq!(ground_state_energy_shift(level(1), 30, &g), 0.0);
        assert_eq!(average_work(level(1), 30, &g), 0.0);
        assert_eq!(ground_state_shift_quanta(level(2), 30), 960);
        assert!((ground_state_energy_shift(level(2), 30, &g) - 296.088).abs() < 1e-3);
        assert_eq!(average_work_quanta(level(2), 30), 1860);
        assert!((average_work(level(2), 30, &g) - 573.67).abs() < 5e-3);
        assert_eq!(average_work_quanta(level(4), 30), 11160);
        assert_eq!(irreversible_work_quanta(level(2), 30), 900);
        assert_eq!(average_work(level(2), 30, &g) - irreversible_work(level(2), 30, &g), 960.0 * e1);
    }

    #[test]
    fn shift_equals_level_sum() {
        for a in 1..=4u32 {
            for n in 1..=100usize {
                let sum: u64 = (1..=n as u64).map(|l| (l + a as u64 - 1).pow(2) - l * l).sum();
                assert_eq!(ground_state_shift_quanta(level(a), n), sum);
            }
        }
    }

    #[test]
    fn scan_table() {
        let rows = work_scan(&[2, 3, 4], 1..=50, &geom()).unwrap();
        assert_eq!(rows.len(), 150);
        let e1 = geom().ground_energy();
        assert_eq!(rows[0].average_work, 4.0 * e1);
        assert_eq!(rows[0].irreversible_work, e1);
        for w in rows.chunks(3) {
            assert!(w[0].average_work < w[1].average_work && w[1].average_work < w[2].average_work);
            assert!(w.iter().all(|r| r.average_work > r.irreversible_work));
        }
        assert!(work_scan(&[0], 1..=2, &geom()).is_err());
    }

    #[test]
    fn overlap_of_index_sets() {
        let b = HierarchyBasis::new(geom(), 4).unwrap();
        let same = build_overlap(&b, 2, 2, 10, Truncation::Fixed { columns: 20 }).unwrap();
        let v = many_body_overlap(&same, &[1, 2, 3], &[1, 2, 3]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(many_body_overlap(&same, &[1, 1], &[1, 2]).is_err());
        assert!(many_body_overlap(&same, &[1, 2], &[1, 21]).is_err());
        let u = build_overlap(&b, 1, 2, 10, Truncation::Fixed { columns: 40 }).unwrap();
        let a = many_body_overlap(&u, &[1, 2], &[1, 2]).unwrap();
        let swapped = many_body_overlap(&u, &[2, 1], &[1, 2]).unwrap();
        assert!((a + swapped).abs() < 1e-15);
        // k + m odd entries vanish, so a parity-mismatched set is singular
        assert_eq!(many_body_overlap(&u, &[1, 3], &[1, 2]).unwrap(), 0.0);
    }

    #[test]
    fn enumeration_matches_direct_determinants() {
        let b = HierarchyBasis::new(geom(), 4).unwrap();
        let u = build_overlap(&b, 1, 2, 6, Truncation::Fixed { columns: 60 }).unwrap();
        let n = 4;
        let spec = enumerate_final_states(&u, n, &WpdOptions { max_order: 2, threshold: 1e-14, ..Default::default() })
            .unwrap();
        let initial: Vec<usize> = (1..=n).collect();
        for r in spec.records.iter().step_by(7) {
            let fin = r.final_occupation(n).unwrap();
            let a = many_body_overlap(&u, &initial, &fin).unwrap();
            assert!((a * a - r.probability).abs() < 1e-12 * r.probability.max(1e-3), "{fin:?}");
        }
        let ground = spec.ground_record().unwrap();
        assert_eq!(ground.work_quanta, Some(ground_state_shift_quanta(level(2), n) as i64));
        assert!(spec.records.iter().all(|r| r.work >= ground.work - 1e-12));
        assert!(spec.records.windows(2).all(|w| w[0].work <= w[1].work));
    }

    #[test]
    fn same_level_is_a_single_record() {
        let b = HierarchyBasis::new(geom(), 4).unwrap();
        let u = build_overlap(&b, 3, 3, 8, Truncation::Fixed { columns: 40 }).unwrap();
        let spec = enumerate_final_states(&u, 5, &WpdOptions::default()).unwrap();
        assert_eq!(spec.records.len(), 1);
        assert!((spec.total_probability - 1.0).abs() < 1e-12);
        assert_eq!(spec.records[0].work, 0.0);
    }

    #[test]
    fn cap_is_enforced() {
        let b = HierarchyBasis::new(geom(), 4).unwrap();
        let u = build_overlap(&b, 1, 2, 10, Truncation::Fixed { columns: 200 }).unwrap();
        let res = enumerate_final_states(&u, 10, &WpdOptions { candidate_cap: 100, ..Default::default() });
        assert!(matches!(res, Err(Error::CombinatorialCap { .. })));
        let res = enumerate_final_states(&u, 10, &WpdOptions { max_order: 5, ..Default::default() });
        assert!(matches!(res, Err(Error::Domain(_))));
    }

    #[test]
    fn cold_ensemble_reduces_to_zero_temperature() {
        let b = HierarchyBasis::new(geom(), 4).unwrap();
        let u = build_overlap(&b, 1, 2, 12, Truncation::Fixed { columns: 120 }).unwrap();
        let n = 6;
        let cold = ThermalState::fermi_sea(n, n + 1);
        let opts = ThermalWpdOptions { max_order_final: 2, ..Default::default() };
        let hot = wpd_finite_t(&u, &cold, &opts).unwrap();
        let zero = enumerate_final_states(&u, n, &WpdOptions { max_order: 2, ..Default::default() }).unwrap();
        assert_eq!(hot.initial_configurations, 1);
        assert!((hot.total_probability - zero.total_probability).abs() < 1e-12);
        assert!((hot.first_moment - zero.first_moment).abs() < 1e-9 * zero.first_moment);
        let mut merged: BTreeMap<i64, f64> = BTreeMap::new();
        for r in &zero.records {
            *merged.entry(r.work_quanta.unwrap()).or_default() += r.probability;
        }
        assert_eq!(merged.len(), hot.records.len());
        for (r, (q, p)) in hot.records.iter().zip(&merged) {
            assert_eq!(r.work_quanta, Some(*q));
            assert!((r.probability - p).abs() < 1e-14);
        }
    }

    #[test]
    fn moment_policy_meets_tolerance() {
        let b = HierarchyBasis::new(geom(), 4).unwrap();
        let occ = vec![1.0; 5];
        let policy = MomentTruncation { tolerance: 2e-2, step: 40, cap: 4000 };
        let u = overlap_for_work(&occ, policy, |m| build_overlap(&b, 1, 2, 5, Truncation::Fixed { columns: m })).unwrap();
        assert!(moment_deficit(&u, &occ) < 2e-2);
        let smaller = build_overlap(&b, 1, 2, 5, Truncation::Fixed { columns: u.cols() - 40 }).unwrap();
        assert!(moment_deficit(&smaller, &occ) >= 2e-2);
    }

    #[test]
    fn subsets_respect_the_floor() {
        let f = [4.0, 2.0, 1.0, 0.5];
        let mut seen = Vec::new();
        bounded_subsets(&f, 2, 1.0, &mut |idx, p| {
            seen.push((idx.to_vec(), p));
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.len(), 5);
        assert!(seen.iter().all(|(_, p)| *p >= 1.0));
        let mut count = 0;
        combinations(5, 3, &mut |_| count += 1);
        assert_eq!(count, 10);
    }
}
