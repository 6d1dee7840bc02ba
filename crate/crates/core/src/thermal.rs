//! Grand-canonical Fermi–Dirac occupations of the initial single-particle levels.

use crate::error::{Error, Result};
use crate::overlap::Spectrum;

/// Occupations below this are treated as empty when sizing the thermal basis.
pub const OCCUPATION_CUTOFF: f64 = 1e-12;
const NUMBER_TOLERANCE: f64 = 1e-10;

/// Fermi function 1/(e^{x}+1), evaluated without overflow.
pub fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Chemical potential with Σ_k f(β(E_k − μ)) = N, by bisection.
///
/// `beta = ∞` places μ midway between E_N and E_{N+1}.
pub fn solve_chemical_potential(energies: &[f64], beta: f64, particles: usize) -> Result<f64> {
    if particles == 0 || particles >= energies.len() {
        return Err(Error::Domain(format!(
            "need 0 < N < M_th, got N = {particles}, M_th = {}",
            energies.len()
        )));
    }
    if beta.is_infinite() {
        return Ok(0.5 * (energies[particles - 1] + energies[particles]));
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::Domain(format!("inverse temperature must be positive, got {beta}")));
    }
    let target = particles as f64;
    let count = |mu: f64| energies.iter().map(|&e| fermi(beta * (e - mu))).sum::<f64>() - target;
    let mut lo = energies[0] - 50.0 / beta;
    let mut hi = energies[energies.len() - 1] + 50.0 / beta;
    if count(lo) > 0.0 || count(hi) < 0.0 {
        return Err(Error::Numerical(format!(
            "chemical potential not bracketed on [{lo}, {hi}]; increase the thermal basis"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let c = count(mid);
        if c.abs() < NUMBER_TOLERANCE * 0.1 || hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            return Ok(mid);
        }
        if c > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if count(mid).abs() < NUMBER_TOLERANCE {
        Ok(mid)
    } else {
        Err(Error::Numerical("chemical potential bisection did not converge".into()))
    }
}

/// Thermal initial state: β, μ and occupations over the retained levels.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ThermalState {
    pub beta: f64,
    pub mu: f64,
    pub occupations: Vec<f64>,
    pub t_over_tf: f64,
    pub particles: usize,
}

impl ThermalState {
    /// Fermi temperature T_F = N² E₁ of the initial spectrum (k_B = 1).
    pub fn fermi_temperature(spectrum: &Spectrum, particles: usize) -> f64 {
        (particles * particles) as f64 * spectrum.scale
    }

    /// Zero-temperature Fermi sea over `levels` states.
    pub fn fermi_sea(particles: usize, levels: usize) -> Self {
        Self {
            beta: f64::INFINITY,
            mu: f64::NAN,
            occupations: (1..=levels).map(|k| if k <= particles { 1.0 } else { 0.0 }).collect(),
            t_over_tf: 0.0,
            particles,
        }
    }

    /// Occupations at T = `t_over_tf` · N² E₁ over the smallest level count
    /// whose last occupation drops below [`OCCUPATION_CUTOFF`] (at least N+1).
    pub fn at_temperature(spectrum: &Spectrum, particles: usize, t_over_tf: f64) -> Result<Self> {
        if !(t_over_tf >= 0.0 && t_over_tf.is_finite()) {
            return Err(Error::Domain(format!("temperature must be >= 0, got {t_over_tf}")));
        }
        if particles == 0 {
            return Err(Error::Domain("particle number must be >= 1".into()));
        }
        if t_over_tf == 0.0 {
            return Ok(Self::fermi_sea(particles, particles + 1));
        }
        let temperature = t_over_tf * Self::fermi_temperature(spectrum, particles);
        let beta = 1.0 / temperature;
        let mut levels = particles + 2;
        loop {
            let energies = spectrum.energies(levels);
            let mu = solve_chemical_potential(&energies, beta, particles)?;
            let occupations: Vec<f64> = energies.iter().map(|&e| fermi(beta * (e - mu))).collect();
            if *occupations.last().unwrap() < OCCUPATION_CUTOFF {
                return Ok(Self { beta, mu, occupations, t_over_tf, particles });
            }
            levels += (levels / 4).max(4);
            if levels > 100_000 {
                return Err(Error::Numerical("thermal basis exceeds 100000 levels".into()));
            }
        }
    }

    pub fn levels(&self) -> usize {
        self.occupations.len()
    }

    /// Pad or trim the occupation vector to `levels` entries.
    pub fn resized(&self, levels: usize) -> Self {
        let mut occupations = self.occupations.clone();
        occupations.resize(levels, 0.0);
        Self { occupations, ..self.clone() }
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.beta.is_infinite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BoxGeometry, HierarchyLevel};

    fn spectrum() -> Spectrum {
        Spectrum::hierarchy(&BoxGeometry::new(4.0).unwrap(), HierarchyLevel::BOX)
    }

    #[test]
    fn fermi_function_is_stable() {
        assert_eq!(fermi(0.0), 0.5);
        assert!(fermi(800.0) >= 0.0 && fermi(800.0) < 1e-300);
        assert_eq!(fermi(-800.0), 1.0);
        assert!((fermi(1.3) + fermi(-1.3) - 1.0).abs() < 1e-16);
    }

    #[test]
    fn cold_limit_places_mu_in_the_gap() {
        let e = spectrum().energies(60);
        let mu = solve_chemical_potential(&e, f64::INFINITY, 30).unwrap();
        assert!(mu > e[29] && mu < e[30]);
        let mu = solve_chemical_potential(&e, 1e4 / e[0], 30).unwrap();
        assert!(mu > e[29] && mu < e[30]);
    }

    #[test]
    fn number_constraint_holds() {
        let s = spectrum();
        for (n, t) in [(30usize, 0.05), (30, 0.1), (10, 0.05), (5, 0.5), (1, 1.0)] {
            let th = ThermalState::at_temperature(&s, n, t).unwrap();
            let total: f64 = th.occupations.iter().sum();
            assert!((total - n as f64).abs() < 1e-10, "N={n} T={t}: {total}");
            assert!(th.occupations.windows(2).all(|w| w[0] > w[1]));
            assert!(th.occupations.iter().all(|&v| v > 0.0 && v < 1.0));
            assert!(*th.occupations.last().unwrap() < OCCUPATION_CUTOFF);
        }
    }

    #[test]
    fn bisection_agrees_with_dense_scan() {
        // oracle: scan μ on a fine grid and pick the closest particle count
        let s = spectrum();
        let th = ThermalState::at_temperature(&s, 30, 0.05).unwrap();
        let e = s.energies(th.levels());
        let count = |mu: f64| e.iter().map(|&x| fermi(th.beta * (x - mu))).sum::<f64>();
        let (lo, hi) = (e[25], e[35]);
        let steps = 200_000;
        let best = (0..=steps)
            .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
            .min_by(|a, b| (count(*a) - 30.0).abs().total_cmp(&(count(*b) - 30.0).abs()))
            .unwrap();
        assert!((best - th.mu).abs() <= (hi - lo) / steps as f64);
        // the Fermi level sits between the 30th and 31st states
        assert!(th.occupations[29] > 0.5 && th.occupations[30] < 0.5);
    }

    #[test]
    fn rejects_bad_input() {
        let s = spectrum();
        assert!(ThermalState::at_temperature(&s, 30, -0.1).is_err());
        assert!(solve_chemical_potential(&[1.0, 2.0], 1.0, 2).is_err());
    }
}
