//! Analytic eigenbasis of the infinite box and its supersymmetric hierarchy.
//!
//! Units are ħ = m = 1 and the box is centred on the origin, so every
//! wavefunction lives on the open interval (−L/2, L/2). With θ = πx/L and
//! s = sin θ, each box state can be written as
//!
//! ```text
//! ψ⁽¹⁾ₙ(x) = σₙ √(2/L) cos θ · U_{n−1}(s)
//! ```
//!
//! with `U` the Chebyshev polynomial of the second kind and σₙ = ±1. The
//! annihilation operator of level β acts on a level-β function
//! `cos^β θ · g(s)` as
//!
//! ```text
//! A_β [cos^β θ · g(s)] = c · cos^{β+1} θ · g'(s),   c = π / (√2 L)
//! ```
//!
//! so applying (α−1) annihilation steps to ψ⁽¹⁾ₙ differentiates `U_{n−1}`
//! (α−1) times. Those derivatives are Gegenbauer polynomials,
//! `U^{(j)}_{n−1} = 2^j j! C^{(1+j)}_{n−1−j}`, which gives the closed form
//!
//! ```text
//! ψ⁽ᵅ⁾ₘ(x) = σₙ √(2/L) c^{α−1} 2^{α−1} (α−1)! cos^α θ · C^{(α)}_{m−1}(s)
//!            / √Π_{j<α} (E⁽¹⁾ₙ − E⁽¹⁾ⱼ),        n = m + α − 1.
//! ```
//!
//! The Gegenbauer factor is evaluated by its three-term recurrence. The form
//! has no removable singularities at the walls, so it is safe everywhere on
//! the closed interval.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Width of the centred infinite box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxGeometry {
    length: f64,
}

impl BoxGeometry {
    pub fn new(length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Domain(format!("box length must be positive, got {length}")));
        }
        Ok(Self { length })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.length
    }

    /// Whether `x` lies strictly inside the box.
    pub fn contains(&self, x: f64) -> bool {
        x.abs() < self.half_width()
    }

    pub fn check_interior(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "x = {x} outside the open interval (-{h}, {h})",
                h = self.half_width()
            )))
        }
    }

    /// Reduced angle θ = πx/L in (−π/2, π/2).
    pub fn angle(&self, x: f64) -> f64 {
        PI * x / self.length
    }

    /// Ground-state energy E₁ = π²/(2L²).
    pub fn ground_energy(&self) -> f64 {
        PI * PI / (2.0 * self.length * self.length)
    }

    /// The constant c = π/(√2 L) multiplying tan θ in every superpotential.
    pub fn ladder_constant(&self) -> f64 {
        PI / (SQRT_2 * self.length)
    }
}

/// Order α ≥ 1 of the supersymmetric hierarchy; α = 1 is the bare box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HierarchyLevel(u32);

impl HierarchyLevel {
    pub const BOX: HierarchyLevel = HierarchyLevel(1);

    pub fn new(alpha: u32) -> Result<Self> {
        if alpha == 0 {
            return Err(Error::Domain("hierarchy level must be >= 1".into()));
        }
        Ok(Self(alpha))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Box quantum number n = m + α − 1 sharing the energy of state m.
    pub fn box_index(self, m: usize) -> usize {
        m + self.0 as usize - 1
    }
}

/// Spatial parity under x → −x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    /// Parity of the box eigenstate ψ⁽¹⁾ₙ: cosines (odd n) are even.
    pub fn of_box_state(n: usize) -> Self {
        if n % 2 == 1 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Parity of ψ⁽ᵅ⁾ₘ: the parity of ψ⁽¹⁾ₙ flipped once per annihilation step.
    pub fn of_state(level: HierarchyLevel, m: usize) -> Self {
        let mut p = Parity::of_box_state(level.box_index(m));
        for _ in 1..level.get() {
            p = p.flip();
        }
        p
    }
}

/// Real function on the box interior.
pub trait Evaluate {
    fn value(&self, x: f64) -> f64;
}

/// A function whose first derivative is available in closed form.
pub trait Differentiable: Evaluate {
    fn derivative(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Evaluate for F {
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

/// A value closure paired with its derivative closure.
pub struct WithDerivative<F, D> {
    pub value: F,
    pub derivative: D,
}

impl<F: Fn(f64) -> f64, D: Fn(f64) -> f64> Evaluate for WithDerivative<F, D> {
    fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }
}

impl<F: Fn(f64) -> f64, D: Fn(f64) -> f64> Differentiable for WithDerivative<F, D> {
    fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }
}

/// Box energy Eₙ = n²π²/(2L²).
pub fn box_energy(n: usize, geom: &BoxGeometry) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("box quantum number must be >= 1".into()));
    }
    Ok(square(n) * geom.ground_energy())
}

fn square(n: usize) -> f64 {
    // exact for n < 2^26
    (n as u64 * n as u64) as f64
}

/// One eigenstate ψ⁽ᵅ⁾ₘ of the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleParticleState {
    pub level: HierarchyLevel,
    pub m: usize,
    pub energy: f64,
    pub parity: Parity,
    geom: BoxGeometry,
    prefactor: f64,
}

impl SingleParticleState {
    pub fn geometry(&self) -> &BoxGeometry {
        &self.geom
    }

    /// Quantum number of the box state with the same energy.
    pub fn box_index(&self) -> usize {
        self.level.box_index(self.m)
    }

    /// Amplitude at `x`, or a domain error outside the open interval.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.geom.check_interior(x)?;
        Ok(self.value(x))
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let k = PI / self.geom.length;
        let theta = self.geom.angle(x);
        if self.level == HierarchyLevel::BOX {
            return -k * k * square(self.m) * self.value(x);
        }
        let a = self.level.get() as i32;
        let af = a as f64;
        let (s, c) = theta.sin_cos();
        let [g, g1, g2] = gegenbauer_with_derivatives(af, self.m - 1, s);
        let ca = c.powi(a);
        let cam2 = if a >= 2 { c.powi(a - 2) } else { 0.0 };
        let d2 = af * (af - 1.0) * cam2 * s * s * g - af * ca * g - (2.0 * af + 1.0) * ca * s * g1
            + ca * c * c * g2;
        k * k * self.prefactor * d2
    }
}

impl Evaluate for SingleParticleState {
    fn value(&self, x: f64) -> f64 {
        let theta = self.geom.angle(x);
        if self.level == HierarchyLevel::BOX {
            let n = self.m as f64;
            return if self.m % 2 == 1 {
                self.prefactor * (n * theta).cos()
            } else {
                self.prefactor * (n * theta).sin()
            };
        }
        let a = self.level.get() as i32;
        let (s, c) = theta.sin_cos();
        self.prefactor * c.powi(a) * gegenbauer(a as f64, self.m - 1, s)
    }
}

impl Differentiable for SingleParticleState {
    fn derivative(&self, x: f64) -> f64 {
        let k = PI / self.geom.length;
        let theta = self.geom.angle(x);
        if self.level == HierarchyLevel::BOX {
            let n = self.m as f64;
            return if self.m % 2 == 1 {
                -k * n * self.prefactor * (n * theta).sin()
            } else {
                k * n * self.prefactor * (n * theta).cos()
            };
        }
        let a = self.level.get() as i32;
        let af = a as f64;
        let (s, c) = theta.sin_cos();
        let [g, g1, _] = gegenbauer_with_derivatives(af, self.m - 1, s);
        let d1 = -af * c.powi(a - 1) * s * g + c.powi(a + 1) * g1;
        k * self.prefactor * d1
    }
}

/// Box eigenstate ψ⁽¹⁾ₙ: √(2/L) cos(nπx/L) for odd n, √(2/L) sin(nπx/L) for even n.
pub fn box_wavefunction(n: usize, geom: &BoxGeometry) -> Result<SingleParticleState> {
    let energy = box_energy(n, geom)?;
    Ok(SingleParticleState {
        level: HierarchyLevel::BOX,
        m: n,
        energy,
        parity: Parity::of_box_state(n),
        geom: *geom,
        prefactor: (2.0 / geom.length).sqrt(),
    })
}

/// Sign σₙ with ψ⁽¹⁾ₙ = σₙ √(2/L) cos θ U_{n−1}(sin θ).
pub(crate) fn chebyshev_sign(n: usize) -> f64 {
    let q = if n % 2 == 1 { (n - 1) / 2 } else { n / 2 + 1 };
    if q % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Normalized ψ⁽ᵅ⁾ₘ obtained by (α−1)-fold annihilation of ψ⁽¹⁾_{m+α−1}.
pub fn hierarchy_wavefunction(
    alpha: HierarchyLevel,
    m: usize,
    geom: &BoxGeometry,
) -> Result<SingleParticleState> {
    if m == 0 {
        return Err(Error::Domain("state index must be >= 1".into()));
    }
    if alpha == HierarchyLevel::BOX {
        return box_wavefunction(m, geom);
    }
    let a = alpha.get();
    let n = alpha.box_index(m);
    let e_n = box_energy(n, geom)?;
    let mut gap_product = 1.0;
    for j in 1..a as usize {
        gap_product *= e_n - box_energy(j, geom)?;
    }
    if !(gap_product > 0.0 && gap_product.is_finite()) {
        return Err(Error::Consistency(format!(
            "normalization denominator {gap_product} for level {a}, state {m}"
        )));
    }
    let c = geom.ladder_constant();
    let prefactor = chebyshev_sign(n)
        * (2.0 / geom.length).sqrt()
        * c.powi(a as i32 - 1)
        * 2f64.powi(a as i32 - 1)
        * factorial(a - 1)
        / gap_product.sqrt();
    Ok(SingleParticleState {
        level: alpha,
        m,
        energy: e_n,
        parity: Parity::of_state(alpha, m),
        geom: *geom,
        prefactor,
    })
}

/// Gegenbauer polynomial C^{(λ)}_n(s) by forward recurrence.
pub fn gegenbauer(lambda: f64, n: usize, s: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * lambda * s;
    for k in 2..=n {
        let kf = k as f64;
        let next = (2.0 * s * (kf + lambda - 1.0) * cur - (kf + 2.0 * lambda - 2.0) * prev) / kf;
        prev = cur;
        cur = next;
    }
    cur
}

/// C^{(λ)}_n together with its first two derivatives in s.
fn gegenbauer_with_derivatives(lambda: f64, n: usize, s: f64) -> [f64; 3] {
    let g = gegenbauer(lambda, n, s);
    let g1 = if n >= 1 { 2.0 * lambda * gegenbauer(lambda + 1.0, n - 1, s) } else { 0.0 };
    let g2 = if n >= 2 {
        4.0 * lambda * (lambda + 1.0) * gegenbauer(lambda + 2.0, n - 2, s)
    } else {
        0.0
    };
    [g, g1, g2]
}

/// Superpotential W⁽ᵅ⁾(x) = (α−1)·(π/(√2 L))·tan(πx/L), generating level α from α−1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Superpotential {
    pub level: HierarchyLevel,
    geom: BoxGeometry,
}

impl Superpotential {
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.geom.check_interior(x)?;
        Ok(self.value(x))
    }

    pub fn strength(&self) -> f64 {
        (self.level.get() - 1) as f64 * self.geom.ladder_constant()
    }
}

impl Evaluate for Superpotential {
    fn value(&self, x: f64) -> f64 {
        self.strength() * self.geom.angle(x).tan()
    }
}

impl Differentiable for Superpotential {
    fn derivative(&self, x: f64) -> f64 {
        let c = self.geom.angle(x).cos();
        self.strength() * PI / (self.geom.length * c * c)
    }
}

pub fn superpotential(alpha: HierarchyLevel, geom: &BoxGeometry) -> Result<Superpotential> {
    if alpha.get() < 2 {
        return Err(Error::Domain("superpotential is defined for target level >= 2".into()));
    }
    Ok(Superpotential { level: alpha, geom: *geom })
}

/// g = A_β f = f′/√2 + W^{(β+1)} f for a level-β function f.
pub struct Annihilated<'a, F: Differentiable + ?Sized> {
    source: &'a F,
    w: Superpotential,
}

impl<F: Differentiable + ?Sized> Annihilated<'_, F> {
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.w.geom.check_interior(x)?;
        Ok(self.value(x))
    }
}

impl<F: Differentiable + ?Sized> Evaluate for Annihilated<'_, F> {
    fn value(&self, x: f64) -> f64 {
        self.source.derivative(x) / SQRT_2 + self.w.value(x) * self.source.value(x)
    }
}

/// Apply the annihilation operator of level `level_from`, which uses the
/// superpotential of level `level_from + 1`.
pub fn apply_annihilation<'a, F: Differentiable + ?Sized>(
    level_from: HierarchyLevel,
    f: &'a F,
    geom: &BoxGeometry,
) -> Annihilated<'a, F> {
    let target = HierarchyLevel(level_from.get() + 1);
    Annihilated { source: f, w: Superpotential { level: target, geom: *geom } }
}

/// V⁽ᵅ⁾ = W⁽ᵅ⁾² + W⁽ᵅ⁾′/√2, the factorized partner potential.
///
/// This is the potential of A A† and carries the shift of the factorized
/// Hamiltonian: its eigenvalues are the physical energies E⁽¹⁾_{m+α−1} minus
/// [`PartnerPotential::energy_offset`] = (α−1)² E₁. For α = 2 it equals
/// (π²/2L²)(2 sec²(πx/L) − 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartnerPotential {
    pub level: HierarchyLevel,
    geom: BoxGeometry,
}

impl PartnerPotential {
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.geom.check_interior(x)?;
        Ok(self.value(x))
    }

    pub fn energy_offset(&self) -> f64 {
        let d = (self.level.get() - 1) as f64;
        d * d * self.geom.ground_energy()
    }
}

impl Evaluate for PartnerPotential {
    fn value(&self, x: f64) -> f64 {
        if self.level == HierarchyLevel::BOX {
            return 0.0;
        }
        let w = Superpotential { level: self.level, geom: self.geom };
        let wv = w.value(x);
        wv * wv + w.derivative(x) / SQRT_2
    }
}

pub fn partner_potential(alpha: HierarchyLevel, geom: &BoxGeometry) -> PartnerPotential {
    PartnerPotential { level: alpha, geom: *geom }
}

/// The hierarchy levels 1..=alpha_max over one box.
///
/// Immutable once built; every accessor is a pure function of its inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyBasis {
    geom: BoxGeometry,
    alpha_max: u32,
}

impl HierarchyBasis {
    pub const DEFAULT_ALPHA_MAX: u32 = 4;

    pub fn new(geom: BoxGeometry, alpha_max: u32) -> Result<Self> {
        if alpha_max == 0 {
            return Err(Error::Domain("alpha_max must be >= 1".into()));
        }
        Ok(Self { geom, alpha_max })
    }

    pub fn geometry(&self) -> &BoxGeometry {
        &self.geom
    }

    pub fn alpha_max(&self) -> u32 {
        self.alpha_max
    }

    pub fn level(&self, alpha: u32) -> Result<HierarchyLevel> {
        if alpha == 0 || alpha > self.alpha_max {
            return Err(Error::Domain(format!(
                "hierarchy level {alpha} outside 1..={}",
                self.alpha_max
            )));
        }
        Ok(HierarchyLevel(alpha))
    }

    pub fn state(&self, alpha: u32, m: usize) -> Result<SingleParticleState> {
        hierarchy_wavefunction(self.level(alpha)?, m, &self.geom)
    }

    /// Physical energy of ψ⁽ᵅ⁾ₘ, i.e. E⁽¹⁾_{m+α−1}.
    pub fn energy(&self, alpha: u32, m: usize) -> Result<f64> {
        let level = self.level(alpha)?;
        if m == 0 {
            return Err(Error::Domain("state index must be >= 1".into()));
        }
        box_energy(level.box_index(m), &self.geom)
    }

    pub fn energies(&self, alpha: u32, count: usize) -> Result<Vec<f64>> {
        (1..=count).map(|m| self.energy(alpha, m)).collect()
    }

    /// Values ψ⁽ᵅ⁾ₘ(xⱼ) for m = 1..=count as a (count × nodes) matrix.
    ///
    /// Uses one Gegenbauer recurrence per node for all m at once.
    pub fn tabulate(&self, alpha: u32, count: usize, nodes: &[f64]) -> Result<DMatrix<f64>> {
        let level = self.level(alpha)?;
        let mut out = DMatrix::zeros(count, nodes.len());
        if count == 0 {
            return Ok(out);
        }
        if level == HierarchyLevel::BOX {
            let amp = (2.0 / self.geom.length).sqrt();
            for (j, &x) in nodes.iter().enumerate() {
                let theta = self.geom.angle(x);
                for m in 1..=count {
                    let arg = m as f64 * theta;
                    out[(m - 1, j)] = amp * if m % 2 == 1 { arg.cos() } else { arg.sin() };
                }
            }
            return Ok(out);
        }
        let prefactors: Vec<f64> = (1..=count)
            .map(|m| hierarchy_wavefunction(level, m, &self.geom).map(|s| s.prefactor))
            .collect::<Result<_>>()?;
        let lambda = alpha as f64;
        for (j, &x) in nodes.iter().enumerate() {
            let (s, c) = self.geom.angle(x).sin_cos();
            let envelope = c.powi(alpha as i32);
            let mut prev = 1.0;
            let mut cur = 2.0 * lambda * s;
            out[(0, j)] = prefactors[0] * envelope * prev;
            if count > 1 {
                out[(1, j)] = prefactors[1] * envelope * cur;
            }
            for k in 2..count {
                let kf = k as f64;
                let next =
                    (2.0 * s * (kf + lambda - 1.0) * cur - (kf + 2.0 * lambda - 2.0) * prev) / kf;
                prev = cur;
                cur = next;
                out[(k, j)] = prefactors[k] * envelope * cur;
            }
        }
        Ok(out)
    }
}
