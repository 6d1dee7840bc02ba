//! Reference values: closed forms, values pinned from independent oracles,
//! and convergence studies.

mod common;

use std::f64::consts::PI;

use common::{antisymmetrized_overlap, ladder_level_two};
use nalgebra::DMatrix;
use susy_quench::basis::{box_wavefunction, BoxGeometry, HierarchyBasis, HierarchyLevel};
use susy_quench::dynamics::{revival_time, Evolution, InitialState};
use susy_quench::linalg::real_det;
use susy_quench::overlap::{build_overlap, intertwined_overlap, overlap_matrix, Spectrum, Truncation};
use susy_quench::quadrature::{inner_product, QuadratureRule};
use susy_quench::talbot::{box_box_overlap, talbot_overlap_matrix, ExpansionSpec};
use susy_quench::thermal::{fermi, ThermalState};
use susy_quench::work::{
    average_work, enumerate_final_states, many_body_overlap, overlap_for_work, wpd_finite_t, MomentTruncation,
    ThermalWpdOptions, WpdOptions,
};

fn geom() -> BoxGeometry {
    BoxGeometry::new(4.0).unwrap()
}

fn basis() -> HierarchyBasis {
    HierarchyBasis::new(geom(), 4).unwrap()
}

#[test]
fn ground_overlap_of_the_first_partner() {
    // ψ⁽²⁾₁ = √(8/3L) cos², so ⟨ψ⁽¹⁾₁|ψ⁽²⁾₁⟩ = 16 / (3√3 π)
    let exact = 16.0 / (3.0 * 3f64.sqrt() * PI);
    let rule = QuadratureRule::gauss_legendre(400, &geom());
    let b = basis();
    let v = inner_product(&b.state(1, 1).unwrap(), &b.state(2, 1).unwrap(), &rule);
    assert!((v - exact).abs() < 1e-14, "{v} vs {exact}");
    assert!((v - 0.980140258527631).abs() < 1e-14);
    // the adaptive builder uses its own quadrature order
    let u = build_overlap(&b, 1, 2, 1, Truncation::Fixed { columns: 1 }).unwrap();
    assert!((u.entries[(0, 0)] - exact).abs() < 1e-14);
}

#[test]
fn two_particle_ground_amplitude() {
    // block-diagonal by parity: U₁₁ U₂₂ with U₂₂ = 32√2 / (15π)
    let exact = 16.0 / (3.0 * 3f64.sqrt() * PI) * 32.0 * 2f64.sqrt() / (15.0 * PI);
    let b = basis();
    let u = build_overlap(&b, 1, 2, 2, Truncation::Fixed { columns: 4 }).unwrap();
    let det = many_body_overlap(&u, &[1, 2], &[1, 2]).unwrap();
    assert!((det.abs() - exact).abs() < 1e-13, "{det} vs {exact}");
    let rule = QuadratureRule::gauss_legendre(64, &geom());
    let g = geom();
    let left = [box_wavefunction(1, &g).unwrap(), box_wavefunction(2, &g).unwrap()];
    let right = [ladder_level_two(1, &g), ladder_level_two(2, &g)];
    let brute = antisymmetrized_overlap(&left, &right, &rule);
    assert!((brute.abs() - exact).abs() < 1e-12);
}

#[test]
fn thirty_particle_ground_probability() {
    // quadrature entries against the ladder route
    let g = geom();
    let u = build_overlap(&basis(), 1, 2, 30, Truncation::Fixed { columns: 30 }).unwrap();
    let rule = QuadratureRule::for_index_sum(64, &g);
    let ladder = DMatrix::from_fn(30, 30, |k, m| intertwined_overlap(k + 1, m + 1, &g, &rule).unwrap());
    let set: Vec<usize> = (1..=30).collect();
    let p = many_body_overlap(&u, &set, &set).unwrap().powi(2);
    let p_ladder = real_det(&ladder).powi(2);
    assert!((p - p_ladder).abs() < 1e-12, "{p} vs {p_ladder}");
    assert!((p - 0.3571981706745948).abs() < 1e-12, "{p}");
}

#[test]
fn quadrature_order_is_converged() {
    let b = basis();
    let g = geom();
    let coarse = overlap_matrix(&b, 1, 2, 30, 200, &QuadratureRule::gauss_legendre(400, &g)).unwrap();
    let fine = overlap_matrix(&b, 1, 2, 30, 200, &QuadratureRule::gauss_legendre(800, &g)).unwrap();
    let diff = (&coarse.entries - &fine.entries).abs().max();
    assert!(diff < 1e-11, "{diff}");
    // determinism: the same rule reproduces every bit
    let again = overlap_matrix(&b, 1, 2, 30, 200, &QuadratureRule::gauss_legendre(400, &g)).unwrap();
    assert_eq!(coarse.entries, again.entries);
}

/// Convergence study: the defect falls like M⁻³, so the 10⁻⁸ level needs
/// thousands of columns rather than a couple of hundred.
#[test]
fn defect_convergence_study() {
    let b = basis();
    let mut previous = f64::INFINITY;
    for m in [100, 200, 400, 800, 1600] {
        let d = build_overlap(&b, 1, 2, 30, Truncation::Fixed { columns: m }).unwrap().max_defect();
        assert!(d < previous);
        if previous.is_finite() {
            // doubling M cuts the defect by roughly 2³
            let ratio = previous / d;
            assert!(ratio > 5.0 && ratio < 12.0, "M = {m}: ratio {ratio}");
        }
        previous = d;
    }
    let d200 = build_overlap(&b, 1, 2, 30, Truncation::Fixed { columns: 200 }).unwrap().max_defect();
    assert!((d200 - 1.201302e-4).abs() < 1e-9, "{d200:e}");
    let d240 = build_overlap(&b, 1, 3, 30, Truncation::Fixed { columns: 240 }).unwrap().max_defect();
    assert!((d240 - 3.763417e-4).abs() < 1e-9, "{d240:e}");
    let tight = Truncation::Adaptive { tolerance: 1e-8, step: 40, cap: 12_000 };
    assert_eq!(build_overlap(&b, 1, 2, 30, tight).unwrap().cols(), 4600);
}

#[test]
fn expansion_defect_against_explicit_tail() {
    // the closed form lets the discarded weight be summed directly
    let spec = ExpansionSpec {
        length_initial: 3.9,
        length_final: 4.0,
        particles: 30,
        rows: 30,
        truncation: Truncation::Fixed { columns: 200 },
    };
    let u = talbot_overlap_matrix(&spec).unwrap();
    for k in [1usize, 15, 30] {
        let tail: f64 = (201..200_000).map(|l| box_box_overlap(k, l, 3.9, 4.0).powi(2)).sum();
        let d = u.completeness_defect[k - 1];
        assert!((d - tail).abs() < 1e-9, "k = {k}: {d:e} vs {tail:e}");
    }
    assert!((u.max_defect() - 1.712893e-5).abs() < 1e-10, "{:e}", u.max_defect());
}

#[test]
fn deep_minimum_between_quarter_revivals() {
    let u = build_overlap(&basis(), 1, 4, 30, Truncation::default()).unwrap();
    let evo = Evolution::new(u);
    let f = evo.survival_at_fraction(0.125, &InitialState::FermiSea { particles: 30 }).unwrap().value;
    assert!(f < 1e-3);
    assert!((f / 9.5932056386e-5 - 1.0).abs() < 1e-6, "{f:e}");
    assert!((revival_time(&geom()) - 64.0 / PI).abs() < 1e-13);
}

#[test]
fn chemical_potential_against_dense_scan() {
    let g = geom();
    let th = ThermalState::at_temperature(&Spectrum::hierarchy(&g, HierarchyLevel::BOX), 30, 0.05).unwrap();
    assert!(th.occupations[29] > 0.5 && th.occupations[30] < 0.5);
    let energies = Spectrum::hierarchy(&g, HierarchyLevel::BOX).energies(th.levels());
    let count = |mu: f64| energies.iter().map(|&e| fermi(th.beta * (e - mu))).sum::<f64>() - 30.0;
    // scan μ/E₁ in steps of 10⁻³, then interpolate linearly in the bracket
    let e1 = g.ground_energy();
    let mut lo = 900.0;
    while count((lo + 1e-3) * e1) < 0.0 {
        lo += 1e-3;
    }
    let (a, b) = (count(lo * e1), count((lo + 1e-3) * e1));
    let scanned = lo + 1e-3 * a / (a - b);
    assert!((th.mu / e1 - scanned).abs() < 1e-7, "{} vs {scanned}", th.mu / e1);
    assert!((th.mu / e1 - 932.054947428517).abs() < 1e-8);
}

#[test]
fn zero_temperature_spectrum_converges() {
    // sum rules at reduced N, where higher orders can be enumerated
    let b = basis();
    let g = geom();
    let n = 8;
    let u = overlap_for_work(&vec![1.0; n], MomentTruncation::default(), |m| {
        build_overlap(&b, 1, 2, n, Truncation::Fixed { columns: m })
    })
    .unwrap();
    let w = average_work(HierarchyLevel::new(2).unwrap(), n, &g);
    let mut previous = 0.0;
    for order in 1..=4 {
        let s = enumerate_final_states(&u, n, &WpdOptions { max_order: order, ..Default::default() }).unwrap();
        assert!(s.total_probability > previous && s.total_probability <= 1.0 + 1e-10);
        assert!(s.first_moment <= w * (1.0 + 1e-10));
        previous = s.total_probability;
    }
    assert!(1.0 - previous < 1e-6, "{previous}");
}

#[test]
fn finite_temperature_spectra_at_reduced_n() {
    let b = basis();
    let g = geom();
    let th = ThermalState::at_temperature(&Spectrum::hierarchy(&g, HierarchyLevel::BOX), 10, 0.05).unwrap();
    let rows = th.levels().max(11);
    let occ = th.resized(rows).occupations;
    let mut counts = Vec::new();
    for to in [2, 3] {
        let u = overlap_for_work(&occ, MomentTruncation::default(), |m| {
            build_overlap(&b, 1, to, rows, Truncation::Fixed { columns: m })
        })
        .unwrap();
        let s = wpd_finite_t(&u, &th, &ThermalWpdOptions::default()).unwrap();
        assert!(s.total_probability <= 1.0 + 1e-10 && s.total_probability >= 0.99, "{}", s.total_probability);
        // merged records carry distinct W
        assert!(s.records.windows(2).all(|w| w[0].work < w[1].work));
        counts.push(s.records.len());
    }
    // the 1->3 distribution stays sparser
    assert!(counts[1] < counts[0], "{counts:?}");
}

#[test]
#[ignore = "O(t) has a t^(3/2) cusp at t = 0, so a 1e-5 t_r step misses <W> by 10-25%; \
            the resolving step is used instead"]
fn derivative_with_fixed_step_matches_average_work() {
    let b = basis();
    for to in 2..=4 {
        let evo = Evolution::new(build_overlap(&b, 1, to, 30, Truncation::default()).unwrap());
        let w = average_work(HierarchyLevel::new(to).unwrap(), 30, &geom());
        let fd = evo.initial_decay_rate(30, 1e-5).unwrap();
        assert!((fd - w).abs() / w < 1e-3, "1->{to}: {fd} vs {w}");
    }
}

#[test]
#[ignore = "the defect at these sizes is 1e-4 (partners) and 2e-5 (expansion); \
            see defect_convergence_study"]
fn defects_below_1e8_at_a_few_hundred_columns() {
    let b = basis();
    for (to, m) in [(2, 200), (3, 240)] {
        let d = build_overlap(&b, 1, to, 30, Truncation::Fixed { columns: m }).unwrap().max_defect();
        assert!(d < 1e-8, "1->{to}, M = {m}: {d:e}");
    }
    let spec = ExpansionSpec {
        length_initial: 3.9,
        length_final: 4.0,
        particles: 30,
        rows: 30,
        truncation: Truncation::Fixed { columns: 200 },
    };
    let d = talbot_overlap_matrix(&spec).unwrap().max_defect();
    assert!(d < 1e-8, "expansion: {d:e}");
}
