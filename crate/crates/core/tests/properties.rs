//! Invariants checked on random inputs.

use std::sync::OnceLock;

use proptest::prelude::*;
use susy_quench::basis::{BoxGeometry, HierarchyBasis, HierarchyLevel};
use susy_quench::config::parse_config;
use susy_quench::dynamics::{survival_probability_finite_t, survival_probability_zero_t, thermal_matrix, Evolution, InitialState};
use susy_quench::overlap::{build_overlap, intertwined_overlap, OverlapMatrix, Spectrum, Truncation};
use susy_quench::quadrature::QuadratureRule;
use susy_quench::talbot::box_box_overlap;
use susy_quench::thermal::ThermalState;
use susy_quench::work::{
    average_work_quanta, enumerate_final_states, ground_state_shift_quanta, irreversible_work_quanta,
    many_body_overlap, WpdOptions,
};

fn geom() -> BoxGeometry {
    BoxGeometry::new(4.0).unwrap()
}

/// 1→α overlaps with 30 rows, built once per level.
fn evolution(to: u32) -> &'static Evolution {
    static CELLS: [OnceLock<Evolution>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    CELLS[to as usize - 2].get_or_init(|| {
        let b = HierarchyBasis::new(geom(), 4).unwrap();
        Evolution::new(build_overlap(&b, 1, to, 30, Truncation::default()).unwrap())
    })
}

fn small_overlap(to: u32) -> &'static OverlapMatrix {
    static CELLS: [OnceLock<OverlapMatrix>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    CELLS[to as usize - 2].get_or_init(|| {
        let b = HierarchyBasis::new(geom(), 4).unwrap();
        build_overlap(&b, 1, to, 8, Truncation::Fixed { columns: 80 }).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn survival_is_bounded_and_periodic(to in 2u32..=4, n in 1usize..=30, tau in 0.0f64..2.0) {
        let evo = evolution(to);
        let sea = InitialState::FermiSea { particles: n };
        let f = evo.survival_at_fraction(tau, &sea).unwrap().value;
        let bound = 1.0 + 10.0 * evo.overlap().max_defect();
        prop_assert!((0.0..=bound).contains(&f), "F = {}", f);
        let later = evo.survival_at_fraction(tau + 1.0, &sea).unwrap().value;
        prop_assert!((f - later).abs() < 1e-8, "{} vs {}", f, later);
    }

    #[test]
    fn cold_thermal_state_reduces_to_the_fermi_sea(to in 2u32..=4, n in 1usize..=20, tau in 0.0f64..1.0) {
        // β E₁ = 1 / (t N²) ≥ 2000
        let t_over_tf = 5e-4 / (n * n) as f64;
        let th = ThermalState::at_temperature(&Spectrum::hierarchy(&geom(), HierarchyLevel::BOX), n, t_over_tf).unwrap();
        prop_assert!(th.beta * geom().ground_energy() > 1e3);
        let o = evolution(to).matrix_at_fraction(tau);
        let hot = survival_probability_finite_t(&o, &th).unwrap().value;
        let cold = survival_probability_zero_t(&o, n).unwrap().value;
        prop_assert!((hot - cold).abs() < 1e-8, "{} vs {}", hot, cold);
    }

    #[test]
    fn thermal_matrix_is_the_identity_at_zero_time(n in 1usize..=20, t in 0.01f64..0.3) {
        let th = ThermalState::at_temperature(&Spectrum::hierarchy(&geom(), HierarchyLevel::BOX), n, t).unwrap();
        let levels = th.levels().min(30);
        let o = evolution(2).matrix_at_fraction(0.0);
        let block = o.view((0, 0), (levels, levels)).into_owned();
        let m = thermal_matrix(&block, &th.occupations[..levels]).unwrap();
        for i in 0..levels {
            for j in 0..levels {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((m[(i, j)].re - want).abs() < 1e-4 && m[(i, j)].im.abs() < 1e-4);
            }
        }
    }

    #[test]
    fn occupations_sum_to_n_and_decrease(n in 1usize..=40, t in 0.01f64..0.5) {
        let th = ThermalState::at_temperature(&Spectrum::hierarchy(&geom(), HierarchyLevel::BOX), n, t).unwrap();
        let total: f64 = th.occupations.iter().sum();
        prop_assert!((total - n as f64).abs() < 1e-10 * n as f64, "{}", total);
        // deep levels round to 1 or to each other
        prop_assert!(th.occupations.iter().all(|&x| x > 0.0 && x <= 1.0));
        prop_assert!(th.occupations.windows(2).all(|w| w[1] < w[0] || (w[1] == w[0] && 1.0 - w[0] < 1e-12)));
    }

    #[test]
    fn swapping_two_final_levels_flips_the_amplitude(
        to in 2u32..=4,
        raw in proptest::sample::subsequence((1usize..=80).collect::<Vec<_>>(), 4),
        i in 0usize..4,
        j in 0usize..4,
    ) {
        let u = small_overlap(to);
        let initial = [1, 2, 3, 4];
        let a = many_body_overlap(u, &initial, &raw).unwrap();
        let mut swapped = raw.clone();
        swapped.swap(i, j);
        let b = many_body_overlap(u, &initial, &swapped).unwrap();
        let expected = if i == j { a } else { -a };
        prop_assert!((b - expected).abs() < 1e-14, "{} vs {}", b, expected);
        let mut duplicated = raw.clone();
        duplicated[0] = duplicated[1];
        prop_assert!(many_body_overlap(u, &initial, &duplicated).is_err());
    }

    #[test]
    fn closed_form_work_identity(alpha in 1u32..=8, n in 1usize..=200) {
        let a = HierarchyLevel::new(alpha).unwrap();
        let w = average_work_quanta(a, n);
        prop_assert_eq!(w - irreversible_work_quanta(a, n), ground_state_shift_quanta(a, n));
        prop_assert!(average_work_quanta(a, n + 1) >= w);
        if alpha < 8 {
            prop_assert!(average_work_quanta(HierarchyLevel::new(alpha + 1).unwrap(), n) >= w);
        }
    }

    #[test]
    fn expansion_overlaps_respect_parity(k in 1usize..=60, l in 1usize..=60, narrow in 1.0f64..4.0) {
        let v = box_box_overlap(k, l, narrow, 4.0);
        if (k + l) % 2 == 1 {
            prop_assert_eq!(v, 0.0);
        }
        prop_assert!(v.abs() <= 1.0 + 1e-12);
        let same = box_box_overlap(k, l, 4.0, 4.0);
        prop_assert!((same - if k == l { 1.0 } else { 0.0 }).abs() < 1e-12, "{}", same);
    }

    #[test]
    fn quadrature_and_ladder_overlaps_agree(k in 1usize..=30, m in 1usize..=200) {
        let u = &evolution(2).overlap().entries;
        prop_assume!(m <= u.ncols());
        let rule = QuadratureRule::for_index_sum(k + m + 8, &geom());
        let ladder = intertwined_overlap(k, m, &geom(), &rule).unwrap();
        prop_assert!((u[(k - 1, m - 1)] - ladder).abs() < 1e-9, "{} vs {}", u[(k - 1, m - 1)], ladder);
    }

    #[test]
    fn row_weights_grow_with_columns_and_stay_below_one(to in 2u32..=4, k in 1usize..=30, m1 in 1usize..400) {
        let u = &evolution(to).overlap().entries;
        let m1 = m1.min(u.ncols());
        let partial = |m: usize| (0..m).map(|j| u[(k - 1, j)].powi(2)).sum::<f64>();
        prop_assert!(partial(m1) <= partial(u.ncols()) + 1e-15);
        prop_assert!(partial(u.ncols()) <= 1.0 + 1e-10);
    }

    #[test]
    fn negative_temperatures_are_rejected(ts in proptest::collection::vec(-1.0f64..0.5, 1..5)) {
        let list = ts.iter().map(|t| format!("{t:?}")).collect::<Vec<_>>().join(", ");
        let text = format!(
            "experiment = \"survival\"\ntemperatures = [{list}]\n[quench]\nlength = 4.0\nto_level = 2\nparticles = 30\n"
        );
        let parsed = parse_config(&text);
        prop_assert_eq!(parsed.is_ok(), ts.iter().all(|&t| t >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn zero_temperature_work_is_at_least_the_gap(to in 2u32..=4, n in 1usize..=8) {
        let u = small_overlap(to);
        let s = enumerate_final_states(u, n, &WpdOptions { max_order: 2, ..Default::default() }).unwrap();
        let gap = ground_state_shift_quanta(HierarchyLevel::new(to).unwrap(), n) as f64 * geom().ground_energy();
        prop_assert!(s.records.iter().all(|r| r.work >= gap - 1e-9 * gap));
        prop_assert!(s.total_probability <= 1.0 + 1e-10);
    }

    #[test]
    fn parity_zeroes_half_of_the_partner_block(n in 1usize..=15) {
        let n = 2 * n;
        let u = &evolution(2).overlap().entries;
        for k in 1..=n {
            for m in 1..=n {
                if (k + m) % 2 == 1 {
                    prop_assert_eq!(u[(k - 1, m - 1)], 0.0);
                } else {
                    prop_assert!(u[(k - 1, m - 1)] != 0.0);
                }
            }
        }
    }
}
