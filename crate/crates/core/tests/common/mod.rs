//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use susy_quench::basis::{apply_annihilation, box_energy, box_wavefunction, BoxGeometry, Evaluate, HierarchyLevel};
use susy_quench::quadrature::QuadratureRule;

/// ψ⁽²⁾ₘ = A₁ψ⁽¹⁾ₘ₊₁ / √(E_{m+1} − E₁), built from the box state.
pub fn ladder_level_two(m: usize, geom: &BoxGeometry) -> impl Fn(f64) -> f64 {
    let source = box_wavefunction(m + 1, geom).unwrap();
    let norm = (box_energy(m + 1, geom).unwrap() - geom.ground_energy()).sqrt();
    let geom = *geom;
    move |x| apply_annihilation(HierarchyLevel::BOX, &source, &geom).value(x) / norm
}

/// All permutations of 0..n with their signs.
pub fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    if n == 0 {
        return vec![(Vec::new(), 1.0)];
    }
    let mut out = Vec::new();
    for (p, s) in permutations(n - 1) {
        // insert n−1 at every position; moving it left by j places costs j swaps
        for pos in (0..=p.len()).rev() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            let swaps = p.len() - pos;
            out.push((q, if swaps % 2 == 0 { s } else { -s }));
        }
    }
    out
}

/// ⟨Φ_right | Φ_left⟩ for two normalized Slater determinants, by tensor
/// quadrature over all N coordinates with explicit antisymmetrization.
pub fn antisymmetrized_overlap<A: Evaluate, B: Evaluate>(left: &[A], right: &[B], rule: &QuadratureRule) -> f64 {
    let n = left.len();
    assert_eq!(n, right.len());
    let nodes = rule.nodes();
    let weights = rule.weights();
    let q = nodes.len();
    let ta: Vec<Vec<f64>> = left.iter().map(|f| nodes.iter().map(|&x| f.value(x)).collect()).collect();
    let tb: Vec<Vec<f64>> = right.iter().map(|f| nodes.iter().map(|&x| f.value(x)).collect()).collect();
    let perms = permutations(n);
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    let mut idx = vec![0usize; n];
    let mut total = 0.0;
    loop {
        let w: f64 = idx.iter().map(|&j| weights[j]).product();
        let slater = |t: &Vec<Vec<f64>>| -> f64 {
            perms.iter().map(|(p, s)| s * (0..n).map(|i| t[p[i]][idx[i]]).product::<f64>()).sum()
        };
        total += w * slater(&ta) * slater(&tb);
        let mut d = 0;
        while d < n {
            idx[d] += 1;
            if idx[d] < q {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == n {
            break;
        }
    }
    total / factorial
}
