//! Gauss–Legendre rules on the box interior.

use crate::basis::{BoxGeometry, Evaluate};

/// Gauss–Legendre nodes and weights mapped onto (−L/2, L/2).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Rule order used when no bandwidth information is available.
pub const DEFAULT_ORDER: usize = 400;

impl QuadratureRule {
    /// Gauss–Legendre rule of the given order; orders below 2 are raised to 2.
    pub fn gauss_legendre(order: usize, geom: &BoxGeometry) -> Self {
        let order = order.max(2);
        let (xs, ws) = legendre_nodes(order);
        let h = geom.half_width();
        Self {
            order,
            nodes: xs.iter().map(|x| h * x).collect(),
            weights: ws.iter().map(|w| h * w).collect(),
        }
    }

    /// Rule resolving products ψ_a ψ_b whose box quantum numbers sum to at
    /// most `index_sum`.
    ///
    /// Such products are trigonometric polynomials of degree `index_sum` in
    /// πx/L. Gauss–Legendre with n nodes is exact to polynomial degree 2n−1,
    /// and the Chebyshev content of cos(kπx/L) dies off past degree ≈ kπ/2, so
    /// n ≈ 0.8·k plus a margin leaves the aliasing error at round-off.
    pub fn for_index_sum(index_sum: usize, geom: &BoxGeometry) -> Self {
        let order = DEFAULT_ORDER.max((0.8 * index_sum as f64).ceil() as usize + 64);
        Self::gauss_legendre(order, geom)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Evaluate + ?Sized>(&self, f: &F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f.value(x)).sum()
    }
}

/// ⟨f|g⟩ = Σᵢ wᵢ f(xᵢ) g(xᵢ) for real f, g.
pub fn inner_product<F, G>(f: &F, g: &G, rule: &QuadratureRule) -> f64
where
    F: Evaluate + ?Sized,
    G: Evaluate + ?Sized,
{
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| w * f.value(x) * g.value(x))
        .sum()
}

/// Nodes and weights on [−1, 1], ascending.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi's estimate of the i-th largest root
        let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf))
            * (std::f64::consts::PI * (4.0 * i as f64 + 3.0) / (4.0 * nf + 2.0)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[n - 1 - i] = x;
        ws[n - 1 - i] = w;
        xs[i] = -x;
        ws[i] = w;
    }
    if n % 2 == 1 {
        xs[n / 2] = 0.0;
    }
    (xs, ws)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn geom() -> BoxGeometry {
        BoxGeometry::new(4.0).unwrap()
    }

    #[test]
    fn weights_sum_to_length() {
        for order in [2, 3, 17, 400, 1001] {
            let rule = QuadratureRule::gauss_legendre(order, &geom());
            let sum: f64 = rule.weights().iter().sum();
            assert!((sum - 4.0).abs() < 1e-12, "order {order}: {sum}");
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            assert!(rule.nodes().iter().all(|&x| x.abs() < 2.0));
            assert!(rule.nodes().windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn elementary_integrals() {
        let g = geom();
        let rule = QuadratureRule::gauss_legendre(DEFAULT_ORDER, &g);
        assert!((rule.integrate(&|_x: f64| 1.0) - 4.0).abs() < 1e-12);
        assert!(rule.integrate(&|x: f64| x).abs() < 1e-13);
        let c2 = rule.integrate(&|x: f64| (PI * x / 4.0).cos().powi(2));
        assert!((c2 - 2.0).abs() < 1e-13);
    }

    #[test]
    fn polynomial_exactness() {
        let g = geom();
        for order in [3usize, 8, 21] {
            let rule = QuadratureRule::gauss_legendre(order, &g);
            for deg in 0..2 * order {
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 * 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0)
                };
                let got = rule.integrate(&|x: f64| x.powi(deg as i32));
                assert!(
                    (got - exact).abs() < 1e-13 * 2f64.powi(deg as i32 + 2),
                    "order {order} degree {deg}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn bandwidth_rule_resolves_high_harmonics() {
        let g = geom();
        for k in [200usize, 1000, 3000] {
            let rule = QuadratureRule::for_index_sum(k, &g);
            // ∫ cos(kπx/L) over the box, k even → 0
            let got = rule.integrate(&|x: f64| (k as f64 * PI * x / 4.0).cos());
            assert!(got.abs() < 1e-12, "k={k}: {got}");
            let rule = QuadratureRule::for_index_sum(2 * k, &g);
            let got = rule.integrate(&|x: f64| (k as f64 * PI * x / 4.0).cos().powi(2));
            assert!((got - 2.0).abs() < 1e-12, "k={k}: {got}");
        }
    }
}
