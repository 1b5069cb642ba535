//! Quadrature helpers.

use std::num::NonZeroUsize;

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;

/// A node of a rule on [0, 1], carried together with its complement `1 - x`
/// so that integrands with endpoint singularities can be evaluated without
/// cancellation.
#[derive(Debug, Clone, Copy)]
pub struct UnitNode {
    pub x: f64,
    pub one_minus_x: f64,
    pub weight: f64,
}

/// Double-exponential (tanh-sinh) rule on [0, 1].
///
/// Handles algebraic endpoint singularities `x^(s-1)` with `s > 0` at
/// near-machine accuracy for moderate node counts.
pub fn tanh_sinh_unit(step: f64, half_count: usize) -> Vec<UnitNode> {
    use std::f64::consts::FRAC_PI_2;
    let mut nodes = Vec::with_capacity(2 * half_count + 1);
    for k in -(half_count as i64)..=(half_count as i64) {
        let t = k as f64 * step;
        let s = FRAC_PI_2 * t.sinh();
        let c = FRAC_PI_2 * t.cosh();
        // x = (1 + tanh s)/2 = 1/(1 + e^{-2s}), 1 - x = 1/(1 + e^{2s})
        let x = 1.0 / (1.0 + (-2.0 * s).exp());
        let xc = 1.0 / (1.0 + (2.0 * s).exp());
        let sech = 1.0 / s.cosh();
        let w = 0.5 * step * c * sech * sech;
        if x > 0.0 && xc > 0.0 && w > 0.0 && w.is_finite() {
            nodes.push(UnitNode {
                x,
                one_minus_x: xc,
                weight: w,
            });
        }
    }
    nodes
}

/// Composite Gauss–Legendre on `[a, b]` with `panels` equal panels.
pub struct CompositeLegendre {
    rule: GaussLegendre,
}

impl CompositeLegendre {
    pub fn new(degree: usize) -> Self {
        CompositeLegendre {
            rule: GaussLegendre::new(NonZeroUsize::new(degree.max(1)).unwrap()),
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * h;
                self.rule.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }

    /// Nodes and weights mapped to `[a, b]` (single panel).
    pub fn nodes_on(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.rule
            .iter()
            .map(|(x, w)| (mid + half * x, half * w))
            .collect()
    }
}

/// Integral of `f` over `[lo, hi]` with `0 < lo < hi`, on a logarithmic grid.
/// Suited to power-law integrands spanning many decades.
pub fn integrate_log_scale<F: FnMut(f64) -> f64>(lo: f64, hi: f64, mut f: F) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let rule = CompositeLegendre::new(24);
    let (ya, yb) = (lo.ln(), hi.ln());
    let panels = (((yb - ya) * 4.0).ceil() as usize).clamp(4, 4000);
    rule.integrate(ya, yb, panels, |y| {
        let z = y.exp();
        f(z) * z
    })
}

/// Gauss–Hermite rule for `∫ g(x) e^{-x²} dx`.
pub fn gauss_hermite(degree: usize) -> Vec<(f64, f64)> {
    GaussHermite::new(NonZeroUsize::new(degree.max(1)).unwrap())
        .iter()
        .map(|(x, w)| (*x, *w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_sinh_beta_integral() {
        let nodes = tanh_sinh_unit(1.0 / 32.0, 160);
        // ∫ x^{-1/2} (1-x)^{-1/2} dx = π
        let v: f64 = nodes
            .iter()
            .map(|n| n.weight * n.x.powf(-0.5) * n.one_minus_x.powf(-0.5))
            .sum();
        assert!((v - std::f64::consts::PI).abs() < 1e-10, "{v}");
    }

    #[test]
    fn legendre_polynomial_exact() {
        let r = CompositeLegendre::new(5);
        let v = r.integrate(0.0, 2.0, 3, |x| x.powi(4));
        assert!((v - 32.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn log_scale_power_law() {
        let v = integrate_log_scale(1.0, 1e6, |z| z.powf(-1.5));
        let exact = 2.0 * (1.0 - 1e-3);
        assert!((v - exact).abs() < 1e-11, "{v}");
    }

    #[test]
    fn hermite_gaussian_moment() {
        let r = gauss_hermite(20);
        let v: f64 = r.iter().map(|(x, w)| w * x * x).sum();
        assert!((v - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }
}
