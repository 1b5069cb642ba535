//! Heavy-tailed disorder laws and the scaling constants of the
//! intermediate-disorder regime.
//!
//! A law is described through `X = 1 + η`, which is supported on
//! `[x_m, ∞)` and satisfies `P(X > z) = φ(z) z^{-α}`. Two families have a
//! constant slowly varying part (`pareto`, `centered_pareto`) and all their
//! truncated moments are in closed form; `log_pareto` carries a logarithmic
//! correction and is integrated numerically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::integrate_log_scale;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawFamily {
    /// `x_m = 1`; `E[η] = ∞` for `α ≤ 1`.
    Pareto,
    /// `α ∈ (1,2)`, `x_m = (α-1)/α` so that `E[η] = 0`.
    CenteredPareto,
    /// `P(X > z) = (x_m/z)^α (1 + α ln(z/x_m))`, the law of a product of two
    /// Pareto variables. Centered when `α > 1`.
    LogPareto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawRepr", into = "LawRepr")]
pub struct TailLaw {
    alpha: f64,
    family: LawFamily,
    x_m: f64,
    uncentered: bool,
}

#[derive(Serialize, Deserialize)]
struct LawRepr {
    family: LawFamily,
    alpha: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    uncentered_diagnostics: bool,
}

impl TryFrom<LawRepr> for TailLaw {
    type Error = Error;
    fn try_from(r: LawRepr) -> Result<Self> {
        if r.uncentered_diagnostics {
            TailLaw::uncentered(r.family, r.alpha)
        } else {
            TailLaw::new(r.family, r.alpha)
        }
    }
}

impl From<TailLaw> for LawRepr {
    fn from(l: TailLaw) -> Self {
        LawRepr {
            family: l.family,
            alpha: l.alpha,
            uncentered_diagnostics: l.uncentered,
        }
    }
}

/// Exact and leading-order values of a truncated moment `E[η^p 1{1+η<u}]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoment {
    pub exact: f64,
    /// Regular-variation leading term, for ratio diagnostics.
    pub leading: f64,
    /// Set when `u ≤ x_m`, in which case both values are zero.
    pub degenerate: bool,
}

/// `(e^{s L} - 1) / s`, continuous at `s = 0`.
fn exprel_scaled(s: f64, l: f64) -> f64 {
    let x = s * l;
    if x.abs() < 1e-8 {
        l * (1.0 + 0.5 * x + x * x / 6.0)
    } else {
        x.exp_m1() / s
    }
}

impl TailLaw {
    pub fn new(family: LawFamily, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::invalid("alpha", format!("tail exponent must lie in (0,2), got {alpha}")));
        }
        match family {
            LawFamily::Pareto if alpha > 1.0 => {
                return Err(Error::invalid(
                    "alpha",
                    format!(
                        "pareto with α={alpha} ∈ (1,2) has finite non-zero mean; use centered_pareto \
                         or flag the law as uncentered (diagnostics only)"
                    ),
                ))
            }
            LawFamily::CenteredPareto if alpha <= 1.0 => {
                return Err(Error::invalid(
                    "alpha",
                    format!("centered_pareto requires α ∈ (1,2), got {alpha}"),
                ))
            }
            _ => {}
        }
        Ok(Self::build(family, alpha, false))
    }

    /// Pareto law with `α ∈ (1,2)` and `x_m = 1`, so `E[η] > 0`. Not a valid
    /// disorder for the polymer; exposed for diagnostics only.
    pub fn uncentered(family: LawFamily, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::invalid("alpha", format!("tail exponent must lie in (0,2), got {alpha}")));
        }
        let mut law = Self::build(family, alpha, true);
        law.x_m = 1.0;
        Ok(law)
    }

    fn build(family: LawFamily, alpha: f64, uncentered: bool) -> Self {
        let x_m = match family {
            LawFamily::Pareto => 1.0,
            LawFamily::CenteredPareto => (alpha - 1.0) / alpha,
            LawFamily::LogPareto if alpha > 1.0 => ((alpha - 1.0) / alpha).powi(2),
            LawFamily::LogPareto => 1.0,
        };
        TailLaw {
            alpha,
            family,
            x_m,
            uncentered,
        }
    }

    pub fn pareto(alpha: f64) -> Result<Self> {
        Self::new(LawFamily::Pareto, alpha)
    }

    pub fn centered_pareto(alpha: f64) -> Result<Self> {
        Self::new(LawFamily::CenteredPareto, alpha)
    }

    pub fn log_pareto(alpha: f64) -> Result<Self> {
        Self::new(LawFamily::LogPareto, alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn family(&self) -> LawFamily {
        self.family
    }

    /// Lower endpoint of `1 + η`.
    pub fn x_m(&self) -> f64 {
        self.x_m
    }

    pub fn is_uncentered(&self) -> bool {
        self.uncentered
    }

    /// True when the constant slowly varying part makes every moment closed-form.
    pub fn has_constant_phi(&self) -> bool {
        self.family != LawFamily::LogPareto
    }

    /// `E[η]`: zero for centered laws, `+∞` when `α ≤ 1`.
    pub fn mean_eta(&self) -> f64 {
        if self.alpha <= 1.0 {
            f64::INFINITY
        } else if self.uncentered {
            match self.family {
                LawFamily::LogPareto => self.x_m * (self.alpha / (self.alpha - 1.0)).powi(2) - 1.0,
                _ => self.x_m * self.alpha / (self.alpha - 1.0) - 1.0,
            }
        } else {
            0.0
        }
    }

    /// `P(1 + η > z)`.
    pub fn tail_prob(&self, z: f64) -> f64 {
        if z <= self.x_m {
            return 1.0;
        }
        let w = z / self.x_m;
        match self.family {
            LawFamily::LogPareto => w.powf(-self.alpha) * (1.0 + self.alpha * w.ln()),
            _ => w.powf(-self.alpha),
        }
    }

    /// Slowly varying part `φ(z) = z^α P(1+η > z)`.
    pub fn phi(&self, z: f64) -> f64 {
        z.powf(self.alpha) * self.tail_prob(z)
    }

    /// The value `z ≥ x_m` with `P(1+η > z) = u`, for `u ∈ (0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self.family {
            LawFamily::LogPareto => self.x_m * self.log_family_inverse(u).exp(),
            _ => self.x_m * u.powf(-1.0 / self.alpha),
        }
    }

    // Solves e^{-αy}(1+αy) = u for y ≥ 0.
    fn log_family_inverse(&self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        let a = self.alpha;
        let target = u.ln();
        let g = |y: f64| -a * y + (a * y).ln_1p() - target;
        // g is concave and decreasing on y > 0, with g(y0) > 0 at the pure
        // Pareto guess; Newton then converges monotonically from the right
        // after the first step.
        let mut y = -target / a;
        for _ in 0..200 {
            let gy = g(y);
            let dg = -a + a / (1.0 + a * y);
            if dg == 0.0 {
                break;
            }
            let next = y - gy / dg;
            if !(next.is_finite()) || (next - y).abs() <= 1e-15 * y.max(1e-300) {
                y = if next.is_finite() { next } else { y };
                break;
            }
            y = next.max(0.0);
        }
        y
    }

    /// Inverse-transform sample of `η` from a uniform in `(0, 1)`.
    pub fn sample_eta(&self, uniform: f64) -> Result<f64> {
        if !(uniform > 0.0 && uniform < 1.0) {
            return Err(Error::invalid("uniform", format!("must lie in the open interval (0,1), got {uniform}")));
        }
        Ok(self.quantile(uniform) - 1.0)
    }

    /// Sample of `1+η` conditioned on `1+η < cap` (requires `cap > x_m`).
    pub fn sample_x_below(&self, uniform: f64, cap: f64) -> f64 {
        let t = self.tail_prob(cap);
        self.quantile(t + uniform * (1.0 - t)).min(cap)
    }

    /// Sample of `1+η` conditioned on `1+η ≥ floor`.
    pub fn sample_x_above(&self, uniform: f64, floor: f64) -> f64 {
        let t = self.tail_prob(floor);
        self.quantile(uniform * t).max(floor)
    }

    fn density_x(&self, z: f64) -> f64 {
        if z <= self.x_m {
            return 0.0;
        }
        let w = z / self.x_m;
        let a = self.alpha;
        match self.family {
            LawFamily::LogPareto => a * a * w.powf(-a - 1.0) * w.ln() / self.x_m,
            _ => a * w.powf(-a - 1.0) / self.x_m,
        }
    }

    /// `E[X^p 1{X < u}]` for `X = 1+η`, `p ∈ {0, 1, 2}`.
    pub fn x_moment_below(&self, p: u32, u: f64) -> f64 {
        if u <= self.x_m {
            return 0.0;
        }
        match self.family {
            LawFamily::LogPareto => {
                if p == 0 {
                    1.0 - self.tail_prob(u)
                } else {
                    integrate_log_scale(self.x_m, u, |z| z.powi(p as i32) * self.density_x(z))
                }
            }
            _ => {
                let (a, xm) = (self.alpha, self.x_m);
                let l = (u / xm).ln();
                match p {
                    0 => -(-a * l).exp_m1(),
                    // α x_m^α ∫_{x_m}^u z^{p-1-α} dz = α x_m^p (e^{(p-α)L} - 1)/(p-α)
                    _ => a * xm.powi(p as i32) * exprel_scaled(p as f64 - a, l),
                }
            }
        }
    }

    /// `E[X^p 1{lo ≤ X < hi}]`.
    pub fn x_moment_band(&self, p: u32, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        if hi.is_infinite() {
            // Only p = 0 is finite for every α; p ≥ 1 may diverge.
            return match p {
                0 => self.tail_prob(lo),
                _ if (p as f64) < self.alpha => self.x_moment_total(p) - self.x_moment_below(p, lo),
                _ => f64::INFINITY,
            };
        }
        self.x_moment_below(p, hi) - self.x_moment_below(p, lo)
    }

    fn x_moment_total(&self, p: u32) -> f64 {
        match (self.family, p) {
            (_, 0) => 1.0,
            (LawFamily::LogPareto, 1) => self.x_m * (self.alpha / (self.alpha - 1.0)).powi(2),
            (_, 1) => self.x_m * self.alpha / (self.alpha - 1.0),
            _ => f64::INFINITY,
        }
    }

    /// `E[η^p 1{1+η < u}]` for `p ∈ {1, 2}` with its leading asymptotic term.
    pub fn truncated_moment(&self, u: f64, p: u32) -> Result<TruncatedMoment> {
        if p != 1 && p != 2 {
            return Err(Error::invalid("p", "only the first and second truncated moments are defined"));
        }
        if u <= self.x_m {
            return Ok(TruncatedMoment {
                exact: 0.0,
                leading: 0.0,
                degenerate: true,
            });
        }
        let m0 = self.x_moment_below(0, u);
        let m1 = self.x_moment_below(1, u);
        let a = self.alpha;
        let phi = self.phi(u);
        let (exact, leading) = if p == 1 {
            let leading = if (a - 1.0).abs() < 1e-12 {
                phi * u.ln()
            } else {
                a / (1.0 - a) * u.powf(1.0 - a) * phi
            };
            (m1 - m0, leading)
        } else {
            let m2 = self.x_moment_below(2, u);
            (m2 - 2.0 * m1 + m0, a / (2.0 - a) * u.powf(2.0 - a) * phi)
        };
        Ok(TruncatedMoment {
            exact,
            leading,
            degenerate: false,
        })
    }

    /// `E[η | 1+η < u]`.
    pub fn conditional_mean_below(&self, u: f64) -> f64 {
        let m0 = self.x_moment_below(0, u);
        if m0 <= 0.0 {
            return self.x_m - 1.0;
        }
        self.x_moment_below(1, u) / m0 - 1.0
    }
}

/// Critical tail exponent `α_c(d) = min(1 + 2/d, 2)`.
pub fn alpha_c(d: usize) -> f64 {
    (1.0 + 2.0 / d as f64).min(2.0)
}

/// Continuum centering constant `κ_a`.
pub fn kappa_a(alpha: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::invalid("a", format!("cutoff must be positive, got {a}")));
    }
    Ok(if alpha < 1.0 {
        0.0
    } else if alpha == 1.0 {
        (1.0 / a).ln()
    } else {
        alpha / (alpha - 1.0) * a.powf(1.0 - alpha)
    })
}

/// Discrete centering `κ_N^{(a)} = -E[η | 1+η < aV_N]` for `α ∈ [1,2)`, zero otherwise.
pub fn kappa_n_a(law: &TailLaw, a: f64, v_n: f64) -> Result<f64> {
    if law.alpha() < 1.0 || a == 0.0 {
        return Ok(0.0);
    }
    let u = a * v_n;
    if u <= law.x_m() {
        return Err(Error::Degenerate(format!(
            "empty truncation band: a·V_N = {u} ≤ x_m = {}",
            law.x_m()
        )));
    }
    Ok(-law.conditional_mean_below(u))
}

/// Disorder scale `V_N`.
pub fn v_n(law: &TailLaw, n: usize, d: usize) -> Result<f64> {
    let df = d as f64;
    let expo = 1.0 + df / 2.0;
    let scale = 2.0 * df.powf(df / 2.0);
    if law.has_constant_phi() {
        return Ok(law.x_m() * scale.powf(-1.0 / law.alpha()) * (n as f64).powf(expo / law.alpha()));
    }
    let target = scale * (n as f64).powf(-expo);
    if target >= 1.0 {
        return Err(Error::invalid(
            "N",
            format!("system too small: exceedance level {target} ≥ 1 has no quantile"),
        ));
    }
    Ok(law.quantile(target))
}

/// The `α = 1` normalization `γ_N`.
pub fn gamma_n(law: &TailLaw, n: usize, d: usize) -> Result<f64> {
    if law.alpha() != 1.0 {
        return Err(Error::invalid("alpha", "gamma_N only defined at α=1"));
    }
    let vn = v_n(law, n, d)?;
    Ok(gamma_n_with_v(law, n, d, vn))
}

fn gamma_n_with_v(law: &TailLaw, n: usize, d: usize, vn: f64) -> f64 {
    let df = d as f64;
    let m = law.truncated_moment(vn, 1).map(|t| t.exact).unwrap_or(0.0);
    (n as f64).powf(1.0 + df / 2.0) / (2.0 * df.powf(df / 2.0)) / vn * m
}

/// All intermediate-disorder constants for one `(N, d, β̂, law)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingPlan {
    pub n: usize,
    pub d: usize,
    pub beta_hat: f64,
    pub v_n: f64,
    pub beta_n: f64,
    /// Zero unless `α = 1`.
    pub gamma_n: f64,
    pub law: TailLaw,
}

impl ScalingPlan {
    pub fn new(law: TailLaw, n: usize, d: usize, beta_hat: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("N", "system length must be at least 1"));
        }
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be at least 1"));
        }
        if !(beta_hat > 0.0) {
            return Err(Error::invalid("beta_hat", format!("must be positive, got {beta_hat}")));
        }
        let ac = alpha_c(d);
        if law.alpha() >= ac {
            return Err(Error::invalid(
                "alpha",
                format!(
                    "α = {} ≥ α_c(d={d}) = min(1+2/d, 2) = {ac}: the continuum partition function is degenerate",
                    law.alpha()
                ),
            ));
        }
        let vn = v_n(&law, n, d)?;
        let df = d as f64;
        let beta_n = 0.5 * beta_hat * (n as f64 / df).powf(df / 2.0) / vn;
        if !(beta_n > 0.0 && beta_n < 1.0) {
            return Err(Error::invalid(
                "beta_hat",
                format!("β_N = {beta_n} ∉ (0,1) for N = {n}, d = {d}; increase N or decrease β̂"),
            ));
        }
        let gamma_n = if law.alpha() == 1.0 {
            gamma_n_with_v(&law, n, d, vn)
        } else {
            0.0
        };
        Ok(ScalingPlan {
            n,
            d,
            beta_hat,
            v_n: vn,
            beta_n,
            gamma_n,
            law,
        })
    }

    pub fn kappa_a(&self, a: f64) -> Result<f64> {
        kappa_a(self.law.alpha(), a)
    }

    pub fn kappa_n(&self, a: f64) -> Result<f64> {
        kappa_n_a(&self.law, a, self.v_n)
    }

    /// `e^{-β̂ γ_N 1{α=1}}`.
    pub fn normalization(&self) -> f64 {
        (-self.beta_hat * self.gamma_n).exp()
    }

    /// `E[η 1{η ≤ V_N}] 1{α=1}`, the centering used in the rescaled field.
    pub fn xi_centering(&self) -> f64 {
        if self.law.alpha() != 1.0 {
            return 0.0;
        }
        self.law
            .truncated_moment(self.v_n + 1.0, 1)
            .map(|t| t.exact)
            .unwrap_or(0.0)
    }

    pub fn truncation(&self, a: f64, b: f64) -> Result<TruncationSpec> {
        TruncationSpec::new(&self.law, a, b, self.v_n)
    }
}

/// Cutoff environment `η^{[a,b)}`: values below `aV_N` replaced by `-κ_N^{(a)}`,
/// values at or above `bV_N` removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub a: f64,
    pub b: f64,
    pub kappa_n_a: f64,
}

impl TruncationSpec {
    /// No truncation: `η^{(0)} = η`.
    pub const NONE: TruncationSpec = TruncationSpec {
        a: 0.0,
        b: f64::INFINITY,
        kappa_n_a: 0.0,
    };

    pub fn new(law: &TailLaw, a: f64, b: f64, v_n: f64) -> Result<Self> {
        Self::check(a, b)?;
        Ok(TruncationSpec {
            a,
            b,
            kappa_n_a: kappa_n_a(law, a, v_n)?,
        })
    }

    /// A cutoff with an explicitly supplied replacement value.
    pub fn with_kappa(a: f64, b: f64, kappa_n_a: f64) -> Result<Self> {
        Self::check(a, b)?;
        Ok(TruncationSpec { a, b, kappa_n_a })
    }

    fn check(a: f64, b: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::invalid("a", format!("lower cutoff must lie in [0,1], got {a}")));
        }
        if !(b > 1.0) {
            return Err(Error::invalid("b", format!("upper cutoff must exceed 1, got {b}")));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.a == 0.0 && self.b.is_infinite()
    }

    /// Apply the cutoff to one value.
    #[inline]
    pub fn apply(&self, eta: f64, v_n: f64) -> f64 {
        let x = 1.0 + eta;
        if x < self.a * v_n {
            -self.kappa_n_a
        } else if x >= self.b * v_n {
            0.0
        } else {
            eta
        }
    }

    /// Band indicator `1{1+η ∈ [aV_N, bV_N)}`.
    #[inline]
    pub fn in_band(&self, eta: f64, v_n: f64) -> bool {
        let x = 1.0 + eta;
        x >= self.a * v_n && x < self.b * v_n
    }

    /// Mean and second moment of `η^{[a,b)}` under `law`.
    pub fn moments(&self, law: &TailLaw, v_n: f64) -> (f64, f64) {
        let lo = self.a * v_n;
        let hi = self.b * v_n;
        let p_low = if lo > 0.0 { law.x_moment_below(0, lo) } else { 0.0 };
        let lo_eff = lo.max(law.x_m());
        let m0 = law.x_moment_band(0, lo_eff, hi);
        let m1 = law.x_moment_band(1, lo_eff, hi);
        let m2 = law.x_moment_band(2, lo_eff, hi);
        let k = self.kappa_n_a;
        let e1 = -k * p_low + (m1 - m0);
        let e2 = k * k * p_low + (m2 - 2.0 * m1 + m0);
        (e1, e2)
    }
}

/// The `[a, b)` cutoff at scale `V_N`. An empty lower band (`aV_N ≤ x_m`,
/// so no value can fall below it) gets replacement value 0 instead of an
/// error.
pub fn cutoff_spec(law: &TailLaw, v_n: f64, a: f64, b: f64) -> Result<TruncationSpec> {
    if a == 0.0 || a * v_n <= law.x_m() {
        return TruncationSpec::with_kappa(a, b, 0.0);
    }
    TruncationSpec::new(law, a, b, v_n)
}

/// Apply a cutoff specification to a value (free-function form).
pub fn truncate_eta(eta: f64, spec: &TruncationSpec, v_n: f64) -> f64 {
    spec.apply(eta, v_n)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn inverse_transform_consistency(u in 1e-12f64..1.0, alpha in 0.05f64..1.95) {
            let laws = [
                TailLaw::uncentered(LawFamily::Pareto, alpha).unwrap(),
                TailLaw::uncentered(LawFamily::LogPareto, alpha).unwrap(),
            ];
            for law in laws {
                let x = law.quantile(u);
                prop_assert!((law.tail_prob(x) - u).abs() <= 1e-12, "{:?} u={} got {}", law, u, law.tail_prob(x));
            }
        }

        #[test]
        fn tail_is_monotone_and_slowly_varying(z in 1.0f64..1e6, alpha in 0.1f64..1.9) {
            let law = TailLaw::uncentered(LawFamily::LogPareto, alpha).unwrap();
            prop_assert!(law.tail_prob(z * 1.5) <= law.tail_prob(z));
            // φ(λz)/φ(z) → 1: bounded drift for λ=2
            let r = law.phi(2.0 * z) / law.phi(z);
            prop_assert!(r >= 1.0 && r <= 1.0 + 2f64.ln() * alpha);
        }
    }
}
