use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::EnvSlab;
use crate::noise::TestFunction;
use crate::rng::RngKey;
use crate::stats::{ls_fit, mean};
use crate::tail::{cutoff_spec, v_n, ScalingPlan, TailLaw, TruncationSpec};

/// Visit the parity sites `(n, x)`, `1 ≤ n ≤ N`, where `ψ(n/N, x/√(N/d)) ≠ 0`.
pub(crate) fn for_each_psi_site<F: FnMut(usize, &[i64], f64)>(psi: &TestFunction, n: usize, d: usize, mut f: F) {
    if psi.is_zero() {
        return;
    }
    let s = (n as f64 / d as f64).sqrt();
    let t_lo = (((psi.time_center - psi.time_radius) * n as f64).floor() as i64).max(1) as usize;
    let t_hi = (((psi.time_center + psi.time_radius) * n as f64).ceil() as usize).min(n);
    let (lo, hi) = psi.spatial_support();
    let lo: Vec<i64> = lo.iter().map(|v| (v * s).floor() as i64).collect();
    let hi: Vec<i64> = hi.iter().map(|v| (v * s).ceil() as i64).collect();
    let mut x = lo.clone();
    let mut y = vec![0.0; d];
    for m in t_lo..=t_hi {
        let t = m as f64 / n as f64;
        x.clone_from(&lo);
        loop {
            let l1: i64 = x.iter().sum();
            if (l1 + m as i64).rem_euclid(2) == 0 {
                for (yk, xk) in y.iter_mut().zip(&x) {
                    *yk = *xk as f64 / s;
                }
                let v = psi.eval(t, &y);
                if v != 0.0 {
                    f(m, &x, v);
                }
            }
            let mut k = 0;
            while k < d {
                x[k] += 1;
                if x[k] <= hi[k] {
                    break;
                }
                x[k] = lo[k];
                k += 1;
            }
            if k == d {
                break;
            }
        }
    }
}

/// `Σ_{(n,x)∈H_d} ψ(n/N, x/√(N/d))²`.
pub fn psi_riemann_sq(psi: &TestFunction, n: usize, d: usize) -> f64 {
    let mut s = 0.0;
    for_each_psi_site(psi, n, d, |_, _, v| s += v * v);
    s
}

/// Half-width of a slab window containing the support of `ψ` at scale `N`.
pub fn psi_half_width(psi: &TestFunction, n: usize, d: usize) -> usize {
    let s = (n as f64 / d as f64).sqrt();
    let (lo, hi) = psi.spatial_support();
    let reach = lo.iter().chain(&hi).map(|v| v.abs()).fold(0.0, f64::max);
    ((reach * s).ceil() as usize + 1).min(n)
}

fn check_support(env: &EnvSlab, psi: &TestFunction) -> Result<()> {
    if psi.d() != env.d() {
        return Err(Error::invalid("psi", format!("dimension {} does not match the slab's {}", psi.d(), env.d())));
    }
    let mut bad = None;
    for_each_psi_site(psi, env.n(), env.d(), |m, x, _| {
        if bad.is_none() && !env.contains(m, x) {
            bad = Some((m, x.to_vec()));
        }
    });
    match bad {
        Some((m, x)) => Err(Error::invalid(
            "psi",
            format!("support reaches site ({m}, {x:?}) outside the slab's light cone or window"),
        )),
        None => Ok(()),
    }
}

pub(crate) fn lower_cutoff(law: &TailLaw, v_n: f64, a: f64) -> Result<TruncationSpec> {
    cutoff_spec(law, v_n, a, f64::INFINITY)
}

/// `⟨ξ^{(a)}_{N,η}, ψ⟩ = V_N^{-1} Σ (η^{(a)} - c_N) ψ(n/N, x/√(N/d))`, with
/// `c_N = E[η 1{η ≤ V_N}]` at `α = 1` and zero otherwise; `a = 0` gives the
/// untruncated field.
pub fn xi_discrete_pair(env: &EnvSlab, psi: &TestFunction, plan: &ScalingPlan, a: f64) -> Result<f64> {
    check_support(env, psi)?;
    let spec = lower_cutoff(&plan.law, plan.v_n, a)?;
    let c = plan.xi_centering();
    let mut s = 0.0;
    for_each_psi_site(psi, env.n(), env.d(), |m, x, v| {
        s += (spec.apply(env.eta(m, x), plan.v_n) - c) * v;
    });
    Ok(s / plan.v_n)
}

#[derive(Debug, Clone, Serialize)]
pub struct XiPoint {
    pub a: f64,
    /// Sample variance of `⟨ξ_N - ξ_N^{(a)}, ψ⟩` over replicas.
    pub variance: f64,
    pub se: f64,
    pub cap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct XiSlope {
    pub slope: f64,
    pub intercept: f64,
    pub points: Vec<XiPoint>,
    pub all_under_cap: bool,
}

/// Least-squares slope of `log Var⟨ξ_N - ξ_N^{(a)}, ψ⟩` against `log a`
/// (theory: `2 - α`), with each variance compared to the cap
/// `V_N^{-2} · (α/(2-α)) u^{2-α} φ(u) · Σψ²` at `u = aV_N`. For pure power
/// tails this is `ε(a) N^{-(d/2+1)} Σψ²` with `ε(a) = 2d^{d/2} α a^{2-α}/(2-α)`.
pub fn xi_truncation_slope(
    law: TailLaw,
    n: usize,
    d: usize,
    psi: &TestFunction,
    a_grid: &[f64],
    replicas: usize,
    key: RngKey,
) -> Result<XiSlope> {
    if a_grid.len() < 3 {
        return Err(Error::invalid("a_grid", "a slope fit needs at least 3 cutoff levels"));
    }
    if a_grid.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
        return Err(Error::invalid("a_grid", "cutoffs must lie in (0, 1]"));
    }
    if replicas < 2 {
        return Err(Error::invalid("replicas", "need at least 2"));
    }
    let vn = v_n(&law, n, d)?;
    let specs: Vec<TruncationSpec> = a_grid.iter().map(|&a| lower_cutoff(&law, vn, a)).collect::<Result<_>>()?;
    let hw = psi_half_width(psi, n, d);
    let sq = psi_riemann_sq(psi, n, d);
    let diffs: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let env = EnvSlab::windowed(law, n, d, hw, key.derive(i))?;
            check_support(&env, psi)?;
            let mut acc = vec![0.0; specs.len()];
            for_each_psi_site(psi, n, d, |m, x, v| {
                let eta = env.eta(m, x);
                for (s, spec) in acc.iter_mut().zip(&specs) {
                    *s += (eta - spec.apply(eta, vn)) * v;
                }
            });
            Ok(acc.into_iter().map(|s| s / vn).collect())
        })
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(a_grid.len());
    for (k, &a) in a_grid.iter().enumerate() {
        let col: Vec<f64> = diffs.iter().map(|r| r[k]).collect();
        let m = mean(&col);
        let sq_dev: Vec<f64> = col.iter().map(|v| (v - m) * (v - m)).collect();
        let variance = sq_dev.iter().sum::<f64>() / (col.len() - 1) as f64;
        let se = crate::stats::variance(&sq_dev).sqrt() / (col.len() as f64).sqrt();
        let leading = law.truncated_moment(a * vn, 2)?.leading;
        points.push(XiPoint {
            a,
            variance,
            se,
            cap: leading / (vn * vn) * sq,
        });
    }
    if points.iter().any(|p| !(p.variance > 0.0)) {
        return Err(Error::Degenerate("a variance vanished (ψ = 0 or an empty band); the slope is undefined".into()));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.a.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.variance.ln()).collect();
    let (slope, intercept) = ls_fit(&lx, &ly);
    let all_under_cap = points.iter().all(|p| p.variance <= p.cap);
    Ok(XiSlope {
        slope,
        intercept,
        points,
        all_under_cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psi() -> TestFunction {
        TestFunction::new(1.0, 0.5, 0.4, vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn zero_environment_and_single_site() {
        let law = TailLaw::centered_pareto(1.5).unwrap();
        let plan = ScalingPlan::new(law, 64, 1, 1.0).unwrap();
        let zero = EnvSlab::from_fn(law, 64, 1, 64, |_, _| 0.0).unwrap();
        assert_eq!(xi_discrete_pair(&zero, &psi(), &plan, 0.0).unwrap(), 0.0);
        let one = EnvSlab::from_fn(law, 64, 1, 64, |n, x| if n == 30 && x[0] == 2 { 7.0 } else { 0.0 }).unwrap();
        let v = xi_discrete_pair(&one, &psi(), &plan, 0.0).unwrap();
        let expect = 7.0 * psi().eval(30.0 / 64.0, &[2.0 / 8.0]) / plan.v_n;
        assert!((v - expect).abs() < 1e-15);
    }

    #[test]
    fn support_overflow_rejected() {
        let law = TailLaw::centered_pareto(1.5).unwrap();
        let plan = ScalingPlan::new(law, 64, 1, 1.0).unwrap();
        let env = EnvSlab::windowed(law, 64, 1, 4, RngKey::new(1)).unwrap();
        assert!(xi_discrete_pair(&env, &psi(), &plan, 0.0).is_err());
    }

    #[test]
    fn grid_and_zero_psi_flagged() {
        let law = TailLaw::centered_pareto(1.5).unwrap();
        assert!(xi_truncation_slope(law, 64, 1, &psi(), &[0.1, 0.2], 10, RngKey::new(0)).is_err());
        let r = xi_truncation_slope(law, 64, 1, &TestFunction::zero(1), &[0.1, 0.2, 0.4], 10, RngKey::new(0));
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn riemann_sum_scales_like_the_integral() {
        // Σψ² ≈ (N · √(N/d) / 2) ∫ψ² over the parity lattice
        let p = psi();
        let n = 4096;
        let s = psi_riemann_sq(&p, n, 1);
        let sq = TestFunction { amplitude: 1.0, ..p.clone() };
        let rule = crate::quad::CompositeLegendre::new(16);
        let int = rule.integrate(0.1, 0.9, 40, |t| rule.integrate(-1.0, 1.0, 40, |x| sq.eval(t, &[x]).powi(2)));
        let approx = int * n as f64 * (n as f64).sqrt() / 2.0;
        assert!((s / approx - 1.0).abs() < 1e-2, "{s} vs {approx}");
    }
}
