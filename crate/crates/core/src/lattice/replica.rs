use rand::Rng;
use rayon::prelude::*;

use super::dp::partition_dp;
use super::functional::PathFunctional;
use super::slab::{Disorder, EnvSlab};
use crate::error::{Error, Result};
use crate::rng::RngKey;
use crate::stats::mean_se;
use crate::tail::ScalingPlan;

/// Both sides of the replica identity `E[Z²]/E[Z]² = E⊗²[(1+r)^L]` for the
/// band-truncated partition function, with Monte-Carlo standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaMoment {
    /// `β²Var(η^{[a,b)}) / E[1+βη^{[a,b)}]²`.
    pub r: f64,
    pub direct: f64,
    pub direct_se: f64,
    pub formula: f64,
    pub formula_se: f64,
}

/// `(E[1+βη^{[a,b)}], r)` computed from the closed-form truncated moments.
pub fn overlap_rate(plan: &ScalingPlan, a: f64, b: f64) -> Result<(f64, f64)> {
    let dis = Disorder::from_plan(plan, a, b)?;
    let (e1, e2) = dis.trunc.moments(&plan.law, plan.v_n);
    let m = 1.0 + plan.beta_n * e1;
    let var = (e2 - e1 * e1).max(0.0);
    Ok((m, plan.beta_n * plan.beta_n * var / (m * m)))
}

/// Direct side: mean of `(Z/E Z)²` over independent environments. Formula
/// side: mean of `(1+r)^{L_N}` over pairs of independent walks, where `L_N`
/// counts the times `1..=N` at which the two walks coincide.
///
/// Environments cover the full light cone up to `N = 512` and the diffusive
/// window `8√(N/d)` beyond.
pub fn replica_second_moment(
    plan: &ScalingPlan,
    a: f64,
    b: f64,
    replicas: usize,
    key: RngKey,
) -> Result<ReplicaMoment> {
    if replicas < 2 {
        return Err(Error::invalid("replicas", "need at least 2"));
    }
    if !b.is_finite() {
        return Err(Error::invalid("b", "the second moment needs a finite upper cutoff"));
    }
    let (n, d) = (plan.n, plan.d);
    let (m, r) = overlap_rate(plan, a, b)?;
    let dis = Disorder::from_plan(plan, a, b)?;
    let norm = m.powi(n as i32);
    let env_key = key.derive_str("environments");
    let direct: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let k = env_key.derive(i);
            let env = if n <= 512 {
                EnvSlab::sample(plan.law, n, d, k)?
            } else {
                EnvSlab::diffusive(plan.law, n, d, 8.0, k)?
            };
            let z = partition_dp(&env, &dis, &PathFunctional::ConstantOne)?.value / norm;
            Ok(z * z)
        })
        .collect::<Result<_>>()?;
    let walk_key = key.derive_str("walk pairs");
    let formula: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| (1.0 + r).powi(overlap_count(n, d, walk_key.derive(i)) as i32))
        .collect();
    let (direct, direct_se) = mean_se(&direct);
    let (formula, formula_se) = mean_se(&formula);
    Ok(ReplicaMoment {
        r,
        direct,
        direct_se,
        formula,
        formula_se,
    })
}

fn overlap_count(n: usize, d: usize, key: RngKey) -> usize {
    let mut rng = key.stream();
    let mut diff = vec![0i64; d];
    let mut hits = 0;
    for _ in 0..n {
        for _ in 0..2 {
            let s = rng.random_range(0..2 * d);
            diff[s / 2] += if s % 2 == 0 { 1 } else { -1 };
        }
        if diff.iter().all(|&c| c == 0) {
            hits += 1;
        }
    }
    hits
}

/// `E⊗²[(1+r)^{L_N}]` computed exactly by propagating the law of the
/// difference of two independent walks, with weight `1+r` at the origin.
pub fn overlap_moment_exact(r: f64, n: usize, d: usize) -> Result<f64> {
    let w = n as i64;
    let side = (2 * w + 1) as usize;
    let cells = side
        .checked_pow(d as u32)
        .filter(|&c| c <= 1 << 26)
        .ok_or_else(|| Error::Resource(format!("difference walk box {side}^{d} too large")))?;
    let strides: Vec<usize> = (0..d).map(|i| side.pow(i as u32)).collect();
    let origin: usize = strides.iter().map(|s| w as usize * s).sum();
    // one step of the difference walk is two walk steps; a coordinate beyond
    // ±n cannot come back to 0 by time n, so that mass is set aside with its
    // weight frozen
    let mut done = 0.0;
    let mut cur = vec![0.0; cells];
    cur[origin] = 1.0;
    let mut tmp = vec![0.0; cells];
    let p = 1.0 / (2 * d) as f64;
    for _ in 0..n {
        for _ in 0..2 {
            tmp.iter_mut().for_each(|v| *v = 0.0);
            for (idx, &v) in cur.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let mut rest = idx;
                for &st in &strides {
                    let c = (rest % side) as i64;
                    rest /= side;
                    if c > 0 {
                        tmp[idx - st] += p * v;
                    } else {
                        done += p * v;
                    }
                    if c + 1 < side as i64 {
                        tmp[idx + st] += p * v;
                    } else {
                        done += p * v;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut tmp);
        }
        cur[origin] *= 1.0 + r;
    }
    Ok(done + cur.iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tail::TailLaw;

    #[test]
    fn one_step_formula() {
        for r in [0.0, 0.3, 2.0] {
            assert!((overlap_moment_exact(r, 1, 1).unwrap() - (1.0 + r / 2.0)).abs() < 1e-15);
        }
        // d = 2: P(S¹₁ = S²₁) = 1/4
        assert!((overlap_moment_exact(0.8, 1, 2).unwrap() - 1.2).abs() < 1e-15);
        assert!((overlap_moment_exact(0.0, 30, 2).unwrap() - 1.0).abs() < 1e-12);
        // N = 2, d = 1: L counts hits at times 1 and 2 of the lazy ±2 walk
        let r: f64 = 0.5;
        let p1 = 0.5;
        let both = 0.5 * 0.5;
        let second_only = 0.5 * 0.25;
        let exact = both * (1.0 + r).powi(2) + (p1 - both + second_only) * (1.0 + r) + (1.0 - p1 - second_only);
        assert!((overlap_moment_exact(r, 2, 1).unwrap() - exact).abs() < 1e-15);
    }

    #[test]
    fn mc_formula_matches_exact() {
        let plan = ScalingPlan::new(TailLaw::centered_pareto(1.5).unwrap(), 16, 1, 1.0).unwrap();
        let rm = replica_second_moment(&plan, 0.1, 1.5, 20_000, RngKey::new(4)).unwrap();
        let exact = overlap_moment_exact(rm.r, 16, 1).unwrap();
        assert!((rm.formula - exact).abs() < 4.0 * rm.formula_se, "{rm:?} {exact}");
        assert!((rm.direct - exact).abs() < 4.0 * rm.direct_se, "{rm:?} {exact}");
    }
}
