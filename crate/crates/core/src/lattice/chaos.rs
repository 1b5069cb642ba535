use super::dp::{dp_totals, Forward};
use super::functional::PathFunctional;
use super::kernel::Kernel;
use super::slab::{Disorder, EnvSlab};
use crate::error::{Error, Result};
use crate::tail::ScalingPlan;

/// A site of the exceedance set `Ω^{[a,b)}` with its value.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSite {
    pub n: usize,
    pub x: Vec<i64>,
    pub eta: f64,
}

/// Sites with `1 + η ∈ [aV_N, bV_N)`, sorted by time.
pub fn band_sites(env: &EnvSlab, disorder: &Disorder) -> Vec<BandSite> {
    let w = env.weights(disorder);
    let mut out = Vec::new();
    env.for_each_site(|n, x| {
        if w.in_band(n, x) {
            out.push(BandSite {
                n,
                x: x.to_vec(),
                eta: env.eta(n, x),
            });
        }
    });
    out
}

/// `Z̄^{η,[a,b)}(f)`: the sum over increasing chains of band sites,
/// `Σ β^k p(n, x, f) Π η`, evaluated by the time-ordered chain recursion.
///
/// For `f = 1` the chain transitions are free walk kernels. Other factoring
/// functionals use kernels computed on the slab window with the functional's
/// factors inserted, which keeps the identity with the product form exact.
pub fn chaos_expansion(env: &EnvSlab, disorder: &Disorder, f: &PathFunctional) -> Result<f64> {
    if disorder.trunc.a <= 0.0 {
        return Err(Error::invalid("a", "chaos expansion needs a > 0 (otherwise Ω is the whole lattice)"));
    }
    f.check(env.d())?;
    let sites = band_sites(env, disorder);
    let beta = disorder.beta;
    if f.is_one() {
        let kernel = Kernel::new(env.d(), env.n());
        let mut h = vec![0.0; sites.len()];
        let mut dx = vec![0i64; env.d()];
        for j in 0..sites.len() {
            let sj = &sites[j];
            let mut acc = kernel.p(sj.n, &sj.x);
            for i in 0..j {
                let si = &sites[i];
                if si.n >= sj.n {
                    continue;
                }
                for (k, v) in dx.iter_mut().enumerate() {
                    *v = sj.x[k] - si.x[k];
                }
                acc += h[i] * kernel.p(sj.n - si.n, &dx);
            }
            h[j] = beta * sj.eta * acc;
        }
        return Ok(1.0 + h.iter().sum::<f64>());
    }
    let (n, d) = (env.n(), env.d());
    let terms = f.factor(n, d)?;
    let scale = (d as f64 / n as f64).sqrt();
    let unit = |_: usize, _: &[i64]| 1.0;
    // K(i → j) for every later chain point and the tail mass from i, per term
    let run = |n0: usize, x0: &[i64], start_factors: bool| -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut fw = Forward::new(d, env.half_width(), scale, n0, x0, &terms, 1, start_factors)?;
        let mut probe = vec![vec![0.0; sites.len()]; terms.len()];
        let mut next = sites.partition_point(|s| s.n <= n0);
        while fw.time() < n {
            fw.step(&[&unit]);
            while next < sites.len() && sites[next].n == fw.time() {
                for (t, row) in probe.iter_mut().enumerate() {
                    row[next] = fw.value(t, 0, &sites[next].x);
                }
                next += 1;
            }
        }
        let tails = (0..terms.len()).map(|t| fw.total(t, 0)).collect();
        Ok((probe, tails))
    };
    let origin = vec![0i64; d];
    let (k0, free) = run(0, &origin, true)?;
    let mut from: Vec<(Vec<Vec<f64>>, Vec<f64>)> = Vec::with_capacity(sites.len());
    for s in &sites {
        from.push(run(s.n, &s.x, false)?);
    }
    let mut total = 0.0;
    for (t, term) in terms.iter().enumerate() {
        let mut h = vec![0.0; sites.len()];
        let mut z = free[t];
        for j in 0..sites.len() {
            let mut acc = k0[t][j];
            for i in 0..j {
                acc += h[i] * from[i].0[t][j];
            }
            h[j] = beta * sites[j].eta * acc;
            z += h[j] * from[j].1[t];
        }
        total += term.coef * z;
    }
    Ok(total)
}

/// Ratio `e^{-β̂γ_N 1{α=1}} Z^{η,[a,b)}(f) / Z̄^{η,[a,b)}(f)` and its limit `e^{-β̂κ_a}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioCheck {
    pub ratio: f64,
    pub target: f64,
    pub z: f64,
    pub z_bar: f64,
}

/// Both partition functions are computed in one transfer-matrix sweep; `Z̄`
/// uses its product form (the environment `η 1_Ω`).
pub fn ratio_check(env: &EnvSlab, plan: &ScalingPlan, a: f64, b: f64, f: &PathFunctional) -> Result<RatioCheck> {
    if !(a > 0.0) {
        return Err(Error::invalid("a", "ratio check needs a > 0"));
    }
    f.check(env.d())?;
    let disorder = Disorder::from_plan(plan, a, b)?;
    let terms = f.factor(env.n(), env.d())?;
    let w = env.weights(&disorder);
    let wz = |n: usize, x: &[i64]| w.at(n, x);
    let wbar = |n: usize, x: &[i64]| w.band_weight(n, x);
    let v = dp_totals(env.n(), env.d(), env.half_width(), &terms, &[&wz, &wbar])?;
    let (z, z_bar) = (v[0], v[1]);
    if !(z_bar > 0.0) {
        return Err(Error::Degenerate(format!("Z̄ = {z_bar} for the given slab and functional")));
    }
    Ok(RatioCheck {
        ratio: plan.normalization() * z / z_bar,
        target: (-plan.beta_hat * plan.kappa_a(a)?).exp(),
        z,
        z_bar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{partition_bruteforce, partition_dp, Marginal};
    use crate::rng::RngKey;
    use crate::tail::{TailLaw, TruncationSpec};

    fn law() -> TailLaw {
        TailLaw::centered_pareto(1.5).unwrap()
    }

    #[test]
    fn empty_band_gives_mean_of_f() {
        let env = EnvSlab::from_fn(law(), 6, 1, 6, |_, _| 0.0).unwrap();
        let dis = Disorder::new(0.5, 100.0, TruncationSpec::with_kappa(0.5, 2.0, 0.0).unwrap()).unwrap();
        assert_eq!(chaos_expansion(&env, &dis, &PathFunctional::ConstantOne).unwrap(), 1.0);
    }

    #[test]
    fn single_site() {
        let env = EnvSlab::from_fn(law(), 6, 1, 6, |n, x| if n == 4 && x[0] == 2 { 30.0 } else { 0.0 }).unwrap();
        let dis = Disorder::new(0.2, 10.0, TruncationSpec::with_kappa(0.5, f64::INFINITY, 0.0).unwrap()).unwrap();
        let v = chaos_expansion(&env, &dis, &PathFunctional::ConstantOne).unwrap();
        assert!((v - (1.0 + 0.2 * 0.25 * 30.0)).abs() < 1e-14);
        assert!(chaos_expansion(&env, &Disorder::plain(0.2).unwrap(), &PathFunctional::ConstantOne).is_err());
    }

    #[test]
    fn expansion_equals_product_form() {
        let fs = [
            PathFunctional::ConstantOne,
            PathFunctional::support_cutoff(0.4),
            PathFunctional::product(vec![0.5], vec![Marginal::Gaussian { center: vec![0.3], width: 0.6 }]),
        ];
        for seed in 0..6 {
            let env = EnvSlab::sample(law(), 10, 1, RngKey::new(seed)).unwrap();
            let dis = Disorder::new(0.4, 3.0, TruncationSpec::with_kappa(0.5, 2.7, 0.1).unwrap()).unwrap();
            let omega = env
                .map(|_, _, eta| if dis.trunc.in_band(eta, dis.v_n) { eta } else { 0.0 })
                .unwrap();
            for f in &fs {
                let chain = chaos_expansion(&env, &dis, f).unwrap();
                let prod = partition_bruteforce(&omega, &Disorder::plain(0.4).unwrap(), f).unwrap().value;
                assert!((chain - prod).abs() < 1e-12 * prod.abs(), "{f:?}: {chain} vs {prod}");
            }
        }
    }

    #[test]
    fn ratio_is_one_below_alpha_one() {
        let law = TailLaw::pareto(0.7).unwrap();
        let plan = ScalingPlan::new(law, 64, 1, 1.0).unwrap();
        let env = EnvSlab::diffusive(law, 64, 1, 6.0, RngKey::new(2)).unwrap();
        let r = ratio_check(&env, &plan, 0.3, f64::INFINITY, &PathFunctional::support_cutoff(2.0)).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-12 && r.target == 1.0);
        let z = partition_dp(&env, &Disorder::from_plan(&plan, 0.3, f64::INFINITY).unwrap(), &PathFunctional::support_cutoff(2.0)).unwrap();
        assert!((z.value - r.z).abs() < 1e-12 * z.value);
    }
}
