use rayon::prelude::*;
use serde::Serialize;

use super::distance::{empirical_distance, DistanceReport};
use super::xi::{lower_cutoff, psi_half_width, xi_discrete_pair};
use crate::error::{Error, Result};
use crate::lattice::{partition_dp, partition_dp_many, Disorder, EnvSlab, PathFunctional};
use crate::noise::{continuum_partition, continuum_partition_mc, pair_noise, sample_cloud, TestFunction};
use crate::rng::RngKey;
use crate::stats::{mean_se, Statistic};
use crate::tail::{alpha_c, ScalingPlan, TailLaw};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "side", rename_all = "snake_case")]
pub enum Side {
    Discrete { n: usize },
    Continuum { a: f64 },
}

/// One joint draw of (field pairing, normalized partition function) from a
/// single environment or cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalSample {
    pub pairing: f64,
    pub partition: f64,
    pub side: Side,
    pub replica: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceOptions {
    /// Half-width `L` of the rescaled window, shared by slabs and clouds.
    pub half_width: f64,
    /// Path draws per cloud when `f` has no closed-form continuum value.
    pub path_samples: usize,
    pub statistics: Vec<Statistic>,
    pub bootstrap: bool,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            half_width: 6.0,
            path_samples: 256,
            statistics: vec![Statistic::Ks, Statistic::Wasserstein1],
            bootstrap: true,
        }
    }
}

fn refuse_degenerate(law: &TailLaw, d: usize) -> Result<()> {
    let ac = alpha_c(d);
    if law.alpha() >= ac {
        return Err(Error::invalid(
            "alpha",
            format!(
                "α = {} ≥ α_c({d}) = {ac}: small atoms accumulate and the limiting partition function is degenerate",
                law.alpha()
            ),
        ));
    }
    Ok(())
}

/// Joint discrete draws `(⟨ξ^{(a)}_{N,η}, ψ⟩, e^{-β̂γ_N 1{α=1}} Z^{η,a}_{N,β_N}(f))`.
#[allow(clippy::too_many_arguments)]
pub fn discrete_marginals(
    law: TailLaw,
    beta_hat: f64,
    psi: &TestFunction,
    f: &PathFunctional,
    n: usize,
    d: usize,
    a: f64,
    half_width: f64,
    replicas: usize,
    key: RngKey,
) -> Result<Vec<MarginalSample>> {
    let plan = ScalingPlan::new(law, n, d, beta_hat)?;
    let dis = Disorder::new(plan.beta_n, plan.v_n, lower_cutoff(&law, plan.v_n, a)?)?;
    let needed = psi_half_width(psi, n, d);
    (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let k = key.derive(i);
            let env = EnvSlab::diffusive(law, n, d, half_width, k)?;
            if !psi.is_zero() && needed > env.half_width() {
                return Err(Error::invalid("L", "window too small for the support of psi"));
            }
            let pairing = xi_discrete_pair(&env, psi, &plan, a)?;
            let z = partition_dp(&env, &dis, f)?.normalize(plan.normalization())?;
            Ok(MarginalSample {
                pairing,
                partition: z.value,
                side: Side::Discrete { n },
                replica: i,
                seed: key.seed(),
            })
        })
        .collect()
}

/// Joint continuum draws `(⟨ξ^{(a)}_ω, ψ⟩, 𝒵^{ω,a}_β̂(f))`.
#[allow(clippy::too_many_arguments)]
pub fn continuum_marginals(
    law: TailLaw,
    beta_hat: f64,
    psi: &TestFunction,
    f: &PathFunctional,
    d: usize,
    a: f64,
    opts: &ConvergenceOptions,
    replicas: usize,
    key: RngKey,
) -> Result<Vec<MarginalSample>> {
    refuse_degenerate(&law, d)?;
    (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let k = key.derive(i);
            let cloud = sample_cloud(law.alpha(), a, opts.half_width, d, k)?;
            let pairing = pair_noise(&cloud, psi, a)?;
            let z = match continuum_partition(&cloud, beta_hat, f) {
                Err(Error::Unsupported(_)) => continuum_partition_mc(&cloud, beta_hat, f, opts.path_samples, k.derive_str("paths"))?,
                other => other?,
            };
            Ok(MarginalSample {
                pairing,
                partition: z.value,
                side: Side::Continuum { a },
                replica: i,
                seed: key.seed(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceOutcome {
    pub reports: Vec<DistanceReport>,
    pub discrete: Vec<Vec<MarginalSample>>,
    pub continuum: Vec<MarginalSample>,
}

/// For each `N`, distances between the discrete and continuum laws of the
/// partition function and of the field pairing. Both sides use cutoff `a`.
#[allow(clippy::too_many_arguments)]
pub fn marginal_convergence_experiment(
    law: TailLaw,
    beta_hat: f64,
    psi: &TestFunction,
    f: &PathFunctional,
    d: usize,
    n_grid: &[usize],
    a: f64,
    replicas: usize,
    key: RngKey,
    opts: &ConvergenceOptions,
) -> Result<ConvergenceOutcome> {
    refuse_degenerate(&law, d)?;
    if n_grid.is_empty() {
        return Err(Error::invalid("N_grid", "must not be empty"));
    }
    if !(a > 0.0) {
        return Err(Error::invalid("a", "the continuum side needs a positive cutoff"));
    }
    let continuum = continuum_marginals(law, beta_hat, psi, f, d, a, opts, replicas, key.derive_str("continuum"))?;
    let (c_pair, c_part): (Vec<f64>, Vec<f64>) = continuum.iter().map(|s| (s.pairing, s.partition)).unzip();
    let mut reports = Vec::new();
    let mut discrete = Vec::new();
    for &n in n_grid {
        let dk = key.derive_str("discrete").derive(n as u64);
        let samples = discrete_marginals(law, beta_hat, psi, f, n, d, a, opts.half_width, replicas, dk)?;
        let (d_pair, d_part): (Vec<f64>, Vec<f64>) = samples.iter().map(|s| (s.pairing, s.partition)).unzip();
        for (component, ds, cs) in [("partition", &d_part, &c_part), ("pairing", &d_pair, &c_pair)] {
            for &stat in &opts.statistics {
                let boot = opts
                    .bootstrap
                    .then(|| dk.derive_str(component).derive_str(stat.name()));
                let mut r = empirical_distance(ds, cs, stat, boot)?;
                r.component = component.into();
                r.grid = n as f64;
                reports.push(r);
            }
        }
        discrete.push(samples);
    }
    Ok(ConvergenceOutcome {
        reports,
        discrete,
        continuum,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub a: f64,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSup {
    pub a: f64,
    pub value: f64,
    pub se: f64,
    /// The `N` attaining the supremum.
    pub n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationCurve {
    pub points: Vec<CurvePoint>,
    pub sup: Vec<CurveSup>,
}

/// `E[(e^{-β̂γ_N 1{α=1}} |Z^{η,a} - Z^{η,0}|) ∧ 1]` for `f = 1` on every
/// `(N, a)`, all cutoffs evaluated on the same slab, and the supremum over
/// `N` for each `a`.
#[allow(clippy::too_many_arguments)]
pub fn truncation_error_curve(
    law: TailLaw,
    beta_hat: f64,
    d: usize,
    n_grid: &[usize],
    a_grid: &[f64],
    replicas: usize,
    half_width: f64,
    key: RngKey,
) -> Result<TruncationCurve> {
    if n_grid.is_empty() || a_grid.is_empty() {
        return Err(Error::invalid("grid", "N and a grids must be non-empty"));
    }
    if replicas < 2 {
        return Err(Error::invalid("replicas", "need at least 2"));
    }
    let mut points = Vec::new();
    for &n in n_grid {
        let plan = ScalingPlan::new(law, n, d, beta_hat)?;
        let mut disorders = vec![Disorder::from_plan(&plan, 0.0, f64::INFINITY)?];
        for &a in a_grid {
            disorders.push(Disorder::new(plan.beta_n, plan.v_n, lower_cutoff(&law, plan.v_n, a)?)?);
        }
        let nk = key.derive(n as u64);
        let norm = plan.normalization();
        let rows: Vec<Vec<f64>> = (0..replicas as u64)
            .into_par_iter()
            .map(|i| -> Result<Vec<f64>> {
                let env = EnvSlab::diffusive(law, n, d, half_width, nk.derive(i))?;
                let z = partition_dp_many(&env, &disorders, &PathFunctional::ConstantOne)?;
                Ok(z[1..].iter().map(|za| (norm * (za - z[0]).abs()).min(1.0)).collect())
            })
            .collect::<Result<_>>()?;
        for (k, &a) in a_grid.iter().enumerate() {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let (mean, se) = mean_se(&col);
            points.push(CurvePoint { n, a, mean, se });
        }
    }
    let sup = a_grid
        .iter()
        .map(|&a| {
            let best = points
                .iter()
                .filter(|p| p.a == a)
                .max_by(|p, q| p.mean.total_cmp(&q.mean))
                .copied()
                .expect("non-empty N grid");
            CurveSup {
                a,
                value: best.mean,
                se: best.se,
                n: best.n,
            }
        })
        .collect();
    Ok(TruncationCurve { points, sup })
}
