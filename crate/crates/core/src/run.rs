//! Config-driven experiment runner: validates, executes on a sized worker
//! pool, and writes `results.csv` plus `manifest.json` into the output
//! directory.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::appendix::{comparison_battery, dirichlet_identity, ComparisonKind, DirichletSpec};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::io::{
    write_rows, CheckRow, PartitionRow, ResultRow, CHECK_COLUMNS, CSV_SCHEMA_VERSION, PARTITION_COLUMNS, RESULT_COLUMNS,
};
use crate::lab::{marginal_convergence_experiment, truncation_error_curve, xi_truncation_slope, ConvergenceOptions};
use crate::lattice::{partition_dp, replica_second_moment, Disorder, EnvSlab};
use crate::noise::{continuum_partition, continuum_partition_mc, sample_cloud, TestFunction};
use crate::rng::RngKey;
use crate::tail::{cutoff_spec, kappa_a, kappa_n_a, ScalingPlan, TailLaw};

/// Relative error under which a quadrature Dirichlet check passes.
pub const DIRICHLET_TOLERANCE: f64 = 1e-6;

/// What a run produced.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub experiment_id: String,
    pub config_hash: String,
    pub seed: u64,
    pub csv_schema_version: u32,
    pub columns: Vec<String>,
    pub results: String,
    pub rows: usize,
    pub threads: usize,
    pub wall_time_s: f64,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: Manifest,
    pub results_path: PathBuf,
    pub manifest_path: PathBuf,
}

enum Rows {
    Partition(Vec<PartitionRow>),
    Results(Vec<ResultRow>),
    Checks(Vec<CheckRow>),
}

impl Rows {
    fn len(&self) -> usize {
        match self {
            Rows::Partition(r) => r.len(),
            Rows::Results(r) => r.len(),
            Rows::Checks(r) => r.len(),
        }
    }

    fn columns(&self) -> &'static [&'static str] {
        match self {
            Rows::Partition(_) => PARTITION_COLUMNS,
            Rows::Results(_) => RESULT_COLUMNS,
            Rows::Checks(_) => CHECK_COLUMNS,
        }
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    law: TailLaw,
    id: String,
    hash: String,
    key: RngKey,
}

impl Ctx<'_> {
    fn result(&self, side: impl Into<String>, n_or_a: f64, statistic: impl Into<String>, value: f64, se: Option<f64>) -> ResultRow {
        ResultRow {
            experiment_id: self.id.clone(),
            side: side.into(),
            n_or_a,
            statistic: statistic.into(),
            value,
            se,
            seed: self.cfg.seed,
            config_hash: self.hash.clone(),
        }
    }
}

/// Validate `cfg`, run it on `threads` workers (all cores when `None`) and
/// write the results. Outputs depend only on the config, never on the
/// worker count.
pub fn run(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RunSummary> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Resource(format!("worker pool: {e}")))?;
    let hash = cfg.hash();
    let ctx = Ctx {
        cfg,
        law: cfg.tail_law()?,
        id: format!("{}-{}", cfg.experiment.name(), &hash[..12]),
        hash,
        key: RngKey::new(cfg.seed),
    };
    let start = Instant::now();
    let rows = pool.install(|| execute(&ctx))?;
    let wall = start.elapsed().as_secs_f64();

    fs::create_dir_all(&cfg.output)?;
    let results_path = cfg.output.join("results.csv");
    let file = fs::File::create(&results_path)?;
    let out = std::io::BufWriter::new(file);
    match &rows {
        Rows::Partition(r) => write_rows(out, PARTITION_COLUMNS, r)?,
        Rows::Results(r) => write_rows(out, RESULT_COLUMNS, r)?,
        Rows::Checks(r) => write_rows(out, CHECK_COLUMNS, r)?,
    }
    let manifest = Manifest {
        tool: "polymerlab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: cfg.experiment.name().into(),
        experiment_id: ctx.id.clone(),
        config_hash: ctx.hash.clone(),
        seed: cfg.seed,
        csv_schema_version: CSV_SCHEMA_VERSION,
        columns: rows.columns().iter().map(|c| c.to_string()).collect(),
        results: "results.csv".into(),
        rows: rows.len(),
        threads: pool.current_num_threads(),
        wall_time_s: wall,
        config: serde_json::to_value(cfg).map_err(|e| Error::Format(e.to_string()))?,
    };
    let manifest_path = cfg.output.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&manifest_path, json + "\n")?;
    Ok(RunSummary {
        manifest,
        results_path,
        manifest_path,
    })
}

fn execute(ctx: &Ctx) -> Result<Rows> {
    match ctx.cfg.experiment {
        ExperimentKind::SimulateDiscrete => simulate_discrete(ctx).map(Rows::Partition),
        ExperimentKind::SimulateContinuum => simulate_continuum(ctx).map(Rows::Partition),
        ExperimentKind::Converge => converge(ctx).map(Rows::Results),
        ExperimentKind::TruncationCurve => truncation_curve(ctx).map(Rows::Results),
        ExperimentKind::Moments => moments(ctx).map(Rows::Results),
        ExperimentKind::VerifyAppendix => verify_appendix(ctx).map(Rows::Checks),
        ExperimentKind::ReplicaMoment => replica_moment(ctx).map(Rows::Results),
    }
}

fn simulate_discrete(ctx: &Ctx) -> Result<Vec<PartitionRow>> {
    let cfg = ctx.cfg;
    let (d, dis_cfg) = (cfg.geometry.d, &cfg.disorder);
    let mut rows = Vec::new();
    for n in cfg.sizes()? {
        let plan = ScalingPlan::new(ctx.law, n, d, dis_cfg.beta_hat)?;
        let spec = cutoff_spec(&ctx.law, plan.v_n, dis_cfg.a, dis_cfg.upper())?;
        let dis = Disorder::new(plan.beta_n, plan.v_n, spec)?;
        let key = ctx.key.derive(n as u64);
        let values: Vec<_> = (0..cfg.replicas as u64)
            .into_par_iter()
            .map(|i| {
                let env = EnvSlab::diffusive(ctx.law, n, d, cfg.geometry.half_width, key.derive(i))?;
                partition_dp(&env, &dis, &cfg.functional)?.normalize(plan.normalization())
            })
            .collect::<Result<_>>()?;
        rows.extend(values.into_iter().enumerate().map(|(i, z)| PartitionRow {
            experiment_id: ctx.id.clone(),
            n: Some(n),
            d,
            alpha: ctx.law.alpha(),
            a: dis_cfg.a,
            b: dis_cfg.upper(),
            beta_hat: dis_cfg.beta_hat,
            functional: cfg.functional.label(),
            value: z.value,
            normalization: z.normalization,
            seed: cfg.seed,
            replica: i as u64,
            config_hash: ctx.hash.clone(),
        }));
    }
    Ok(rows)
}

fn simulate_continuum(ctx: &Ctx) -> Result<Vec<PartitionRow>> {
    let cfg = ctx.cfg;
    let (d, a, beta_hat) = (cfg.geometry.d, cfg.disorder.a, cfg.disorder.beta_hat);
    let values: Vec<_> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|i| {
            let k = ctx.key.derive(i);
            let cloud = sample_cloud(ctx.law.alpha(), a, cfg.geometry.half_width, d, k)?;
            match continuum_partition(&cloud, beta_hat, &cfg.functional) {
                Err(Error::Unsupported(_)) => {
                    continuum_partition_mc(&cloud, beta_hat, &cfg.functional, cfg.options.path_samples, k.derive_str("paths"))
                }
                other => other,
            }
        })
        .collect::<Result<_>>()?;
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(i, z)| PartitionRow {
            experiment_id: ctx.id.clone(),
            n: None,
            d,
            alpha: ctx.law.alpha(),
            a,
            b: f64::INFINITY,
            beta_hat,
            functional: cfg.functional.label(),
            value: z.value,
            normalization: z.prefactor,
            seed: cfg.seed,
            replica: i as u64,
            config_hash: ctx.hash.clone(),
        })
        .collect())
}

fn converge(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let cfg = ctx.cfg;
    let d = cfg.geometry.d;
    let psi = cfg.psi.clone().unwrap_or_else(|| TestFunction::zero(d));
    let opts = ConvergenceOptions {
        half_width: cfg.geometry.half_width,
        path_samples: cfg.options.path_samples,
        statistics: cfg.options.statistics.clone(),
        bootstrap: cfg.options.bootstrap,
    };
    let out = marginal_convergence_experiment(
        ctx.law,
        cfg.disorder.beta_hat,
        &psi,
        &cfg.functional,
        d,
        &cfg.sizes()?,
        cfg.disorder.a,
        cfg.replicas,
        ctx.key,
        &opts,
    )?;
    Ok(out
        .reports
        .iter()
        .filter(|r| cfg.psi.is_some() || r.component != "pairing")
        .map(|r| ctx.result(r.component.clone(), r.grid, r.statistic.name(), r.value, r.sd))
        .collect())
}

fn truncation_curve(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let cfg = ctx.cfg;
    let curve = truncation_error_curve(
        ctx.law,
        cfg.disorder.beta_hat,
        cfg.geometry.d,
        &cfg.sizes()?,
        &cfg.a_grid(),
        cfg.replicas,
        cfg.geometry.half_width,
        ctx.key,
    )?;
    let mut rows: Vec<ResultRow> = curve
        .points
        .iter()
        .map(|p| ctx.result(format!("a={}", p.a), p.n as f64, "truncation_error", p.mean, Some(p.se)))
        .collect();
    rows.extend(
        curve
            .sup
            .iter()
            .map(|s| ctx.result(format!("a={}", s.a), s.n as f64, "sup_over_N", s.value, Some(s.se))),
    );
    Ok(rows)
}

/// Exact scaling constants and truncated moments per `(N, a)`, plus the ξ
/// truncation slope when a test function is configured.
fn moments(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let cfg = ctx.cfg;
    let law = ctx.law;
    let (d, beta_hat) = (cfg.geometry.d, cfg.disorder.beta_hat);
    let (alpha, df) = (law.alpha(), d as f64);
    let mut rows = Vec::new();
    for n in cfg.sizes()? {
        let plan = ScalingPlan::new(law, n, d, beta_hat)?;
        let side = format!("N={n}");
        let nf = n as f64;
        rows.push(ctx.result(&side, nf, "V_N", plan.v_n, None));
        rows.push(ctx.result(&side, nf, "beta_N", plan.beta_n, None));
        if alpha == 1.0 {
            rows.push(ctx.result(&side, nf, "gamma_N", plan.gamma_n, None));
        }
        for a in cfg.a_grid() {
            let u = a * plan.v_n;
            rows.push(ctx.result(&side, a, "kappa_a", kappa_a(alpha, a)?, None));
            match kappa_n_a(&law, a, plan.v_n) {
                Ok(k) => rows.push(ctx.result(&side, a, "kappa_N_a", k, None)),
                Err(Error::Degenerate(_)) => {}
                Err(e) => return Err(e),
            }
            for p in [1u32, 2] {
                let m = law.truncated_moment(u, p)?;
                rows.push(ctx.result(&side, a, format!("m{p}_exact"), m.exact, None));
                rows.push(ctx.result(&side, a, format!("m{p}_leading"), m.leading, None));
            }
            // β_N² E[η² 1{1+η < aV_N}] against ½ d^{-d/2} β̂² a^{2-α} α/(2-α) N^{d/2-1}
            let m2 = law.truncated_moment(u, 2)?.exact;
            let scale =
                0.5 * df.powf(-df / 2.0) * beta_hat * beta_hat * a.powf(2.0 - alpha) * alpha / (2.0 - alpha) * nf.powf(df / 2.0 - 1.0);
            rows.push(ctx.result(&side, a, "second_moment_ratio", plan.beta_n * plan.beta_n * m2 / scale, None));
        }
        if let Some(psi) = &cfg.psi {
            let s = xi_truncation_slope(law, n, d, psi, &cfg.a_grid(), cfg.replicas, ctx.key.derive(n as u64))?;
            for p in &s.points {
                rows.push(ctx.result(&side, p.a, "xi_variance", p.variance, Some(p.se)));
                rows.push(ctx.result(&side, p.a, "xi_cap", p.cap, None));
            }
            rows.push(ctx.result(&side, nf, "xi_slope", s.slope, None));
        }
    }
    Ok(rows)
}

fn verify_appendix(ctx: &Ctx) -> Result<Vec<CheckRow>> {
    let cfg = ctx.cfg;
    let row = |check: &str, k: usize, params: String, lhs: f64, rhs: f64, pass: bool| CheckRow {
        check: check.into(),
        k,
        params,
        lhs,
        rhs,
        pass,
        seed: cfg.seed,
        config_hash: ctx.hash.clone(),
    };
    let mut rows = Vec::new();
    let mut rng = ctx.key.derive_str("dirichlet").stream();
    for i in 0..20 {
        let k = 1 + i % 4;
        let zetas: Vec<f64> = (0..=k).map(|_| rng.random_range(0.2..3.0)).collect();
        let t = rng.random_range(0.5..3.0);
        let spec = DirichletSpec::new(zetas, t)?;
        let r = dirichlet_identity(&spec);
        let params = format!(
            "zeta=[{}];t={t}",
            spec.zetas.iter().map(|z| z.to_string()).collect::<Vec<_>>().join(" ")
        );
        rows.push(row("dirichlet", k, params, r.numeric, r.formula, r.rel_error <= DIRICHLET_TOLERANCE));
    }
    let reports = comparison_battery(&ctx.law, &[1, 2, 3, 4], 3, cfg.options.appendix_samples, ctx.key.derive_str("comparison"))?;
    for r in reports {
        let check = match r.check {
            ComparisonKind::Increasing => "increasing",
            ComparisonKind::Decreasing => "decreasing",
        };
        let bound = r.constant.powi(r.k as i32) * r.rhs;
        rows.push(row(check, r.k, format!("{};C={}", r.params, r.constant), r.lhs, bound, r.pass));
    }
    Ok(rows)
}

fn replica_moment(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let cfg = ctx.cfg;
    let mut rows = Vec::new();
    for n in cfg.sizes()? {
        let plan = ScalingPlan::new(ctx.law, n, cfg.geometry.d, cfg.disorder.beta_hat)?;
        let m = replica_second_moment(&plan, cfg.disorder.a, cfg.disorder.upper(), cfg.replicas, ctx.key.derive(n as u64))?;
        let nf = n as f64;
        rows.push(ctx.result("direct", nf, "second_moment", m.direct, Some(m.direct_se)));
        rows.push(ctx.result("formula", nf, "second_moment", m.formula, Some(m.formula_se)));
        rows.push(ctx.result("formula", nf, "overlap_rate", m.r, None));
    }
    Ok(rows)
}
