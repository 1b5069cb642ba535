use rand::Rng;
use serde::Serialize;

use super::cloud::PoissonCloud;
use super::kernel::{functional_times, gaussian_kernel, interval_factor, product_marginals, sample_pinned_path, SampledPath, BRIDGE_GRID};
use super::psi::Centering;
use crate::error::{Error, Result};
use crate::lattice::PathFunctional;
use crate::rng::RngKey;
use crate::stats::mean_se;
use crate::tail::alpha_c;

/// `𝒵^{ω,a}_β̂(f)` with the centering prefactor it includes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuumPartition {
    pub value: f64,
    pub a: f64,
    pub beta_hat: f64,
    /// `e^{-β̂κ_a}`.
    pub prefactor: f64,
    /// Monte-Carlo standard error; zero for exact evaluations.
    pub se: f64,
    /// Bound on the reference-path probability of leaving the window.
    pub escape_bound: f64,
}

/// `P(sup_{t≤1} ‖B_t‖_∞ ≥ L) ≤ 4d Φ̄(L)`, by the reflection principle per
/// coordinate. Points outside the window only matter on that event.
pub fn window_escape_bound(half_width: f64, d: usize) -> f64 {
    let tail = 0.5 * statrs::function::erf::erfc(half_width / std::f64::consts::SQRT_2);
    (4.0 * d as f64 * tail).min(1.0)
}

fn guard(cloud: &PoissonCloud, beta_hat: f64) -> Result<()> {
    if !(beta_hat >= 0.0 && beta_hat.is_finite()) {
        return Err(Error::invalid("beta_hat", format!("must be a finite non-negative number, got {beta_hat}")));
    }
    let ac = alpha_c(cloud.d);
    if cloud.alpha >= ac {
        return Err(Error::invalid(
            "alpha",
            format!(
                "α = {} ≥ α_c({}) = {ac}: the continuum partition function is degenerate in this regime",
                cloud.alpha, cloud.d
            ),
        ));
    }
    Ok(())
}

/// Forward chain weights `h_j = β̂υ_j(ρ_{t_j}(x_j)c_{0j} + Σ_{i<j} h_i ρ_{t_j-t_i}(x_j-x_i)c_{ij})`.
/// `factor(i, j)` gives `c_{ij}` with `i = None` for the origin.
fn chain<F>(cloud: &PoissonCloud, beta_hat: f64, mut factor: F) -> Result<Vec<f64>>
where
    F: FnMut(Option<usize>, usize) -> Result<f64>,
{
    let pts = cloud.points();
    let mut h = vec![0.0; pts.len()];
    let mut dx = vec![0.0; cloud.d];
    for j in 0..pts.len() {
        let pj = &pts[j];
        if pj.t <= 0.0 {
            continue;
        }
        let mut acc = gaussian_kernel(pj.t, &pj.x) * factor(None, j)?;
        for i in 0..j {
            let pi = &pts[i];
            if pi.t >= pj.t || h[i] == 0.0 {
                continue;
            }
            for (k, v) in dx.iter_mut().enumerate() {
                *v = pj.x[k] - pi.x[k];
            }
            let k = gaussian_kernel(pj.t - pi.t, &dx);
            if k > 0.0 {
                acc += h[i] * k * factor(Some(i), j)?;
            }
        }
        h[j] = beta_hat * pj.weight * acc;
    }
    Ok(h)
}

/// Exact `𝒵^{ω,a}(f)` for the cloud's own floor `a`, by the chain recursion
/// over the time-sorted points. Supports constant, product-cylinder
/// functionals with at most one cylinder time between consecutive chain
/// points, and linear combinations of those; others are `Unsupported` and go
/// through [`continuum_partition_mc`].
pub fn continuum_partition(cloud: &PoissonCloud, beta_hat: f64, f: &PathFunctional) -> Result<ContinuumPartition> {
    continuum_partition_with(cloud, beta_hat, f, Centering::Standard)
}

pub fn continuum_partition_with(
    cloud: &PoissonCloud,
    beta_hat: f64,
    f: &PathFunctional,
    centering: Centering,
) -> Result<ContinuumPartition> {
    guard(cloud, beta_hat)?;
    f.check(cloud.d)?;
    let prefactor = (-beta_hat * centering.value(cloud.alpha, cloud.a)?).exp();
    let sum = chain_sum(cloud, beta_hat, f)?;
    Ok(ContinuumPartition {
        value: prefactor * sum,
        a: cloud.a,
        beta_hat,
        prefactor,
        se: 0.0,
        escape_bound: window_escape_bound(cloud.half_width, cloud.d),
    })
}

fn chain_sum(cloud: &PoissonCloud, beta_hat: f64, f: &PathFunctional) -> Result<f64> {
    if let PathFunctional::Linear { terms } = f {
        return terms.iter().map(|(c, g)| chain_sum(cloud, beta_hat, g).map(|v| c * v)).sum();
    }
    let unsupported = || {
        Error::Unsupported(format!(
            "{} has no closed-form bridge factors; use continuum_partition_mc",
            f.label()
        ))
    };
    let marginals = product_marginals(f).ok_or_else(unsupported)?;
    let pts = cloud.points();
    let origin = vec![0.0; cloud.d];
    let node = |i: Option<usize>| -> (f64, &[f64]) {
        match i {
            None => (0.0, &origin),
            Some(i) => (pts[i].t, &pts[i].x),
        }
    };
    let h = chain(cloud, beta_hat, |i, j| {
        interval_factor(&marginals, node(i), Some(node(Some(j))))?.ok_or_else(unsupported)
    })?;
    let mut total = interval_factor(&marginals, node(None), None)?.ok_or_else(unsupported)?;
    for (j, hj) in h.iter().enumerate() {
        if *hj != 0.0 {
            total += hj * interval_factor(&marginals, node(Some(j)), None)?.ok_or_else(unsupported)?;
        }
    }
    Ok(total)
}

/// Continuum point-to-point partition function from `(t, x)` to `(t', x')`,
/// with chains inside `(t, t')` and prefactor `e^{-β̂κ_a(t'-t)}`.
pub fn continuum_point_to_point(
    cloud: &PoissonCloud,
    beta_hat: f64,
    start: (f64, &[f64]),
    end: (f64, &[f64]),
) -> Result<f64> {
    guard(cloud, beta_hat)?;
    let ((t0, x0), (t1, x1)) = (start, end);
    if !(t0 < t1) {
        return Err(Error::invalid("t", format!("need t < t', got {t0} ≥ {t1}")));
    }
    if x0.len() != cloud.d || x1.len() != cloud.d {
        return Err(Error::invalid("x", "endpoint dimension does not match the cloud"));
    }
    let pts: Vec<_> = cloud.points().iter().filter(|p| p.t > t0 && p.t < t1).collect();
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(u, v)| u - v).collect() };
    let mut h = vec![0.0; pts.len()];
    for j in 0..pts.len() {
        let mut acc = gaussian_kernel(pts[j].t - t0, &diff(&pts[j].x, x0));
        for i in 0..j {
            if pts[i].t < pts[j].t {
                acc += h[i] * gaussian_kernel(pts[j].t - pts[i].t, &diff(&pts[j].x, &pts[i].x));
            }
        }
        h[j] = beta_hat * pts[j].weight * acc;
    }
    let mut total = gaussian_kernel(t1 - t0, &diff(x1, x0));
    for (p, hj) in pts.iter().zip(&h) {
        total += hj * gaussian_kernel(t1 - p.t, &diff(x1, &p.x));
    }
    let kappa = Centering::Standard.value(cloud.alpha, cloud.a)?;
    Ok((-beta_hat * kappa * (t1 - t0)).exp() * total)
}

/// Exact draw from the continuum polymer measure `𝐐^{ω,a}`: the chain of
/// visited points is sampled backwards from the recursion weights, then the
/// path is filled in with Brownian bridges on a grid of `steps` intervals
/// (plus the chain times and `extra` times).
pub fn sample_continuum_path(
    cloud: &PoissonCloud,
    beta_hat: f64,
    steps: usize,
    extra: &[f64],
    key: RngKey,
) -> Result<SampledPath> {
    guard(cloud, beta_hat)?;
    let h = chain(cloud, beta_hat, |_, _| Ok(1.0))?;
    let mut rng = key.stream();
    Ok(draw_path(cloud, beta_hat, &h, steps, extra, &mut rng))
}

fn draw_path<R: Rng>(cloud: &PoissonCloud, beta_hat: f64, h: &[f64], steps: usize, extra: &[f64], rng: &mut R) -> SampledPath {
    let pts = cloud.points();
    let total = 1.0 + h.iter().sum::<f64>();
    // last chain point: none with weight 1, point j with weight h_j
    let mut u = rng.random::<f64>() * total;
    let mut cur = None;
    if u >= 1.0 {
        u -= 1.0;
        for (j, hj) in h.iter().enumerate() {
            if u < *hj {
                cur = Some(j);
                break;
            }
            u -= hj;
        }
        if cur.is_none() {
            cur = h.iter().rposition(|v| *v > 0.0);
        }
    }
    let mut chain_pts = Vec::new();
    let mut dx = vec![0.0; cloud.d];
    while let Some(j) = cur {
        chain_pts.push(j);
        let pj = &pts[j];
        let own = beta_hat * pj.weight;
        let mut u = rng.random::<f64>() * h[j];
        let start = own * gaussian_kernel(pj.t, &pj.x);
        if u < start {
            break;
        }
        u -= start;
        let mut pick = None;
        let mut last_pos = None;
        for i in 0..j {
            let pi = &pts[i];
            if pi.t >= pj.t || h[i] == 0.0 {
                continue;
            }
            for (k, v) in dx.iter_mut().enumerate() {
                *v = pj.x[k] - pi.x[k];
            }
            let w = own * h[i] * gaussian_kernel(pj.t - pi.t, &dx);
            if w > 0.0 {
                last_pos = Some(i);
            }
            if u < w {
                pick = Some(i);
                break;
            }
            u -= w;
        }
        cur = pick.or(last_pos);
    }
    chain_pts.reverse();
    let pins: Vec<(f64, Vec<f64>)> = chain_pts.iter().map(|&j| (pts[j].t, pts[j].x.clone())).collect();
    sample_pinned_path(&pins, cloud.d, steps, extra, rng)
}

/// `𝒵^{ω,a}(f) = 𝒵^{ω,a}(1) · 𝐐^{ω,a}(f)`, with the polymer expectation
/// estimated from `samples` exact path draws. Works for every functional;
/// sup-norm cutoffs see the path on a grid of [`BRIDGE_GRID`] steps.
pub fn continuum_partition_mc(
    cloud: &PoissonCloud,
    beta_hat: f64,
    f: &PathFunctional,
    samples: usize,
    key: RngKey,
) -> Result<ContinuumPartition> {
    guard(cloud, beta_hat)?;
    f.check(cloud.d)?;
    if samples < 2 {
        return Err(Error::invalid("samples", "need at least 2"));
    }
    let z1 = continuum_partition(cloud, beta_hat, &PathFunctional::ConstantOne)?;
    let h = chain(cloud, beta_hat, |_, _| Ok(1.0))?;
    let mut extra = Vec::new();
    functional_times(f, &mut extra);
    let mut rng = key.stream();
    let vals: Vec<f64> = (0..samples)
        .map(|_| {
            let p = draw_path(cloud, beta_hat, &h, BRIDGE_GRID, &extra, &mut rng);
            f.eval_with(&|t| p.at(t), p.sup_norm())
        })
        .collect();
    let (m, se) = mean_se(&vals);
    Ok(ContinuumPartition {
        value: z1.value * m,
        se: z1.value * se,
        ..z1
    })
}
