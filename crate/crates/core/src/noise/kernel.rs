use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::lattice::{CylinderFn, Marginal, PathFunctional};
use crate::quad::gauss_hermite;
use crate::rng::RngKey;

/// Heat kernel `ρ_t(x) = (2πt)^{-d/2} e^{-‖x‖²/2t}`, with `d = x.len()`.
pub fn gaussian_kernel(t: f64, x: &[f64]) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (2.0 * std::f64::consts::PI * t).powf(-0.5 * x.len() as f64) * (-0.5 * r2 / t).exp()
}

/// `Π ρ_{t_i - t_{i-1}}(x_i - x_{i-1})` with `(t_0, x_0) = (0, 0)`.
pub fn multistep_kernel(times: &[f64], points: &[Vec<f64>]) -> Result<f64> {
    if times.len() != points.len() {
        return Err(Error::invalid("points", "one point per time"));
    }
    let d = points.first().map_or(0, |p| p.len());
    let mut prev_t = 0.0;
    let mut prev_x = vec![0.0; d];
    let mut out = 1.0;
    for (&t, x) in times.iter().zip(points) {
        if !(t > prev_t) {
            return Err(Error::invalid("times", "must be strictly increasing and positive"));
        }
        let dx: Vec<f64> = x.iter().zip(&prev_x).map(|(a, b)| a - b).collect();
        out *= gaussian_kernel(t - prev_t, &dx);
        prev_t = t;
        prev_x.clone_from(x);
    }
    Ok(out)
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Law of `B_s` between two pins, or after the last pin when `to` is `None`:
/// isotropic Gaussian with the returned mean and variance.
pub(crate) fn bridge_marginal(from: (f64, &[f64]), to: Option<(f64, &[f64])>, s: f64) -> (Vec<f64>, f64) {
    let (t0, x0) = from;
    match to {
        Some((t1, x1)) => {
            let lam = (s - t0) / (t1 - t0);
            let mean = x0.iter().zip(x1).map(|(a, b)| a + lam * (b - a)).collect();
            (mean, ((s - t0) * (t1 - s) / (t1 - t0)).max(0.0))
        }
        None => (x0.to_vec(), s - t0),
    }
}

/// `E[g(Y)]` for `Y ~ N(mean, var·I)`.
pub(crate) fn gaussian_expectation(g: &Marginal, mean: &[f64], var: f64) -> Result<f64> {
    if var <= 0.0 {
        return Ok(g.eval(mean));
    }
    let sd = var.sqrt();
    Ok(match g {
        Marginal::Constant { value } => *value,
        Marginal::Indicator { lo, hi } => mean
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(m, (l, h))| std_normal_cdf((h - m) / sd) - std_normal_cdf((l - m) / sd))
            .product(),
        Marginal::Gaussian { center, width } => {
            let w2 = width * width;
            let s2 = w2 + var;
            mean.iter()
                .zip(center)
                .map(|(m, c)| (w2 / s2).sqrt() * (-0.5 * (m - c) * (m - c) / s2).exp())
                .product()
        }
        Marginal::Coordinate { axis } => mean[*axis],
        Marginal::Custom(_) => {
            let d = mean.len();
            if d > 3 {
                return Err(Error::Unsupported(format!("custom marginal quadrature in d = {d} > 3")));
            }
            let rule = gauss_hermite(20);
            let scale = (2.0 * var).sqrt();
            let norm = std::f64::consts::PI.powf(-0.5 * d as f64);
            let mut idx = vec![0usize; d];
            let mut y = vec![0.0; d];
            let mut total = 0.0;
            loop {
                let mut w = norm;
                for k in 0..d {
                    let (node, wt) = rule[idx[k]];
                    y[k] = mean[k] + scale * node;
                    w *= wt;
                }
                total += w * g.eval(&y);
                let mut k = 0;
                while k < d {
                    idx[k] += 1;
                    if idx[k] < rule.len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == d {
                    break;
                }
            }
            total
        }
    })
}

/// Product-form cylinder marginals as `(time, marginal)` pairs, sorted by time,
/// or `None` when `f` needs path sampling.
pub(crate) fn product_marginals(f: &PathFunctional) -> Option<Vec<(f64, &Marginal)>> {
    match f {
        PathFunctional::ConstantOne => Some(Vec::new()),
        PathFunctional::Cylinder(c) => match &c.g {
            CylinderFn::Product(ms) => {
                let mut v: Vec<(f64, &Marginal)> = c.times.iter().copied().zip(ms).collect();
                v.sort_by(|a, b| a.0.total_cmp(&b.0));
                Some(v)
            }
            CylinderFn::Joint(_) => None,
        },
        _ => None,
    }
}

/// Bridge factor for the marginals with times in `(from.0, to.0]` (or after
/// `from.0` when `to` is `None`); `None` when two or more times share the
/// interval, which has no closed form here.
pub(crate) fn interval_factor(
    marginals: &[(f64, &Marginal)],
    from: (f64, &[f64]),
    to: Option<(f64, &[f64])>,
) -> Result<Option<f64>> {
    let hi = to.map_or(f64::INFINITY, |t| t.0);
    let inside: Vec<_> = marginals.iter().filter(|(s, _)| *s > from.0 && *s <= hi).collect();
    match inside.as_slice() {
        [] => Ok(Some(1.0)),
        [(s, g)] => {
            let (mean, var) = bridge_marginal(from, to, *s);
            gaussian_expectation(g, &mean, var).map(Some)
        }
        _ => Ok(None),
    }
}

/// `E_Q[f | B_{t_i} = x_i]` under concatenated Brownian bridges from `(0, 0)`
/// through the pins, free after the last one. Exact for product cylinders
/// with at most one cylinder time per bridge interval; other functionals
/// return `Unsupported` and go through [`bridge_expectation_mc`].
pub fn bridge_expectation(f: &PathFunctional, pins: &[(f64, Vec<f64>)], d: usize) -> Result<f64> {
    check_pins(pins)?;
    if let PathFunctional::Linear { terms } = f {
        return terms
            .iter()
            .map(|(c, g)| bridge_expectation(g, pins, d).map(|v| c * v))
            .sum();
    }
    let unsupported = || Error::Unsupported(format!("no closed-form bridge expectation for {}; use bridge_expectation_mc", f.label()));
    let marginals = product_marginals(f).ok_or_else(unsupported)?;
    let origin = vec![0.0; d];
    let mut prev: (f64, &[f64]) = (0.0, &origin);
    let mut out = 1.0;
    for (t, x) in pins {
        out *= interval_factor(&marginals, prev, Some((*t, x)))?.ok_or_else(unsupported)?;
        prev = (*t, x);
    }
    out *= interval_factor(&marginals, prev, None)?.ok_or_else(unsupported)?;
    Ok(out)
}

fn check_pins(pins: &[(f64, Vec<f64>)]) -> Result<()> {
    let mut prev = 0.0;
    for (t, _) in pins {
        if !(*t > prev && *t <= 1.0) {
            return Err(Error::invalid("pins", "pin times must increase strictly inside (0, 1]"));
        }
        prev = *t;
    }
    Ok(())
}

/// Brownian path through fixed pins, sampled on a time grid.
#[derive(Debug, Clone)]
pub struct SampledPath {
    pub times: Vec<f64>,
    /// Positions, `d` per time.
    pub points: Vec<f64>,
    pub d: usize,
}

impl SampledPath {
    /// Position at `t` by linear interpolation of the grid.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let d = self.d;
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            return self.points[..d].to_vec();
        }
        if k >= self.times.len() {
            return self.points[self.points.len() - d..].to_vec();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let lam = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
        (0..d)
            .map(|i| {
                let a = self.points[(k - 1) * d + i];
                let b = self.points[k * d + i];
                a + lam * (b - a)
            })
            .collect()
    }

    /// Largest Euclidean norm over the grid.
    pub fn sup_norm(&self) -> f64 {
        self.points
            .chunks(self.d)
            .map(|p| p.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
    }
}

/// Cylinder times appearing anywhere in `f`.
pub(crate) fn functional_times(f: &PathFunctional, out: &mut Vec<f64>) {
    match f {
        PathFunctional::ConstantOne => {}
        PathFunctional::Cylinder(c) => out.extend_from_slice(&c.times),
        PathFunctional::SupportCutoff { base, .. } => functional_times(base, out),
        PathFunctional::Linear { terms } => terms.iter().for_each(|(_, g)| functional_times(g, out)),
    }
}

/// Sample a Brownian path from `(0, 0)` through `pins` on `[0, 1]`, using
/// `steps` uniform grid points plus the pin and `extra` times. Grid
/// positions are exact draws from the bridge law.
pub(crate) fn sample_pinned_path<R: Rng>(
    pins: &[(f64, Vec<f64>)],
    d: usize,
    steps: usize,
    extra: &[f64],
    rng: &mut R,
) -> SampledPath {
    let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    times.extend(pins.iter().map(|p| p.0));
    times.extend_from_slice(extra);
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();
    let mut points = Vec::with_capacity(times.len() * d);
    points.extend(std::iter::repeat_n(0.0, d));
    let mut pin = 0;
    let mut cur = vec![0.0; d];
    let mut t_cur = 0.0;
    for &s in &times[1..] {
        while pin < pins.len() && pins[pin].0 < s {
            pin += 1;
        }
        if pin < pins.len() && pins[pin].0 == s {
            cur.clone_from(&pins[pin].1);
        } else {
            let to = pins.get(pin).map(|(t, x)| (*t, x.as_slice()));
            let (mean, var) = bridge_marginal((t_cur, &cur), to, s);
            let sd = var.sqrt();
            for (c, m) in cur.iter_mut().zip(&mean) {
                let z: f64 = rng.sample(StandardNormal);
                *c = m + sd * z;
            }
        }
        t_cur = s;
        points.extend_from_slice(&cur);
    }
    SampledPath { times, points, d }
}

/// Grid resolution of sampled bridge paths.
pub const BRIDGE_GRID: usize = 1024;

/// Monte-Carlo `E_Q[f | pins]` with its standard error. Cylinder times are
/// sampled exactly; sup-norm cutoffs see the path on a grid of
/// [`BRIDGE_GRID`] steps.
pub fn bridge_expectation_mc(
    f: &PathFunctional,
    pins: &[(f64, Vec<f64>)],
    d: usize,
    samples: usize,
    key: RngKey,
) -> Result<(f64, f64)> {
    check_pins(pins)?;
    f.check(d)?;
    let mut extra = Vec::new();
    functional_times(f, &mut extra);
    let mut rng = key.stream();
    let vals: Vec<f64> = (0..samples)
        .map(|_| {
            let p = sample_pinned_path(pins, d, BRIDGE_GRID, &extra, &mut rng);
            f.eval_with(&|t| p.at(t), p.sup_norm())
        })
        .collect();
    Ok(crate::stats::mean_se(&vals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert!((gaussian_kernel(1.0, &[0.0]) - 0.398942280401).abs() < 1e-12);
        assert_eq!(gaussian_kernel(0.3, &[0.7, -0.2]), gaussian_kernel(0.3, &[-0.7, 0.2]));
        let v = multistep_kernel(&[0.5, 1.0], &[vec![0.0], vec![0.0]]).unwrap();
        assert!((v - 1.0 / std::f64::consts::PI).abs() < 1e-14);
        assert!(multistep_kernel(&[0.5, 0.5], &[vec![0.0], vec![0.0]]).is_err());
    }

    #[test]
    fn bridge_cases() {
        let one = PathFunctional::ConstantOne;
        assert_eq!(bridge_expectation(&one, &[(0.5, vec![1.0])], 1).unwrap(), 1.0);
        let g = Marginal::Gaussian { center: vec![0.2], width: 0.5 };
        let at_pin = PathFunctional::product(vec![0.5], vec![g.clone()]);
        let v = bridge_expectation(&at_pin, &[(0.5, vec![1.0])], 1).unwrap();
        assert!((v - g.eval(&[1.0])).abs() < 1e-15);
        // identity coordinate at s between pins is the interpolated mean
        let coord = PathFunctional::product(vec![0.4], vec![Marginal::Coordinate { axis: 0 }]);
        let v = bridge_expectation(&coord, &[(0.2, vec![1.0]), (0.8, vec![-2.0])], 1).unwrap();
        assert!((v - (1.0 + (0.2 / 0.6) * -3.0)).abs() < 1e-14);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        // variance 0.3 around 0.4, against the Gauss–Hermite custom path
        let ms = [
            Marginal::Gaussian { center: vec![0.1], width: 0.7 },
            Marginal::Indicator { lo: vec![-0.2], hi: vec![0.9] },
        ];
        for g in &ms {
            let exact = gaussian_expectation(g, &[0.4], 0.3).unwrap();
            let gc = g.clone();
            let custom = Marginal::custom(move |y| gc.eval(y));
            let quad = gaussian_expectation(&custom, &[0.4], 0.3).unwrap();
            let tol = if matches!(g, Marginal::Indicator { .. }) { 2e-2 } else { 1e-10 };
            assert!((exact - quad).abs() < tol, "{exact} vs {quad}");
        }
    }

    #[test]
    fn mc_matches_closed_form() {
        let f = PathFunctional::product(vec![0.3, 0.9], vec![Marginal::Gaussian { center: vec![0.0], width: 0.8 }; 2]);
        let pins = [(0.5, vec![0.6])];
        let exact = bridge_expectation(&f, &pins, 1).unwrap();
        let (m, se) = bridge_expectation_mc(&f, &pins, 1, 20_000, RngKey::new(3)).unwrap();
        assert!((m - exact).abs() < 4.0 * se, "{m} ± {se} vs {exact}");
    }
}
