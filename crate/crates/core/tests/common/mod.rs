//! Reference computations written independently of the library: explicit
//! path enumeration, subset sums over chains, closed-form walk kernels.
#![allow(dead_code)]

/// `P(S_n = x)` for the simple walk on ℤ, via log-binomials.
pub fn srw_1d(n: usize, x: i64) -> f64 {
    let n = n as i64;
    if x.abs() > n || (n + x) % 2 != 0 {
        return 0.0;
    }
    let k = ((n + x) / 2) as u64;
    let ln_binom = ln_factorial(n as u64) - ln_factorial(k) - ln_factorial(n as u64 - k);
    (ln_binom - n as f64 * std::f64::consts::LN_2).exp()
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `P(S_n = x)` for the nearest-neighbour walk in `d ∈ {1, 2}`. In `d = 2`
/// the rotated coordinates `x₁ ± x₂` are independent one-dimensional walks.
pub fn srw(n: usize, x: &[i64]) -> f64 {
    match x.len() {
        1 => srw_1d(n, x[0]),
        2 => srw_1d(n, x[0] + x[1]) * srw_1d(n, x[0] - x[1]),
        d => panic!("no closed-form walk kernel for d = {d}"),
    }
}

/// Average of `f(path) · Π_{k=1..N} w(k, S_k)` over all `(2d)^N` paths.
pub fn enumerate_paths<W, F>(n: usize, d: usize, w: W, f: F) -> f64
where
    W: Fn(usize, &[i64]) -> f64,
    F: Fn(&[Vec<i64>]) -> f64,
{
    fn rec<W: Fn(usize, &[i64]) -> f64, F: Fn(&[Vec<i64>]) -> f64>(
        path: &mut Vec<Vec<i64>>,
        n: usize,
        d: usize,
        acc: f64,
        w: &W,
        f: &F,
    ) -> f64 {
        let k = path.len() - 1;
        if k == n {
            return acc * f(path);
        }
        let mut total = 0.0;
        for i in 0..d {
            for s in [-1, 1] {
                let mut x = path[k].clone();
                x[i] += s;
                let wx = w(k + 1, &x);
                path.push(x);
                total += rec(path, n, d, acc * wx, w, f);
                path.pop();
            }
        }
        total
    }
    let mut path = vec![vec![0; d]];
    rec(&mut path, n, d, 1.0, &w, &f) / (2.0 * d as f64).powi(n as i32)
}

/// Largest Euclidean norm along the path after diffusive rescaling
/// `x / √(N/d)`; linear interpolation cannot exceed the vertices.
pub fn rescaled_sup(path: &[Vec<i64>], n: usize, d: usize) -> f64 {
    let s = (n as f64 / d as f64).sqrt();
    path.iter()
        .map(|x| x.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt() / s)
        .fold(0.0, f64::max)
}

/// `1 + η` mapped through the `[a, b)` cutoff at scale `v`.
pub fn cut(eta: f64, a: f64, b: f64, kappa: f64, v: f64) -> f64 {
    let x = 1.0 + eta;
    if x < a * v {
        -kappa
    } else if x >= b * v {
        0.0
    } else {
        eta
    }
}

/// `Σ_{A ⊆ sites} β^{|A|} Π η · P(walk visits A)` over chains strictly
/// increasing in time, the empty chain included, enumerated subset by subset.
pub fn lattice_subset_sum(sites: &[(usize, Vec<i64>, f64)], beta: f64) -> f64 {
    let m = sites.len();
    assert!(m <= 20, "subset sum over {m} sites");
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| sites[i].0);
    let mut total = 0.0;
    for mask in 0u32..(1 << m) {
        let mut term = 1.0;
        let (mut t0, mut x0) = (0usize, vec![0i64; sites.first().map_or(1, |s| s.1.len())]);
        for &i in &order {
            if mask & (1 << i) == 0 {
                continue;
            }
            let (t, x, eta) = &sites[i];
            if *t <= t0 {
                term = 0.0;
                break;
            }
            let dx: Vec<i64> = x.iter().zip(&x0).map(|(a, b)| a - b).collect();
            term *= beta * eta * srw(t - t0, &dx);
            t0 = *t;
            x0 = x.clone();
        }
        total += term;
    }
    total
}

pub fn heat_kernel(t: f64, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (2.0 * std::f64::consts::PI * t).powf(-(x.len() as f64) / 2.0) * (-r2 / (2.0 * t)).exp()
}

/// `Σ_{A} β̂^{|A|} Π υ Π ρ_{Δt}(Δx)` over all `2^M` subsets of a marked
/// point set, chains ordered by time and started at `(0, 0)`.
pub fn continuum_subset_sum(points: &[(f64, Vec<f64>, f64)], beta_hat: f64) -> f64 {
    let m = points.len();
    assert!(m <= 20);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| points[i].0.total_cmp(&points[j].0));
    let d = points.first().map_or(1, |p| p.1.len());
    let mut total = 0.0;
    for mask in 0u32..(1 << m) {
        let mut term = 1.0;
        let (mut t0, mut x0) = (0.0, vec![0.0; d]);
        for &i in &order {
            if mask & (1 << i) == 0 {
                continue;
            }
            let (t, x, v) = &points[i];
            let dx: Vec<f64> = x.iter().zip(&x0).map(|(a, b)| a - b).collect();
            term *= beta_hat * v * heat_kernel(t - t0, &dx);
            t0 = *t;
            x0 = x.clone();
        }
        total += term;
    }
    total
}

/// `κ_a`: the compensator `∫_a^∞ υ αυ^{-1-α} dυ` for `α > 1`, `log(1/a)`
/// at one, zero below.
pub fn kappa_continuum(alpha: f64, a: f64) -> f64 {
    if alpha < 1.0 {
        0.0
    } else if alpha == 1.0 {
        -a.ln()
    } else {
        alpha * a.powf(1.0 - alpha) / (alpha - 1.0)
    }
}

pub fn relative_error(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Asymptotic p-value of the two-sample KS statistic (Kolmogorov series
/// with the Stephens small-sample correction).
pub fn ks_p_value(stat: f64, n1: usize, n2: usize) -> f64 {
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let s = ne.sqrt();
    let lambda = (s + 0.12 + 0.11 / s) * stat;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        p += 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

/// Two-sample KS statistic, written out directly.
pub fn ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut best) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        best = best.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    best
}
