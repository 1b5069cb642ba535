//! Small statistics toolkit: moments, jackknife, empirical distances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::RngKey;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    (mean(xs), (variance(xs) / xs.len() as f64).sqrt())
}

/// Jackknife estimate of a mean and its standard error.
///
/// For the sample mean the leave-one-out values are `(S - x_i)/(n-1)`; the
/// resulting error coincides with the classical `s/√n`.
pub fn jackknife_mean(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let total: f64 = xs.iter().sum();
    let loo: Vec<f64> = xs.iter().map(|x| (total - x) / (n - 1.0)).collect();
    let m = mean(&loo);
    let var = (n - 1.0) / n * loo.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    (total / n, var.sqrt())
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn ls_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Ks,
    Wasserstein1,
}

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Ks => "ks",
            Statistic::Wasserstein1 => "wasserstein1",
        }
    }
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Two-sample Kolmogorov–Smirnov distance `sup_x |F_a(x) - F_b(x)|` with
/// right-continuous empirical CDFs.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    ks_sorted(&sorted(a), &sorted(b))
}

fn ks_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

/// Wasserstein-1 distance between empirical laws: `∫ |F_a - F_b|`.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    w1_sorted(&sorted(a), &sorted(b))
}

fn w1_sorted(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == b.len() {
        return a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    }
    // merge breakpoints and integrate the CDF gap
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => break,
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (x - prev);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        prev = x;
    }
    total
}

pub fn distance(stat: Statistic, a: &[f64], b: &[f64]) -> f64 {
    match stat {
        Statistic::Ks => ks_distance(a, b),
        Statistic::Wasserstein1 => wasserstein1(a, b),
    }
}

/// Bootstrap standard deviation of a two-sample statistic.
pub fn bootstrap_sd(stat: Statistic, a: &[f64], b: &[f64], resamples: usize, key: RngKey) -> f64 {
    let mut rng = key.stream();
    let mut ra = vec![0.0; a.len()];
    let mut rb = vec![0.0; b.len()];
    let vals: Vec<f64> = (0..resamples)
        .map(|_| {
            for v in ra.iter_mut() {
                *v = a[rng.random_range(0..a.len())];
            }
            for v in rb.iter_mut() {
                *v = b[rng.random_range(0..b.len())];
            }
            distance(stat, &ra, &rb)
        })
        .collect();
    variance(&vals).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        assert_eq!(ks_distance(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]), 0.0);
        assert_eq!(wasserstein1(&[1.0, 2.0], &[2.0, 1.0]), 0.0);
        assert_eq!(ks_distance(&[0.0], &[1.0]), 1.0);
        assert_eq!(wasserstein1(&[0.0], &[1.0]), 1.0);
        assert_eq!(wasserstein1(&[0.0, 1.0], &[0.0, 2.0]), 0.5);
        // unequal sizes: {0} vs {0, 2}: ∫|F_a-F_b| = 0.5·2
        assert!((wasserstein1(&[0.0], &[0.0, 2.0]) - 1.0).abs() < 1e-15);
        assert!((ks_distance(&[0.0, 0.0, 1.0], &[0.0, 1.0]) - (2.0 / 3.0 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn jackknife_matches_classical_se() {
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0];
        let (m, se) = jackknife_mean(&xs);
        let (m2, se2) = mean_se(&xs);
        assert!((m - m2).abs() < 1e-15 && (se - se2).abs() < 1e-12);
    }

    #[test]
    fn slope_of_line() {
        let x = [0.0, 1.0, 2.0];
        let (s, c) = ls_fit(&x, &[1.0, 3.0, 5.0]);
        assert!((s - 2.0).abs() < 1e-15 && (c - 1.0).abs() < 1e-15);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn distances_symmetric(a in prop::collection::vec(-10.0f64..10.0, 1..40), b in prop::collection::vec(-10.0f64..10.0, 1..40)) {
            prop_assert_eq!(ks_distance(&a, &b), ks_distance(&b, &a));
            prop_assert!((wasserstein1(&a, &b) - wasserstein1(&b, &a)).abs() < 1e-12);
            let ks = ks_distance(&a, &b);
            prop_assert!((0.0..=1.0).contains(&ks));
            prop_assert_eq!(ks_distance(&a, &a), 0.0);
            prop_assert_eq!(wasserstein1(&a, &a), 0.0);
        }
    }
}
