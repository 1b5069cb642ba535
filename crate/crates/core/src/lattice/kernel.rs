use std::collections::HashMap;

use statrs::function::factorial::ln_binomial;

use super::slab::is_reachable;

/// `P(S_n = x)` for the simple random walk on `Z^d`.
///
/// Closed form in `d = 1, 2` (in rotated coordinates the planar walk is a pair
/// of independent one-dimensional walks); exact convolution otherwise.
pub fn walk_kernel(n: usize, x: &[i64], d: usize) -> f64 {
    debug_assert_eq!(x.len(), d);
    if !is_reachable(n, x) {
        return 0.0;
    }
    match d {
        1 => kernel_1d(n, x[0]),
        2 => kernel_1d(n, x[0] + x[1]) * kernel_1d(n, x[0] - x[1]),
        _ => KernelTable::new(d, n).get(n, x),
    }
}

/// One-dimensional `P(S_n = x)`.
#[inline]
pub fn kernel_1d(n: usize, x: i64) -> f64 {
    let n_i = n as i64;
    if x.abs() > n_i || (n_i - x) % 2 != 0 {
        return 0.0;
    }
    if n == 0 {
        return 1.0;
    }
    let k = ((n_i + x) / 2) as u64;
    if n <= 60 {
        // exact binomial coefficient in u64 range, one rounding
        let mut c: u128 = 1;
        for i in 0..k.min(n as u64 - k) {
            c = c * (n as u128 - i as u128) / (i as u128 + 1);
        }
        return c as f64 / 2f64.powi(n as i32);
    }
    (ln_binomial(n as u64, k) - n as f64 * std::f64::consts::LN_2).exp()
}

/// Tabulated kernels up to a horizon, for dimensions without a closed form.
#[derive(Debug, Clone)]
pub struct KernelTable {
    d: usize,
    layers: Vec<HashMap<Vec<i64>, f64>>,
}

impl KernelTable {
    pub fn new(d: usize, horizon: usize) -> Self {
        let mut layers = Vec::with_capacity(horizon + 1);
        let mut cur = HashMap::new();
        cur.insert(vec![0i64; d], 1.0);
        layers.push(cur.clone());
        let p = 1.0 / (2 * d) as f64;
        for _ in 0..horizon {
            let mut next: HashMap<Vec<i64>, f64> = HashMap::with_capacity(cur.len() * 2);
            for (x, v) in &cur {
                for i in 0..d {
                    for s in [-1, 1] {
                        let mut y = x.clone();
                        y[i] += s;
                        *next.entry(y).or_insert(0.0) += v * p;
                    }
                }
            }
            layers.push(next.clone());
            cur = next;
        }
        KernelTable { d, layers }
    }

    pub fn horizon(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn get(&self, n: usize, x: &[i64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        match self.layers.get(n) {
            Some(l) => l.get(x).copied().unwrap_or(0.0),
            None => walk_kernel(n, x, self.d),
        }
    }
}

/// Kernel lookup for chain recursions: closed form in low dimension, a
/// shared table otherwise.
pub(crate) enum Kernel {
    Closed(usize),
    Table(KernelTable),
}

impl Kernel {
    pub fn new(d: usize, horizon: usize) -> Self {
        if d <= 2 {
            Kernel::Closed(d)
        } else {
            Kernel::Table(KernelTable::new(d, horizon))
        }
    }

    #[inline]
    pub fn p(&self, n: usize, x: &[i64]) -> f64 {
        match self {
            Kernel::Closed(d) => walk_kernel(n, x, *d),
            Kernel::Table(t) => t.get(n, x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(walk_kernel(1, &[1], 1), 0.5);
        assert_eq!(walk_kernel(2, &[0], 1), 0.5);
        assert_eq!(walk_kernel(2, &[0, 0], 2), 0.25);
        assert_eq!(walk_kernel(2, &[1], 1), 0.0);
        assert_eq!(walk_kernel(0, &[0, 0, 0], 3), 1.0);
    }

    #[test]
    fn closed_forms_match_convolution() {
        for d in 1..=3 {
            let t = KernelTable::new(d, 12);
            for (n, layer) in t.layers.iter().enumerate() {
                let mut total = 0.0;
                for (x, v) in layer {
                    total += v;
                    let c = if d <= 2 { walk_kernel(n, x, d) } else { *v };
                    assert!((c - v).abs() < 1e-15, "d={d} n={n} x={x:?}");
                }
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn large_n_normalized() {
        let n = 1001;
        let s: f64 = (-(n as i64)..=n as i64).map(|x| kernel_1d(n, x)).sum();
        assert!((s - 1.0).abs() < 1e-12);
        let exact_small = kernel_1d(60, 0);
        let via_log = (ln_binomial(60, 30) - 60.0 * std::f64::consts::LN_2).exp();
        assert!((exact_small / via_log - 1.0).abs() < 1e-12);
    }
}
