use rand::Rng;

use super::functional::WalkPath;
use super::slab::{Disorder, EnvSlab};
use crate::error::{Error, Result};
use crate::rng::RngKey;

/// Largest `N · (2W+1)^d` backward table the sampler will allocate.
pub const GIBBS_MAX_ENTRIES: usize = 1 << 27;

/// Exact draw from the polymer measure on the slab.
///
/// One backward sweep stores `g_n(y) = (1 + βη_{n,y}) h_n(y)` for every time,
/// where `h_n(x)` is the expected future weight given `S_n = x`; the path is
/// then built forward with transitions proportional to `g_{n+1}`. Each layer
/// is rescaled by its maximum, which leaves the transition ratios unchanged.
/// Paths are confined to the slab window, as in the DP.
pub fn sample_polymer_path(env: &EnvSlab, disorder: &Disorder, key: RngKey) -> Result<WalkPath> {
    let (n, d) = (env.n(), env.d());
    let w = env.half_width() as i64;
    let side = (2 * w + 1) as usize;
    let cells = side
        .checked_pow(d as u32)
        .filter(|c| c.saturating_mul(n) <= GIBBS_MAX_ENTRIES)
        .ok_or_else(|| Error::Resource(format!("Gibbs table {n} x {side}^{d} exceeds {GIBBS_MAX_ENTRIES} entries")))?;
    let weights = env.weights(disorder);
    let strides: Vec<usize> = (0..d).map(|i| side.pow(i as u32)).collect();
    let index = |x: &[i64]| -> usize { x.iter().zip(&strides).map(|(&c, s)| (c + w) as usize * s).sum() };
    let coords = |mut idx: usize, x: &mut [i64]| {
        for c in x.iter_mut() {
            *c = (idx % side) as i64 - w;
            idx /= side;
        }
    };

    // g[m - 1] holds g_m for m = 1..=N; off-parity and unreachable cells stay 0
    let mut g = vec![vec![0.0f64; cells]; n];
    let mut x = vec![0i64; d];
    for m in (1..=n).rev() {
        let (head, tail) = g.split_at_mut(m);
        let layer = &mut head[m - 1];
        let next = tail.first();
        let mut peak: f64 = 0.0;
        for (idx, v) in layer.iter_mut().enumerate() {
            coords(idx, &mut x);
            let l1: i64 = x.iter().map(|c| c.abs()).sum();
            if l1 > m as i64 || (l1 + m as i64) % 2 != 0 {
                continue;
            }
            let h = match next {
                None => 1.0,
                Some(nx) => neighbour_sum(nx, &x, idx, &strides, w),
            };
            if h > 0.0 {
                *v = weights.at(m, &x) * h;
                peak = peak.max(*v);
            }
        }
        if !(peak > 0.0) {
            return Err(Error::Degenerate(format!("no admissible path survives to time {m}")));
        }
        layer.iter_mut().for_each(|v| *v /= peak);
    }

    let mut rng = key.stream();
    let mut pos = vec![0i64; d];
    let mut path = Vec::with_capacity((n + 1) * d);
    path.extend_from_slice(&pos);
    let mut probs = Vec::with_capacity(2 * d);
    for layer in &g {
        probs.clear();
        for i in 0..d {
            for dir in [-1i64, 1] {
                let c = pos[i] + dir;
                let p = if c.abs() > w {
                    0.0
                } else {
                    pos[i] = c;
                    let p = layer[index(&pos)];
                    pos[i] -= dir;
                    p
                };
                probs.push(p);
            }
        }
        let total: f64 = probs.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = probs.len() - 1;
        for (k, p) in probs.iter().enumerate() {
            if u < *p {
                pick = k;
                break;
            }
            u -= p;
        }
        // guard against rounding landing on a zero-probability move
        while probs[pick] == 0.0 {
            pick -= 1;
        }
        pos[pick / 2] += if pick % 2 == 0 { -1 } else { 1 };
        path.extend_from_slice(&pos);
    }
    Ok(WalkPath { d, coords: path })
}

fn neighbour_sum(layer: &[f64], x: &[i64], idx: usize, strides: &[usize], w: i64) -> f64 {
    let mut s = 0.0;
    for (i, &st) in strides.iter().enumerate() {
        if x[i] > -w {
            s += layer[idx - st];
        }
        if x[i] < w {
            s += layer[idx + st];
        }
    }
    s
}
