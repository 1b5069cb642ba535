//! Transfer-matrix evaluation of lattice partition functions.

use rand::Rng;
use serde::Serialize;

use super::functional::{isqrt, FactoredTerm, PathFunctional, WalkPath};
use super::kernel::walk_kernel;
use super::slab::{Disorder, EnvSlab};
use crate::error::{Error, Result};
use crate::rng::RngKey;
use crate::stats;

/// Weight of a site at a given time.
pub(crate) type WeightFn<'a> = &'a (dyn Fn(usize, &[i64]) -> f64 + Sync);

/// Largest layer the engine will allocate per state.
const MAX_LAYER: usize = 1 << 24;

/// Layered forward evaluation of `E[Π w(n, S_n) · term]` for a batch of
/// factored terms and weight channels sharing one walk start.
///
/// Walks are confined to `|x|∞ ≤ w`; leaving the box kills the walk.
pub(crate) struct Forward<'a> {
    d: usize,
    w: i64,
    scale: f64,
    n: usize,
    terms: &'a [FactoredTerm],
    channels: usize,
    imp: Imp,
}

enum Imp {
    Line(Vec<Row>),
    Grid(Grid),
}

/// One-dimensional row over `x = lo, lo + 2, …` with a zero pad on each side.
#[derive(Clone)]
struct Row {
    lo: i64,
    len: usize,
    buf: Vec<f64>,
    tmp: Vec<f64>,
    /// Largest admissible `|x|` (window ∩ ball).
    reach: i64,
}

impl Row {
    #[inline]
    fn values(&self) -> &[f64] {
        &self.buf[1..=self.len]
    }

    fn get(&self, x: i64) -> f64 {
        if x < self.lo || (x - self.lo) % 2 != 0 {
            return 0.0;
        }
        let j = ((x - self.lo) / 2) as usize;
        if j < self.len {
            self.buf[j + 1]
        } else {
            0.0
        }
    }
}

struct Grid {
    strides: Vec<usize>,
    /// Interior sites: flat index, coordinates, `|x|₁`, `‖x‖²`.
    sites: Vec<(usize, Vec<i64>, i64, i64)>,
    layers: Vec<Vec<f64>>,
    next: Vec<f64>,
    wbuf: Vec<Vec<f64>>,
}

impl<'a> Forward<'a> {
    /// Start from `(n0, x0)`. Factors of the terms at time `n0` are applied when
    /// `start_factors` is set (for walks started at the origin).
    pub fn new(
        d: usize,
        w: usize,
        scale: f64,
        n0: usize,
        x0: &[i64],
        terms: &'a [FactoredTerm],
        channels: usize,
        start_factors: bool,
    ) -> Result<Self> {
        let w = w as i64;
        let states = terms.len() * channels;
        let imp = if d == 1 {
            let rows = terms
                .iter()
                .flat_map(|t| {
                    let reach = t.ball.map_or(w, |q| isqrt(q).min(w));
                    let mut buf = vec![0.0; 3];
                    let inside = x0[0].abs() <= reach;
                    buf[1] = if inside { 1.0 } else { 0.0 };
                    std::iter::repeat(Row {
                        lo: x0[0],
                        len: 1,
                        buf,
                        tmp: Vec::new(),
                        reach,
                    })
                    .take(channels)
                })
                .collect();
            Imp::Line(rows)
        } else {
            let side = (2 * w + 3) as usize;
            let len = side.checked_pow(d as u32).filter(|&l| l <= MAX_LAYER).ok_or_else(|| {
                Error::Resource(format!("DP layer (2·{w}+3)^{d} exceeds {MAX_LAYER} entries"))
            })?;
            let strides: Vec<usize> = (0..d).map(|i| side.pow(i as u32)).collect();
            let mut sites = Vec::new();
            let mut x = vec![-w; d];
            loop {
                let idx: usize = x.iter().zip(&strides).map(|(&c, &s)| (c + w + 1) as usize * s).sum();
                let l1 = x.iter().map(|c| c.abs()).sum();
                let n2 = x.iter().map(|c| c * c).sum();
                sites.push((idx, x.clone(), l1, n2));
                let mut i = 0;
                while i < d && x[i] == w {
                    x[i] = -w;
                    i += 1;
                }
                if i == d {
                    break;
                }
                x[i] += 1;
            }
            let mut layer = vec![0.0; len];
            let idx0: usize = x0.iter().zip(&strides).map(|(&c, &s)| (c + w + 1) as usize * s).sum();
            if x0.iter().all(|c| c.abs() <= w) {
                layer[idx0] = 1.0;
            }
            let mut layers = vec![layer; states];
            let n2: i64 = x0.iter().map(|c| c * c).sum();
            for (ti, t) in terms.iter().enumerate() {
                if t.ball.is_some_and(|q| n2 > q) {
                    for c in 0..channels {
                        layers[ti * channels + c][idx0] = 0.0;
                    }
                }
            }
            Imp::Grid(Grid {
                strides,
                sites,
                layers,
                next: vec![0.0; len],
                wbuf: vec![Vec::new(); channels],
            })
        };
        let mut f = Forward {
            d,
            w,
            scale,
            n: n0,
            terms,
            channels,
            imp,
        };
        if start_factors {
            f.apply_vertex_factors();
        }
        Ok(f)
    }

    pub fn time(&self) -> usize {
        self.n
    }

    fn apply_vertex_factors(&mut self) {
        let n = self.n;
        let scale = self.scale;
        let channels = self.channels;
        for (ti, t) in self.terms.iter().enumerate() {
            for (m, g) in &t.vertex {
                if *m != n {
                    continue;
                }
                match &mut self.imp {
                    Imp::Line(rows) => {
                        for row in &mut rows[ti * channels..(ti + 1) * channels] {
                            for j in 0..row.len {
                                let x = row.lo + 2 * j as i64;
                                row.buf[j + 1] *= g.eval(&[scale * x as f64]);
                            }
                        }
                    }
                    Imp::Grid(grid) => {
                        let mut y = vec![0.0; self.d];
                        for (idx, x, _, _) in &grid.sites {
                            let states = ti * channels..(ti + 1) * channels;
                            if states.clone().all(|s| grid.layers[s][*idx] == 0.0) {
                                continue;
                            }
                            for (yi, xi) in y.iter_mut().zip(x) {
                                *yi = scale * *xi as f64;
                            }
                            let v = g.eval(&y);
                            for s in states {
                                grid.layers[s][*idx] *= v;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Advance one step, weighting the new layer with the channels.
    pub fn step(&mut self, weights: &[WeightFn<'_>]) {
        assert_eq!(weights.len(), self.channels);
        let n1 = self.n + 1;
        match &mut self.imp {
            Imp::Line(rows) => step_line(rows, self.terms, self.channels, self.w, self.scale, self.n, weights),
            Imp::Grid(grid) => step_grid(grid, self.terms, self.channels, self.d, self.scale, self.n, weights),
        }
        self.n = n1;
        self.apply_vertex_factors();
    }

    /// `Σ_x u(x)` for one state.
    pub fn total(&self, term: usize, channel: usize) -> f64 {
        let s = term * self.channels + channel;
        match &self.imp {
            Imp::Line(rows) => rows[s].values().iter().sum(),
            Imp::Grid(g) => g.layers[s].iter().sum(),
        }
    }

    /// `u(x)` for one state.
    pub fn value(&self, term: usize, channel: usize, x: &[i64]) -> f64 {
        let s = term * self.channels + channel;
        match &self.imp {
            Imp::Line(rows) => rows[s].get(x[0]),
            Imp::Grid(g) => {
                if x.iter().any(|c| c.abs() > self.w) {
                    return 0.0;
                }
                let idx: usize = x.iter().zip(&g.strides).map(|(&c, &st)| (c + self.w + 1) as usize * st).sum();
                g.layers[s][idx]
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn step_line(
    rows: &mut [Row],
    terms: &[FactoredTerm],
    channels: usize,
    w: i64,
    scale: f64,
    n: usize,
    weights: &[WeightFn<'_>],
) {
    let n1 = n + 1;
    // weights per channel over the union of the new rows
    let (mut wlo, mut whi) = (i64::MAX, i64::MIN);
    let mut ranges = Vec::with_capacity(rows.len());
    for r in rows.iter() {
        let mut lo = r.lo - 1;
        let mut hi = r.lo + 2 * r.len as i64 - 1;
        let cap = r.reach.min(w);
        while lo < -cap {
            lo += 2;
        }
        while hi > cap {
            hi -= 2;
        }
        ranges.push((lo, hi));
        if lo <= hi {
            wlo = wlo.min(lo);
            whi = whi.max(hi);
        }
    }
    let mut wrows: Vec<Vec<f64>> = Vec::with_capacity(channels);
    if wlo <= whi {
        let len = ((whi - wlo) / 2 + 1) as usize;
        for wf in weights {
            let mut v = Vec::with_capacity(len);
            let mut x = wlo;
            for _ in 0..len {
                v.push(wf(n1, &[x]));
                x += 2;
            }
            wrows.push(v);
        }
    }
    for (s, row) in rows.iter_mut().enumerate() {
        let term = &terms[s / channels];
        let ch = s % channels;
        let (lo, hi) = ranges[s];
        if lo > hi {
            row.len = 0;
            row.lo = lo;
            row.buf.clear();
            row.buf.extend_from_slice(&[0.0, 0.0]);
            continue;
        }
        let len = ((hi - lo) / 2 + 1) as usize;
        if row.tmp.len() < len + 2 {
            row.tmp.resize(len + 2, 0.0);
        }
        row.tmp[0] = 0.0;
        row.tmp[len + 1] = 0.0;
        // old index of x' - 1 is (x' - 1 - old_lo)/2
        let shift = (lo - 1 - row.lo) / 2; // in {-1, 0, 1, ...}
        let edge = term.edge.iter().filter(|(m, _, _)| *m == n).collect::<Vec<_>>();
        let woff = ((lo - wlo) / 2) as usize;
        let wr = &wrows[ch][woff..woff + len];
        if edge.is_empty() {
            let base = (shift + 1) as usize; // buffer index of old value at x'-1 for k = 0
            let left = &row.buf[base..base + len];
            let right = &row.buf[base + 1..base + 1 + len];
            for (((o, l), r), wv) in row.tmp[1..=len].iter_mut().zip(left).zip(right).zip(wr) {
                *o = 0.5 * (l + r) * wv;
            }
        } else {
            for k in 0..len {
                let xp = lo + 2 * k as i64;
                let mut acc = 0.0;
                for xprev in [xp - 1, xp + 1] {
                    let j = shift + k as i64 + if xprev == xp - 1 { 0 } else { 1 };
                    let v = row.buf[(j + 1) as usize];
                    if v == 0.0 {
                        continue;
                    }
                    let mut g = 1.0;
                    for (_, th, m) in &edge {
                        g *= m.eval(&[scale * ((1.0 - th) * xprev as f64 + th * xp as f64)]);
                    }
                    acc += 0.5 * v * g;
                }
                row.tmp[k + 1] = acc * wr[k];
            }
        }
        std::mem::swap(&mut row.buf, &mut row.tmp);
        row.lo = lo;
        row.len = len;
    }
}

#[allow(clippy::too_many_arguments)]
fn step_grid(
    grid: &mut Grid,
    terms: &[FactoredTerm],
    channels: usize,
    d: usize,
    scale: f64,
    n: usize,
    weights: &[WeightFn<'_>],
) {
    let n1 = n + 1;
    let p = 1.0 / (2 * d) as f64;
    // weights are evaluated lazily, only where some state is non-zero
    for buf in grid.wbuf.iter_mut() {
        buf.clear();
        buf.resize(grid.sites.len(), f64::NAN);
    }
    let mut y = vec![0.0; d];
    for (s, layer) in grid.layers.iter_mut().enumerate() {
        let term = &terms[s / channels];
        let ch = s % channels;
        let edge: Vec<_> = term.edge.iter().filter(|(m, _, _)| *m == n).collect();
        grid.next.iter_mut().for_each(|v| *v = 0.0);
        for (si, (idx, x, _, n2)) in grid.sites.iter().enumerate() {
            if term.ball.is_some_and(|q| *n2 > q) {
                continue;
            }
            let mut acc = 0.0;
            for (i, &st) in grid.strides.iter().enumerate() {
                for (dir, nb) in [(-1i64, *idx - st), (1, *idx + st)] {
                    let v = layer[nb];
                    if v == 0.0 {
                        continue;
                    }
                    if edge.is_empty() {
                        acc += v;
                    } else {
                        let mut g = 1.0;
                        for (_, th, m) in &edge {
                            for (k, yk) in y.iter_mut().enumerate() {
                                let prev = x[k] + if k == i { dir } else { 0 };
                                *yk = scale * ((1.0 - th) * prev as f64 + th * x[k] as f64);
                            }
                            g *= m.eval(&y);
                        }
                        acc += v * g;
                    }
                }
            }
            if acc == 0.0 {
                continue;
            }
            let wv = &mut grid.wbuf[ch][si];
            if wv.is_nan() {
                *wv = weights[ch](n1, x);
            }
            grid.next[*idx] = acc * p * *wv;
        }
        std::mem::swap(layer, &mut grid.next);
    }
}

/// Metadata attached to a partition value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionMeta {
    pub n: usize,
    pub d: usize,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub functional: String,
}

/// A partition function value and the prefactor already applied to it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionResult {
    pub value: f64,
    /// Multiplicative prefactor included in `value` (1 when none).
    pub normalization: f64,
    normalized: bool,
    pub meta: PartitionMeta,
}

impl PartitionResult {
    pub(crate) fn raw(value: f64, meta: PartitionMeta) -> Self {
        PartitionResult {
            value,
            normalization: 1.0,
            normalized: false,
            meta,
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Apply a prefactor such as `e^{-β̂γ_N}`; refuses to apply a second one.
    pub fn normalize(mut self, factor: f64) -> Result<Self> {
        if self.normalized {
            return Err(Error::Degenerate(format!(
                "normalization applied twice (existing {}, new {factor})",
                self.normalization
            )));
        }
        self.value *= factor;
        self.normalization = factor;
        self.normalized = true;
        Ok(self)
    }
}

fn meta(env: &EnvSlab, dis: &Disorder, f: &PathFunctional) -> PartitionMeta {
    PartitionMeta {
        n: env.n(),
        d: env.d(),
        beta: dis.beta,
        a: dis.trunc.a,
        b: dis.trunc.b,
        functional: f.label(),
    }
}

/// Forward DP over factored terms with the given weight channels; returns
/// `Σ_t coef_t Z(term_t)` per channel.
pub(crate) fn dp_totals(
    n: usize,
    d: usize,
    w: usize,
    terms: &[FactoredTerm],
    weights: &[WeightFn<'_>],
) -> Result<Vec<f64>> {
    let scale = (d as f64 / n as f64).sqrt();
    let origin = vec![0i64; d];
    let mut fw = Forward::new(d, w, scale, 0, &origin, terms, weights.len(), true)?;
    for _ in 0..n {
        fw.step(weights);
    }
    Ok((0..weights.len())
        .map(|c| terms.iter().enumerate().map(|(ti, t)| t.coef * fw.total(ti, c)).sum())
        .collect())
}

/// Raw `Z^η(f)` for several disorders on one slab, in a single sweep.
pub fn partition_dp_many(env: &EnvSlab, disorders: &[Disorder], f: &PathFunctional) -> Result<Vec<f64>> {
    f.check(env.d())?;
    let terms = f.factor(env.n(), env.d())?;
    let weights: Vec<_> = disorders.iter().map(|d| env.weights(d)).collect();
    let fns: Vec<_> = weights.iter().map(|w| move |n: usize, x: &[i64]| w.at(n, x)).collect();
    let refs: Vec<WeightFn<'_>> = fns.iter().map(|f| f as WeightFn<'_>).collect();
    dp_totals(env.n(), env.d(), env.half_width(), &terms, &refs)
}

/// Exact `Z^{η,[a,b)}_{N,β}(f)` by the transfer-matrix recursion.
pub fn partition_dp(env: &EnvSlab, disorder: &Disorder, f: &PathFunctional) -> Result<PartitionResult> {
    f.check(env.d())?;
    let terms = f.factor(env.n(), env.d())?;
    let weights = env.weights(disorder);
    let wf = |n: usize, x: &[i64]| weights.at(n, x);
    let v = dp_totals(env.n(), env.d(), env.half_width(), &terms, &[&wf])?[0];
    Ok(PartitionResult::raw(v, meta(env, disorder, f)))
}

/// Largest path count accepted by [`partition_bruteforce`].
pub const BRUTEFORCE_MAX_PATHS: f64 = 1e7;

/// `Z` by explicit enumeration of all `(2d)^N` paths; accepts any functional.
/// Paths leaving the slab window get weight zero.
pub fn partition_bruteforce(env: &EnvSlab, disorder: &Disorder, f: &PathFunctional) -> Result<PartitionResult> {
    f.check(env.d())?;
    let (n, d) = (env.n(), env.d());
    let paths = (2.0 * d as f64).powi(n as i32);
    if paths > BRUTEFORCE_MAX_PATHS {
        return Err(Error::Resource(format!("(2d)^N = {paths:.3e} paths exceeds {BRUTEFORCE_MAX_PATHS:.0e}")));
    }
    let weights = env.weights(disorder);
    let mut coords = vec![0i64; (n + 1) * d];
    let mut total = 0.0;
    fn rec(
        k: usize,
        n: usize,
        d: usize,
        acc: f64,
        coords: &mut Vec<i64>,
        env: &EnvSlab,
        w: &super::slab::SiteWeights<'_>,
        f: &PathFunctional,
        total: &mut f64,
    ) {
        if k == n {
            let path = WalkPath { d, coords: coords.clone() };
            *total += acc * f.eval_lattice(&path);
            return;
        }
        for i in 0..d {
            for s in [-1i64, 1] {
                let (prev, next) = coords.split_at_mut((k + 1) * d);
                next[..d].copy_from_slice(&prev[k * d..]);
                next[i] += s;
                let x = &coords[(k + 1) * d..(k + 2) * d];
                if !env.contains(k + 1, x) {
                    continue;
                }
                let wv = w.at(k + 1, x);
                rec(k + 1, n, d, acc * wv, coords, env, w, f, total);
            }
        }
    }
    rec(0, n, d, 1.0, &mut coords, env, &weights, f, &mut total);
    Ok(PartitionResult::raw(total / paths, meta(env, disorder, f)))
}

/// Monte-Carlo estimate of `Z(f)` from `replicas` simple-random-walk paths,
/// with its jackknife standard error.
pub fn partition_mc(
    env: &EnvSlab,
    disorder: &Disorder,
    f: &PathFunctional,
    replicas: usize,
    key: RngKey,
) -> Result<(f64, f64)> {
    if replicas < 2 {
        return Err(Error::invalid("replicas", "at least two replicas are required"));
    }
    f.check(env.d())?;
    let (n, d) = (env.n(), env.d());
    let weights = env.weights(disorder);
    let mut rng = key.stream();
    let mut samples = Vec::with_capacity(replicas);
    let mut coords = vec![0i64; (n + 1) * d];
    for _ in 0..replicas {
        let mut acc = 1.0;
        for k in 0..n {
            let r: u32 = rng.random_range(0..(2 * d) as u32);
            let (i, s) = ((r / 2) as usize, if r % 2 == 0 { -1 } else { 1 });
            let (prev, next) = coords.split_at_mut((k + 1) * d);
            next[..d].copy_from_slice(&prev[k * d..]);
            next[i] += s;
            let x = &coords[(k + 1) * d..(k + 2) * d];
            if acc != 0.0 {
                acc = if env.contains(k + 1, x) { acc * weights.at(k + 1, x) } else { 0.0 };
            }
        }
        let path = WalkPath { d, coords: coords.clone() };
        samples.push(if acc == 0.0 { 0.0 } else { acc * f.eval_lattice(&path) });
    }
    Ok(stats::jackknife_mean(&samples))
}

/// Point-to-point partition function and its normalized version.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointToPoint {
    pub value: f64,
    /// `½ (N/d)^{d/2} e^{-β̂γ_N 1{α=1}} Z`.
    pub normalized: f64,
}

/// `Z^η[(n₁,x₁),(n₂,x₂)] = E[Π_{n₁<n≤n₂} (1+βη_{n,S_n}) 1{S_{n₂}=x₂} | S_{n₁}=x₁]`.
///
/// `prefactor` is the normalization `½(N/d)^{d/2} e^{-β̂γ_N 1{α=1}}`.
pub fn point_to_point_partition(
    env: &EnvSlab,
    disorder: &Disorder,
    from: (usize, &[i64]),
    to: (usize, &[i64]),
    prefactor: f64,
) -> Result<PointToPoint> {
    let ((n1, x1), (n2, x2)) = (from, to);
    if n1 > n2 || n2 > env.n() {
        return Err(Error::invalid("n", format!("need n₁ ≤ n₂ ≤ N, got {n1}, {n2}")));
    }
    if x1.len() != env.d() || x2.len() != env.d() {
        return Err(Error::invalid("x", "endpoint dimension mismatch"));
    }
    let dist: i64 = x1.iter().zip(x2).map(|(a, b)| (a - b).abs()).sum();
    if (dist - (n2 - n1) as i64).rem_euclid(2) != 0 {
        return Err(Error::invalid("x", "endpoints violate the parity constraint ‖x₂−x₁‖₁ ≡ n₂−n₁ mod 2"));
    }
    let terms = [FactoredTerm::unit()];
    let weights = env.weights(disorder);
    let wf = |n: usize, x: &[i64]| weights.at(n, x);
    let mut fw = Forward::new(env.d(), env.half_width(), 1.0, n1, x1, &terms, 1, false)?;
    for _ in n1..n2 {
        fw.step(&[&wf]);
    }
    let value = fw.value(0, 0, x2);
    Ok(PointToPoint {
        value,
        normalized: prefactor * value,
    })
}

/// `p_{n₂−n₁}(x₂−x₁)`: point-to-point value of the empty environment.
pub fn free_point_to_point(n: usize, dx: &[i64]) -> f64 {
    walk_kernel(n, dx, dx.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::functional::Marginal;
    use crate::tail::{TailLaw, TruncationSpec};

    fn law() -> TailLaw {
        TailLaw::centered_pareto(1.5).unwrap()
    }

    fn zero_env(n: usize, d: usize) -> EnvSlab {
        EnvSlab::from_fn(law(), n, d, n, |_, _| 0.0).unwrap()
    }

    #[test]
    fn zero_environment_gives_one() {
        let dis = Disorder::plain(0.7).unwrap();
        for d in 1..=3 {
            let z = partition_dp(&zero_env(5, d), &dis, &PathFunctional::ConstantOne).unwrap();
            assert!((z.value - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn one_step_enumeration() {
        let env = EnvSlab::sample(law(), 1, 1, RngKey::new(4)).unwrap();
        let dis = Disorder::plain(0.4).unwrap();
        let z = partition_dp(&env, &dis, &PathFunctional::ConstantOne).unwrap().value;
        let e = 1.0 + 0.4 * (env.eta(1, &[1]) + env.eta(1, &[-1])) / 2.0;
        assert!((z - e).abs() < 1e-14);
    }

    #[test]
    fn dp_matches_bruteforce_with_functionals() {
        let fs = vec![
            PathFunctional::ConstantOne,
            PathFunctional::support_cutoff(0.5),
            PathFunctional::product(vec![0.3, 1.0], vec![Marginal::Gaussian { center: vec![0.2], width: 0.7 }, Marginal::Indicator { lo: vec![-1.0], hi: vec![0.9] }]),
            PathFunctional::SupportCutoff {
                radius: 0.2,
                base: Box::new(PathFunctional::product(vec![0.55], vec![Marginal::Coordinate { axis: 0 }])),
            },
        ];
        for seed in 0..5 {
            let env = EnvSlab::sample(law(), 9, 1, RngKey::new(seed)).unwrap();
            let dis = Disorder::new(0.3, 3.0, TruncationSpec::new(&law(), 0.2, 2.0, 3.0).unwrap()).unwrap();
            for f in &fs {
                let a = partition_dp(&env, &dis, f).unwrap().value;
                let b = partition_bruteforce(&env, &dis, f).unwrap().value;
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{f:?}: {a} vs {b}");
            }
        }
        let f2 = PathFunctional::product(vec![0.4], vec![Marginal::Gaussian { center: vec![0.1, -0.3], width: 0.5 }]);
        let env = EnvSlab::sample(law(), 5, 2, RngKey::new(77)).unwrap();
        let dis = Disorder::plain(0.5).unwrap();
        for f in [&f2, &PathFunctional::support_cutoff(0.3)] {
            let a = partition_dp(&env, &dis, f).unwrap().value;
            let b = partition_bruteforce(&env, &dis, f).unwrap().value;
            assert!((a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn joint_cylinder_rejected_by_dp() {
        let env = zero_env(4, 1);
        let f = PathFunctional::joint(vec![0.5, 1.0], |y| (y[0][0] * y[1][0]).tanh());
        let dis = Disorder::plain(0.5).unwrap();
        assert!(matches!(partition_dp(&env, &dis, &f), Err(Error::Unsupported(_))));
        assert!(partition_bruteforce(&env, &dis, &f).is_ok());
    }

    #[test]
    fn mc_of_zero_env_is_exact() {
        let env = zero_env(6, 1);
        let (m, se) = partition_mc(&env, &Disorder::plain(0.5).unwrap(), &PathFunctional::ConstantOne, 50, RngKey::new(1)).unwrap();
        assert_eq!((m, se), (1.0, 0.0));
    }

    #[test]
    fn point_to_point_examples() {
        let env = zero_env(4, 1);
        let dis = Disorder::plain(0.5).unwrap();
        let v = point_to_point_partition(&env, &dis, (0, &[0]), (2, &[0]), 1.0).unwrap();
        assert_eq!(v.value, 0.5);
        let v = point_to_point_partition(&env, &dis, (2, &[0]), (2, &[0]), 1.0).unwrap();
        assert_eq!(v.value, 1.0);
        assert!(point_to_point_partition(&env, &dis, (0, &[0]), (2, &[1]), 1.0).is_err());
        let env2 = zero_env(4, 2);
        let v = point_to_point_partition(&env2, &dis, (1, &[1, 0]), (4, &[0, 2]), 1.0).unwrap();
        assert!((v.value - free_point_to_point(3, &[-1, 2])).abs() < 1e-15);
    }

    #[test]
    fn normalization_applies_once() {
        let r = PartitionResult::raw(2.0, meta(&zero_env(1, 1), &Disorder::plain(0.5).unwrap(), &PathFunctional::ConstantOne));
        let r = r.normalize(0.5).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.normalize(0.5).is_err());
    }
}
