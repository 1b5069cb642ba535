use std::io::{Read, Write};
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::rng::RngKey;
use crate::tail::{LawFamily, ScalingPlan, TailLaw, TruncationSpec};

/// Largest number of lattice sites a slab may materialize.
pub const MAX_TABLE_SITES: usize = 1 << 25;
/// Largest system length accepted in dimension three and above.
pub const MAX_N_HIGH_DIM: usize = 256;

const MAGIC: &[u8; 8] = b"PLMRSLAB";
const VERSION: u32 = 1;

/// Stable counter for site `(n, x)`, independent of any window.
#[inline]
pub fn site_counter(n: usize, x: &[i64]) -> u64 {
    match x.len() {
        1 => ((n as u64) << 32) | (x[0] as i32 as u32 as u64),
        2 => ((n as u64) << 42) | (((x[0] + (1 << 20)) as u64) << 21) | ((x[1] + (1 << 20)) as u64),
        _ => x.iter().fold((n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15), |h, &c| {
            (h ^ (c as u64)).wrapping_mul(0x100_0000_01b3).rotate_left(23)
        }),
    }
}

/// Whether `(n, x)` lies in the reachable lattice (`|x|₁ ≤ n`, matching parity).
#[inline]
pub fn is_reachable(n: usize, x: &[i64]) -> bool {
    let l1: i64 = x.iter().map(|c| c.abs()).sum();
    l1 <= n as i64 && (l1 - n as i64) % 2 == 0
}

#[derive(Debug)]
struct Table {
    side: usize,
    values: Vec<f64>,
}

/// Disorder values `η_{n,x}` on the reachable sites `1 ≤ n ≤ N`, `|x|∞ ≤ W`.
///
/// A slab is either lazy (each value recomputed from the key on demand) or
/// backed by an explicit table. Lazy values depend only on the key and the
/// site, never on `W`, so slabs of different widths share their disorder.
#[derive(Debug, Clone)]
pub struct EnvSlab {
    n: usize,
    d: usize,
    half_width: usize,
    law: TailLaw,
    key: RngKey,
    table: Option<Arc<Table>>,
}

impl EnvSlab {
    /// The full slab `|x|∞ ≤ N`.
    pub fn sample(law: TailLaw, n: usize, d: usize, key: RngKey) -> Result<Self> {
        Self::windowed(law, n, d, n, key)
    }

    /// Slab restricted to `|x|∞ ≤ half_width`.
    pub fn windowed(law: TailLaw, n: usize, d: usize, half_width: usize, key: RngKey) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("N", "system length must be at least 1"));
        }
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be at least 1"));
        }
        if d >= 3 && n > MAX_N_HIGH_DIM {
            return Err(Error::Resource(format!(
                "d = {d} with N = {n} exceeds the high-dimension cap N ≤ {MAX_N_HIGH_DIM}"
            )));
        }
        Ok(EnvSlab {
            n,
            d,
            half_width: half_width.min(n).max(1),
            law,
            key,
            table: None,
        })
    }

    /// Slab of width `⌈L √(N/d)⌉`, the diffusive window used by experiments.
    pub fn diffusive(law: TailLaw, n: usize, d: usize, l: f64, key: RngKey) -> Result<Self> {
        Self::windowed(law, n, d, diffusive_half_width(n, d, l), key)
    }

    /// Explicit slab with values from `f`; every value must exceed `-1`.
    pub fn from_fn<F: FnMut(usize, &[i64]) -> f64>(
        law: TailLaw,
        n: usize,
        d: usize,
        half_width: usize,
        mut f: F,
    ) -> Result<Self> {
        let mut slab = Self::windowed(law, n, d, half_width, RngKey::new(0))?;
        let side = 2 * slab.half_width + 1;
        let layer = side.checked_pow(d as u32).unwrap_or(usize::MAX);
        if layer.saturating_mul(n) > MAX_TABLE_SITES {
            return Err(Error::Resource(format!(
                "materializing {n} × {layer} sites exceeds the table cap {MAX_TABLE_SITES}"
            )));
        }
        let mut values = vec![f64::NAN; layer * n];
        let mut bad = None;
        slab.for_each_site(|m, x| {
            let v = f(m, x);
            if !(v > -1.0) && bad.is_none() {
                bad = Some((m, x.to_vec(), v));
            }
            values[(m - 1) * layer + box_index(x, slab.half_width)] = v;
        });
        if let Some((m, x, v)) = bad {
            return Err(Error::invalid("eta", format!("site ({m}, {x:?}) has η = {v} ≤ -1")));
        }
        slab.table = Some(Arc::new(Table { side, values }));
        Ok(slab)
    }

    /// Explicit copy of this slab.
    pub fn materialize(&self) -> Result<Self> {
        let mut s = Self::from_fn(self.law, self.n, self.d, self.half_width, |m, x| self.eta(m, x))?;
        s.key = self.key;
        Ok(s)
    }

    /// Explicit slab with every value replaced by `f(n, x, η)`.
    pub fn map<F: FnMut(usize, &[i64], f64) -> f64>(&self, mut f: F) -> Result<Self> {
        let mut s = Self::from_fn(self.law, self.n, self.d, self.half_width, |m, x| f(m, x, self.eta(m, x)))?;
        s.key = self.key;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn law(&self) -> &TailLaw {
        &self.law
    }

    pub fn key(&self) -> RngKey {
        self.key
    }

    pub fn is_lazy(&self) -> bool {
        self.table.is_none()
    }

    /// Whether `(n, x)` is a stored site.
    pub fn contains(&self, n: usize, x: &[i64]) -> bool {
        n >= 1
            && n <= self.n
            && x.len() == self.d
            && x.iter().all(|c| c.unsigned_abs() as usize <= self.half_width)
            && is_reachable(n, x)
    }

    #[inline]
    fn uniform(&self, n: usize, x: &[i64]) -> f64 {
        self.key.uniform(site_counter(n, x))
    }

    /// `η_{n,x}`; the site must be stored.
    #[inline]
    pub fn eta(&self, n: usize, x: &[i64]) -> f64 {
        debug_assert!(self.contains(n, x), "site ({n}, {x:?}) outside slab");
        match &self.table {
            Some(t) => {
                let layer = t.side.pow(self.d as u32);
                t.values[(n - 1) * layer + box_index(x, self.half_width)]
            }
            None => self.law.quantile(self.uniform(n, x)) - 1.0,
        }
    }

    /// Visit every stored site in `(n, x)` order (lexicographic in `x`).
    pub fn for_each_site<F: FnMut(usize, &[i64])>(&self, mut f: F) {
        let w = self.half_width as i64;
        let mut x = vec![0i64; self.d];
        for n in 1..=self.n {
            let r = w.min(n as i64);
            x.iter_mut().for_each(|c| *c = -r);
            loop {
                if is_reachable(n, &x) {
                    f(n, &x);
                }
                let mut i = self.d;
                loop {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                    if x[i] < r {
                        x[i] += 1;
                        break;
                    }
                    x[i] = -r;
                }
                if x.iter().all(|&c| c == -r) {
                    break;
                }
            }
        }
    }

    pub fn site_count(&self) -> usize {
        let mut c = 0;
        self.for_each_site(|_, _| c += 1);
        c
    }

    /// Per-site weights `1 + β η^{[a,b)}` for this slab.
    pub fn weights(&self, disorder: &Disorder) -> SiteWeights<'_> {
        SiteWeights::new(self, disorder)
    }

    /// Write the slab (materializing lazy values) in the binary container.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let mut sites = Vec::new();
        self.for_each_site(|n, x| sites.push((n, x.to_vec())));
        out.write_all(MAGIC)?;
        out.write_u32::<LittleEndian>(VERSION)?;
        out.write_u64::<LittleEndian>(self.n as u64)?;
        out.write_u32::<LittleEndian>(self.d as u32)?;
        out.write_u8(family_code(self.law.family()))?;
        out.write_u8(self.law.is_uncentered() as u8)?;
        out.write_f64::<LittleEndian>(self.law.alpha())?;
        out.write_f64::<LittleEndian>(self.law.x_m())?;
        out.write_u64::<LittleEndian>(self.key.seed())?;
        out.write_u64::<LittleEndian>(self.key.path())?;
        out.write_u64::<LittleEndian>(self.half_width as u64)?;
        out.write_u64::<LittleEndian>(sites.len() as u64)?;
        for (n, x) in &sites {
            out.write_u64::<LittleEndian>(*n as u64)?;
            for c in x {
                out.write_i64::<LittleEndian>(*c)?;
            }
            out.write_f64::<LittleEndian>(self.eta(*n, x))?;
        }
        Ok(())
    }

    /// Read a slab written by [`EnvSlab::write_to`]; the result is explicit.
    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a slab container (bad magic)".into()));
        }
        let version = input.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported slab container version {version}")));
        }
        let n = input.read_u64::<LittleEndian>()? as usize;
        let d = input.read_u32::<LittleEndian>()? as usize;
        let family = family_from_code(input.read_u8()?)?;
        let uncentered = input.read_u8()? != 0;
        let alpha = input.read_f64::<LittleEndian>()?;
        let x_m = input.read_f64::<LittleEndian>()?;
        let seed = input.read_u64::<LittleEndian>()?;
        let path = input.read_u64::<LittleEndian>()?;
        let half_width = input.read_u64::<LittleEndian>()? as usize;
        let count = input.read_u64::<LittleEndian>()? as usize;
        let law = if uncentered {
            TailLaw::uncentered(family, alpha)?
        } else {
            TailLaw::new(family, alpha)?
        };
        if (law.x_m() - x_m).abs() > 1e-12 * x_m.abs() {
            return Err(Error::Format(format!("law endpoint mismatch: stored {x_m}, law gives {}", law.x_m())));
        }
        let mut triples = Vec::with_capacity(count.min(MAX_TABLE_SITES));
        let mut x = vec![0i64; d];
        for _ in 0..count {
            let m = input.read_u64::<LittleEndian>()? as usize;
            for c in x.iter_mut() {
                *c = input.read_i64::<LittleEndian>()?;
            }
            let v = input.read_f64::<LittleEndian>()?;
            triples.push((m, x.clone(), v));
        }
        let mut it = triples.into_iter();
        let mut missing = false;
        let mut slab = Self::from_fn(law, n, d, half_width, |m, x| match it.next() {
            Some((tn, tx, v)) if tn == m && tx == x => v,
            _ => {
                missing = true;
                0.0
            }
        })?;
        if missing || it.next().is_some() {
            return Err(Error::Format("slab body does not match its header geometry".into()));
        }
        slab.key = RngKey::with_path(seed, path);
        Ok(slab)
    }
}

/// `⌈L √(N/d)⌉`, capped at `N`.
pub fn diffusive_half_width(n: usize, d: usize, l: f64) -> usize {
    ((l * (n as f64 / d as f64).sqrt()).ceil() as usize).clamp(1, n)
}

fn box_index(x: &[i64], w: usize) -> usize {
    let side = 2 * w + 1;
    x.iter().rev().fold(0, |acc, &c| acc * side + (c + w as i64) as usize)
}

fn family_code(f: LawFamily) -> u8 {
    match f {
        LawFamily::Pareto => 0,
        LawFamily::CenteredPareto => 1,
        LawFamily::LogPareto => 2,
    }
}

fn family_from_code(c: u8) -> Result<LawFamily> {
    Ok(match c {
        0 => LawFamily::Pareto,
        1 => LawFamily::CenteredPareto,
        2 => LawFamily::LogPareto,
        _ => return Err(Error::Format(format!("unknown law family code {c}"))),
    })
}

/// Inverse temperature together with the cutoff and the scale it refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disorder {
    pub beta: f64,
    pub v_n: f64,
    pub trunc: TruncationSpec,
}

impl Disorder {
    /// Untruncated disorder at inverse temperature `beta`.
    pub fn plain(beta: f64) -> Result<Self> {
        Self::new(beta, 1.0, TruncationSpec::NONE)
    }

    pub fn new(beta: f64, v_n: f64, trunc: TruncationSpec) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid("beta", format!("must lie in (0,1), got {beta}")));
        }
        if !(v_n > 0.0) {
            return Err(Error::invalid("V_N", format!("must be positive, got {v_n}")));
        }
        Ok(Disorder { beta, v_n, trunc })
    }

    /// `β_N` with the `[a, b)` cutoff of `plan`.
    pub fn from_plan(plan: &ScalingPlan, a: f64, b: f64) -> Result<Self> {
        Self::new(plan.beta_n, plan.v_n, plan.truncation(a, b)?)
    }

    #[inline]
    pub fn weight_of(&self, eta: f64) -> f64 {
        1.0 + self.beta * self.trunc.apply(eta, self.v_n)
    }
}

/// Fast evaluation of `1 + β η^{[a,b)}_{n,x}` for a slab.
///
/// Lazy slabs compare the site uniform with precomputed tail levels, so the
/// quantile function is only evaluated for values inside the band.
pub struct SiteWeights<'a> {
    slab: &'a EnvSlab,
    disorder: Disorder,
    u_lo: f64,
    u_hi: f64,
    w_low: f64,
}

impl<'a> SiteWeights<'a> {
    fn new(slab: &'a EnvSlab, disorder: &Disorder) -> Self {
        let law = slab.law();
        let t = disorder.trunc;
        let u_lo = if t.a > 0.0 { law.tail_prob(t.a * disorder.v_n) } else { 1.0 };
        let u_hi = if t.b.is_finite() { law.tail_prob(t.b * disorder.v_n) } else { 0.0 };
        SiteWeights {
            slab,
            disorder: *disorder,
            u_lo,
            u_hi,
            w_low: 1.0 - disorder.beta * t.kappa_n_a,
        }
    }

    pub fn disorder(&self) -> &Disorder {
        &self.disorder
    }

    #[inline]
    pub fn at(&self, n: usize, x: &[i64]) -> f64 {
        if self.slab.table.is_some() {
            return self.disorder.weight_of(self.slab.eta(n, x));
        }
        let u = self.slab.uniform(n, x);
        if u > self.u_lo {
            self.w_low
        } else if u <= self.u_hi {
            1.0
        } else {
            1.0 + self.disorder.beta * (self.slab.law.quantile(u) - 1.0)
        }
    }

    /// `1 + βη` on the band `[aV_N, bV_N)` and `1` elsewhere: the weights of
    /// the environment `η 1_Ω`.
    #[inline]
    pub fn band_weight(&self, n: usize, x: &[i64]) -> f64 {
        if self.slab.table.is_some() {
            let eta = self.slab.eta(n, x);
            return if self.disorder.trunc.in_band(eta, self.disorder.v_n) {
                1.0 + self.disorder.beta * eta
            } else {
                1.0
            };
        }
        let u = self.slab.uniform(n, x);
        if u <= self.u_lo && u > self.u_hi {
            1.0 + self.disorder.beta * (self.slab.law.quantile(u) - 1.0)
        } else {
            1.0
        }
    }

    /// Whether `1 + η_{n,x}` falls in `[aV_N, bV_N)`.
    #[inline]
    pub fn in_band(&self, n: usize, x: &[i64]) -> bool {
        if self.slab.table.is_some() {
            return self.disorder.trunc.in_band(self.slab.eta(n, x), self.disorder.v_n);
        }
        let u = self.slab.uniform(n, x);
        u <= self.u_lo && u > self.u_hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law() -> TailLaw {
        TailLaw::centered_pareto(1.5).unwrap()
    }

    #[test]
    fn site_enumeration() {
        let s = EnvSlab::sample(law(), 1, 1, RngKey::new(1)).unwrap();
        let mut v = vec![];
        s.for_each_site(|n, x| v.push((n, x[0])));
        assert_eq!(v, vec![(1, -1), (1, 1)]);
        let s = EnvSlab::sample(law(), 2, 1, RngKey::new(1)).unwrap();
        let mut v = vec![];
        s.for_each_site(|n, x| v.push((n, x[0])));
        assert_eq!(v, vec![(1, -1), (1, 1), (2, -2), (2, 0), (2, 2)]);
        let s = EnvSlab::sample(law(), 3, 2, RngKey::new(1)).unwrap();
        // |{x ∈ Z²: |x|₁ ≤ n, parity n}| = (n+1)²
        assert_eq!(s.site_count(), 4 + 9 + 16);
    }

    #[test]
    fn lazy_values_are_deterministic_and_window_free() {
        let a = EnvSlab::sample(law(), 20, 1, RngKey::new(5)).unwrap();
        let b = EnvSlab::windowed(law(), 20, 1, 4, RngKey::new(5)).unwrap();
        b.for_each_site(|n, x| {
            assert_eq!(a.eta(n, x), b.eta(n, x));
            assert!(a.eta(n, x) > -1.0);
        });
        let m = a.materialize().unwrap();
        a.for_each_site(|n, x| assert_eq!(a.eta(n, x), m.eta(n, x)));
    }

    #[test]
    fn weights_match_truncation() {
        let l = law();
        let slab = EnvSlab::sample(l, 30, 1, RngKey::new(11)).unwrap();
        let dis = Disorder::new(0.3, 4.0, TruncationSpec::new(&l, 0.5, 2.0, 4.0).unwrap()).unwrap();
        let w = slab.weights(&dis);
        let table = slab.materialize().unwrap();
        let wt = table.weights(&dis);
        slab.for_each_site(|n, x| {
            let direct = dis.weight_of(slab.eta(n, x));
            assert!((w.at(n, x) - direct).abs() < 1e-12);
            assert_eq!(wt.at(n, x), direct);
            assert_eq!(w.in_band(n, x), wt.in_band(n, x));
        });
    }

    #[test]
    fn binary_roundtrip() {
        let slab = EnvSlab::sample(law(), 6, 2, RngKey::new(3).derive(9)).unwrap();
        let mut buf = Vec::new();
        slab.write_to(&mut buf).unwrap();
        let back = EnvSlab::read_from(&buf[..]).unwrap();
        assert_eq!(back.key(), slab.key());
        slab.for_each_site(|n, x| assert_eq!(slab.eta(n, x), back.eta(n, x)));
        buf[0] = b'X';
        assert!(matches!(EnvSlab::read_from(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn guards() {
        assert!(matches!(
            EnvSlab::sample(law(), 1000, 3, RngKey::new(0)),
            Err(Error::Resource(_))
        ));
        assert!(EnvSlab::from_fn(law(), 2, 1, 2, |_, _| -1.0).is_err());
        assert!(Disorder::plain(1.0).is_err());
    }
}
