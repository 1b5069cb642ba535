use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type FnRd = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type FnPath = Arc<dyn Fn(&[Vec<f64>]) -> f64 + Send + Sync>;

/// A bounded function of one position `y ∈ ℝ^d`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Constant { value: f64 },
    /// `1{lo ≤ y < hi}` coordinatewise.
    Indicator { lo: Vec<f64>, hi: Vec<f64> },
    /// `exp(-|y - center|² / (2 width²))`.
    Gaussian { center: Vec<f64>, width: f64 },
    /// `y[axis]`; unbounded, meant for moment checks.
    Coordinate { axis: usize },
    #[serde(skip)]
    Custom(FnRd),
}

impl fmt::Debug for Marginal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Marginal::Constant { value } => write!(f, "Constant({value})"),
            Marginal::Indicator { lo, hi } => write!(f, "Indicator({lo:?}, {hi:?})"),
            Marginal::Gaussian { center, width } => write!(f, "Gaussian({center:?}, {width})"),
            Marginal::Coordinate { axis } => write!(f, "Coordinate({axis})"),
            Marginal::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Marginal {
    pub fn custom<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Marginal::Custom(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            Marginal::Constant { value } => *value,
            Marginal::Indicator { lo, hi } => {
                let inside = y.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *v >= *l && *v < *h);
                inside as u8 as f64
            }
            Marginal::Gaussian { center, width } => {
                let r2: f64 = y.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                (-0.5 * r2 / (width * width)).exp()
            }
            Marginal::Coordinate { axis } => y[*axis],
            Marginal::Custom(f) => f(y),
        }
    }

    fn check(&self, d: usize) -> Result<()> {
        let bad = match self {
            Marginal::Indicator { lo, hi } => lo.len() != d || hi.len() != d,
            Marginal::Gaussian { center, width } => center.len() != d || !(*width > 0.0),
            Marginal::Coordinate { axis } => *axis >= d,
            _ => false,
        };
        if bad {
            return Err(Error::invalid("functional", format!("marginal {self:?} does not fit dimension {d}")));
        }
        Ok(())
    }
}

/// `g(B_{t_1}, …, B_{t_k})` at fixed times.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cylinder {
    pub times: Vec<f64>,
    pub g: CylinderFn,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CylinderFn {
    /// `Π g_i(y_i)`: factors through the Markov structure.
    Product(Vec<Marginal>),
    /// A general `g`; only path-by-path evaluation is possible.
    #[serde(skip)]
    Joint(FnPath),
}

impl fmt::Debug for CylinderFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CylinderFn::Product(m) => f.debug_tuple("Product").field(m).finish(),
            CylinderFn::Joint(_) => write!(f, "Joint"),
        }
    }
}

/// Test functional of the rescaled path.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathFunctional {
    ConstantOne,
    Cylinder(Cylinder),
    /// `h_A(M)·base` with `M = sup_t ‖S_t‖₂` and `h_A(M) = clamp(A + 1 - M, 0, 1)`.
    SupportCutoff { radius: f64, base: Box<PathFunctional> },
    /// `Σ c_i f_i`.
    Linear { terms: Vec<(f64, PathFunctional)> },
}

impl Default for PathFunctional {
    fn default() -> Self {
        PathFunctional::ConstantOne
    }
}

/// `clamp(A + 1 - m, 0, 1)`.
#[inline]
pub fn cutoff_ramp(radius: f64, m: f64) -> f64 {
    (radius + 1.0 - m).clamp(0.0, 1.0)
}

impl PathFunctional {
    pub fn product(times: Vec<f64>, marginals: Vec<Marginal>) -> Self {
        PathFunctional::Cylinder(Cylinder {
            times,
            g: CylinderFn::Product(marginals),
        })
    }

    pub fn joint<F: Fn(&[Vec<f64>]) -> f64 + Send + Sync + 'static>(times: Vec<f64>, g: F) -> Self {
        PathFunctional::Cylinder(Cylinder {
            times,
            g: CylinderFn::Joint(Arc::new(g)),
        })
    }

    pub fn support_cutoff(radius: f64) -> Self {
        PathFunctional::SupportCutoff {
            radius,
            base: Box::new(PathFunctional::ConstantOne),
        }
    }

    pub fn is_one(&self) -> bool {
        matches!(self, PathFunctional::ConstantOne)
    }

    /// Short label for result files.
    pub fn label(&self) -> String {
        match self {
            PathFunctional::ConstantOne => "one".into(),
            PathFunctional::Cylinder(c) => format!(
                "cylinder[{}]",
                c.times.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(";")
            ),
            PathFunctional::SupportCutoff { radius, base } => format!("cutoff({radius})*{}", base.label()),
            PathFunctional::Linear { terms } => format!("linear({})", terms.len()),
        }
    }

    /// Validate against the dimension.
    pub fn check(&self, d: usize) -> Result<()> {
        match self {
            PathFunctional::ConstantOne => Ok(()),
            PathFunctional::Cylinder(c) => {
                if c.times.is_empty() {
                    return Err(Error::invalid("functional", "cylinder needs at least one time"));
                }
                if c.times.iter().any(|t| !(0.0..=1.0).contains(t)) {
                    return Err(Error::invalid("functional", "cylinder times must lie in [0,1]"));
                }
                if c.times.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid("functional", "cylinder times must be strictly increasing"));
                }
                if let CylinderFn::Product(m) = &c.g {
                    if m.len() != c.times.len() {
                        return Err(Error::invalid("functional", "one marginal per cylinder time is required"));
                    }
                    m.iter().try_for_each(|g| g.check(d))?;
                }
                Ok(())
            }
            PathFunctional::SupportCutoff { radius, base } => {
                if !(*radius >= 0.0) {
                    return Err(Error::invalid("functional", "support cutoff radius must be ≥ 0"));
                }
                base.check(d)
            }
            PathFunctional::Linear { terms } => terms.iter().try_for_each(|(_, f)| f.check(d)),
        }
    }

    /// Evaluate on a continuous path given by a position oracle and its sup-norm.
    pub fn eval_with<P: Fn(f64) -> Vec<f64>>(&self, pos: &P, sup_norm: f64) -> f64 {
        match self {
            PathFunctional::ConstantOne => 1.0,
            PathFunctional::Cylinder(c) => {
                let ys: Vec<Vec<f64>> = c.times.iter().map(|&t| pos(t)).collect();
                match &c.g {
                    CylinderFn::Product(m) => m.iter().zip(&ys).map(|(g, y)| g.eval(y)).product(),
                    CylinderFn::Joint(g) => g(&ys),
                }
            }
            PathFunctional::SupportCutoff { radius, base } => {
                let h = cutoff_ramp(*radius, sup_norm);
                if h == 0.0 {
                    0.0
                } else {
                    h * base.eval_with(pos, sup_norm)
                }
            }
            PathFunctional::Linear { terms } => terms.iter().map(|(c, f)| c * f.eval_with(pos, sup_norm)).sum(),
        }
    }

    /// Evaluate on a lattice path of `N` steps, after diffusive rescaling.
    pub fn eval_lattice(&self, path: &WalkPath) -> f64 {
        let r = RescaledPath::new(path);
        self.eval_with(&|t| r.at_unchecked(t), r.sup_norm())
    }

    /// Expand into terms that factor over the Markov structure of the walk.
    pub(crate) fn factor(&self, n: usize, d: usize) -> Result<Vec<FactoredTerm>> {
        match self {
            PathFunctional::ConstantOne => Ok(vec![FactoredTerm::unit()]),
            PathFunctional::Cylinder(c) => {
                let marginals = match &c.g {
                    CylinderFn::Product(m) => m,
                    CylinderFn::Joint(_) => {
                        return Err(Error::Unsupported(
                            "a joint cylinder function does not factor over time; use partition_mc or partition_bruteforce"
                                .into(),
                        ))
                    }
                };
                let mut term = FactoredTerm::unit();
                for (&t, g) in c.times.iter().zip(marginals) {
                    let nt = t * n as f64;
                    let m = nt.floor();
                    let theta = nt - m;
                    if theta < 1e-12 || m as usize >= n {
                        term.vertex.push((nt.round() as usize, g.clone()));
                    } else if 1.0 - theta < 1e-12 {
                        term.vertex.push((m as usize + 1, g.clone()));
                    } else {
                        term.edge.push((m as usize, theta, g.clone()));
                    }
                }
                Ok(vec![term])
            }
            PathFunctional::SupportCutoff { radius, base } => {
                let base_terms = base.factor(n, d)?;
                let levels = cutoff_levels(*radius, n, d);
                let mut out = Vec::with_capacity(base_terms.len() * levels.len());
                for bt in &base_terms {
                    for &(q, w) in &levels {
                        let mut t = bt.clone();
                        t.coef *= w;
                        t.ball = match (t.ball, q) {
                            (Some(a), Some(b)) => Some(a.min(b)),
                            (a, b) => a.or(b),
                        };
                        out.push(t);
                    }
                }
                Ok(out)
            }
            PathFunctional::Linear { terms } => {
                let mut out = Vec::new();
                for (c, f) in terms {
                    for mut t in f.factor(n, d)? {
                        t.coef *= c;
                        out.push(t);
                    }
                }
                Ok(out)
            }
        }
    }
}

/// A functional of the form `coef · Π_vertex g(S_m) · Π_edge g(interp) · 1{max ‖S_k‖² ≤ q}`.
#[derive(Clone, Debug)]
pub(crate) struct FactoredTerm {
    pub coef: f64,
    pub vertex: Vec<(usize, Marginal)>,
    /// `(m, θ, g)`: `g` at `(1-θ) S_m + θ S_{m+1}`.
    pub edge: Vec<(usize, f64, Marginal)>,
    pub ball: Option<i64>,
}

impl FactoredTerm {
    pub fn unit() -> Self {
        FactoredTerm {
            coef: 1.0,
            vertex: Vec::new(),
            edge: Vec::new(),
            ball: None,
        }
    }
}

/// `⌊√q⌋` for `q ≥ 0`.
pub(crate) fn isqrt(q: i64) -> i64 {
    let mut r = (q as f64).sqrt() as i64;
    while r * r > q {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= q {
        r += 1;
    }
    r
}

/// Telescoping decomposition `h_A(M) = Σ_j w_j 1{Q ≤ q_j}` over attainable
/// squared norms `Q = max_k ‖S_k‖²`. `None` stands for an always-true level.
pub(crate) fn cutoff_levels(radius: f64, n: usize, d: usize) -> Vec<(Option<i64>, f64)> {
    let scale = (d as f64 / n as f64).sqrt();
    let g = |q: i64| cutoff_ramp(radius, scale * (q as f64).sqrt());
    let q_reach = (n as i64) * (n as i64);
    let q_top = ((radius + 1.0) / scale).powi(2).ceil() as i64 + 1;
    let upper = q_top.min(q_reach);
    let attainable = sums_of_squares(d, upper);
    // first level: largest attainable q with g(q) = 1
    let mut qs: Vec<i64> = Vec::new();
    let mut base = 0;
    for &q in &attainable {
        if g(q) >= 1.0 {
            base = q;
        }
    }
    qs.push(base);
    qs.extend(attainable.iter().copied().filter(|&q| q > base && g(q) > 0.0));
    let mut out = Vec::with_capacity(qs.len());
    for (i, &q) in qs.iter().enumerate() {
        let next = qs.get(i + 1).map(|&q2| g(q2)).unwrap_or(0.0);
        let w = g(q) - next;
        if q >= q_reach {
            out.push((None, g(q)));
            break;
        }
        if w != 0.0 {
            out.push((Some(q), w));
        }
    }
    out
}

/// Sorted integers in `[0, upper]` that are sums of `d` squares.
fn sums_of_squares(d: usize, upper: i64) -> Vec<i64> {
    if d >= 4 {
        return (0..=upper).collect();
    }
    let mut hit = vec![false; upper as usize + 1];
    let r = (upper as f64).sqrt() as i64 + 1;
    match d {
        1 => (0..=r).filter(|i| i * i <= upper).for_each(|i| hit[(i * i) as usize] = true),
        2 => {
            for i in 0..=r {
                for j in i..=r {
                    let q = i * i + j * j;
                    if q <= upper {
                        hit[q as usize] = true;
                    }
                }
            }
        }
        _ => {
            for i in 0..=r {
                for j in i..=r {
                    for k in j..=r {
                        let q = i * i + j * j + k * k;
                        if q <= upper {
                            hit[q as usize] = true;
                        }
                    }
                }
            }
        }
    }
    hit.iter().enumerate().filter(|(_, h)| **h).map(|(q, _)| q as i64).collect()
}

/// A lattice path `S_0 = 0, …, S_N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkPath {
    pub d: usize,
    /// Flattened positions, `(N + 1) · d` entries.
    pub coords: Vec<i64>,
}

impl WalkPath {
    pub fn from_positions(d: usize, positions: &[Vec<i64>]) -> Self {
        WalkPath {
            d,
            coords: positions.iter().flatten().copied().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn at(&self, k: usize) -> &[i64] {
        &self.coords[k * self.d..(k + 1) * self.d]
    }

    /// `max_k ‖S_k‖₂²`.
    pub fn max_norm2(&self) -> i64 {
        self.coords
            .chunks(self.d)
            .map(|x| x.iter().map(|c| c * c).sum::<i64>())
            .max()
            .unwrap_or(0)
    }
}

/// Diffusively rescaled, linearly interpolated path on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct RescaledPath<'a> {
    path: &'a WalkPath,
    n: usize,
    scale: f64,
}

impl<'a> RescaledPath<'a> {
    pub fn new(path: &'a WalkPath) -> Self {
        let n = path.len();
        RescaledPath {
            path,
            n,
            scale: (path.d as f64 / n.max(1) as f64).sqrt(),
        }
    }

    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid("t", format!("time must lie in [0,1], got {t}")));
        }
        Ok(self.at_unchecked(t))
    }

    fn at_unchecked(&self, t: f64) -> Vec<f64> {
        let nt = t * self.n as f64;
        let k = (nt.floor() as usize).min(self.n);
        let th = nt - k as f64;
        let a = self.path.at(k);
        if k == self.n || th == 0.0 {
            return a.iter().map(|&c| self.scale * c as f64).collect();
        }
        let b = self.path.at(k + 1);
        a.iter()
            .zip(b)
            .map(|(&u, &v)| self.scale * ((1.0 - th) * u as f64 + th * v as f64))
            .collect()
    }

    /// `sup_t ‖S^{(N)}_t‖₂`, attained at a lattice time.
    pub fn sup_norm(&self) -> f64 {
        self.scale * (self.path.max_norm2() as f64).sqrt()
    }
}

/// `S^{(N)}` for a path of `n` steps in dimension `d`.
pub fn rescale_path(path: &WalkPath, n: usize, d: usize) -> Result<RescaledPath<'_>> {
    if path.len() != n || path.d != d {
        return Err(Error::invalid("path", format!("expected {n} steps in d={d}, got {} in d={}", path.len(), path.d)));
    }
    Ok(RescaledPath::new(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_examples() {
        let p = WalkPath::from_positions(1, &[vec![0], vec![1], vec![2], vec![1]]);
        let r = rescale_path(&p, 3, 1).unwrap();
        let s = (1.0f64 / 3.0).sqrt();
        assert_eq!(r.at(0.0).unwrap(), vec![0.0]);
        assert!((r.at(2.0 / 3.0).unwrap()[0] - 2.0 * s).abs() < 1e-15);
        assert!((r.at(1.5 / 3.0).unwrap()[0] - 1.5 * s).abs() < 1e-15);
        assert!((r.at(1.0).unwrap()[0] - s).abs() < 1e-15);
        assert!(r.at(1.5).is_err());
        assert!((r.sup_norm() - 2.0 * s).abs() < 1e-15);
    }

    #[test]
    fn telescoping_reproduces_ramp() {
        for (radius, n, d) in [(1.0, 16, 1), (0.5, 9, 2), (2.0, 25, 1), (0.0, 4, 3), (3.0, 64, 2)] {
            let levels = cutoff_levels(radius, n, d);
            let scale = (d as f64 / n as f64).sqrt();
            for q in sums_of_squares(d, (n * n) as i64) {
                let tele: f64 = levels
                    .iter()
                    .map(|&(l, w)| if l.map_or(true, |l| q <= l) { w } else { 0.0 })
                    .sum();
                let direct = cutoff_ramp(radius, scale * (q as f64).sqrt());
                assert!((tele - direct).abs() < 1e-12, "A={radius} N={n} d={d} q={q}: {tele} vs {direct}");
            }
        }
    }

    #[test]
    fn factoring_rules() {
        let f = PathFunctional::joint(vec![0.5], |y| y[0][0]);
        assert!(matches!(f.factor(4, 1), Err(Error::Unsupported(_))));
        let g = PathFunctional::product(vec![0.25, 0.6], vec![Marginal::Coordinate { axis: 0 }, Marginal::Constant { value: 2.0 }]);
        let t = g.factor(4, 1).unwrap();
        assert_eq!(t[0].vertex.len(), 1);
        assert_eq!(t[0].vertex[0].0, 1);
        assert_eq!(t[0].edge.len(), 1);
        assert_eq!(t[0].edge[0].0, 2);
        assert!((t[0].edge[0].1 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn serde_roundtrip() {
        let f = PathFunctional::SupportCutoff {
            radius: 3.0,
            base: Box::new(PathFunctional::product(vec![1.0], vec![Marginal::Gaussian { center: vec![0.0], width: 1.0 }])),
        };
        let s = serde_json::to_string(&f).unwrap();
        let back: PathFunctional = serde_json::from_str(&s).unwrap();
        assert_eq!(back.label(), f.label());
    }
}
