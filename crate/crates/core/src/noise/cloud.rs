use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub weight: f64,
}

/// Points of the Poisson process with intensity `dt ⊗ dx ⊗ αυ^{-1-α}dυ`
/// restricted to `[0,1] × (c + [-L, L]^d) × [a, ∞)`, sorted by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonCloud {
    pub alpha: f64,
    pub a: f64,
    pub half_width: f64,
    pub d: usize,
    pub center: Vec<f64>,
    pub seed: Option<u64>,
    points: Vec<CloudPoint>,
}

fn check_window(alpha: f64, a: f64, half_width: f64, d: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 2), got {alpha}")));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid("a", format!("weight floor must be positive (the intensity is infinite at 0), got {a}")));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::invalid("L", format!("window half-width must be positive, got {half_width}")));
    }
    if d == 0 {
        return Err(Error::invalid("d", "dimension must be at least 1"));
    }
    Ok(())
}

/// `(2L)^d a^{-α}`, the expected number of points.
pub fn expected_count(alpha: f64, a: f64, half_width: f64, d: usize) -> f64 {
    (2.0 * half_width).powi(d as i32) * a.powf(-alpha)
}

/// Draw a cloud: a Poisson number of points, uniform in time and space,
/// weights with `P(υ > v) = (a/v)^α`.
pub fn sample_cloud(alpha: f64, a: f64, half_width: f64, d: usize, key: RngKey) -> Result<PoissonCloud> {
    check_window(alpha, a, half_width, d)?;
    let mean = expected_count(alpha, a, half_width, d);
    if mean > 5e7 {
        return Err(Error::Resource(format!("expected {mean:.3e} cloud points")));
    }
    let mut rng = key.stream();
    let count = Poisson::new(mean)
        .map_err(|e| Error::invalid("a", e.to_string()))?
        .sample(&mut rng) as usize;
    let mut points: Vec<CloudPoint> = (0..count)
        .map(|_| {
            let t = rng.random::<f64>();
            let x = (0..d).map(|_| half_width * (2.0 * rng.random::<f64>() - 1.0)).collect();
            // 1 - U lies in (0, 1], so the weight is finite
            let u = 1.0 - rng.random::<f64>();
            CloudPoint { t, x, weight: a * u.powf(-1.0 / alpha) }
        })
        .collect();
    points.sort_by(|p, q| p.t.total_cmp(&q.t));
    Ok(PoissonCloud {
        alpha,
        a,
        half_width,
        d,
        center: vec![0.0; d],
        seed: Some(key.seed()),
        points,
    })
}

impl PoissonCloud {
    /// Build a cloud from explicit points (window centred at the origin).
    pub fn from_points(alpha: f64, a: f64, half_width: f64, d: usize, mut points: Vec<CloudPoint>) -> Result<Self> {
        check_window(alpha, a, half_width, d)?;
        for p in &points {
            if p.x.len() != d {
                return Err(Error::invalid("points", format!("expected {d} coordinates, got {}", p.x.len())));
            }
            if !(0.0..=1.0).contains(&p.t) {
                return Err(Error::invalid("points", format!("time {} outside [0, 1]", p.t)));
            }
            if p.x.iter().any(|c| c.abs() > half_width) {
                return Err(Error::invalid("points", format!("position {:?} outside the window", p.x)));
            }
            if !(p.weight >= a) || !p.weight.is_finite() {
                return Err(Error::invalid("points", format!("weight {} below the floor {a}", p.weight)));
            }
        }
        points.sort_by(|p, q| p.t.total_cmp(&q.t));
        Ok(PoissonCloud {
            alpha,
            a,
            half_width,
            d,
            center: vec![0.0; d],
            seed: None,
            points,
        })
    }

    pub fn points(&self) -> &[CloudPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The sub-cloud of weights `≥ a'`; a nested family as `a'` decreases.
    pub fn restrict(&self, a: f64) -> Result<Self> {
        if !(a >= self.a) {
            return Err(Error::invalid("a", format!("cannot lower the floor {} to {a}", self.a)));
        }
        let mut out = self.clone();
        out.a = a;
        out.points.retain(|p| p.weight >= a);
        Ok(out)
    }

    /// The same cloud translated in space, window included.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.d {
            return Err(Error::invalid("shift", format!("expected {} coordinates", self.d)));
        }
        let mut out = self.clone();
        for (c, s) in out.center.iter_mut().zip(shift) {
            *c += s;
        }
        for p in &mut out.points {
            for (c, s) in p.x.iter_mut().zip(shift) {
                *c += s;
            }
        }
        Ok(out)
    }

    /// Is the box `Π [lo_k, hi_k]` inside the spatial window?
    pub fn covers(&self, lo: &[f64], hi: &[f64]) -> bool {
        self.center
            .iter()
            .zip(lo.iter().zip(hi))
            .all(|(c, (l, h))| *l >= c - self.half_width && *h <= c + self.half_width)
    }

    /// CSV: a parameter header `alpha,a,L,d,seed` and its values, then the
    /// column header `t,x1..xd,upsilon` and one row per point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["alpha", "a", "L", "d", "seed"])?;
        w.write_record([
            self.alpha.to_string(),
            self.a.to_string(),
            self.half_width.to_string(),
            self.d.to_string(),
            self.seed.map_or(String::new(), |s| s.to_string()),
        ])?;
        let mut head = vec!["t".to_string()];
        head.extend((1..=self.d).map(|k| format!("x{k}")));
        head.push("upsilon".into());
        w.write_record(&head)?;
        for p in &self.points {
            let mut row = vec![p.t.to_string()];
            row.extend(p.x.iter().map(|v| v.to_string()));
            row.push(p.weight.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
        let mut records = r.records();
        let mut next = || -> Result<csv::StringRecord> {
            records
                .next()
                .ok_or_else(|| Error::Format("truncated cloud file".into()))?
                .map_err(Error::from)
        };
        let _ = next()?;
        let params = next()?;
        let num = |i: usize| -> Result<f64> {
            params
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Format(format!("bad parameter field {i}")))
        };
        let (alpha, a, half_width) = (num(0)?, num(1)?, num(2)?);
        let d = num(3)? as usize;
        let seed = params.get(4).and_then(|s| s.parse().ok());
        let _ = next()?;
        let mut points = Vec::new();
        for rec in records {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.parse().map_err(|_| Error::Format(format!("bad number {s:?}"))))
                .collect::<Result<_>>()?;
            if vals.len() != d + 2 {
                return Err(Error::Format(format!("expected {} columns, got {}", d + 2, vals.len())));
            }
            points.push(CloudPoint {
                t: vals[0],
                x: vals[1..=d].to_vec(),
                weight: vals[d + 1],
            });
        }
        let mut cloud = PoissonCloud::from_points(alpha, a, half_width, d, points)?;
        cloud.seed = seed;
        Ok(cloud)
    }
}
