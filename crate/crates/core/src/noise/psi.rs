use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::cloud::PoissonCloud;
use crate::error::{Error, Result};
use crate::quad::CompositeLegendre;
use crate::tail::kappa_a;

/// The compact bump `e^{-1/(1-u²)}` on `(-1, 1)`.
pub fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// `∫_{-1}^{1} bump`.
pub fn bump_integral() -> f64 {
    static I: OnceLock<f64> = OnceLock::new();
    *I.get_or_init(|| CompositeLegendre::new(24).integrate(-1.0, 1.0, 32, bump))
}

/// Separable smooth test function
/// `ψ(t, x) = A · bump((t - t₀)/r_t) · Π_k bump((x_k - c_k)/r_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub amplitude: f64,
    pub time_center: f64,
    pub time_radius: f64,
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
}

impl TestFunction {
    pub fn new(amplitude: f64, time_center: f64, time_radius: f64, center: Vec<f64>, radius: Vec<f64>) -> Result<Self> {
        let psi = TestFunction {
            amplitude,
            time_center,
            time_radius,
            center,
            radius,
        };
        psi.validate()?;
        Ok(psi)
    }

    /// The zero function (support kept so windows still make sense).
    pub fn zero(d: usize) -> Self {
        TestFunction {
            amplitude: 0.0,
            time_center: 0.5,
            time_radius: 0.25,
            center: vec![0.0; d],
            radius: vec![1.0; d],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(Error::invalid("psi.amplitude", "must be finite"));
        }
        if !(self.time_radius > 0.0) || self.time_center - self.time_radius < 0.0 || self.time_center + self.time_radius > 1.0 {
            return Err(Error::invalid("psi.time", "time support must be a non-empty interval inside [0, 1]"));
        }
        if self.center.len() != self.radius.len() || self.center.is_empty() {
            return Err(Error::invalid("psi.center", "center and radius need one entry per dimension"));
        }
        if self.radius.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::invalid("psi.radius", "radii must be positive"));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.center.len()
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let mut v = self.amplitude * bump((t - self.time_center) / self.time_radius);
        for ((xk, c), r) in x.iter().zip(&self.center).zip(&self.radius) {
            if v == 0.0 {
                break;
            }
            v *= bump((xk - c) / r);
        }
        v
    }

    /// `∫ψ dt dx`, a product of one-dimensional quadratures.
    pub fn integral(&self) -> f64 {
        let i = bump_integral();
        self.amplitude * self.time_radius * i * self.radius.iter().map(|r| r * i).product::<f64>()
    }

    /// Spatial support `(lo, hi)` per coordinate.
    pub fn spatial_support(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.center.iter().zip(&self.radius).map(|(c, r)| c - r).collect();
        let hi = self.center.iter().zip(&self.radius).map(|(c, r)| c + r).collect();
        (lo, hi)
    }
}

/// Which centering is subtracted from the truncated noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// `κ_a`: `0`, `log(1/a)`, `α a^{1-α}/(α-1)` for `α <, =, > 1`.
    #[default]
    Standard,
    /// `κ'_a = α(a^{1-α} - 1)/(α-1)` for `α ≠ 1` (`log(1/a)` at `α = 1`).
    Shifted,
}

impl Centering {
    pub fn value(self, alpha: f64, a: f64) -> Result<f64> {
        match self {
            Centering::Standard => kappa_a(alpha, a),
            Centering::Shifted => {
                if !(a > 0.0) {
                    return Err(Error::invalid("a", format!("cutoff must be positive, got {a}")));
                }
                Ok(if alpha == 1.0 {
                    (1.0 / a).ln()
                } else {
                    alpha / (alpha - 1.0) * (a.powf(1.0 - alpha) - 1.0)
                })
            }
        }
    }
}

/// `⟨ξ_ω^{(a)}, ψ⟩ = Σ υ ψ(t, x) 1{υ ≥ a} - κ_a ∫ψ` for `a` at or above the
/// cloud's floor.
pub fn pair_noise(cloud: &PoissonCloud, psi: &TestFunction, a: f64) -> Result<f64> {
    pair_noise_with(cloud, psi, a, Centering::Standard)
}

pub fn pair_noise_with(cloud: &PoissonCloud, psi: &TestFunction, a: f64, centering: Centering) -> Result<f64> {
    if !(a >= cloud.a) {
        return Err(Error::invalid("a", format!("cutoff {a} below the cloud floor {}", cloud.a)));
    }
    if psi.d() != cloud.d {
        return Err(Error::invalid("psi", format!("dimension {} does not match the cloud's {}", psi.d(), cloud.d)));
    }
    let (lo, hi) = psi.spatial_support();
    if !cloud.covers(&lo, &hi) {
        return Err(Error::invalid("L", "window too small for the support of psi"));
    }
    if psi.is_zero() {
        return Ok(0.0);
    }
    let sum: f64 = cloud
        .points()
        .iter()
        .filter(|p| p.weight >= a)
        .map(|p| p.weight * psi.eval(p.t, &p.x))
        .sum();
    Ok(sum - centering.value(cloud.alpha, a)? * psi.integral())
}
