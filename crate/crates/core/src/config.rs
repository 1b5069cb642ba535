//! Experiment configuration: a TOML file, validated in full before any
//! computation starts.
//!
//! ```toml
//! experiment = "converge"
//! replicas = 10000
//! seed = 7
//! output = "runs/converge"
//!
//! [law]
//! family = "centered_pareto"
//! alpha = 1.5
//!
//! [geometry]
//! N_grid = [256, 1024, 4096]
//! d = 1
//! L = 6.0
//!
//! [disorder]
//! beta_hat = 1.0
//! a = 0.2
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::PathFunctional;
use crate::noise::TestFunction;
use crate::stats::Statistic;
use crate::tail::{alpha_c, cutoff_spec, LawFamily, ScalingPlan, TailLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SimulateDiscrete,
    SimulateContinuum,
    Converge,
    TruncationCurve,
    Moments,
    VerifyAppendix,
    ReplicaMoment,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::SimulateDiscrete,
        ExperimentKind::SimulateContinuum,
        ExperimentKind::Converge,
        ExperimentKind::TruncationCurve,
        ExperimentKind::Moments,
        ExperimentKind::VerifyAppendix,
        ExperimentKind::ReplicaMoment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SimulateDiscrete => "simulate-discrete",
            ExperimentKind::SimulateContinuum => "simulate-continuum",
            ExperimentKind::Converge => "converge",
            ExperimentKind::TruncationCurve => "truncation-curve",
            ExperimentKind::Moments => "moments",
            ExperimentKind::VerifyAppendix => "verify-appendix",
            ExperimentKind::ReplicaMoment => "replica-moment",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid("experiment", format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    pub family: LawFamily,
    pub alpha: f64,
}

impl Default for LawConfig {
    fn default() -> Self {
        LawConfig {
            family: LawFamily::CenteredPareto,
            alpha: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "N_grid", default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    pub d: usize,
    /// Half-width of the rescaled spatial window; lattice slabs use
    /// `L·√(N/d)` sites, clouds the box `[-L, L]^d`.
    #[serde(rename = "L", default = "default_half_width")]
    pub half_width: f64,
}

fn default_half_width() -> f64 {
    6.0
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            n: None,
            n_grid: None,
            d: 1,
            half_width: default_half_width(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    pub beta_hat: f64,
    #[serde(default)]
    pub a: f64,
    /// Upper cutoff; absent means `∞`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_grid: Option<Vec<f64>>,
}

impl Default for DisorderConfig {
    fn default() -> Self {
        DisorderConfig {
            beta_hat: 1.0,
            a: 0.0,
            b: None,
            a_grid: None,
        }
    }
}

impl DisorderConfig {
    pub fn upper(&self) -> f64 {
        self.b.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Path draws per cloud when a continuum value needs Monte Carlo.
    #[serde(default = "default_path_samples")]
    pub path_samples: usize,
    #[serde(default = "default_statistics")]
    pub statistics: Vec<Statistic>,
    #[serde(default = "default_true")]
    pub bootstrap: bool,
    /// Monte Carlo draws per appendix comparison.
    #[serde(default = "default_appendix_samples")]
    pub appendix_samples: usize,
}

fn default_path_samples() -> usize {
    256
}
fn default_statistics() -> Vec<Statistic> {
    vec![Statistic::Ks, Statistic::Wasserstein1]
}
fn default_true() -> bool {
    true
}
fn default_appendix_samples() -> usize {
    200_000
}

impl Default for Options {
    fn default() -> Self {
        Options {
            path_samples: default_path_samples(),
            statistics: default_statistics(),
            bootstrap: true,
            appendix_samples: default_appendix_samples(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub law: LawConfig,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default)]
    pub disorder: DisorderConfig,
    #[serde(default)]
    pub functional: PathFunctional,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<TestFunction>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub options: Options,
}

fn default_replicas() -> usize {
    1000
}
fn default_output() -> PathBuf {
    PathBuf::from("polymerlab-out")
}

/// Maps the bare parameter names used by library errors to config paths.
fn scoped(e: Error) -> Error {
    match e {
        Error::Invalid { name, reason } => {
            let path = match name.as_str() {
                "alpha" => "law.alpha",
                "family" => "law.family",
                "N" => "geometry.N",
                "d" => "geometry.d",
                "L" => "geometry.L",
                "beta_hat" => "disorder.beta_hat",
                "a" => "disorder.a",
                "b" => "disorder.b",
                "a_grid" => "disorder.a_grid",
                "replicas" => "replicas",
                "functional" => "functional",
                other if other.starts_with("psi") => other,
                other => return Error::Invalid { name: other.into(), reason },
            };
            Error::Invalid { name: path.into(), reason }
        }
        other => other,
    }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            law: LawConfig::default(),
            geometry: Geometry::default(),
            disorder: DisorderConfig::default(),
            functional: PathFunctional::ConstantOne,
            psi: None,
            replicas: default_replicas(),
            seed: 0,
            output: default_output(),
            options: Options::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::invalid("config", e.message().to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form of the effective config. The
    /// output location is left out: it does not influence any result.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = PathBuf::new();
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The tail law; `α ≥ α_c(d)` is reported before anything else.
    pub fn tail_law(&self) -> Result<TailLaw> {
        let d = self.geometry.d;
        if d == 0 {
            return Err(Error::invalid("geometry.d", "dimension must be at least 1"));
        }
        let ac = alpha_c(d);
        let alpha = self.law.alpha;
        if self.experiment != ExperimentKind::VerifyAppendix && !(alpha < ac) {
            return Err(Error::invalid(
                "law.alpha",
                format!(
                    "α = {alpha} must lie below the critical exponent α_c(d) = min(1 + 2/d, 2) = {ac} for d = {d}; \
                     at or above it the continuum polymer is degenerate"
                ),
            ));
        }
        TailLaw::new(self.law.family, alpha).map_err(scoped)
    }

    /// The system sizes this experiment runs at.
    pub fn sizes(&self) -> Result<Vec<usize>> {
        let g = &self.geometry;
        let v = match (&g.n, &g.n_grid) {
            (Some(_), Some(_)) => return Err(Error::invalid("geometry.N", "give either N or N_grid, not both")),
            (Some(n), None) => vec![*n],
            (None, Some(grid)) => grid.clone(),
            (None, None) => Vec::new(),
        };
        if v.iter().any(|&n| n == 0) {
            return Err(Error::invalid("geometry.N", "system lengths must be at least 1"));
        }
        Ok(v)
    }

    pub fn a_grid(&self) -> Vec<f64> {
        self.disorder.a_grid.clone().unwrap_or_else(|| vec![self.disorder.a])
    }

    /// Full validation. Every error names the offending field.
    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        let law = self.tail_law()?;
        let d = self.geometry.d;
        let sizes = self.sizes()?;
        let dis = &self.disorder;
        let l = self.geometry.half_width;
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::invalid("geometry.L", format!("window half-width must be positive, got {l}")));
        }
        if !(dis.beta_hat > 0.0 && dis.beta_hat.is_finite()) {
            return Err(Error::invalid("disorder.beta_hat", format!("must be positive, got {}", dis.beta_hat)));
        }
        if !(dis.a >= 0.0 && dis.a.is_finite()) {
            return Err(Error::invalid("disorder.a", format!("cutoff must be finite and ≥ 0, got {}", dis.a)));
        }
        if let Some(b) = dis.b {
            if !(b > dis.a) {
                return Err(Error::invalid("disorder.b", format!("upper cutoff {b} must exceed a = {}", dis.a)));
            }
        }
        if let Some(grid) = &dis.a_grid {
            if grid.is_empty() || grid.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                return Err(Error::invalid("disorder.a_grid", "cutoffs must be finite, ≥ 0, and at least one"));
            }
        }
        if self.replicas == 0 {
            return Err(Error::invalid("replicas", "need at least one replica"));
        }
        if self.experiment != VerifyAppendix {
            self.functional.check(d).map_err(scoped)?;
        }
        if let Some(psi) = &self.psi {
            psi.validate().map_err(scoped)?;
            if psi.d() != d {
                return Err(Error::invalid("psi.center", format!("ψ has dimension {}, geometry has d = {d}", psi.d())));
            }
            let (lo, hi) = psi.spatial_support();
            if lo.iter().chain(&hi).any(|v| v.abs() > l) {
                return Err(Error::invalid(
                    "geometry.L",
                    format!("window [-{l}, {l}]^d does not cover the support of ψ"),
                ));
            }
        }
        if self.options.path_samples == 0 {
            return Err(Error::invalid("options.path_samples", "must be positive"));
        }
        if self.options.statistics.is_empty() {
            return Err(Error::invalid("options.statistics", "need at least one statistic"));
        }

        let needs_sizes = matches!(
            self.experiment,
            SimulateDiscrete | Converge | TruncationCurve | Moments | ReplicaMoment
        );
        if needs_sizes && sizes.is_empty() {
            return Err(Error::invalid("geometry.N", format!("{} needs N or N_grid", self.experiment.name())));
        }
        if needs_sizes {
            for &n in &sizes {
                let plan = ScalingPlan::new(law, n, d, dis.beta_hat).map_err(scoped)?;
                for a in self.a_grid() {
                    cutoff_spec(&law, plan.v_n, a, dis.upper()).map_err(scoped)?;
                }
            }
        }
        let positive_a = |a: f64, name: &str| -> Result<()> {
            if !(a > 0.0) {
                return Err(Error::invalid(name, format!("{} needs a cutoff a > 0", self.experiment.name())));
            }
            Ok(())
        };
        match self.experiment {
            SimulateDiscrete => {}
            SimulateContinuum | Converge => positive_a(dis.a, "disorder.a")?,
            TruncationCurve => {
                if dis.a_grid.is_none() {
                    return Err(Error::invalid("disorder.a_grid", "truncation-curve needs a_grid"));
                }
                for a in self.a_grid() {
                    positive_a(a, "disorder.a_grid")?;
                }
            }
            Moments => {
                for a in self.a_grid() {
                    positive_a(a, "disorder.a_grid")?;
                }
                if self.psi.is_some() && self.a_grid().len() < 3 {
                    return Err(Error::invalid("disorder.a_grid", "the ξ slope fit needs at least 3 cutoffs"));
                }
                if self.psi.is_some() && self.a_grid().iter().any(|a| *a > 1.0) {
                    return Err(Error::invalid("disorder.a_grid", "ξ cutoffs must lie in (0, 1]"));
                }
            }
            VerifyAppendix => {
                if self.options.appendix_samples < 2 {
                    return Err(Error::invalid("options.appendix_samples", "need at least 2"));
                }
            }
            ReplicaMoment => {
                positive_a(dis.a, "disorder.a")?;
                if !dis.upper().is_finite() {
                    return Err(Error::invalid("disorder.b", "replica-moment needs a finite upper cutoff b"));
                }
                if self.replicas < 2 {
                    return Err(Error::invalid("replicas", "need at least 2"));
                }
            }
        }
        Ok(())
    }
}
