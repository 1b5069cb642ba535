use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RngKey;
use crate::stats::{bootstrap_sd, distance, Statistic};

/// Resamples used for the bootstrap error of a distance.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub statistic: Statistic,
    pub value: f64,
    /// Bootstrap standard deviation, when requested.
    pub sd: Option<f64>,
    pub n_a: usize,
    pub n_b: usize,
    /// Which marginal was compared (e.g. "partition", "pairing").
    pub component: String,
    /// Grid coordinate of the comparison (N for the discrete side).
    pub grid: f64,
}

/// Two-sample distance between empirical laws, optionally with a bootstrap
/// standard deviation from [`BOOTSTRAP_RESAMPLES`] resamples.
pub fn empirical_distance(a: &[f64], b: &[f64], statistic: Statistic, bootstrap: Option<RngKey>) -> Result<DistanceReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("sample", "both samples must be non-empty"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("sample", "samples must be finite"));
    }
    Ok(DistanceReport {
        statistic,
        value: distance(statistic, a, b),
        sd: bootstrap.map(|k| bootstrap_sd(statistic, a, b, BOOTSTRAP_RESAMPLES, k)),
        n_a: a.len(),
        n_b: b.len(),
        component: String::new(),
        grid: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let r = empirical_distance(&[0.0], &[1.0], Statistic::Ks, None).unwrap();
        assert_eq!(r.value, 1.0);
        let r = empirical_distance(&[0.0, 1.0], &[0.0, 2.0], Statistic::Wasserstein1, None).unwrap();
        assert_eq!(r.value, 0.5);
        let r = empirical_distance(&[3.0, 1.0], &[1.0, 3.0], Statistic::Ks, Some(RngKey::new(1))).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.sd.unwrap() >= 0.0);
        assert!(empirical_distance(&[], &[1.0], Statistic::Ks, None).is_err());
    }
}
