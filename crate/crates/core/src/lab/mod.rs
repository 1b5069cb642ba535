//! Convergence experiments: joint marginals of the discrete and continuum
//! models, truncation-error curves, field pairings and empirical distances.

mod distance;
mod experiments;
mod xi;

pub use distance::{empirical_distance, DistanceReport, BOOTSTRAP_RESAMPLES};
pub use experiments::{
    continuum_marginals, discrete_marginals, marginal_convergence_experiment, truncation_error_curve, ConvergenceOptions,
    ConvergenceOutcome, CurvePoint, CurveSup, MarginalSample, Side, TruncationCurve,
};
pub use xi::{psi_half_width, psi_riemann_sq, xi_discrete_pair, xi_truncation_slope, XiPoint, XiSlope};
