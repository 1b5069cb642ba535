//! The continuum side: marked Poisson clouds, heat kernels, Brownian
//! bridges, truncated noise pairings and the continuum partition function.

mod cloud;
mod kernel;
mod partition;
mod psi;

pub use cloud::{expected_count, sample_cloud, CloudPoint, PoissonCloud};
pub use kernel::{bridge_expectation, bridge_expectation_mc, gaussian_kernel, multistep_kernel, SampledPath, BRIDGE_GRID};
pub use partition::{
    continuum_partition, continuum_partition_mc, continuum_partition_with, continuum_point_to_point,
    sample_continuum_path, window_escape_bound, ContinuumPartition,
};
pub use psi::{bump, bump_integral, pair_noise, pair_noise_with, Centering, TestFunction};
