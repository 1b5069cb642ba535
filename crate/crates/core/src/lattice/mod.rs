//! The discrete polymer: environment slabs, exact and Monte-Carlo partition
//! functions, chaos expansion, Gibbs paths and replica moments.

mod chaos;
mod dp;
mod functional;
mod gibbs;
mod kernel;
mod replica;
mod slab;

pub use chaos::{band_sites, chaos_expansion, ratio_check, BandSite, RatioCheck};
pub use dp::{
    free_point_to_point, partition_bruteforce, partition_dp, partition_dp_many, partition_mc, point_to_point_partition, PartitionMeta,
    PartitionResult, PointToPoint, BRUTEFORCE_MAX_PATHS,
};
pub use functional::{cutoff_ramp, rescale_path, Cylinder, CylinderFn, Marginal, PathFunctional, RescaledPath, WalkPath};
pub use gibbs::{sample_polymer_path, GIBBS_MAX_ENTRIES};
pub use kernel::{kernel_1d, walk_kernel, KernelTable};
pub use replica::{overlap_moment_exact, overlap_rate, replica_second_moment, ReplicaMoment};
pub use slab::{diffusive_half_width, is_reachable, site_counter, Disorder, EnvSlab, SiteWeights, MAX_N_HIGH_DIM, MAX_TABLE_SITES};
