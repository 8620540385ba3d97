//! Structured singular value bounds and robust-performance profiles.

pub mod blocks;
pub mod interconnect;
pub mod lower;
pub mod profile;
pub mod upper;

pub use blocks::{Block, BlockKind, BlockStructure};
pub use interconnect::{interconnection_at, robust_performance_structure};
pub use lower::mu_lower_sampling;
pub use profile::{
    default_grid, nominal_closed_loop_max_real, peak_upper, robust_performance_profile, MuProfile,
    ProfileOptions, RobustPerformanceEvaluator, WarmStart,
};
pub use upper::{mu_upper_complex, mu_upper_mixed, CMatrix, UpperBound, UpperSolver, UpperStage};
