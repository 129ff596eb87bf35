//! Multirate time stepping for partitioned semi-explicit DAE systems.
//!
//! Active unknowns march on a fine micro grid, latent unknowns on a coarse
//! macro grid synchronized with it. The [`schemes`] module provides the two
//! multirate methods and the monolithic and iteratively coupled baselines;
//! [`hydrate`] holds the 1D hydrate consolidation benchmark and [`perf`]
//! the work model behind the speed-up estimates.

pub mod dae;
pub mod hydrate;
pub mod linalg;
pub mod mesh;
pub mod newton;
pub mod perf;
pub mod report;
pub mod schemes;
pub mod toy;

pub use dae::{implicit_euler_micro_step, solve_latent, PartitionedState, PartitionedSystem};
pub use linalg::{solve_linear_banded, BandedMatrix};
pub use mesh::{build_uniform_mesh, halve_macro_step, TimeMesh};
pub use newton::{newton_solve, NewtonReport, NewtonSettings};
pub use report::RunReport;
pub use schemes::{march, SchemeConfig, SchemeError, SchemeKind};
