//! One-dimensional hydrate-bearing sediment under depressurization and load.
//!
//! Flow, kinetics and heat form the active part; the momentum balance of the
//! soil-hydrate skeleton is the latent part. Porosity follows the volumetric
//! strain, which couples the two.

pub mod budget;
pub mod constitutive;
pub mod flow;
pub mod geomech;
pub mod kinetics;
pub mod material;
pub mod system;

pub use budget::{step_budget, StepBudget};
pub use constitutive::{permeability_scaling, porosity_from_strain, CellProps, UnphysicalStrain};
pub use flow::{assemble_flow_rhs, Boundary, FlowBoundaries, Grid};
pub use geomech::assemble_geomech;
pub use kinetics::{kinetic_rates, KineticsResult};
pub use material::MaterialTable;
pub use system::{build_test1_system, BoundaryKind, HydrateSystem, Test1Config};
