//! Finite-element solver for the p-torsion problem on star-shaped 2-D
//! domains in rotationally symmetric metrics.

mod domain;
mod mesh;
mod solver;
mod sparse;

pub use domain::StarDomain;
pub use mesh::{build_mesh, build_mesh_with_offset, BoundaryVertex, Mesh};
pub use solver::{
    boundary_normal_samples, field_value_at, solve_torsion, BoundarySample, SolverConfig,
    TorsionField,
};
pub use sparse::{conjugate_gradient, CsrMatrix};
