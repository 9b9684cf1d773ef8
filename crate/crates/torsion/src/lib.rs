//! Torsion problems on rotationally symmetric Riemannian manifolds.
//!
//! The crate computes exact radial solutions of the p-torsion problem
//! Delta_p u = -1 on geodesic balls of warped-product metrics, solves the
//! same problem on star-shaped 2-D domains with a finite-element energy
//! minimizer, and classifies overdetermined boundary data dnu_u = f(d)
//! against the rigidity conditions that force the domain to be a ball.

pub mod check;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod interp;
pub mod quad;
pub mod radial;
pub mod verify;
pub mod warp;

pub use error::{Error, Result};
pub use quad::QuadratureSpec;
pub use warp::{ball_quantities, eta, make_profile, BallQuantities, ProfileKind, WarpProfile};
