//! Simplicial Lagrange finite elements for the Poisson problem with Dirichlet
//! data imposed weakly through Nitsche boundary terms.
//!
//! The bilinear form is
//!
//! ```text
//! a(u, v) = (∇u, ∇v) - <∇u·n, v>_Γ + β <u, ∇v·n>_Γ + c0 <h^-α u, v>_Γ
//! ```
//!
//! with β = +1 (non-symmetric) or β = -1 (symmetric), α ≥ 1 and c0 ≥ 0. The
//! crate covers structured meshes of the unit square and cube, P1–P3 spaces,
//! assembly, direct and Krylov solvers, error norms, the boundary-projected
//! interpolant and a convergence-study driver.

pub mod assembly;
pub mod element;
pub mod error;
pub mod interpolation;
pub mod mesh;
pub mod norms;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod study;
pub mod vtk;

pub use assembly::{assemble_system, Beta, LinearSystem, NitscheConfig};
pub use error::{Error, Result};
pub use mesh::{build_mesh, Mesh};
pub use norms::{ErrorReport, ExactSolution};
pub use space::DofMap;
pub use sparse::CsrMatrix;
pub use study::{run_study, StudyConfig, StudyTable};

/// Points are stored padded to three components; 2D meshes keep z = 0.
pub type Point = [f64; 3];
