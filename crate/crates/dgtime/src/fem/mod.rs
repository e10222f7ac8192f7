//! Conforming P^k finite elements on intervals and triangulated squares,
//! and the dG(q)cG(k) realization of the heat equation.

pub mod assemble;
pub mod heat;
pub mod mesh;
pub mod space;

pub use assemble::AssembledOps;
pub use heat::{projection_h1_stability, HeatProblem};
pub use mesh::{Mesh, MeshCells, MeshStructure};
pub use space::FeSpace;
