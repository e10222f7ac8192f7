//! Discontinuous Galerkin time stepping for linear parabolic evolution
//! equations over a discrete Hilbert triple.
//!
//! The crate provides:
//! - slab-by-slab dG(q) solvers for `u' + A(t) u = F(t)` where the triple
//!   V in H in V' is realized by a pair of SPD matrices,
//! - the DG norm family, slab projections, and trace/inverse inequalities
//!   used in the stability analysis of the scheme,
//! - an inf-sup laboratory that assembles the DG bilinear form and its
//!   norm Gram matrices and computes discrete inf-sup and boundedness
//!   constants as matrix-pencil eigenvalues,
//! - conforming P1/P2 finite elements on intervals and P1 on triangulated
//!   squares, driving the dG(q)cG(k) method for the heat equation,
//! - a manufactured-solution registry and convergence-study harness with
//!   CSV/JSON reporting.
//!
//! Inner loops that sweep study levels, mesh cells, or sample batches are
//! data-parallel via rayon (feature `parallel`, on by default) with a
//! sequential fallback.

pub mod basis;
pub mod error;
pub mod fem;
pub mod hilbert;
pub mod infsup;
pub mod linalg;
pub mod norms;
pub mod pade;
pub mod par;
pub mod partition;
pub mod quad;
pub mod report;
pub mod stepper;
pub mod study;

pub use basis::{PiecewisePoly, Side, SlabBasis, SlabPoly};
pub use error::{Error, Result};
pub use hilbert::{HilbertTriple, OperatorFamily, ParabolicProblem, TimeDegree};
pub use partition::TimePartition;
pub use quad::{gauss_rule, radau_right_rule, QuadratureRule};
pub use stepper::{solve_trajectory, DgSolution};
