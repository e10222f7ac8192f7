//! The dG(q)cG(k) realization of the heat equation: the spatial triple
//! is (mass, stiffness), the operator is the constant stiffness (so
//! <A u, v> = (grad u, grad v)), sources are L2 loads, and the initial
//! value is the L2 projection of u0.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::Result;
use crate::fem::assemble::AssembledOps;
use crate::fem::space::FeSpace;
use crate::hilbert::{HilbertTriple, OperatorFamily, ParabolicProblem, TimeDegree};
use crate::linalg::SpdMatrix;
use crate::partition::TimePartition;
use crate::stepper::{solve_trajectory, DgSolution};

pub type SpaceTimeFn = Arc<dyn Fn(&[f64; 2], f64) -> f64 + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(&[f64; 2]) -> f64 + Send + Sync>;

/// A heat problem on a fixed finite element space.
pub struct HeatProblem {
    pub ops: Arc<AssembledOps>,
    pub source: SpaceTimeFn,
    pub initial: SpaceFn,
}

impl HeatProblem {
    pub fn new(ops: Arc<AssembledOps>, source: SpaceTimeFn, initial: SpaceFn) -> Self {
        HeatProblem {
            ops,
            source,
            initial,
        }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        self.ops.space()
    }

    /// The matrix-pair realization driving the abstract stepper.
    pub fn parabolic(&self) -> Result<ParabolicProblem> {
        let ops = self.ops.clone();
        let triple = Arc::new(HilbertTriple::new(
            SpdMatrix::Band(ops.mass.clone()),
            SpdMatrix::Band(ops.stiffness.clone()),
        )?);
        let op = OperatorFamily::constant_spd(SpdMatrix::Band(ops.stiffness.clone()), 1.0, 1.0);
        let source = self.source.clone();
        let load_ops = ops.clone();
        let source_fn = move |t: f64| -> DVector<f64> {
            let f = |x: &[f64; 2]| source(x, t);
            load_ops.load(&f)
        };
        let u0 = ops.l2_project(&|x| (self.initial)(x));
        ParabolicProblem::new(
            triple,
            op,
            Box::new(source_fn),
            TimeDegree::Smooth,
            u0,
        )
    }

    /// Runs the dG(q)cG(k) method over the partition.
    pub fn solve(&self, partition: &TimePartition, q: usize) -> Result<DgSolution> {
        let problem = self.parabolic()?;
        solve_trajectory(&problem, partition, q)
    }
}

/// Observed H1-stability constant of the L2 projection, taken over a
/// strictly finer nested space (restricted to the coarse space itself
/// the projection is the identity). The supremum of
/// ||P_H v||_{H1} / ||v||_{H1} is a generalized Rayleigh quotient; it is
/// computed by power iteration on the associated pencil from a seeded
/// random start, which dominates any sampled ratio.
pub fn projection_h1_stability(
    coarse: &AssembledOps,
    fine: &AssembledOps,
    iterations: usize,
    seed: u64,
) -> Result<f64> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let c = crate::fem::assemble::nested_cross_mass(coarse, fine)?;
    let mut v = DVector::from_fn(fine.n_dofs(), |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let ratio = |v: &DVector<f64>| -> Result<f64> {
        let p = coarse.mass_solve(&(&c * v));
        let denom = fine.h1_norm(v);
        Ok(if denom > 1e-13 {
            coarse.h1_norm(&p) / denom
        } else {
            0.0
        })
    };
    let mut current = ratio(&v)?;
    for _ in 0..iterations.max(30) {
        // v <- K_f^{-1} C^T M^{-1} K_H M^{-1} C v, the pencil map whose
        // top eigenvalue is the squared stability constant.
        let p = coarse.mass_solve(&(&c * &v));
        let kp = coarse.stiffness.mat_vec(&p);
        let back = c.transpose() * coarse.mass_solve(&kp);
        v = fine.stiff_solve(&back);
        let norm = fine.h1_norm(&v);
        if norm <= 1e-300 {
            break;
        }
        v /= norm;
        current = ratio(&v)?;
    }
    Ok(current)
}
