//! Manufactured problems with closed-form solutions.
//!
//! Abstract cases: `scalar` (decay over the identity triple) and
//! `skew2` (a 2x2 family K + sin(t) S with S skew, which keeps the
//! coercivity constant exactly at 1 in the K geometry). Heat cases:
//! `heat1d` (product of a sine mode and exponential decay with a
//! manufactured source) and `heat2d` (a pure Laplace eigenmode, f = 0).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::heat::{HeatProblem, SpaceFn, SpaceTimeFn};
use crate::fem::{AssembledOps, FeSpace, Mesh};
use crate::hilbert::{HilbertTriple, OperatorFamily, ParabolicProblem, TimeDegree};

pub const ABSTRACT_IDS: [&str; 2] = ["scalar", "skew2"];
pub const HEAT_IDS: [&str; 2] = ["heat1d", "heat2d"];

pub fn all_ids() -> Vec<&'static str> {
    let mut ids = ABSTRACT_IDS.to_vec();
    ids.extend_from_slice(&HEAT_IDS);
    ids
}

pub type TrajectoryFn = Box<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// An abstract problem together with its closed-form solution.
pub struct AbstractCase {
    pub id: &'static str,
    pub dim: usize,
    pub default_final_time: f64,
    pub problem: ParabolicProblem,
    pub exact: TrajectoryFn,
    pub exact_deriv: TrajectoryFn,
}

/// Builds an abstract registry problem.
pub fn abstract_case(id: &str) -> Result<AbstractCase> {
    match id {
        "scalar" => {
            // u' + u = 0, u(0) = 1, u = exp(-t).
            let triple = Arc::new(HilbertTriple::euclidean(1));
            let problem = ParabolicProblem::homogeneous(
                triple,
                OperatorFamily::constant_dense(DMatrix::from_element(1, 1, 1.0), 1.0, 1.0),
                DVector::from_element(1, 1.0),
            )?;
            Ok(AbstractCase {
                id: "scalar",
                dim: 1,
                default_final_time: 1.0,
                problem,
                exact: Box::new(|t| DVector::from_element(1, (-t).exp())),
                exact_deriv: Box::new(|t| DVector::from_element(1, -(-t).exp())),
            })
        }
        "skew2" => {
            // A(t) = K + sin(t) S with S skew: <A(t)v, v> = v^T K v, so
            // the coercivity constant in the K geometry is exactly 1;
            // the boundedness constant is sqrt(1 + sup sin^2 t / 3)
            // = 2/sqrt(3) for this K.
            let k = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
            let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
            let triple = Arc::new(HilbertTriple::dense(DMatrix::identity(2, 2), k.clone())?);
            let exact = |t: f64| {
                DVector::from_vec(vec![(-t).exp() * t.cos(), (-t).exp() * t.sin()])
            };
            let exact_deriv = |t: f64| {
                DVector::from_vec(vec![
                    (-t).exp() * (-t.cos() - t.sin()),
                    (-t).exp() * (t.cos() - t.sin()),
                ])
            };
            let op_k = k.clone();
            let op_s = s.clone();
            let op = OperatorFamily::dense(
                move |t: f64| &op_k + t.sin() * &op_s,
                TimeDegree::Smooth,
                1.0,
                2.0 / 3.0f64.sqrt(),
            );
            let src_k = k;
            let src_s = s;
            let source = move |t: f64| -> DVector<f64> {
                let a = &src_k + t.sin() * &src_s;
                exact_deriv(t) + a * exact(t)
            };
            let problem = ParabolicProblem::new(
                triple,
                op,
                Box::new(source),
                TimeDegree::Smooth,
                exact(0.0),
            )?;
            Ok(AbstractCase {
                id: "skew2",
                dim: 2,
                default_final_time: 1.0,
                problem,
                exact: Box::new(exact),
                exact_deriv: Box::new(exact_deriv),
            })
        }
        other => Err(Error::UnknownProblem(other.into())),
    }
}

pub type GradientFn = Arc<dyn Fn(&[f64; 2], f64) -> [f64; 2] + Send + Sync>;

/// A heat problem with its closed-form solution fields.
pub struct HeatCase {
    pub id: &'static str,
    pub dim: usize,
    pub default_final_time: f64,
    pub exact: SpaceTimeFn,
    pub exact_dt: SpaceTimeFn,
    pub exact_grad: GradientFn,
    pub source: SpaceTimeFn,
    pub initial: SpaceFn,
}

/// Builds a heat registry case (mesh-independent data).
pub fn heat_case(id: &str) -> Result<HeatCase> {
    use std::f64::consts::PI;
    match id {
        "heat1d" => {
            // u = sin(pi x) exp(-t); f = u_t - u_xx = (pi^2 - 1) u.
            let u = |x: &[f64; 2], t: f64| (PI * x[0]).sin() * (-t).exp();
            Ok(HeatCase {
                id: "heat1d",
                dim: 1,
                default_final_time: 1.0,
                exact: Arc::new(u),
                exact_dt: Arc::new(move |x, t| -u(x, t)),
                exact_grad: Arc::new(|x, t| [PI * (PI * x[0]).cos() * (-t).exp(), 0.0]),
                source: Arc::new(move |x, t| (PI * PI - 1.0) * u(x, t)),
                initial: Arc::new(|x| (PI * x[0]).sin()),
            })
        }
        "heat2d" => {
            // u = sin(pi x) sin(pi y) exp(-2 pi^2 t): an eigenmode, f = 0.
            // The horizon stays short so the mode has not decayed away.
            let u = |x: &[f64; 2], t: f64| {
                (PI * x[0]).sin() * (PI * x[1]).sin() * (-2.0 * PI * PI * t).exp()
            };
            Ok(HeatCase {
                id: "heat2d",
                dim: 2,
                default_final_time: 0.1,
                exact: Arc::new(u),
                exact_dt: Arc::new(move |x, t| -2.0 * PI * PI * u(x, t)),
                exact_grad: Arc::new(|x, t| {
                    let decay = (-2.0 * PI * PI * t).exp();
                    [
                        PI * (PI * x[0]).cos() * (PI * x[1]).sin() * decay,
                        PI * (PI * x[0]).sin() * (PI * x[1]).cos() * decay,
                    ]
                }),
                source: Arc::new(|_, _| 0.0),
                initial: Arc::new(|x| (PI * x[0]).sin() * (PI * x[1]).sin()),
            })
        }
        other => Err(Error::UnknownProblem(other.into())),
    }
}

impl HeatCase {
    /// Assembles the case on an n-subdivision mesh with degree k.
    pub fn build(&self, n: usize, k: usize) -> Result<HeatProblem> {
        let mesh = Arc::new(match self.dim {
            1 => Mesh::interval(n)?,
            _ => Mesh::unit_square(n)?,
        });
        let space = Arc::new(FeSpace::new(mesh, k)?);
        let ops = Arc::new(AssembledOps::new(space)?);
        Ok(HeatProblem::new(ops, self.source.clone(), self.initial.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::estimate_constants;

    #[test]
    fn unknown_id_rejected() {
        assert!(abstract_case("nope").is_err());
        assert!(heat_case("nope").is_err());
        assert!(abstract_case("heat1d").is_err());
    }

    #[test]
    fn scalar_case_is_source_free() {
        let case = abstract_case("scalar").unwrap();
        for &t in &[0.0, 0.3, 0.9] {
            // F = u' + u = 0.
            assert!(((case.problem.source)(t))[0].abs() < 1e-15);
            let u = (case.exact)(t);
            let du = (case.exact_deriv)(t);
            assert!((du[0] + u[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn skew_part_preserves_coercivity() {
        // v^T sym(A(t)) v = v^T K v for all t: the estimated coercivity
        // constant equals 1 and the declared bound 2/sqrt(3) holds.
        let case = abstract_case("skew2").unwrap();
        let samples: Vec<f64> = (0..9).map(|k| k as f64 * 0.4).collect();
        let est = estimate_constants(&case.problem.op, &case.problem.triple, &samples).unwrap();
        assert!((est.alpha - 1.0).abs() < 1e-10, "alpha {}", est.alpha);
        assert!(est.bound <= 2.0 / 3.0f64.sqrt() + 1e-10);
        assert!(!est.declared_alpha_violated);
    }

    #[test]
    fn skew2_source_satisfies_the_equation() {
        let case = abstract_case("skew2").unwrap();
        // F - u' - A(t) u = 0 by construction; check the closed forms
        // are consistent via finite differences of exact.
        let t = 0.7;
        let eps = 1e-6;
        let du_fd = ((case.exact)(t + eps) - (case.exact)(t - eps)) / (2.0 * eps);
        let du = (case.exact_deriv)(t);
        assert!((du_fd - du).amax() < 1e-9);
    }

    #[test]
    fn heat2d_is_an_eigenmode() {
        let case = heat_case("heat2d").unwrap();
        for &(x, y, t) in &[(0.3, 0.4, 0.0), (0.7, 0.2, 0.05)] {
            assert_eq!((case.source)(&[x, y], t), 0.0);
            // u_t = Laplacian u for the eigenmode: u_t + 2 pi^2 u = 0.
            let u = (case.exact)(&[x, y], t);
            let ut = (case.exact_dt)(&[x, y], t);
            assert!((ut + 2.0 * std::f64::consts::PI.powi(2) * u).abs() < 1e-12);
        }
    }

    #[test]
    fn heat1d_gradient_consistent() {
        let case = heat_case("heat1d").unwrap();
        let (x, t) = ([0.37, 0.0], 0.2);
        let eps = 1e-6;
        let fd = ((case.exact)(&[x[0] + eps, 0.0], t) - (case.exact)(&[x[0] - eps, 0.0], t))
            / (2.0 * eps);
        assert!((fd - (case.exact_grad)(&x, t)[0]).abs() < 1e-8);
    }

    #[test]
    fn heat_case_builds_on_meshes() {
        let case = heat_case("heat1d").unwrap();
        let problem = case.build(8, 2).unwrap();
        assert_eq!(problem.space().n_dofs(), 15);
        let case2 = heat_case("heat2d").unwrap();
        let problem2 = case2.build(4, 1).unwrap();
        assert_eq!(problem2.space().n_dofs(), 9);
    }
}
