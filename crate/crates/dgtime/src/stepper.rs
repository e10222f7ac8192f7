//! Slab-by-slab assembly and solution of the dG(q) scheme.
//!
//! The upwind jump coupling makes the global system block lower
//! triangular, so the trajectory is computed one slab at a time: each
//! local system encodes
//!
//! `int_Jn [(u', v) + <A(t) u, v>] dt + (u^{n,+}, v^{n,+})
//!   = int_Jn <F, v> dt + (u_in, v^{n,+})`
//!
//! for all test polynomials of degree q. Time integrals follow the
//! declared-degree exactness policy; the trace algebra comes from the
//! cached basis tables.

use std::collections::HashMap;

use nalgebra::{Complex, DMatrix, DVector};

use crate::basis::{PiecewisePoly, SlabBasis};
use crate::error::{Error, Result};
use crate::hilbert::{ParabolicProblem, TimeDegree};
use crate::linalg::{Band, BandLu, SpdMatrix, SymBand};
use crate::pade;
use crate::partition::TimePartition;
use crate::quad::{gauss_rule, QuadratureRule};

/// Gauss point count integrating the A-term exactly for polynomial
/// degree d (integrand degree 2q + d), or the smooth fallback.
fn op_quad_points(q: usize, degree: TimeDegree) -> usize {
    match degree {
        TimeDegree::Poly(d) => (2 * q + d) / 2 + 1,
        TimeDegree::Smooth => q + 3,
    }
}

/// Gauss point count for the source term (integrand degree q + d).
fn src_quad_points(q: usize, degree: TimeDegree) -> usize {
    match degree {
        TimeDegree::Poly(d) => (q + d) / 2 + 1,
        TimeDegree::Smooth => q + 3,
    }
}

/// Local slab matrix in dense (node-major) or banded (dof-major) layout.
pub enum SlabMatrix {
    Dense(DMatrix<f64>),
    Band(Band),
}

enum SlabFactor {
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Band(BandLu),
}

impl SlabMatrix {
    fn factor(self, slab: usize) -> Result<SlabFactor> {
        match self {
            SlabMatrix::Dense(m) => {
                let lu = m.lu();
                if !lu.is_invertible() {
                    return Err(Error::Singular(format!("slab {slab} system")));
                }
                Ok(SlabFactor::Dense(lu))
            }
            SlabMatrix::Band(b) => b
                .lu()
                .map(SlabFactor::Band)
                .map_err(|_| Error::Singular(format!("slab {slab} system"))),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            SlabMatrix::Dense(m) => m * x,
            SlabMatrix::Band(b) => b.mat_vec(x),
        }
    }
}

impl SlabFactor {
    fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            SlabFactor::Dense(lu) => lu
                .solve(rhs)
                .ok_or_else(|| Error::Singular("slab back-substitution".into())),
            SlabFactor::Band(lu) => Ok(lu.solve(rhs)),
        }
    }
}

/// The local system of one slab, together with its incoming trace.
pub struct SlabSystem {
    pub slab: usize,
    pub matrix: SlabMatrix,
    pub rhs: DVector<f64>,
    pub u_in: DVector<f64>,
    layout: Layout,
    dim: usize,
    n_nodes: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Layout {
    /// Dense path: unknown index = node * dim + component.
    NodeMajor,
    /// Banded path: unknown index = component * n_nodes + node.
    DofMajor,
}

impl SlabSystem {
    /// Solves for the slab coefficients, returned as dim x (q+1) nodal values.
    pub fn solve(&self) -> Result<DMatrix<f64>> {
        let factor = match &self.matrix {
            SlabMatrix::Dense(m) => SlabMatrix::Dense(m.clone()),
            SlabMatrix::Band(b) => SlabMatrix::Band(b.clone()),
        }
        .factor(self.slab)?;
        let x = factor.solve(&self.rhs)?;
        Ok(unpack(&x, self.layout, self.dim, self.n_nodes))
    }

    /// Relative residual of candidate slab coefficients.
    pub fn residual(&self, coeffs: &DMatrix<f64>) -> f64 {
        let x = pack(coeffs, self.layout);
        let r = self.matrix.apply(&x) - &self.rhs;
        r.amax() / self.rhs.amax().max(1.0)
    }
}

fn unpack(x: &DVector<f64>, layout: Layout, dim: usize, n_nodes: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, n_nodes, |r, j| match layout {
        Layout::NodeMajor => x[j * dim + r],
        Layout::DofMajor => x[r * n_nodes + j],
    })
}

fn pack(coeffs: &DMatrix<f64>, layout: Layout) -> DVector<f64> {
    let (dim, n_nodes) = (coeffs.nrows(), coeffs.ncols());
    DVector::from_fn(dim * n_nodes, |k, _| match layout {
        Layout::NodeMajor => coeffs[(k % dim, k / dim)],
        Layout::DofMajor => coeffs[(k / n_nodes, k % n_nodes)],
    })
}

/// Precomputed per-trajectory assembly state.
struct Assembler<'a> {
    problem: &'a ParabolicProblem,
    basis: &'a SlabBasis,
    /// conv + left left^T: the time-derivative and incoming-trace block.
    time_block: DMatrix<f64>,
    op_rule: QuadratureRule,
    src_rule: QuadratureRule,
    /// Basis values at the A-term quadrature points.
    op_vals: Vec<DVector<f64>>,
    src_vals: Vec<DVector<f64>>,
    /// Dense A(t) cache for constant dense operators.
    const_dense_a: Option<DMatrix<f64>>,
    mh_dense: Option<DMatrix<f64>>,
    banded: Option<BandedOps<'a>>,
}

struct BandedOps<'a> {
    mh: &'a SymBand,
    a: &'a SymBand,
    bw: usize,
}

impl<'a> Assembler<'a> {
    fn new(problem: &'a ParabolicProblem, basis: &'a SlabBasis) -> Result<Self> {
        let q = basis.degree();
        let op_rule = gauss_rule(op_quad_points(q, problem.op.degree))?;
        let src_rule = gauss_rule(src_quad_points(q, problem.source_degree).max(q + 1))?;
        let time_block = basis.convection() + basis.left_values() * basis.left_values().transpose();
        let op_vals = op_rule.points.iter().map(|&x| basis.eval_at(x)).collect();
        let src_vals = src_rule.points.iter().map(|&x| basis.eval_at(x)).collect();

        let banded = match (problem.triple.m_h(), problem.op.as_constant_spd()) {
            (SpdMatrix::Band(mh), Some(SpdMatrix::Band(a))) => Some(BandedOps {
                mh,
                a,
                bw: mh.bandwidth().max(a.bandwidth()),
            }),
            _ => None,
        };
        let mh_dense = if banded.is_none() {
            Some(problem.triple.m_h().to_dense())
        } else {
            None
        };
        let const_dense_a = if banded.is_none() && problem.op.is_constant() {
            Some(problem.op.eval(0.0))
        } else {
            None
        };
        Ok(Assembler {
            problem,
            basis,
            time_block,
            op_rule,
            src_rule,
            op_vals,
            src_vals,
            const_dense_a,
            mh_dense,
            banded,
        })
    }

    fn layout(&self) -> Layout {
        if self.banded.is_some() {
            Layout::DofMajor
        } else {
            Layout::NodeMajor
        }
    }

    fn matrix(&self, partition: &TimePartition, n: usize) -> SlabMatrix {
        let q1 = self.basis.n_nodes();
        let m = self.problem.dim();
        let tau = partition.width(n);
        let t0 = partition.node(n);
        if let Some(b) = &self.banded {
            let half = b.bw * q1 + (q1 - 1);
            let mut band = Band::zeros(m * q1, half, half);
            let mass = self.basis.mass();
            for d in 0..m {
                let lo = d.saturating_sub(b.bw);
                let hi = (d + b.bw).min(m - 1);
                for e in lo..=hi {
                    let mv = b.mh.get(d, e);
                    let av = b.a.get(d, e);
                    if mv == 0.0 && av == 0.0 {
                        continue;
                    }
                    for i in 0..q1 {
                        for j in 0..q1 {
                            let v = self.time_block[(i, j)] * mv + tau * mass[(i, j)] * av;
                            if v != 0.0 {
                                band.add(d * q1 + i, e * q1 + j, v);
                            }
                        }
                    }
                }
            }
            return SlabMatrix::Band(band);
        }

        let mh = self.mh_dense.as_ref().unwrap();
        let mut g = DMatrix::zeros(m * q1, m * q1);
        for i in 0..q1 {
            for j in 0..q1 {
                let tb = self.time_block[(i, j)];
                if tb != 0.0 {
                    for r in 0..m {
                        for c in 0..m {
                            g[(i * m + r, j * m + c)] += tb * mh[(r, c)];
                        }
                    }
                }
            }
        }
        if let Some(a) = &self.const_dense_a {
            let mass = self.basis.mass();
            for i in 0..q1 {
                for j in 0..q1 {
                    let w = tau * mass[(i, j)];
                    for r in 0..m {
                        for c in 0..m {
                            g[(i * m + r, j * m + c)] += w * a[(r, c)];
                        }
                    }
                }
            }
        } else {
            for (k, (&x, &w)) in self
                .op_rule
                .points
                .iter()
                .zip(&self.op_rule.weights)
                .enumerate()
            {
                let a = self.problem.op.eval(t0 + tau * x);
                let vals = &self.op_vals[k];
                for i in 0..q1 {
                    for j in 0..q1 {
                        let coef = tau * w * vals[i] * vals[j];
                        for r in 0..m {
                            for c in 0..m {
                                g[(i * m + r, j * m + c)] += coef * a[(r, c)];
                            }
                        }
                    }
                }
            }
        }
        SlabMatrix::Dense(g)
    }

    fn rhs(&self, partition: &TimePartition, n: usize, u_in: &DVector<f64>) -> DVector<f64> {
        let q1 = self.basis.n_nodes();
        let m = self.problem.dim();
        let tau = partition.width(n);
        let t0 = partition.node(n);
        let left = self.basis.left_values();
        let m_uin = self.problem.triple.m_h().mat_vec(u_in);
        let mut blocks: Vec<DVector<f64>> = (0..q1).map(|i| left[i] * &m_uin).collect();
        for (k, (&x, &w)) in self
            .src_rule
            .points
            .iter()
            .zip(&self.src_rule.weights)
            .enumerate()
        {
            let f = (self.problem.source)(t0 + tau * x);
            let vals = &self.src_vals[k];
            for i in 0..q1 {
                blocks[i].axpy(tau * w * vals[i], &f, 1.0);
            }
        }
        let layout = self.layout();
        DVector::from_fn(m * q1, |k, _| match layout {
            Layout::NodeMajor => blocks[k / m][k % m],
            Layout::DofMajor => blocks[k % q1][k / q1],
        })
    }
}

/// Assembles the local system of slab `n` for incoming trace `u_in`.
pub fn assemble_slab(
    problem: &ParabolicProblem,
    partition: &TimePartition,
    q: usize,
    n: usize,
    u_in: &DVector<f64>,
) -> Result<SlabSystem> {
    if u_in.len() != problem.dim() {
        return Err(Error::DimensionMismatch(format!(
            "incoming trace has length {} but the problem dimension is {}",
            u_in.len(),
            problem.dim()
        )));
    }
    let basis = SlabBasis::radau(q)?;
    let asm = Assembler::new(problem, &basis)?;
    Ok(SlabSystem {
        slab: n,
        matrix: asm.matrix(partition, n),
        rhs: asm.rhs(partition, n, u_in),
        u_in: u_in.clone(),
        layout: asm.layout(),
        dim: problem.dim(),
        n_nodes: q + 1,
    })
}

/// A dG(q) trajectory with its trace conventions.
pub struct DgSolution {
    pub poly: PiecewisePoly,
    pub initial: DVector<f64>,
}

impl DgSolution {
    /// u^n = u(t_n) for 1 <= n <= N.
    pub fn nodal_value(&self, n: usize) -> DVector<f64> {
        self.poly.left_trace(n)
    }

    /// u^{n,+} for 0 <= n <= N-1.
    pub fn right_trace(&self, n: usize) -> DVector<f64> {
        self.poly.right_trace(n)
    }

    /// u^{n,+} - u^n at interior nodes (1 <= n <= N-1).
    pub fn jump(&self, n: usize) -> DVector<f64> {
        self.poly.jump(n)
    }

    /// Max relative residual of the slab equations over the whole
    /// trajectory (Galerkin orthogonality at the discrete level).
    pub fn residual(&self, problem: &ParabolicProblem) -> Result<f64> {
        let partition = self.poly.partition().clone();
        let basis = self.poly.basis().clone();
        let asm = Assembler::new(problem, &basis)?;
        let mut scale: f64 = 1.0;
        let mut worst: f64 = 0.0;
        let mut u_in = self.initial.clone();
        for n in 0..partition.n_slabs() {
            let rhs = asm.rhs(&partition, n, &u_in);
            let x = pack(self.poly.slab_coeffs(n), asm.layout());
            let r = asm.matrix(&partition, n).apply(&x) - &rhs;
            worst = worst.max(r.amax());
            scale = scale.max(rhs.amax());
            u_in = self.poly.left_trace(n + 1);
        }
        Ok(worst / scale)
    }
}

/// Solves the dG(q) scheme slab by slab. For constant operators the slab
/// factorization is reused across slabs of equal width.
pub fn solve_trajectory(
    problem: &ParabolicProblem,
    partition: &TimePartition,
    q: usize,
) -> Result<DgSolution> {
    let basis = SlabBasis::radau(q)?;
    let asm = Assembler::new(problem, &basis)?;
    let m = problem.dim();
    let mut poly = PiecewisePoly::zeros(partition.clone(), basis.clone(), m);
    let mut u_in = problem.u0.clone();
    let mut cache: HashMap<u64, SlabFactor> = HashMap::new();
    let cacheable = problem.op.is_constant();
    for n in 0..partition.n_slabs() {
        let rhs = asm.rhs(partition, n, &u_in);
        let x = if cacheable {
            let key = partition.width(n).to_bits();
            if !cache.contains_key(&key) {
                cache.insert(key, asm.matrix(partition, n).factor(n)?);
            }
            cache[&key].solve(&rhs)?
        } else {
            asm.matrix(partition, n).factor(n)?.solve(&rhs)?
        };
        let coeffs = unpack(&x, asm.layout(), m, q + 1);
        u_in = coeffs.column(q).into();
        poly.slab_coeffs_mut(n).copy_from(&coeffs);
    }
    Ok(DgSolution {
        poly,
        initial: problem.u0.clone(),
    })
}

/// One-step amplification of dG(q) for y' = -(z/tau) y on a unit slab
/// with incoming value 1 and exact time integration. Agrees with the
/// sub-diagonal (q+1, q) rational approximation of exp(-z).
pub fn stability_function(q: usize, z: Complex<f64>) -> Result<Complex<f64>> {
    let basis = SlabBasis::radau(q)?;
    let n = q + 1;
    let left = basis.left_values();
    let conv = basis.convection();
    let mass = basis.mass();
    let g = DMatrix::from_fn(n, n, |i, j| {
        Complex::new(conv[(i, j)] + left[i] * left[j], 0.0) + z * mass[(i, j)]
    });
    let rhs = DVector::from_fn(n, |i, _| Complex::new(left[i], 0.0));
    let y = g
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular(format!("amplification pole at z = {z}")))?;
    // The right endpoint is the last basis node.
    Ok(y[n - 1])
}

/// Real-axis amplification value.
pub fn stability_function_real(q: usize, z: f64) -> Result<f64> {
    Ok(stability_function(q, Complex::new(z, 0.0))?.re)
}

/// Convenience re-export of the matched rational approximant.
pub fn subdiagonal_pade(q: usize) -> Result<pade::RationalApprox> {
    pade::subdiagonal(q)
}

/// Lifts the broken time derivative of a dG solution into the trial
/// space: on every slab, int (p, v) dt = int (u', v) dt +
/// (u^{n,+} - u^n, v^{n,+}) for all test polynomials, with u^0 = u0.
/// The H metric cancels from both sides, leaving a time-only mass solve
/// applied to each component.
pub fn reconstruct_derivative(sol: &DgSolution, u0: &DVector<f64>) -> Result<PiecewisePoly> {
    let poly = &sol.poly;
    let partition = poly.partition().clone();
    let basis = poly.basis().clone();
    let q1 = basis.n_nodes();
    let m = poly.dim();
    let mass_lu = basis.mass().clone().lu();
    if !mass_lu.is_invertible() {
        return Err(Error::Singular("reference mass matrix".into()));
    }
    let conv = basis.convection().clone();
    let left = basis.left_values().clone();
    let mut out = PiecewisePoly::zeros(partition.clone(), basis, m);
    for n in 0..partition.n_slabs() {
        let tau = partition.width(n);
        let incoming = if n == 0 {
            u0.clone()
        } else {
            poly.left_trace(n)
        };
        let jump = poly.right_trace(n) - incoming;
        let coeffs = poly.slab_coeffs(n);
        // RHS block i (an m-vector): sum_j conv[i][j] u_j + l_i(0) * jump
        let mut rhs = DMatrix::zeros(q1, m);
        for i in 0..q1 {
            let mut row = left[i] * &jump;
            for j in 0..q1 {
                let uj: DVector<f64> = coeffs.column(j).into();
                row.axpy(conv[(i, j)], &uj, 1.0);
            }
            rhs.row_mut(i).copy_from(&row.transpose());
        }
        let p = mass_lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("reference mass matrix".into()))?
            / tau;
        out.slab_coeffs_mut(n).copy_from(&p.transpose());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{HilbertTriple, OperatorFamily};
    use std::sync::Arc;

    fn scalar_problem(a: f64, u0: f64) -> ParabolicProblem {
        let triple = Arc::new(HilbertTriple::euclidean(1));
        ParabolicProblem::homogeneous(
            triple,
            OperatorFamily::constant_dense(DMatrix::from_element(1, 1, a), a, a),
            DVector::from_element(1, u0),
        )
        .unwrap()
    }

    #[test]
    fn dg0_slab_system_is_backward_euler() {
        // m = 1, q = 0, M = K = A = 1: system (1 + tau) u = u_in.
        let problem = scalar_problem(1.0, 1.0);
        let partition = TimePartition::new(1.0, 4, 1.0).unwrap();
        let sys = assemble_slab(&problem, &partition, 0, 0, &DVector::from_element(1, 1.0)).unwrap();
        match &sys.matrix {
            SlabMatrix::Dense(m) => assert!((m[(0, 0)] - 1.25).abs() < 1e-14),
            _ => panic!("expected dense"),
        }
        assert!((sys.rhs[0] - 1.0).abs() < 1e-14);
        let coeffs = sys.solve().unwrap();
        assert!((coeffs[(0, 0)] - 0.8).abs() < 1e-14);
        assert!(sys.residual(&coeffs) < 1e-13);
    }

    #[test]
    fn dg0_matches_backward_euler_recursion() {
        let problem = scalar_problem(1.0, 1.0);
        let partition = TimePartition::new(1.0, 10, 1.0).unwrap();
        let sol = solve_trajectory(&problem, &partition, 0).unwrap();
        // Oracle: the recursion u_{n+1} = u_n / (1 + tau).
        let mut u = 1.0;
        for n in 1..=10 {
            u /= 1.1;
            assert!((sol.nodal_value(n)[0] - u).abs() < 1e-13, "node {n}");
        }
        assert!((sol.nodal_value(10)[0] - 1.1f64.powi(-10)).abs() < 1e-13);
    }

    #[test]
    fn zero_data_gives_zero() {
        let problem = scalar_problem(1.0, 0.0);
        let partition = TimePartition::new(1.0, 5, 1.0).unwrap();
        let sol = solve_trajectory(&problem, &partition, 2).unwrap();
        for n in 1..=5 {
            assert_eq!(sol.nodal_value(n)[0], 0.0);
        }
    }

    fn polynomial_problem(q: usize) -> (ParabolicProblem, Vec<DVector<f64>>) {
        // Exact solution u(t) = sum_k c_k t^k of degree q over a constant
        // nonsymmetric 2x2 operator; F = u' + A u.
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -0.5, 3.0]);
        let coeffs: Vec<DVector<f64>> = (0..=q)
            .map(|k| DVector::from_vec(vec![0.3 + k as f64, 1.0 - 0.5 * k as f64]))
            .collect();
        let c = coeffs.clone();
        let a2 = a.clone();
        let exact = move |t: f64| -> DVector<f64> {
            let mut u = DVector::zeros(2);
            for (k, ck) in c.iter().enumerate() {
                u.axpy(t.powi(k as i32), ck, 1.0);
            }
            u
        };
        let c = coeffs.clone();
        let deriv = move |t: f64| -> DVector<f64> {
            let mut u = DVector::zeros(2);
            for (k, ck) in c.iter().enumerate().skip(1) {
                u.axpy(k as f64 * t.powi(k as i32 - 1), ck, 1.0);
            }
            u
        };
        let exact0 = exact(0.0);
        let source = move |t: f64| deriv(t) + &a2 * exact(t);
        let triple = Arc::new(HilbertTriple::euclidean(2));
        let problem = ParabolicProblem::new(
            triple,
            OperatorFamily::constant_dense(a, 1.5, 4.0),
            Box::new(source),
            TimeDegree::Poly(q),
            exact0,
        )
        .unwrap();
        (problem, coeffs)
    }

    #[test]
    fn trial_space_solutions_reproduced_exactly() {
        for q in 1..=3 {
            let (problem, coeffs) = polynomial_problem(q);
            let partition = TimePartition::new(1.0, 3, 1.3).unwrap();
            let sol = solve_trajectory(&problem, &partition, q).unwrap();
            for &t in &[0.05f64, 0.4, 0.77, 1.0] {
                let mut exact = DVector::zeros(2);
                for (k, ck) in coeffs.iter().enumerate() {
                    exact.axpy(t.powi(k as i32), ck, 1.0);
                }
                let got = sol.poly.eval(t, crate::basis::Side::LeftLimit).unwrap();
                assert!((got - exact).amax() < 1e-10, "q={q} t={t}");
            }
            assert!(sol.residual(&problem).unwrap() < 1e-11);
        }
    }

    #[test]
    fn traces_match_polynomial_evaluation() {
        let (problem, _) = polynomial_problem(2);
        let partition = TimePartition::new(1.0, 4, 1.0).unwrap();
        let sol = solve_trajectory(&problem, &partition, 2).unwrap();
        for n in 1..4 {
            let t = partition.node(n);
            let left = sol.poly.eval(t, crate::basis::Side::LeftLimit).unwrap();
            let right = sol.poly.eval(t, crate::basis::Side::RightLimit).unwrap();
            assert!((left - sol.nodal_value(n)).amax() < 1e-13);
            assert!((right - sol.right_trace(n)).amax() < 1e-13);
        }
    }

    #[test]
    fn energy_dissipates_for_symmetric_coercive_operator() {
        let k = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let triple = Arc::new(HilbertTriple::euclidean(2));
        let problem = ParabolicProblem::homogeneous(
            triple.clone(),
            OperatorFamily::constant_dense(k, 1.0, 4.0),
            DVector::from_vec(vec![1.0, -0.7]),
        )
        .unwrap();
        let partition = TimePartition::new(2.0, 8, 1.2).unwrap();
        for q in 0..=2 {
            let sol = solve_trajectory(&problem, &partition, q).unwrap();
            let mut prev = triple.h_norm(&problem.u0);
            for n in 1..=8 {
                let now = triple.h_norm(&sol.nodal_value(n));
                assert!(now <= prev + 1e-13, "q={q} n={n}");
                prev = now;
            }
        }
    }

    #[test]
    fn banded_path_matches_dense_path() {
        // Tridiagonal M and K, constant A = K.
        let m = 6;
        let mut mb = SymBand::zeros(m, 1);
        let mut kb = SymBand::zeros(m, 1);
        for i in 0..m {
            mb.add(i, i, 2.0 / 3.0);
            kb.add(i, i, 4.0);
            if i > 0 {
                mb.add(i, i - 1, 1.0 / 6.0);
                kb.add(i, i - 1, -2.0);
            }
        }
        let u0 = DVector::from_fn(m, |i, _| ((i + 1) as f64 * 0.8).sin());
        let source = |t: f64| DVector::from_fn(6, |i, _| (t + i as f64).cos());

        let band_triple = Arc::new(
            HilbertTriple::new(SpdMatrix::Band(mb.clone()), SpdMatrix::Band(kb.clone())).unwrap(),
        );
        let band_problem = ParabolicProblem::new(
            band_triple,
            OperatorFamily::constant_spd(SpdMatrix::Band(kb.clone()), 1.0, 1.0),
            Box::new(source),
            TimeDegree::Smooth,
            u0.clone(),
        )
        .unwrap();

        let dense_triple = Arc::new(HilbertTriple::dense(mb.to_dense(), kb.to_dense()).unwrap());
        let dense_problem = ParabolicProblem::new(
            dense_triple,
            OperatorFamily::constant_dense(kb.to_dense(), 1.0, 1.0),
            Box::new(source),
            TimeDegree::Smooth,
            u0,
        )
        .unwrap();

        let partition = TimePartition::new(0.5, 4, 1.0).unwrap();
        for q in 0..=2 {
            let a = solve_trajectory(&band_problem, &partition, q).unwrap();
            let b = solve_trajectory(&dense_problem, &partition, q).unwrap();
            for n in 0..4 {
                assert!(
                    (a.poly.slab_coeffs(n) - b.poly.slab_coeffs(n)).amax() < 1e-11,
                    "q={q} slab {n}"
                );
            }
        }
    }

    #[test]
    fn amplification_closed_values() {
        assert!((stability_function_real(0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        assert!((stability_function_real(1, 1.0).unwrap() - 4.0 / 11.0).abs() < 1e-14);
        for q in 0..=4 {
            assert!((stability_function_real(q, 0.0).unwrap() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn amplification_matches_rational_approximant() {
        for q in 0..=3 {
            let r = subdiagonal_pade(q).unwrap();
            for k in 0..=20 {
                let z = 5.0 * k as f64;
                let got = stability_function_real(q, z).unwrap();
                assert!(
                    (got - r.eval(z)).abs() < 1e-12,
                    "q={q} z={z}: {got} vs {}",
                    r.eval(z)
                );
            }
        }
    }

    #[test]
    fn strong_a_stability_in_the_right_half_plane() {
        for q in 0..=3 {
            for &radius in &[0.1, 1.0, 10.0, 100.0] {
                for k in 0..16 {
                    let theta = -1.5 + 3.0 * k as f64 / 15.0; // within (-pi/2, pi/2)
                    let z = Complex::from_polar(radius, theta);
                    let r = stability_function(q, z).unwrap();
                    assert!(r.norm() < 1.0, "q={q} z={z}: |R| = {}", r.norm());
                }
            }
            // Decay to zero along the real axis; past the hump that
            // follows the last numerator root (z ~ 32 for q = 3) the
            // modulus is monotone.
            let mut prev = stability_function_real(q, 40.0).unwrap().abs();
            for k in 1..=55 {
                let z = 40.0 + 2.0 * k as f64;
                let r = stability_function_real(q, z).unwrap().abs();
                assert!(r < prev, "q={q} z={z}");
                prev = r;
            }
            assert!(prev < 0.05, "q={q} tail {prev}");
        }
    }

    #[test]
    fn one_step_order_is_2q_plus_2_locally() {
        for q in 0..=3 {
            let taus: [f64; 3] = if q < 3 {
                [0.1, 0.05, 0.025]
            } else {
                [0.4, 0.2, 0.1]
            };
            let errs: Vec<f64> = taus
                .iter()
                .map(|&tau| (stability_function_real(q, tau).unwrap() - (-tau).exp()).abs())
                .collect();
            let p = 2.0 * q as f64 + 2.0;
            let rate = (errs[1] / errs[2]).ln() / 2.0f64.ln();
            assert!((rate - p).abs() < 0.35, "q={q} rate {rate}");
            for (e, tau) in errs.iter().zip(&taus) {
                assert!(e / tau.powf(p) < 1.0, "q={q}: ratio {}", e / tau.powf(p));
            }
        }
    }

    #[test]
    fn reconstruction_is_backward_difference_for_q0() {
        let problem = scalar_problem(1.0, 1.0);
        let partition = TimePartition::new(1.0, 5, 1.4).unwrap();
        let sol = solve_trajectory(&problem, &partition, 0).unwrap();
        let d = reconstruct_derivative(&sol, &problem.u0).unwrap();
        for n in 0..5 {
            let tau = partition.width(n);
            let prev = if n == 0 {
                problem.u0[0]
            } else {
                sol.nodal_value(n)[0]
            };
            let expect = (sol.nodal_value(n + 1)[0] - prev) / tau;
            assert!((d.eval_in_slab(n, 0.5)[0] - expect).abs() < 1e-12, "slab {n}");
        }
    }

    #[test]
    fn reconstruction_of_continuous_trajectory_is_its_derivative() {
        // A piecewise polynomial that happens to be globally continuous of
        // degree q has zero jumps, so the reconstruction equals u'.
        let partition = TimePartition::new(1.0, 3, 1.0).unwrap();
        let basis = SlabBasis::radau(2).unwrap();
        let u = PiecewisePoly::interpolate(partition, basis, 1, |t| {
            DVector::from_element(1, 1.0 + 2.0 * t + t * t)
        });
        let u0 = DVector::from_element(1, 1.0);
        let sol = DgSolution {
            poly: u,
            initial: u0.clone(),
        };
        let d = reconstruct_derivative(&sol, &u0).unwrap();
        for &(n, s) in &[(0usize, 0.3), (1, 0.5), (2, 0.9)] {
            let t = sol.poly.partition().node(n) + s * sol.poly.partition().width(n);
            assert!((d.eval_in_slab(n, s)[0] - (2.0 + 2.0 * t)).abs() < 1e-11);
        }
        // A constant trajectory reconstructs to zero.
        let partition = TimePartition::new(1.0, 3, 1.0).unwrap();
        let basis = SlabBasis::radau(1).unwrap();
        let c = PiecewisePoly::interpolate(partition, basis, 1, |_| DVector::from_element(1, 3.5));
        let sol = DgSolution {
            poly: c,
            initial: DVector::from_element(1, 3.5),
        };
        let d = reconstruct_derivative(&sol, &sol.initial.clone()).unwrap();
        for n in 0..3 {
            assert!(d.eval_in_slab(n, 0.6)[0].abs() < 1e-12);
        }
    }
}
