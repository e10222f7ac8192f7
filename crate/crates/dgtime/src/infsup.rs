//! The inf-sup laboratory: dense assembly of the DG bilinear form and
//! the Gram matrices of the DG norms over a basis of the trial space,
//! plus discrete inf-sup and boundedness constants as matrix-pencil
//! eigenvalues.
//!
//! Basis enumeration is slab-major, then polynomial node, then
//! component. Assembly is dense: this module is a verification
//! instrument, capped at the eigensolver dimension.

use nalgebra::{DMatrix, DVector};

use crate::basis::SlabBasis;
use crate::error::{Error, Result};
use crate::hilbert::{HilbertTriple, ParabolicProblem};
use crate::linalg::{generalized_eigenvalues, EIGEN_DIM_CAP};
use crate::norms::{GeneralNorm, NormFunctional};
use crate::par;
use crate::partition::TimePartition;
use crate::quad::gauss_rule;
use crate::stepper::{assemble_slab, SlabMatrix};

/// Which expression of the bilinear form is assembled: with the time
/// derivative on the trial function (upwind form) or moved onto the
/// test function by parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormVariant {
    TrialDerivative,
    TestDerivative,
}

/// Assembles B[(i, j)] = B(phi_j, phi_i) over the trial-space basis.
pub fn assemble_bilinear(
    problem: &ParabolicProblem,
    partition: &TimePartition,
    q: usize,
    variant: FormVariant,
) -> Result<DMatrix<f64>> {
    let m = problem.dim();
    let q1 = q + 1;
    let n_slabs = partition.n_slabs();
    let dim = n_slabs * q1 * m;
    if dim > EIGEN_DIM_CAP {
        return Err(Error::DimensionCap {
            dim,
            cap: EIGEN_DIM_CAP,
        });
    }
    let basis = SlabBasis::radau(q)?;
    let left = basis.left_values().clone();
    let conv = basis.convection().clone();
    let mh = problem.triple.m_h().to_dense();
    let zero = DVector::zeros(m);
    let mut b = DMatrix::zeros(dim, dim);
    for n in 0..n_slabs {
        // The diagonal block of the upwind form is exactly the local slab
        // matrix; the by-parts variant replaces its time-derivative and
        // trace algebra.
        let sys = assemble_slab(problem, partition, q, n, &zero)?;
        let diag = match sys.matrix {
            SlabMatrix::Dense(g) => g,
            SlabMatrix::Band(_) => {
                return Err(Error::InvalidArgument(
                    "bilinear assembly needs a dense triple".into(),
                ))
            }
        };
        let base = n * q1 * m;
        for i in 0..q1 {
            for j in 0..q1 {
                for r in 0..m {
                    for c in 0..m {
                        let mut v = diag[(i * m + r, j * m + c)];
                        if variant == FormVariant::TestDerivative {
                            // Swap conv + l(0) l(0)^T for -conv^T + e_q e_q^T.
                            let upwind = conv[(i, j)] + left[i] * left[j];
                            let byparts = -conv[(j, i)]
                                + if i == q && j == q { 1.0 } else { 0.0 };
                            v += (byparts - upwind) * mh[(r, c)];
                        }
                        b[(base + i * m + r, base + j * m + c)] += v;
                    }
                }
            }
        }
        // Upwind coupling to the previous slab: -(u^n, v^{n,+}).
        if n > 0 {
            let prev = (n - 1) * q1 * m;
            for i in 0..q1 {
                for r in 0..m {
                    for c in 0..m {
                        b[(base + i * m + r, prev + q * m + c)] -= left[i] * mh[(r, c)];
                    }
                }
            }
        }
    }
    Ok(b)
}

/// Assembles the SPD Gram matrix of a DG norm over the same basis.
pub fn gram_matrix(
    triple: &HilbertTriple,
    partition: &TimePartition,
    q: usize,
    kind: impl Into<GeneralNorm>,
) -> Result<DMatrix<f64>> {
    let kind: GeneralNorm = kind.into();
    let m = triple.dim();
    let q1 = q + 1;
    let n_slabs = partition.n_slabs();
    let dim = n_slabs * q1 * m;
    if dim > EIGEN_DIM_CAP {
        return Err(Error::DimensionCap {
            dim,
            cap: EIGEN_DIM_CAP,
        });
    }
    let basis = SlabBasis::radau(q)?;
    let left = basis.left_values().clone();
    let mass = basis.mass().clone();
    let kv = triple.k_v().to_dense();
    let mh = triple.m_h().to_dense();
    let graph = matches!(
        kind.functional,
        NormFunctional::GraphInitial | NormFunctional::GraphFinal
    );
    // Stiffness of the reference basis: int l_i' l_j'.
    let rule = gauss_rule(q.max(1))?;
    let mut stiff: DMatrix<f64> = DMatrix::zeros(q1, q1);
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let d = basis.deriv_at(x);
        for i in 0..q1 {
            for j in 0..q1 {
                stiff[(i, j)] += w * d[i] * d[j];
            }
        }
    }
    // V'-metric of H-embedded functions: M_H K_V^{-1} M_H.
    let dual_metric = {
        let id = DMatrix::identity(m, m);
        let kv_inv = triple.k_v().factor()?.solve_mat(&id);
        &mh * kv_inv * &mh
    };

    let mut g = DMatrix::zeros(dim, dim);
    let add_block = |g: &mut DMatrix<f64>,
                         row_base: usize,
                         col_base: usize,
                         i: usize,
                         j: usize,
                         scale: f64,
                         metric: &DMatrix<f64>| {
        if scale == 0.0 {
            return;
        }
        for r in 0..m {
            for c in 0..m {
                g[(row_base + i * m + r, col_base + j * m + c)] += scale * metric[(r, c)];
            }
        }
    };

    for n in 0..n_slabs {
        let tau = partition.width(n);
        let base = n * q1 * m;
        for i in 0..q1 {
            for j in 0..q1 {
                add_block(&mut g, base, base, i, j, tau * mass[(i, j)], &kv);
                if graph && q > 0 {
                    add_block(&mut g, base, base, i, j, stiff[(i, j)] / tau, &dual_metric);
                }
            }
        }
    }
    // Interior node terms.
    for n in 1..n_slabs {
        let k_n = kind.weight.value(partition.width(n));
        let base = n * q1 * m;
        let prev = (n - 1) * q1 * m;
        if graph {
            // k_n || v^{n,+} - v^n ||_H^2
            for i in 0..q1 {
                for j in 0..q1 {
                    add_block(&mut g, base, base, i, j, k_n * left[i] * left[j], &mh);
                }
                add_block(&mut g, base, prev, i, q, -k_n * left[i], &mh);
                add_block(&mut g, prev, base, q, i, -k_n * left[i], &mh);
            }
            add_block(&mut g, prev, prev, q, q, k_n, &mh);
        } else {
            // k_n || v^{n,+} ||_H^2
            for i in 0..q1 {
                for j in 0..q1 {
                    add_block(&mut g, base, base, i, j, k_n * left[i] * left[j], &mh);
                }
            }
        }
    }
    match kind.functional {
        NormFunctional::GraphInitial | NormFunctional::EnergyInitial => {
            for i in 0..q1 {
                for j in 0..q1 {
                    add_block(&mut g, 0, 0, i, j, left[i] * left[j], &mh);
                }
            }
        }
        NormFunctional::GraphFinal | NormFunctional::EnergyFinal => {
            let last = (n_slabs - 1) * q1 * m;
            add_block(&mut g, last, last, q, q, 1.0, &mh);
        }
    }
    Ok(g)
}

fn pencil_eigenvalues(
    b: &DMatrix<f64>,
    g_trial: &DMatrix<f64>,
    g_test: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let dim = b.nrows();
    if g_trial.nrows() != dim || g_test.nrows() != dim {
        return Err(Error::DimensionMismatch(
            "bilinear and Gram matrices must be conformable".into(),
        ));
    }
    let chol = g_test
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd("test Gram matrix".into()))?;
    let w = chol.solve(b);
    let s = b.transpose() * w;
    let s_sym = 0.5 * (&s + s.transpose());
    generalized_eigenvalues(&s_sym, g_trial)
}

/// Discrete inf-sup constant: the square root of the smallest eigenvalue
/// of the pencil (B^T G_test^{-1} B, G_trial), which equals
/// inf over trial of sup over test of B(w, v) / (||w|| ||v||).
pub fn infsup_constant(
    b: &DMatrix<f64>,
    g_trial: &DMatrix<f64>,
    g_test: &DMatrix<f64>,
) -> Result<f64> {
    let eigs = pencil_eigenvalues(b, g_trial, g_test)?;
    Ok(eigs[0].max(0.0).sqrt())
}

/// Boundedness constant for a norm pair: the square root of the largest
/// eigenvalue of the same pencil.
pub fn boundedness_constant(
    b: &DMatrix<f64>,
    g_trial: &DMatrix<f64>,
    g_test: &DMatrix<f64>,
) -> Result<f64> {
    let eigs = pencil_eigenvalues(b, g_trial, g_test)?;
    Ok(eigs[eigs.len() - 1].max(0.0).sqrt())
}

/// All five observed constants of one (partition, q) instance.
#[derive(Debug, Clone, Copy)]
pub struct ObservedConstants {
    /// inf-sup of the (trial, test-sharp) pair.
    pub c1: f64,
    /// inf-sup of the (test-final-sharp, trial-final) pair.
    pub c2: f64,
    /// Boundedness over (trial, test).
    pub m0: f64,
    /// Boundedness over (trial-sharp, test-sharp).
    pub m1: f64,
    /// Boundedness over (test-final, trial-final).
    pub m2: f64,
}

/// Computes the theorem-pair constants on one instance.
pub fn observed_constants(
    problem: &ParabolicProblem,
    partition: &TimePartition,
    q: usize,
) -> Result<ObservedConstants> {
    use crate::norms::DgNorm::*;
    let b = assemble_bilinear(problem, partition, q, FormVariant::TrialDerivative)?;
    let triple = &problem.triple;
    let g = |kind: crate::norms::DgNorm| gram_matrix(triple, partition, q, kind);
    let (trial, trial_sharp) = (g(Trial)?, g(TrialSharp)?);
    let (test, test_sharp) = (g(Test)?, g(TestSharp)?);
    let (trial_final, test_final, test_final_sharp) =
        (g(TrialFinal)?, g(TestFinal)?, g(TestFinalSharp)?);
    Ok(ObservedConstants {
        c1: infsup_constant(&b, &trial, &test_sharp)?,
        c2: infsup_constant(&b, &test_final_sharp, &trial_final)?,
        m0: boundedness_constant(&b, &trial, &test)?,
        m1: boundedness_constant(&b, &trial_sharp, &test_sharp)?,
        m2: boundedness_constant(&b, &test_final, &trial_final)?,
    })
}

/// Parameter sweeps for the observed constants.
#[derive(Debug, Clone)]
pub enum SweepStudy {
    /// Refine the uniform partition of a fixed horizon.
    RefineTau { n_values: Vec<usize> },
    /// Grow the horizon with fixed slab width.
    GrowT { t_values: Vec<f64>, tau: f64 },
    /// Vary the polynomial degree at fixed partition.
    VaryQ { q_values: Vec<usize> },
}

#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    /// The swept parameter (N, T, or q).
    pub parameter: f64,
    pub constants: ObservedConstants,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub points: Vec<SweepPoint>,
    /// Set when min c1 over the sweep falls below half the median,
    /// which would contradict the claimed parameter independence.
    pub c1_decay_flag: bool,
}

impl SweepTable {
    fn from_points(points: Vec<SweepPoint>) -> Self {
        let mut c1s: Vec<f64> = points.iter().map(|p| p.constants.c1).collect();
        c1s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let flag = if c1s.is_empty() {
            false
        } else {
            let median = c1s[c1s.len() / 2];
            c1s[0] < 0.5 * median
        };
        SweepTable {
            points,
            c1_decay_flag: flag,
        }
    }
}

/// Runs a sweep; each point is pure and independent, so points run on
/// the worker pool. `make_problem` receives the horizon T.
pub fn sweep(
    study: &SweepStudy,
    make_problem: &(dyn Fn(f64) -> Result<ParabolicProblem> + Sync),
    t_default: f64,
    q_default: usize,
    n_default: usize,
) -> Result<SweepTable> {
    let points: Vec<Result<SweepPoint>> = match study {
        SweepStudy::RefineTau { n_values } => par::map(n_values, |&n| {
            let problem = make_problem(t_default)?;
            let partition = TimePartition::new(t_default, n, 1.0)?;
            Ok(SweepPoint {
                parameter: n as f64,
                constants: observed_constants(&problem, &partition, q_default)?,
            })
        }),
        SweepStudy::GrowT { t_values, tau } => par::map(t_values, |&t| {
            let n = (t / tau).round().max(1.0) as usize;
            let problem = make_problem(t)?;
            let partition = TimePartition::new(t, n, 1.0)?;
            Ok(SweepPoint {
                parameter: t,
                constants: observed_constants(&problem, &partition, q_default)?,
            })
        }),
        SweepStudy::VaryQ { q_values } => par::map(q_values, |&q| {
            let problem = make_problem(t_default)?;
            let partition = TimePartition::new(t_default, n_default, 1.0)?;
            Ok(SweepPoint {
                parameter: q as f64,
                constants: observed_constants(&problem, &partition, q)?,
            })
        }),
    };
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepTable::from_points(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{HilbertTriple, OperatorFamily};
    use crate::norms::{dg_norm_sq, DgNorm};
    use crate::PiecewisePoly;
    use nalgebra::DVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn scalar_problem() -> ParabolicProblem {
        ParabolicProblem::homogeneous(
            Arc::new(HilbertTriple::euclidean(1)),
            OperatorFamily::constant_dense(DMatrix::from_element(1, 1, 1.0), 1.0, 1.0),
            DVector::from_element(1, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn single_slab_scalar_hand_assembly() {
        // N = 1, q = 0, A = 1, tau = 1: B = [2].
        let problem = scalar_problem();
        let partition = TimePartition::new(1.0, 1, 1.0).unwrap();
        let b = assemble_bilinear(&problem, &partition, 0, FormVariant::TrialDerivative).unwrap();
        assert_eq!(b.nrows(), 1);
        assert!((b[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn both_form_variants_agree() {
        let problem = scalar_problem();
        let partition = TimePartition::new(1.0, 3, 1.4).unwrap();
        for q in 0..=2 {
            let a = assemble_bilinear(&problem, &partition, q, FormVariant::TrialDerivative).unwrap();
            let b = assemble_bilinear(&problem, &partition, q, FormVariant::TestDerivative).unwrap();
            let scale = a.amax();
            assert!((&a - &b).amax() < 1e-10 * scale, "q={q}");
        }
    }

    #[test]
    fn bilinear_is_block_lower_triangular() {
        let problem = scalar_problem();
        let partition = TimePartition::new(1.0, 4, 1.0).unwrap();
        let q = 1;
        let b = assemble_bilinear(&problem, &partition, q, FormVariant::TrialDerivative).unwrap();
        let block = q + 1;
        for bi in 0..4usize {
            for bj in 0..4usize {
                if bj > bi {
                    for i in 0..block {
                        for j in 0..block {
                            assert_eq!(b[(bi * block + i, bj * block + j)], 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn bilinear_times_solution_matches_load() {
        let problem = scalar_problem();
        let partition = TimePartition::new(1.0, 4, 1.0).unwrap();
        let q = 1;
        let sol = crate::stepper::solve_trajectory(&problem, &partition, q).unwrap();
        let b = assemble_bilinear(&problem, &partition, q, FormVariant::TrialDerivative).unwrap();
        // Load vector: F = 0, so only (u0, v^{0,+}).
        let basis = crate::basis::SlabBasis::radau(q).unwrap();
        let mut load = DVector::zeros(b.nrows());
        for i in 0..=q {
            load[i] = basis.left_values()[i] * problem.u0[0];
        }
        let mut x = DVector::zeros(b.nrows());
        for n in 0..4 {
            for i in 0..=q {
                x[n * (q + 1) + i] = sol.poly.slab_coeffs(n)[(0, i)];
            }
        }
        assert!(((&b * &x) - load).amax() < 1e-10);
    }

    #[test]
    fn gram_matches_norm_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let k = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.5]);
        let triple = HilbertTriple::dense(DMatrix::identity(2, 2), k).unwrap();
        let partition = TimePartition::new(1.0, 3, 1.3).unwrap();
        for q in 0..=2 {
            let basis = crate::basis::SlabBasis::radau(q).unwrap();
            for kind in DgNorm::ALL {
                let g = gram_matrix(&triple, &partition, q, kind).unwrap();
                // SPD and consistent with the norm on random elements.
                assert!(g.clone().cholesky().is_some(), "{} q={q}", kind.name());
                for _ in 0..4 {
                    let mut v = PiecewisePoly::zeros(partition.clone(), basis.clone(), 2);
                    let mut x = DVector::zeros(g.nrows());
                    for n in 0..3 {
                        for i in 0..=q {
                            for c in 0..2 {
                                let val = rng.random::<f64>() * 2.0 - 1.0;
                                v.slab_coeffs_mut(n)[(c, i)] = val;
                                x[(n * (q + 1) + i) * 2 + c] = val;
                            }
                        }
                    }
                    let via_gram = x.dot(&(&g * &x));
                    let via_norm = dg_norm_sq(&v, &triple, kind);
                    assert!(
                        (via_gram - via_norm).abs() < 1e-11 * via_norm.max(1.0),
                        "{} q={q}: {via_gram} vs {via_norm}",
                        kind.name()
                    );
                }
            }
        }
    }

    #[test]
    fn hand_computed_infsup_is_one() {
        // B = [2], trial and test Grams both [2]: c1 = 1.
        let problem = scalar_problem();
        let partition = TimePartition::new(1.0, 1, 1.0).unwrap();
        let b = assemble_bilinear(&problem, &partition, 0, FormVariant::TrialDerivative).unwrap();
        let gt = gram_matrix(&problem.triple, &partition, 0, DgNorm::Trial).unwrap();
        let gs = gram_matrix(&problem.triple, &partition, 0, DgNorm::TestSharp).unwrap();
        assert!((gt[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((gs[(0, 0)] - 2.0).abs() < 1e-14);
        let c1 = infsup_constant(&b, &gt, &gs).unwrap();
        assert!((c1 - 1.0).abs() < 1e-10);
        assert!((boundedness_constant(&b, &gt, &gs).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identity_pencil_and_homogeneity() {
        let id = DMatrix::identity(3, 3);
        assert!((infsup_constant(&id, &id, &id).unwrap() - 1.0).abs() < 1e-12);
        assert!((boundedness_constant(&id, &id, &id).unwrap() - 1.0).abs() < 1e-12);
        let b = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, -0.3, 2.0]);
        let g = DMatrix::identity(2, 2);
        let base = infsup_constant(&b, &g, &g).unwrap();
        let scaled = infsup_constant(&(4.0 * &b), &g, &g).unwrap();
        assert!((scaled - 4.0 * base).abs() < 1e-10);
    }

    #[test]
    fn transpose_pencil_duality() {
        // For square invertible B the pencil of B^T against the test Gram
        // has the same extreme eigenvalues as the pencil of B with the
        // Gram roles exchanged.
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let n = 8;
        let b = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                3.0 + rng.random::<f64>()
            } else {
                0.4 * (rng.random::<f64>() - 0.5)
            }
        });
        let mk_spd = |rng: &mut ChaCha8Rng| {
            let raw = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
            &raw * raw.transpose() + DMatrix::identity(n, n) * (n as f64)
        };
        let g1 = mk_spd(&mut rng);
        let g2 = mk_spd(&mut rng);
        let direct = infsup_constant(&b, &g1, &g2).unwrap();
        let adjoint = infsup_constant(&b.transpose(), &g2, &g1).unwrap();
        assert!((direct - adjoint).abs() < 1e-9 * direct.max(1.0));
        let d2 = boundedness_constant(&b, &g1, &g2).unwrap();
        let a2 = boundedness_constant(&b.transpose(), &g2, &g1).unwrap();
        assert!((d2 - a2).abs() < 1e-9 * d2.max(1.0));
    }

    #[test]
    fn constants_invariant_under_metric_scaling() {
        // Scaling both metrics rescales norms but leaves c1 unchanged.
        let mk = |s: f64| -> (ParabolicProblem, TimePartition) {
            let triple = Arc::new(
                HilbertTriple::dense(
                    DMatrix::from_element(1, 1, s),
                    DMatrix::from_element(1, 1, s),
                )
                .unwrap(),
            );
            let problem = ParabolicProblem::homogeneous(
                triple,
                OperatorFamily::constant_dense(DMatrix::from_element(1, 1, s), 1.0, 1.0),
                DVector::from_element(1, 1.0),
            )
            .unwrap();
            (problem, TimePartition::new(1.0, 4, 1.0).unwrap())
        };
        let (p1, part) = mk(1.0);
        let (p7, _) = mk(7.0);
        let a = observed_constants(&p1, &part, 1).unwrap();
        let b = observed_constants(&p7, &part, 1).unwrap();
        assert!((a.c1 - b.c1).abs() < 1e-9);
        assert!((a.m0 - b.m0).abs() < 1e-9);
    }

    #[test]
    fn refine_tau_sweep_has_positive_plateau() {
        let make = |t: f64| -> Result<ParabolicProblem> {
            let _ = t;
            Ok(scalar_problem())
        };
        let table = sweep(
            &SweepStudy::RefineTau {
                n_values: vec![1, 2, 4, 8],
            },
            &make,
            1.0,
            0,
            4,
        )
        .unwrap();
        assert_eq!(table.points.len(), 4);
        for p in &table.points {
            assert!(p.constants.c1 > 1e-3, "c1 = {}", p.constants.c1);
        }
        assert!(!table.c1_decay_flag);
    }
}
