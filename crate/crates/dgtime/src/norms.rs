//! The DG norm family, slab projections, interpolants, the discrete
//! characteristic function, and the slab trace inequality.
//!
//! Eight norms act on piecewise polynomials: four node functionals
//! (value+derivative integrals with jump terms, or V-energy integrals
//! with left-trace terms, each anchored at the initial or the final
//! value) crossed with a jump-weight rule (1, tau_n, or 1/tau_n).

use nalgebra::{DMatrix, DVector};

use crate::basis::{SlabBasis, SlabPoly};
use crate::error::{Error, Result};
use crate::hilbert::HilbertTriple;
use crate::quad::gauss_rule;
use crate::PiecewisePoly;

/// Which integrals and node terms a norm collects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormFunctional {
    /// int ||v'||_{V'}^2 + ||v||_V^2, initial value, weighted jumps.
    GraphInitial,
    /// int ||v||_V^2, initial value, weighted left traces.
    EnergyInitial,
    /// int ||v'||_{V'}^2 + ||v||_V^2, final value, weighted jumps.
    GraphFinal,
    /// int ||v||_V^2, final value, weighted left traces.
    EnergyFinal,
}

/// Weight sequence k_n applied to the interior node terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpWeight {
    Unit,
    SlabWidth,
    InverseSlabWidth,
}

impl JumpWeight {
    pub fn value(self, tau: f64) -> f64 {
        match self {
            JumpWeight::Unit => 1.0,
            JumpWeight::SlabWidth => tau,
            JumpWeight::InverseSlabWidth => 1.0 / tau,
        }
    }
}

/// A (functional, weight) pair; the generic API behind the named norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneralNorm {
    pub functional: NormFunctional,
    pub weight: JumpWeight,
}

/// The eight named DG norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgNorm {
    /// Trial norm: graph integrals, initial value, unit jump weights.
    Trial,
    /// Trial norm with 1/tau_n jump weights.
    TrialSharp,
    /// Test norm: energy integral, initial value, unit trace weights.
    Test,
    /// Test norm with tau_n trace weights.
    TestSharp,
    /// Graph integrals anchored at the final value.
    TrialFinal,
    TrialFinalSharp,
    /// Energy integral anchored at the final value.
    TestFinal,
    TestFinalSharp,
}

impl DgNorm {
    pub const ALL: [DgNorm; 8] = [
        DgNorm::Trial,
        DgNorm::TrialSharp,
        DgNorm::Test,
        DgNorm::TestSharp,
        DgNorm::TrialFinal,
        DgNorm::TrialFinalSharp,
        DgNorm::TestFinal,
        DgNorm::TestFinalSharp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DgNorm::Trial => "trial",
            DgNorm::TrialSharp => "trial_sharp",
            DgNorm::Test => "test",
            DgNorm::TestSharp => "test_sharp",
            DgNorm::TrialFinal => "trial_final",
            DgNorm::TrialFinalSharp => "trial_final_sharp",
            DgNorm::TestFinal => "test_final",
            DgNorm::TestFinalSharp => "test_final_sharp",
        }
    }
}

impl From<DgNorm> for GeneralNorm {
    fn from(kind: DgNorm) -> GeneralNorm {
        use DgNorm::*;
        use JumpWeight::*;
        use NormFunctional::*;
        let (functional, weight) = match kind {
            Trial => (GraphInitial, Unit),
            TrialSharp => (GraphInitial, InverseSlabWidth),
            Test => (EnergyInitial, Unit),
            TestSharp => (EnergyInitial, SlabWidth),
            TrialFinal => (GraphFinal, Unit),
            TrialFinalSharp => (GraphFinal, InverseSlabWidth),
            TestFinal => (EnergyFinal, Unit),
            TestFinalSharp => (EnergyFinal, SlabWidth),
        };
        GeneralNorm { functional, weight }
    }
}

/// Squared DG norm of a piecewise polynomial. Integrals are exact: the
/// integrands are polynomials of known degree.
pub fn dg_norm_sq(v: &PiecewisePoly, triple: &HilbertTriple, kind: impl Into<GeneralNorm>) -> f64 {
    let kind: GeneralNorm = kind.into();
    let partition = v.partition();
    let q = v.degree();
    let rule = gauss_rule(q + 1).expect("reference rule");
    let graph = matches!(
        kind.functional,
        NormFunctional::GraphInitial | NormFunctional::GraphFinal
    );
    let mut total = 0.0;
    for n in 0..partition.n_slabs() {
        let tau = partition.width(n);
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            let val = v.eval_in_slab(n, x);
            total += tau * w * triple.k_v().quad_form(&val);
            if graph && q > 0 {
                let der = v.deriv_in_slab(n, x);
                total += tau * w * triple.embedded_dual_norm_sq(&der);
            }
        }
    }
    for n in 1..partition.n_slabs() {
        let k_n = kind.weight.value(partition.width(n));
        let node_vec = if graph {
            v.jump(n)
        } else {
            v.right_trace(n)
        };
        total += k_n * triple.m_h().quad_form(&node_vec);
    }
    match kind.functional {
        NormFunctional::GraphInitial | NormFunctional::EnergyInitial => {
            let v0 = v.right_trace(0);
            total += triple.m_h().quad_form(&v0);
        }
        NormFunctional::GraphFinal | NormFunctional::EnergyFinal => {
            let vn = v.left_trace(partition.n_slabs());
            total += triple.m_h().quad_form(&vn);
        }
    }
    total
}

/// DG norm of a piecewise polynomial.
pub fn dg_norm(v: &PiecewisePoly, triple: &HilbertTriple, kind: impl Into<GeneralNorm>) -> f64 {
    dg_norm_sq(v, triple, kind).max(0.0).sqrt()
}

/// Projects an integrable slab function onto degree-q polynomials with a
/// vanishing value at the slab start and the first q moments matched:
/// the output p satisfies p(t_n+) = 0 and
/// int (v - p)(t)(t - t_n)^l dt = 0 for l = 0..q-1.
///
/// The moment system is solved in the shifted variable (t - t_n)/tau_n,
/// which keeps it scale-free. Undefined for q = 0.
pub fn zero_start_projection(
    v: &dyn Fn(f64) -> DVector<f64>,
    t_start: f64,
    width: f64,
    q: usize,
    dim: usize,
    quad_points: usize,
) -> Result<SlabPoly> {
    if q == 0 {
        return Err(Error::InvalidArgument(
            "the zero-start projection needs degree q >= 1".into(),
        ));
    }
    let rule = gauss_rule(quad_points.max(q + 1))?;
    // Moments m_l = int_0^1 v(t0 + tau s) s^l ds for l = 0..q-1.
    let mut moments = DMatrix::zeros(q, dim);
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let val = v(t_start + width * x);
        for l in 0..q {
            let wl = w * x.powi(l as i32);
            for c in 0..dim {
                moments[(l, c)] += wl * val[c];
            }
        }
    }
    // sum_{k=1}^{q} a_k / (k + l + 1) = m_l
    let h = DMatrix::from_fn(q, q, |l, k| 1.0 / ((k + 1 + l + 1) as f64));
    let coeffs = h
        .lu()
        .solve(&moments)
        .ok_or_else(|| Error::Singular("moment system".into()))?;
    let basis = SlabBasis::radau(q)?;
    let nodal = DMatrix::from_fn(dim, q + 1, |c, j| {
        let s = basis.nodes()[j];
        (0..q).map(|k| coeffs[(k, c)] * s.powi(k as i32 + 1)).sum()
    });
    Ok(SlabPoly::new(t_start, width, basis, nodal))
}

/// L2(J_n; U) norm of a slab polynomial in the metric `u_metric`.
pub fn slab_l2_norm(p: &SlabPoly, u_metric: &crate::linalg::SpdMatrix) -> f64 {
    let rule = gauss_rule(p.degree() + 1).expect("reference rule");
    let mut total = 0.0;
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        total += p.width * w * u_metric.quad_form(&p.eval_sigma(x));
    }
    total.max(0.0).sqrt()
}

/// Observed stability of the zero-start projection over random degree
/// q+2 polynomial samples, in both the H and V metrics.
#[derive(Debug, Clone)]
pub struct ProjectionStability {
    pub samples: usize,
    pub max_ratio_h: f64,
    pub max_ratio_v: f64,
}

pub fn zero_start_stability(
    q: usize,
    triple: &HilbertTriple,
    t_start: f64,
    width: f64,
    samples: usize,
    seed: u64,
) -> Result<ProjectionStability> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dim = triple.dim();
    let deg = q + 2;
    let mut max_h = 0.0f64;
    let mut max_v = 0.0f64;
    let quad = q + 4;
    let sample_basis = SlabBasis::radau(deg)?;
    for _ in 0..samples {
        let coeffs = DMatrix::from_fn(dim, deg + 1, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let sample = SlabPoly::new(t_start, width, sample_basis.clone(), coeffs);
        let f = |t: f64| sample.eval(t);
        let p = zero_start_projection(&f, t_start, width, q, dim, quad)?;
        // Norms of the degree q+2 input need a finer reference rule.
        let rule = gauss_rule(deg + 1)?;
        let mut in_h = 0.0;
        let mut in_v = 0.0;
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            let val = sample.eval_sigma(x);
            in_h += width * w * triple.m_h().quad_form(&val);
            in_v += width * w * triple.k_v().quad_form(&val);
        }
        let out_h = slab_l2_norm(&p, triple.m_h());
        let out_v = slab_l2_norm(&p, triple.k_v());
        if in_h > 1e-14 {
            max_h = max_h.max(out_h / in_h.sqrt());
        }
        if in_v > 1e-14 {
            max_v = max_v.max(out_v / in_v.sqrt());
        }
    }
    Ok(ProjectionStability {
        samples,
        max_ratio_h: max_h,
        max_ratio_v: max_v,
    })
}

/// Lagrange interpolant at the q+1 equispaced slab nodes including both
/// endpoints; for q = 0 the right-endpoint value, matching the piecewise
/// constant convention.
pub fn lagrange_interpolant(
    v: &dyn Fn(f64) -> DVector<f64>,
    t_start: f64,
    width: f64,
    q: usize,
    dim: usize,
) -> Result<SlabPoly> {
    let basis = SlabBasis::radau(q)?;
    if q == 0 {
        let val = v(t_start + width);
        return Ok(SlabPoly::new(
            t_start,
            width,
            basis,
            DMatrix::from_fn(dim, 1, |c, _| val[c]),
        ));
    }
    let nodes: Vec<f64> = (0..=q).map(|j| j as f64 / q as f64).collect();
    let values: Vec<DVector<f64>> = nodes.iter().map(|&s| v(t_start + width * s)).collect();
    // Re-express on the Radau basis by evaluating the interpolant there.
    let mut nodal = DMatrix::zeros(dim, q + 1);
    for (col, &s) in basis.nodes().iter().enumerate() {
        let mut val = DVector::zeros(dim);
        for (j, vj) in values.iter().enumerate() {
            let mut l = 1.0;
            for (k, &nk) in nodes.iter().enumerate() {
                if k != j {
                    l *= (s - nk) / (nodes[j] - nk);
                }
            }
            val.axpy(l, vj, 1.0);
        }
        nodal.set_column(col, &val);
    }
    Ok(SlabPoly::new(t_start, width, basis, nodal))
}

/// Result of the discrete characteristic construction: the degree-q
/// polynomial matching the final value of the input and the moments of
/// its truncation to (t_n, s], plus the observed stability ratios.
#[derive(Debug, Clone)]
pub struct DiscreteCharacteristic {
    pub poly: SlabPoly,
    pub ratio_h: f64,
    pub ratio_v: f64,
}

/// Builds the discrete characteristic of `v` at the split point `s`
/// (physical time in the slab): the unique w of degree q with
/// w(t_{n+1}) = v(t_{n+1}) and int_Jn (w, x) dt = int_{t_n}^{s} (v, x) dt
/// for all x of degree <= q-1. The defining equations decouple by
/// component, so the metric enters only the reported ratios.
pub fn discrete_characteristic(
    v: &SlabPoly,
    s: f64,
    triple: &HilbertTriple,
) -> Result<DiscreteCharacteristic> {
    let q = v.degree();
    if q == 0 {
        return Err(Error::InvalidArgument(
            "the discrete characteristic needs degree q >= 1".into(),
        ));
    }
    let t_end = v.t_start + v.width;
    if !(s >= v.t_start && s <= t_end) {
        return Err(Error::InvalidArgument(format!(
            "split point {s} outside the slab [{}, {t_end}]",
            v.t_start
        )));
    }
    let s_ref = (s - v.t_start) / v.width;
    let dim = v.dim();
    let basis = v.basis().clone();
    let q1 = q + 1;
    // Unknowns: nodal values at the Radau nodes. Row 0 pins the right
    // endpoint; rows l = 1..q are the moment equations against s^{l-1}.
    let rule = gauss_rule(q + 1)?;
    let mut a = DMatrix::zeros(q1, q1);
    for j in 0..q1 {
        a[(0, j)] = if j == q { 1.0 } else { 0.0 };
    }
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let vals = basis.eval_at(x);
        for l in 1..=q {
            let s_pow = w * x.powi(l as i32 - 1);
            for j in 0..q1 {
                a[(l, j)] += s_pow * vals[j];
            }
        }
    }
    let mut rhs = DMatrix::zeros(q1, dim);
    let v_end = v.eval_sigma(1.0);
    for c in 0..dim {
        rhs[(0, c)] = v_end[c];
    }
    // Moments of v over (0, s_ref] in the reference variable.
    if s_ref > 0.0 {
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            let xs = s_ref * x;
            let val = v.eval_sigma(xs);
            for l in 1..=q {
                let s_pow = s_ref * w * xs.powi(l as i32 - 1);
                for c in 0..dim {
                    rhs[(l, c)] += s_pow * val[c];
                }
            }
        }
    }
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("discrete characteristic system".into()))?;
    let poly = SlabPoly::new(v.t_start, v.width, basis, sol.transpose());
    let denom_h = slab_l2_norm(v, triple.m_h());
    let denom_v = slab_l2_norm(v, triple.k_v());
    let ratio_h = if denom_h > 0.0 {
        slab_l2_norm(&poly, triple.m_h()) / denom_h
    } else {
        0.0
    };
    let ratio_v = if denom_v > 0.0 {
        slab_l2_norm(&poly, triple.k_v()) / denom_v
    } else {
        0.0
    };
    Ok(DiscreteCharacteristic {
        poly,
        ratio_h,
        ratio_v,
    })
}

/// Observed slab trace constant: max_t ||v(t)||_H divided by
/// tau^{-1/2} (||v||_{L2(Jn;V)}^2 + tau^2 ||v'||_{L2(Jn;V')}^2)^{1/2}.
/// Returns 0 for the zero polynomial.
pub fn trace_ratio(v: &SlabPoly, triple: &HilbertTriple) -> f64 {
    let q = v.degree();
    let rule = gauss_rule(q + 1).expect("reference rule");
    let tau = v.width;
    let mut denom_sq = 0.0;
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        denom_sq += tau * w * triple.k_v().quad_form(&v.eval_sigma(x));
        if q > 0 {
            let der = v.deriv_sigma(x);
            denom_sq += tau * tau * tau * w * triple.embedded_dual_norm_sq(&der);
        }
    }
    if denom_sq <= 0.0 {
        return 0.0;
    }
    let mut max_val: f64 = 0.0;
    let samples = 200;
    for k in 0..=samples {
        let s = k as f64 / samples as f64;
        max_val = max_val.max(triple.h_norm(&v.eval_sigma(s)));
    }
    max_val / (denom_sq.sqrt() / tau.sqrt())
}
