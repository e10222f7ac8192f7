//! The discrete Hilbert triple (H, V, V') as an SPD matrix pair, and
//! time-dependent operator families with declared coercivity and
//! boundedness constants.
//!
//! Functionals in V' are stored as plain coefficient vectors; the duality
//! pairing is the Euclidean dot product and all metric structure lives in
//! the two SPD matrices.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{generalized_eigenvalues, SpdFactor, SpdMatrix};

const SYMMETRY_TOL: f64 = 1e-12;

/// H and V inner products as SPD matrices, with factorization handles.
pub struct HilbertTriple {
    m_h: SpdMatrix,
    k_v: SpdMatrix,
    m_factor: SpdFactor,
    k_factor: SpdFactor,
    dim: usize,
}

impl HilbertTriple {
    pub fn new(m_h: SpdMatrix, k_v: SpdMatrix) -> Result<Self> {
        if m_h.dim() != k_v.dim() {
            return Err(Error::DimensionMismatch(format!(
                "H metric is {}-dimensional but V metric is {}-dimensional",
                m_h.dim(),
                k_v.dim()
            )));
        }
        if m_h.symmetry_defect() > SYMMETRY_TOL {
            return Err(Error::NotSpd("H inner product matrix is not symmetric".into()));
        }
        if k_v.symmetry_defect() > SYMMETRY_TOL {
            return Err(Error::NotSpd("V inner product matrix is not symmetric".into()));
        }
        let m_factor = m_h.factor()?;
        let k_factor = k_v.factor()?;
        let dim = m_h.dim();
        Ok(HilbertTriple {
            m_h,
            k_v,
            m_factor,
            k_factor,
            dim,
        })
    }

    pub fn dense(m_h: DMatrix<f64>, k_v: DMatrix<f64>) -> Result<Self> {
        Self::new(SpdMatrix::Dense(m_h), SpdMatrix::Dense(k_v))
    }

    /// Identity metrics in dimension m.
    pub fn euclidean(m: usize) -> Self {
        Self::dense(DMatrix::identity(m, m), DMatrix::identity(m, m)).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m_h(&self) -> &SpdMatrix {
        &self.m_h
    }

    pub fn k_v(&self) -> &SpdMatrix {
        &self.k_v
    }

    pub fn h_inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.m_h.inner(x, y)
    }

    pub fn h_norm(&self, x: &DVector<f64>) -> f64 {
        self.m_h.quad_form(x).max(0.0).sqrt()
    }

    pub fn v_inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.k_v.inner(x, y)
    }

    pub fn v_norm(&self, x: &DVector<f64>) -> f64 {
        self.k_v.quad_form(x).max(0.0).sqrt()
    }

    /// Dual norm sqrt(g^T K_V^{-1} g); equals sup_v g.v / ||v||_V.
    pub fn dual_norm(&self, g: &DVector<f64>) -> f64 {
        self.dual_norm_sq(g).max(0.0).sqrt()
    }

    pub fn dual_norm_sq(&self, g: &DVector<f64>) -> f64 {
        assert_eq!(g.len(), self.dim, "functional dimension mismatch");
        g.dot(&self.k_factor.solve(g))
    }

    /// Squared V'-norm of a function w embedded through the H inner
    /// product: the functional is v -> (w, v)_H, so its vector is M_H w.
    pub fn embedded_dual_norm_sq(&self, w: &DVector<f64>) -> f64 {
        self.dual_norm_sq(&self.m_h.mat_vec(w))
    }

    /// V'-norm of an H-valued function.
    pub fn embedded_dual_norm(&self, w: &DVector<f64>) -> f64 {
        self.embedded_dual_norm_sq(w).max(0.0).sqrt()
    }

    /// Solves K_V x = g.
    pub fn k_solve(&self, g: &DVector<f64>) -> DVector<f64> {
        self.k_factor.solve(g)
    }

    /// Solves M_H x = g.
    pub fn m_solve(&self, g: &DVector<f64>) -> DVector<f64> {
        self.m_factor.solve(g)
    }
}

/// Declared polynomial time-degree of a coefficient, or smooth sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDegree {
    Poly(usize),
    Smooth,
}

type DenseOpFn = Box<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

enum OpKind {
    Dense(DenseOpFn),
    /// Constant symmetric operator, possibly banded (A(t) = K for the
    /// heat realization).
    ConstantSpd(SpdMatrix),
}

/// A family t -> A(t) with declared coercivity `alpha` and boundedness
/// `bound` relative to the V metric.
pub struct OperatorFamily {
    kind: OpKind,
    pub degree: TimeDegree,
    pub alpha: f64,
    pub bound: f64,
}

impl OperatorFamily {
    pub fn dense(
        f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
        degree: TimeDegree,
        alpha: f64,
        bound: f64,
    ) -> Self {
        OperatorFamily {
            kind: OpKind::Dense(Box::new(f)),
            degree,
            alpha,
            bound,
        }
    }

    pub fn constant_dense(a: DMatrix<f64>, alpha: f64, bound: f64) -> Self {
        OperatorFamily {
            kind: OpKind::Dense(Box::new(move |_| a.clone())),
            degree: TimeDegree::Poly(0),
            alpha,
            bound,
        }
    }

    pub fn constant_spd(a: SpdMatrix, alpha: f64, bound: f64) -> Self {
        OperatorFamily {
            kind: OpKind::ConstantSpd(a),
            degree: TimeDegree::Poly(0),
            alpha,
            bound,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, OpKind::ConstantSpd(_)) || self.degree == TimeDegree::Poly(0)
    }

    /// The constant SPD operator, when stored that way.
    pub fn as_constant_spd(&self) -> Option<&SpdMatrix> {
        match &self.kind {
            OpKind::ConstantSpd(a) => Some(a),
            OpKind::Dense(_) => None,
        }
    }

    /// Dense evaluation of A(t).
    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        match &self.kind {
            OpKind::Dense(f) => f(t),
            OpKind::ConstantSpd(a) => a.to_dense(),
        }
    }

    /// A(t) x without forming the dense matrix when constant.
    pub fn apply(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            OpKind::Dense(f) => f(t) * x,
            OpKind::ConstantSpd(a) => a.mat_vec(x),
        }
    }
}

pub type SourceFn = Box<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// u' + A(t) u = F(t), u(0) = u0 over a [`HilbertTriple`].
pub struct ParabolicProblem {
    pub triple: Arc<HilbertTriple>,
    pub op: OperatorFamily,
    pub source: SourceFn,
    pub source_degree: TimeDegree,
    pub u0: DVector<f64>,
}

impl ParabolicProblem {
    pub fn new(
        triple: Arc<HilbertTriple>,
        op: OperatorFamily,
        source: SourceFn,
        source_degree: TimeDegree,
        u0: DVector<f64>,
    ) -> Result<Self> {
        if u0.len() != triple.dim() {
            return Err(Error::DimensionMismatch(format!(
                "initial vector has length {} but the triple is {}-dimensional",
                u0.len(),
                triple.dim()
            )));
        }
        Ok(ParabolicProblem {
            triple,
            op,
            source,
            source_degree,
            u0,
        })
    }

    /// A homogeneous problem (F = 0).
    pub fn homogeneous(triple: Arc<HilbertTriple>, op: OperatorFamily, u0: DVector<f64>) -> Result<Self> {
        let m = triple.dim();
        Self::new(
            triple,
            op,
            Box::new(move |_| DVector::zeros(m)),
            TimeDegree::Poly(0),
            u0,
        )
    }

    pub fn dim(&self) -> usize {
        self.triple.dim()
    }
}

/// Spectrally estimated coercivity and boundedness constants.
#[derive(Debug, Clone)]
pub struct ConstantsEstimate {
    /// min over samples of the smallest eigenvalue of (sym A(t), K_V).
    pub alpha: f64,
    /// max over samples of the largest generalized singular value of A(t).
    pub bound: f64,
    /// Set when the declared coercivity constant exceeds the estimate by
    /// more than 1e-8, i.e. the declaration is violated.
    pub declared_alpha_violated: bool,
}

/// Estimates (alpha, M) for an operator family over time samples.
pub fn estimate_constants(
    op: &OperatorFamily,
    triple: &HilbertTriple,
    t_samples: &[f64],
) -> Result<ConstantsEstimate> {
    if t_samples.is_empty() {
        return Err(Error::InvalidArgument("need at least one time sample".into()));
    }
    let k = triple.k_v().to_dense();
    let mut alpha = f64::INFINITY;
    let mut bound = 0.0f64;
    for &t in t_samples {
        let a = op.eval(t);
        let sym = 0.5 * (&a + a.transpose());
        let eigs = generalized_eigenvalues(&sym, &k)?;
        alpha = alpha.min(eigs[0]);
        // Largest generalized singular value: sqrt of the top eigenvalue
        // of (A^T K^{-1} A, K).
        let kinv_a = triple.k_v().factor()?.solve_mat(&a);
        let gram = a.transpose() * kinv_a;
        let eigs = generalized_eigenvalues(&gram, &k)?;
        bound = bound.max(eigs[eigs.len() - 1].max(0.0).sqrt());
    }
    Ok(ConstantsEstimate {
        alpha,
        bound,
        declared_alpha_violated: alpha < op.alpha - 1e-8,
    })
}

impl SpdFactor {
    /// Column-wise solve against a dense right-hand side.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            let col: DVector<f64> = b.column(j).into();
            out.set_column(j, &self.solve(&col));
        }
        out
    }
}

/// Solves A(t) x = g; failure indicates a violated coercivity declaration.
pub fn apply_inverse(
    op: &OperatorFamily,
    triple: &HilbertTriple,
    t: f64,
    g: &DVector<f64>,
) -> Result<DVector<f64>> {
    if g.len() != triple.dim() {
        return Err(Error::DimensionMismatch("functional dimension mismatch".into()));
    }
    if let Some(a) = op.as_constant_spd() {
        return Ok(a.factor()?.solve(g));
    }
    let a = op.eval(t);
    a.lu().solve(g).ok_or_else(|| {
        Error::Singular(format!(
            "A({t}) is numerically singular; the declared coercivity does not hold"
        ))
    })
}

/// Observed inverse-operator bounds on random functionals.
#[derive(Debug, Clone)]
pub struct InverseBoundsReport {
    pub samples: usize,
    /// min over samples of <g, A^{-1} g> - (alpha/M^2) ||g||_{V'}^2.
    pub min_coercivity_margin_squared: f64,
    /// Same margin with the unsquared dual norm on the right-hand side.
    pub min_coercivity_margin_unsquared: f64,
    /// max over samples of ||A^{-1} g||_V / ((1/alpha) ||g||_{V'}).
    pub max_v_norm_ratio: f64,
    pub squared_form_holds: bool,
    pub unsquared_form_holds: bool,
}

/// Checks <g, A^{-1}g> >= (alpha/M^2) ||g||_{V'}^2 and
/// ||A^{-1}g||_V <= (1/alpha) ||g||_{V'} on random functionals. Both the
/// squared and unsquared right-hand sides of the first bound are
/// reported; the squared form is the dimensionally consistent one.
pub fn check_inverse_bounds(
    op: &OperatorFamily,
    triple: &HilbertTriple,
    t_samples: &[f64],
    n_random: usize,
    seed: u64,
) -> Result<InverseBoundsReport> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let m = triple.dim();
    let mut min_sq = f64::INFINITY;
    let mut min_unsq = f64::INFINITY;
    let mut max_ratio = 0.0f64;
    let mut samples = 0usize;
    for &t in t_samples {
        for _ in 0..n_random {
            let g = DVector::from_fn(m, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let x = apply_inverse(op, triple, t, &g)?;
            let pairing = g.dot(&x);
            let dual = triple.dual_norm(&g);
            let lower = op.alpha / (op.bound * op.bound);
            min_sq = min_sq.min(pairing - lower * dual * dual);
            min_unsq = min_unsq.min(pairing - lower * dual);
            if dual > 0.0 {
                max_ratio = max_ratio.max(triple.v_norm(&x) / (dual / op.alpha));
            }
            samples += 1;
        }
    }
    Ok(InverseBoundsReport {
        samples,
        min_coercivity_margin_squared: min_sq,
        min_coercivity_margin_unsquared: min_unsq,
        max_v_norm_ratio: max_ratio,
        squared_form_holds: min_sq >= -1e-10,
        unsquared_form_holds: min_unsq >= -1e-10,
    })
}
