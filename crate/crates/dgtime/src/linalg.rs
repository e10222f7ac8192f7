//! Dense symmetric eigensolvers and banded SPD/LU factorizations.
//!
//! Generalized symmetric-definite eigenproblems are Cholesky-reduced to a
//! standard symmetric problem and solved with cyclic Jacobi iteration,
//! which is deterministic at the dimensions this crate targets. Banded
//! storage backs the finite element operators, where the matrices are
//! large but narrow.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Hard cap on eigenproblem dimension.
pub const EIGEN_DIM_CAP: usize = 2000;

const JACOBI_TOL: f64 = 1e-11;
const JACOBI_MAX_SWEEPS: usize = 10_000;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi iteration, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigensolver needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if n > EIGEN_DIM_CAP {
        return Err(Error::DimensionCap {
            dim: n,
            cap: EIGEN_DIM_CAP,
        });
    }
    let mut m = a.clone();
    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let off = |m: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += m[(i, j)] * m[(i, j)];
            }
        }
        (2.0 * s).sqrt()
    };
    let mut sweeps = 0;
    while off(&m) > JACOBI_TOL * scale {
        sweeps += 1;
        if sweeps > JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNonConvergence {
                sweeps,
                offdiag: off(&m),
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-2 * JACOBI_TOL * scale / (n as f64) {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eigs)
}

/// Eigenvalues of the symmetric-definite pencil A v = lambda B v (B SPD),
/// ascending. A is symmetrized before the reduction.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    if b.nrows() != n || b.ncols() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch(
            "pencil matrices must be square and conformable".into(),
        ));
    }
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd("right-hand pencil matrix".into()))?;
    let l = chol.l();
    let a_sym = 0.5 * (a + a.transpose());
    // C = L^-1 A L^-T, built from two triangular solves.
    let x = l
        .solve_lower_triangular(&a_sym)
        .ok_or_else(|| Error::Singular("triangular solve in pencil reduction".into()))?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Singular("triangular solve in pencil reduction".into()))?;
    let c_sym = 0.5 * (&c + &c.transpose());
    symmetric_eigenvalues(&c_sym)
}

/// Symmetric banded matrix storing the lower band, row-major.
#[derive(Debug, Clone)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBand {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c <= r && r - c <= self.bw);
        r * (self.bw + 1) + (self.bw - (r - c))
    }

    /// Accumulates `v` at (r, c); either triangle may be addressed.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        assert!(r - c <= self.bw, "entry ({r},{c}) outside band {}", self.bw);
        let i = self.idx(r, c);
        self.data[i] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        if r - c > self.bw {
            0.0
        } else {
            self.data[self.idx(r, c)]
        }
    }

    pub fn mat_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = DVector::zeros(self.n);
        for r in 0..self.n {
            let lo = r.saturating_sub(self.bw);
            for c in lo..=r {
                let v = self.data[self.idx(r, c)];
                y[r] += v * x[c];
                if c != r {
                    y[c] += v * x[r];
                }
            }
        }
        y
    }

    /// x^T A x without forming A x.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        assert_eq!(x.len(), self.n);
        let mut s = 0.0;
        for r in 0..self.n {
            let lo = r.saturating_sub(self.bw);
            for c in lo..=r {
                let v = self.data[self.idx(r, c)];
                s += if c == r { v * x[r] * x[r] } else { 2.0 * v * x[r] * x[c] };
            }
        }
        s
    }

    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.mat_vec(y).dot(x)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            let lo = r.saturating_sub(self.bw);
            for c in lo..=r {
                let v = self.data[self.idx(r, c)];
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
        m
    }

    /// Banded Cholesky factorization; fails on non-SPD input.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let n = self.n;
        let bw = self.bw;
        let mut l = vec![0.0; n * (bw + 1)];
        let idx = |r: usize, c: usize| r * (bw + 1) + (bw - (r - c));
        for r in 0..n {
            let lo = r.saturating_sub(bw);
            for c in lo..=r {
                let mut sum = self.data[self.idx(r, c)];
                let kstart = lo.max(c.saturating_sub(bw));
                for k in kstart..c {
                    sum -= l[idx(r, k)] * l[idx(c, k)];
                }
                if c == r {
                    if sum <= 0.0 {
                        return Err(Error::NotSpd(format!(
                            "banded Cholesky pivot {sum:.3e} at row {r}"
                        )));
                    }
                    l[idx(r, r)] = sum.sqrt();
                } else {
                    l[idx(r, c)] = sum / l[idx(c, c)];
                }
            }
        }
        Ok(BandCholesky { n, bw, data: l })
    }
}

/// Lower Cholesky factor in banded storage.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut DVector<f64>) {
        let n = self.n;
        let bw = self.bw;
        let idx = |r: usize, c: usize| r * (bw + 1) + (bw - (r - c));
        for r in 0..n {
            let lo = r.saturating_sub(bw);
            let mut sum = x[r];
            for c in lo..r {
                sum -= self.data[idx(r, c)] * x[c];
            }
            x[r] = sum / self.data[idx(r, r)];
        }
        for r in (0..n).rev() {
            let hi = (r + bw).min(n - 1);
            let mut sum = x[r];
            for c in (r + 1)..=hi {
                sum -= self.data[idx(c, r)] * x[c];
            }
            x[r] = sum / self.data[idx(r, r)];
        }
    }
}

/// General banded matrix with `below` sub- and `above` super-diagonals.
#[derive(Debug, Clone)]
pub struct Band {
    n: usize,
    below: usize,
    above: usize,
    data: Vec<f64>,
}

impl Band {
    pub fn zeros(n: usize, below: usize, above: usize) -> Self {
        Band {
            n,
            below,
            above,
            data: vec![0.0; n * (below + above + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        r * (self.below + self.above + 1) + (c + self.below - r)
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(
            c + self.below >= r && c <= r + self.above,
            "entry ({r},{c}) outside band"
        );
        let i = self.idx(r, c);
        self.data[i] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.below < r || c > r + self.above {
            0.0
        } else {
            self.data[self.idx(r, c)]
        }
    }

    pub fn mat_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        for r in 0..self.n {
            let lo = r.saturating_sub(self.below);
            let hi = (r + self.above).min(self.n - 1);
            let mut s = 0.0;
            for c in lo..=hi {
                s += self.data[self.idx(r, c)] * x[c];
            }
            y[r] = s;
        }
        y
    }

    /// LU factorization without pivoting. Intended for matrices whose
    /// symmetric part is positive definite, where elimination is stable
    /// and the band does not fill in.
    pub fn lu(mut self) -> Result<BandLu> {
        let n = self.n;
        let scale = self
            .data
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs()))
            .max(1e-300);
        for k in 0..n {
            let pivot = self.data[self.idx(k, k)];
            if pivot.abs() < 1e-14 * scale {
                return Err(Error::Singular(format!(
                    "banded LU pivot {pivot:.3e} at row {k}"
                )));
            }
            let rmax = (k + self.below).min(n - 1);
            let cmax = (k + self.above).min(n - 1);
            for r in (k + 1)..=rmax {
                let irk = self.idx(r, k);
                let m = self.data[irk] / pivot;
                self.data[irk] = m;
                for c in (k + 1)..=cmax {
                    let u = self.data[self.idx(k, c)];
                    if u != 0.0 {
                        let i = self.idx(r, c);
                        self.data[i] -= m * u;
                    }
                }
            }
        }
        Ok(BandLu { band: self })
    }
}

/// LU factors of a [`Band`], stored in place.
#[derive(Debug, Clone)]
pub struct BandLu {
    band: Band,
}

impl BandLu {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut DVector<f64>) {
        let n = self.band.n;
        for r in 0..n {
            let lo = r.saturating_sub(self.band.below);
            let mut sum = x[r];
            for c in lo..r {
                sum -= self.band.data[self.band.idx(r, c)] * x[c];
            }
            x[r] = sum;
        }
        for r in (0..n).rev() {
            let hi = (r + self.band.above).min(n - 1);
            let mut sum = x[r];
            for c in (r + 1)..=hi {
                sum -= self.band.data[self.band.idx(r, c)] * x[c];
            }
            x[r] = sum / self.band.data[self.band.idx(r, r)];
        }
    }
}

/// Symmetric positive definite matrix in dense or banded storage.
#[derive(Debug, Clone)]
pub enum SpdMatrix {
    Dense(DMatrix<f64>),
    Band(SymBand),
}

impl SpdMatrix {
    pub fn dim(&self) -> usize {
        match self {
            SpdMatrix::Dense(m) => m.nrows(),
            SpdMatrix::Band(b) => b.n(),
        }
    }

    pub fn mat_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            SpdMatrix::Dense(m) => m * x,
            SpdMatrix::Band(b) => b.mat_vec(x),
        }
    }

    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        match self {
            SpdMatrix::Dense(m) => x.dot(&(m * x)),
            SpdMatrix::Band(b) => b.quad_form(x),
        }
    }

    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        match self {
            SpdMatrix::Dense(m) => x.dot(&(m * y)),
            SpdMatrix::Band(b) => b.inner(x, y),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SpdMatrix::Dense(m) => m.clone(),
            SpdMatrix::Band(b) => b.to_dense(),
        }
    }

    /// Worst relative asymmetry max|A - A^T| / max|A|. Banded storage is
    /// symmetric by construction.
    pub fn symmetry_defect(&self) -> f64 {
        match self {
            SpdMatrix::Dense(m) => {
                let scale = m.iter().fold(0.0f64, |s, &v| s.max(v.abs())).max(1e-300);
                let mut worst = 0.0f64;
                for i in 0..m.nrows() {
                    for j in (i + 1)..m.ncols() {
                        worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
                    }
                }
                worst / scale
            }
            SpdMatrix::Band(_) => 0.0,
        }
    }

    pub fn factor(&self) -> Result<SpdFactor> {
        match self {
            SpdMatrix::Dense(m) => m
                .clone()
                .cholesky()
                .map(SpdFactor::Dense)
                .ok_or_else(|| Error::NotSpd("dense Cholesky failed".into())),
            SpdMatrix::Band(b) => b.cholesky().map(SpdFactor::Band),
        }
    }
}

/// Cholesky factorization handle for an [`SpdMatrix`].
pub enum SpdFactor {
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Band(BandCholesky),
}

impl SpdFactor {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            SpdFactor::Dense(c) => c.solve(b),
            SpdFactor::Band(c) => c.solve(b),
        }
    }
}
