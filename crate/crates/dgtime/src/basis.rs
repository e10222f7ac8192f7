//! Nodal Lagrange bases on the reference slab (0, 1] and vector-valued
//! piecewise polynomials with one-sided trace conventions.
//!
//! The default basis places its q+1 nodes at the right Gauss-Radau
//! points, so the right endpoint is a nodal value and the left-limit
//! trace is obtained by polynomial extension to 0.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::partition::TimePartition;
use crate::quad::{gauss_rule, radau_right_points};

/// Lagrange basis of degree q at nodes on (0, 1], with cached evaluation
/// and integration tables.
#[derive(Debug, Clone)]
pub struct SlabBasis {
    degree: usize,
    nodes: Vec<f64>,
    /// D[(i, j)] = l_j'(node_i)
    diff: DMatrix<f64>,
    /// mass[(i, j)] = int l_i l_j
    mass: DMatrix<f64>,
    /// conv[(i, j)] = int l_i l_j'
    conv: DMatrix<f64>,
    /// l_j(0), the extension of each cardinal polynomial to the left end.
    left: DVector<f64>,
}

impl SlabBasis {
    /// Basis at the right Gauss-Radau points.
    pub fn radau(degree: usize) -> Result<Self> {
        Self::at_nodes(degree, radau_right_points(degree + 1)?)
    }

    /// Basis at caller-provided distinct nodes on (0, 1].
    pub fn at_nodes(degree: usize, nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() != degree + 1 {
            return Err(Error::InvalidArgument(format!(
                "degree {degree} basis needs {} nodes, got {}",
                degree + 1,
                nodes.len()
            )));
        }
        for (i, &a) in nodes.iter().enumerate() {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "basis node {a} outside (0, 1]"
                )));
            }
            for &b in &nodes[i + 1..] {
                if (a - b).abs() < 1e-14 {
                    return Err(Error::InvalidArgument("basis nodes must be distinct".into()));
                }
            }
        }
        let n = degree + 1;
        let mut basis = SlabBasis {
            degree,
            nodes,
            diff: DMatrix::zeros(n, n),
            mass: DMatrix::zeros(n, n),
            conv: DMatrix::zeros(n, n),
            left: DVector::zeros(n),
        };
        for i in 0..n {
            let row = basis.deriv_at(basis.nodes[i]);
            basis.diff.row_mut(i).copy_from(&row.transpose());
        }
        let rule = gauss_rule(degree + 1)?;
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            let vals = basis.eval_at(x);
            let ders = basis.deriv_at(x);
            for i in 0..n {
                for j in 0..n {
                    basis.mass[(i, j)] += w * vals[i] * vals[j];
                    basis.conv[(i, j)] += w * vals[i] * ders[j];
                }
            }
        }
        basis.left = basis.eval_at(0.0);
        Ok(basis)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_nodes(&self) -> usize {
        self.degree + 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Cardinal values l_j(s) for all j.
    pub fn eval_at(&self, s: f64) -> DVector<f64> {
        let n = self.n_nodes();
        DVector::from_fn(n, |j, _| {
            let mut l = 1.0;
            for k in 0..n {
                if k != j {
                    l *= (s - self.nodes[k]) / (self.nodes[j] - self.nodes[k]);
                }
            }
            l
        })
    }

    /// Cardinal derivatives l_j'(s) for all j.
    pub fn deriv_at(&self, s: f64) -> DVector<f64> {
        let n = self.n_nodes();
        DVector::from_fn(n, |j, _| {
            let mut acc = 0.0;
            for i in 0..n {
                if i == j {
                    continue;
                }
                let mut term = 1.0 / (self.nodes[j] - self.nodes[i]);
                for k in 0..n {
                    if k != i && k != j {
                        term *= (s - self.nodes[k]) / (self.nodes[j] - self.nodes[k]);
                    }
                }
                acc += term;
            }
            acc
        })
    }

    pub fn diff_table(&self) -> &DMatrix<f64> {
        &self.diff
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    /// conv[(i, j)] = int_0^1 l_i l_j'.
    pub fn convection(&self) -> &DMatrix<f64> {
        &self.conv
    }

    pub fn left_values(&self) -> &DVector<f64> {
        &self.left
    }
}

/// Which one-sided limit to take at a time node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    LeftLimit,
    RightLimit,
}

/// A single-slab vector-valued polynomial: `coeffs` column j holds the
/// value at basis node j.
#[derive(Debug, Clone)]
pub struct SlabPoly {
    pub t_start: f64,
    pub width: f64,
    basis: SlabBasis,
    coeffs: DMatrix<f64>,
}

impl SlabPoly {
    pub fn new(t_start: f64, width: f64, basis: SlabBasis, coeffs: DMatrix<f64>) -> Self {
        assert_eq!(coeffs.ncols(), basis.n_nodes());
        SlabPoly {
            t_start,
            width,
            basis,
            coeffs,
        }
    }

    /// Interpolates `f` (given physical time) at the basis nodes.
    pub fn interpolate(
        t_start: f64,
        width: f64,
        basis: &SlabBasis,
        dim: usize,
        f: impl Fn(f64) -> DVector<f64>,
    ) -> Self {
        let mut coeffs = DMatrix::zeros(dim, basis.n_nodes());
        for (j, &s) in basis.nodes().iter().enumerate() {
            coeffs.set_column(j, &f(t_start + width * s));
        }
        SlabPoly::new(t_start, width, basis.clone(), coeffs)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &SlabBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    /// Value at reference coordinate s in [0, 1].
    pub fn eval_sigma(&self, s: f64) -> DVector<f64> {
        &self.coeffs * self.basis.eval_at(s)
    }

    /// d/dt value at reference coordinate s (includes the 1/width factor).
    pub fn deriv_sigma(&self, s: f64) -> DVector<f64> {
        (&self.coeffs * self.basis.deriv_at(s)) / self.width
    }

    /// Value at physical time t in [t_start, t_start + width].
    pub fn eval(&self, t: f64) -> DVector<f64> {
        self.eval_sigma((t - self.t_start) / self.width)
    }
}

/// Vector-valued piecewise polynomial over a [`TimePartition`].
#[derive(Debug, Clone)]
pub struct PiecewisePoly {
    partition: TimePartition,
    basis: SlabBasis,
    dim: usize,
    /// Per slab: dim x (q+1), column j = value at basis node j.
    coeffs: Vec<DMatrix<f64>>,
}

impl PiecewisePoly {
    pub fn zeros(partition: TimePartition, basis: SlabBasis, dim: usize) -> Self {
        let coeffs = (0..partition.n_slabs())
            .map(|_| DMatrix::zeros(dim, basis.n_nodes()))
            .collect();
        PiecewisePoly {
            partition,
            basis,
            dim,
            coeffs,
        }
    }

    /// Interpolates `f` at the physical basis nodes of every slab.
    pub fn interpolate(
        partition: TimePartition,
        basis: SlabBasis,
        dim: usize,
        f: impl Fn(f64) -> DVector<f64>,
    ) -> Self {
        let mut p = Self::zeros(partition, basis, dim);
        for n in 0..p.partition.n_slabs() {
            let t0 = p.partition.node(n);
            let tau = p.partition.width(n);
            for (j, &s) in p.basis.nodes().to_vec().iter().enumerate() {
                let v = f(t0 + tau * s);
                p.coeffs[n].set_column(j, &v);
            }
        }
        p
    }

    /// Builds from per-slab closures of physical time.
    pub fn from_slab_fns(
        partition: TimePartition,
        basis: SlabBasis,
        dim: usize,
        f: impl Fn(usize, f64) -> DVector<f64>,
    ) -> Self {
        let mut p = Self::zeros(partition, basis, dim);
        for n in 0..p.partition.n_slabs() {
            let t0 = p.partition.node(n);
            let tau = p.partition.width(n);
            for (j, &s) in p.basis.nodes().to_vec().iter().enumerate() {
                let v = f(n, t0 + tau * s);
                p.coeffs[n].set_column(j, &v);
            }
        }
        p
    }

    pub fn partition(&self) -> &TimePartition {
        &self.partition
    }

    pub fn basis(&self) -> &SlabBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn slab_coeffs(&self, n: usize) -> &DMatrix<f64> {
        &self.coeffs[n]
    }

    pub fn slab_coeffs_mut(&mut self, n: usize) -> &mut DMatrix<f64> {
        &mut self.coeffs[n]
    }

    /// The slab polynomial on slab n.
    pub fn slab(&self, n: usize) -> SlabPoly {
        SlabPoly::new(
            self.partition.node(n),
            self.partition.width(n),
            self.basis.clone(),
            self.coeffs[n].clone(),
        )
    }

    /// Value within slab n at reference coordinate s in [0, 1].
    pub fn eval_in_slab(&self, n: usize, s: f64) -> DVector<f64> {
        &self.coeffs[n] * self.basis.eval_at(s)
    }

    /// Time derivative within slab n at reference coordinate s.
    pub fn deriv_in_slab(&self, n: usize, s: f64) -> DVector<f64> {
        (&self.coeffs[n] * self.basis.deriv_at(s)) / self.partition.width(n)
    }

    /// One-sided evaluation at t. Interior nodes take the side requested;
    /// only the right limit exists at t_0 and only the left limit at t_N.
    pub fn eval(&self, t: f64, side: Side) -> Result<DVector<f64>> {
        let t_final = self.partition.final_time();
        if t < 0.0 || t > t_final {
            return Err(Error::InvalidArgument(format!(
                "time {t} outside [0, {t_final}]"
            )));
        }
        if t == 0.0 {
            return match side {
                Side::RightLimit => Ok(self.right_trace(0)),
                Side::LeftLimit => Err(Error::InvalidArgument(
                    "left limit undefined at the initial node".into(),
                )),
            };
        }
        if t == t_final && side == Side::RightLimit {
            return Err(Error::InvalidArgument(
                "right limit undefined at the final node".into(),
            ));
        }
        // Interior node?
        for n in 1..self.partition.n_slabs() {
            if t == self.partition.node(n) {
                return Ok(match side {
                    Side::LeftLimit => self.left_trace(n),
                    Side::RightLimit => self.right_trace(n),
                });
            }
        }
        let n = self.partition.slab_of(t)?;
        let s = (t - self.partition.node(n)) / self.partition.width(n);
        Ok(self.eval_in_slab(n, s))
    }

    /// v^n = v(t_n), the value of slab n-1 at its right end (n >= 1).
    pub fn left_trace(&self, n: usize) -> DVector<f64> {
        assert!(n >= 1 && n <= self.partition.n_slabs());
        // The right endpoint is the last basis node.
        self.coeffs[n - 1].column(self.basis.n_nodes() - 1).into()
    }

    /// v^{n,+} = lim_{t -> t_n+} v(t), the extension of slab n to its left end.
    pub fn right_trace(&self, n: usize) -> DVector<f64> {
        assert!(n < self.partition.n_slabs());
        &self.coeffs[n] * self.basis.left_values()
    }

    /// Jump v^{n,+} - v^n at the interior node t_n (1 <= n <= N-1).
    pub fn jump(&self, n: usize) -> DVector<f64> {
        self.right_trace(n) - self.left_trace(n)
    }

    /// self += alpha * other (same partition, basis, and dimension).
    pub fn axpy(&mut self, alpha: f64, other: &PiecewisePoly) {
        assert_eq!(self.dim, other.dim);
        assert_eq!(self.partition, other.partition);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += alpha * b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinal_property() {
        for q in 0..=8 {
            let b = SlabBasis::radau(q).unwrap();
            for (i, &s) in b.nodes().to_vec().iter().enumerate() {
                let v = b.eval_at(s);
                for j in 0..=q {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v[j] - expect).abs() < 1e-13, "q={q} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn differentiation_exact_on_monomials() {
        for q in 1..=8 {
            let b = SlabBasis::radau(q).unwrap();
            for k in 0..=q {
                // Nodal values of s^k, differentiated through the table.
                let vals = DVector::from_fn(q + 1, |j, _| b.nodes()[j].powi(k as i32));
                let ders = b.diff_table() * &vals;
                for (i, &s) in b.nodes().to_vec().iter().enumerate() {
                    let expect = if k == 0 {
                        0.0
                    } else {
                        k as f64 * s.powi(k as i32 - 1)
                    };
                    assert!((ders[i] - expect).abs() < 1e-12, "q={q} k={k}");
                }
            }
        }
    }

    #[test]
    fn radau_mass_matrix_q1_closed_form() {
        // Nodes {1/3, 1}: mass = diag(3/4, 1/4) by direct integration.
        let b = SlabBasis::radau(1).unwrap();
        let m = b.mass();
        assert!((m[(0, 0)] - 0.75).abs() < 1e-13);
        assert!((m[(1, 1)] - 0.25).abs() < 1e-13);
        assert!(m[(0, 1)].abs() < 1e-13);
        assert!(m[(1, 0)].abs() < 1e-13);
    }

    #[test]
    fn integration_by_parts_identity() {
        // conv[i][j] + conv[j][i] = l_i(1) l_j(1) - l_i(0) l_j(0)
        for q in 0..=5 {
            let b = SlabBasis::radau(q).unwrap();
            let c = b.convection();
            let left = b.left_values();
            let n = q + 1;
            for i in 0..n {
                for j in 0..n {
                    let right = if i == n - 1 && j == n - 1 { 1.0 } else { 0.0 };
                    let expect = right - left[i] * left[j];
                    assert!((c[(i, j)] + c[(j, i)] - expect).abs() < 1e-12);
                }
            }
        }
    }

    fn two_slab_example() -> PiecewisePoly {
        // Slab 0 carries 1 + t, slab 1 carries 3t, on nodes {0, 1, 2}.
        let p = TimePartition::from_nodes(vec![0.0, 1.0, 2.0]).unwrap();
        let b = SlabBasis::radau(1).unwrap();
        PiecewisePoly::from_slab_fns(p, b, 1, |n, t| {
            DVector::from_element(1, if n == 0 { 1.0 + t } else { 3.0 * t })
        })
    }

    #[test]
    fn one_sided_evaluation() {
        let v = two_slab_example();
        assert!((v.eval(1.0, Side::LeftLimit).unwrap()[0] - 2.0).abs() < 1e-13);
        assert!((v.eval(1.0, Side::RightLimit).unwrap()[0] - 3.0).abs() < 1e-13);
        assert!((v.jump(1)[0] - 1.0).abs() < 1e-13);
        // Mid-slab evaluation ignores the side.
        assert!((v.eval(0.5, Side::LeftLimit).unwrap()[0] - 1.5).abs() < 1e-13);
        assert!((v.eval(0.5, Side::RightLimit).unwrap()[0] - 1.5).abs() < 1e-13);
    }

    #[test]
    fn endpoint_sides() {
        let v = two_slab_example();
        assert!((v.eval(0.0, Side::RightLimit).unwrap()[0] - 1.0).abs() < 1e-13);
        assert!(v.eval(0.0, Side::LeftLimit).is_err());
        assert!((v.eval(2.0, Side::LeftLimit).unwrap()[0] - 6.0).abs() < 1e-13);
        assert!(v.eval(2.0, Side::RightLimit).is_err());
        assert!(v.eval(-0.1, Side::LeftLimit).is_err());
        assert!(v.eval(2.1, Side::LeftLimit).is_err());
    }

    #[test]
    fn constant_everywhere() {
        let p = TimePartition::new(2.0, 3, 1.5).unwrap();
        let b = SlabBasis::radau(2).unwrap();
        let c = 4.25;
        let v = PiecewisePoly::interpolate(p, b, 1, |_| DVector::from_element(1, c));
        for &t in &[0.3, 0.5, 1.0, 1.7, 2.0] {
            assert!((v.eval(t, Side::LeftLimit).unwrap()[0] - c).abs() < 1e-13);
        }
        assert!((v.eval(0.0, Side::RightLimit).unwrap()[0] - c).abs() < 1e-13);
    }

    #[test]
    fn derivative_evaluation() {
        let p = TimePartition::new(1.0, 2, 1.0).unwrap();
        let b = SlabBasis::radau(2).unwrap();
        // v(t) = t^2 on both slabs; v'(t) = 2t.
        let v = PiecewisePoly::interpolate(p, b, 1, |t| DVector::from_element(1, t * t));
        let d = v.deriv_in_slab(1, 0.5); // t = 0.75
        assert!((d[0] - 1.5).abs() < 1e-12);
    }
}
