//! Conforming P^k finite element spaces with homogeneous Dirichlet
//! conditions imposed by interior-dof elimination.
//!
//! Supported: P1 and P2 on intervals, P1 on triangulated squares. Nodes
//! are vertices plus (for P2) segment midpoints; only interior nodes
//! carry degrees of freedom.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fem::mesh::{Mesh, MeshCells, MeshStructure};

#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    /// Positions of all nodes (vertices first, then P2 midpoints).
    nodes: Vec<[f64; 2]>,
    /// Interior dof index per node; boundary nodes carry none.
    node_dof: Vec<Option<usize>>,
    /// Global node ids per cell, in local order.
    cell_nodes: Vec<Vec<usize>>,
    n_dofs: usize,
    bandwidth: usize,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<FeSpace> {
        mesh.validate()?;
        match (mesh.dim, degree) {
            (1, 1) | (1, 2) | (2, 1) => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "degree {degree} in dimension {} is not supported",
                    mesh.dim
                )))
            }
        }
        let (nodes, node_boundary, cell_nodes) = match (&mesh.cells, degree) {
            (MeshCells::Segments(cells), 1) => {
                let nodes = mesh.vertices.clone();
                let nb = mesh.boundary.clone();
                let cn = cells.iter().map(|c| vec![c[0], c[1]]).collect();
                (nodes, nb, cn)
            }
            (MeshCells::Segments(cells), 2) => {
                // Interleave vertices and midpoints by position: vertex k
                // becomes node 2k, the midpoint of cell i node 2i + 1.
                let n_nodes = mesh.n_vertices() + cells.len();
                let mut nodes = vec![[0.0, 0.0]; n_nodes];
                let mut nb = vec![false; n_nodes];
                for (k, v) in mesh.vertices.iter().enumerate() {
                    nodes[2 * k] = *v;
                    nb[2 * k] = mesh.boundary[k];
                }
                let mut cn = Vec::with_capacity(cells.len());
                for (i, c) in cells.iter().enumerate() {
                    let mid = 0.5 * (mesh.vertices[c[0]][0] + mesh.vertices[c[1]][0]);
                    nodes[2 * i + 1] = [mid, 0.0];
                    cn.push(vec![2 * c[0], 2 * i + 1, 2 * c[1]]);
                }
                (nodes, nb, cn)
            }
            (MeshCells::Triangles(cells), 1) => {
                let nodes = mesh.vertices.clone();
                let nb = mesh.boundary.clone();
                let cn = cells.iter().map(|c| c.to_vec()).collect();
                (nodes, nb, cn)
            }
            _ => unreachable!(),
        };
        let mut node_dof: Vec<Option<usize>> = vec![None; nodes.len()];
        let mut n_dofs = 0;
        for (k, &on_boundary) in node_boundary.iter().enumerate() {
            if !on_boundary {
                node_dof[k] = Some(n_dofs);
                n_dofs += 1;
            }
        }
        if n_dofs == 0 {
            return Err(Error::InvalidArgument(
                "the space has no interior degrees of freedom".into(),
            ));
        }
        let mut bandwidth: usize = 0;
        for cn in &cell_nodes {
            for &a in cn {
                for &b in cn {
                    if let (Some(da), Some(db)) = (node_dof[a], node_dof[b]) {
                        bandwidth = bandwidth.max(da.abs_diff(db));
                    }
                }
            }
        }
        Ok(FeSpace {
            mesh,
            degree,
            nodes,
            node_dof,
            cell_nodes,
            n_dofs,
            bandwidth,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of interior degrees of freedom.
    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn n_cells(&self) -> usize {
        self.cell_nodes.len()
    }

    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        &self.cell_nodes[cell]
    }

    pub fn node_dof(&self, node: usize) -> Option<usize> {
        self.node_dof[node]
    }

    pub fn node_position(&self, node: usize) -> [f64; 2] {
        self.nodes[node]
    }

    /// Local basis count per cell.
    pub fn local_size(&self) -> usize {
        match (self.mesh.dim, self.degree) {
            (1, 1) => 2,
            (1, 2) => 3,
            (2, 1) => 3,
            _ => unreachable!(),
        }
    }

    /// Reference basis values at reference coordinates.
    pub fn ref_values(&self, xi: &[f64]) -> Vec<f64> {
        match (self.mesh.dim, self.degree) {
            (1, 1) => vec![1.0 - xi[0], xi[0]],
            (1, 2) => {
                let x = xi[0];
                vec![(2.0 * x - 1.0) * (x - 1.0), 4.0 * x * (1.0 - x), x * (2.0 * x - 1.0)]
            }
            (2, 1) => vec![1.0 - xi[0] - xi[1], xi[0], xi[1]],
            _ => unreachable!(),
        }
    }

    /// Reference basis gradients at reference coordinates.
    pub fn ref_gradients(&self, xi: &[f64]) -> Vec<[f64; 2]> {
        match (self.mesh.dim, self.degree) {
            (1, 1) => vec![[-1.0, 0.0], [1.0, 0.0]],
            (1, 2) => {
                let x = xi[0];
                vec![
                    [4.0 * x - 3.0, 0.0],
                    [4.0 - 8.0 * x, 0.0],
                    [4.0 * x - 1.0, 0.0],
                ]
            }
            (2, 1) => vec![[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]],
            _ => unreachable!(),
        }
    }

    /// Affine map data of a cell: origin, Jacobian columns, and measure.
    pub fn cell_geometry(&self, cell: usize) -> CellGeometry {
        match &self.mesh.cells {
            MeshCells::Segments(cells) => {
                let c = cells[cell];
                let x0 = self.mesh.vertices[c[0]][0];
                let h = self.mesh.vertices[c[1]][0] - x0;
                CellGeometry {
                    origin: [x0, 0.0],
                    jac: [[h, 0.0], [0.0, 1.0]],
                    inv_jac_t: [[1.0 / h, 0.0], [0.0, 1.0]],
                    measure: h,
                }
            }
            MeshCells::Triangles(cells) => {
                let c = cells[cell];
                let p0 = self.mesh.vertices[c[0]];
                let p1 = self.mesh.vertices[c[1]];
                let p2 = self.mesh.vertices[c[2]];
                let jac = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
                let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                // Inverse transpose for gradient push-forward.
                let inv_jac_t = [
                    [jac[1][1] / det, -jac[1][0] / det],
                    [-jac[0][1] / det, jac[0][0] / det],
                ];
                CellGeometry {
                    origin: p0,
                    jac,
                    inv_jac_t,
                    measure: 0.5 * det.abs(),
                }
            }
        }
    }

    /// Physical position of a reference point in a cell.
    pub fn map_to_physical(&self, geo: &CellGeometry, xi: &[f64]) -> [f64; 2] {
        [
            geo.origin[0] + geo.jac[0][0] * xi[0] + geo.jac[0][1] * xi[1],
            geo.origin[1] + geo.jac[1][0] * xi[0] + geo.jac[1][1] * xi[1],
        ]
    }

    /// Locates the cell owning a physical point and its reference
    /// coordinates. Structured meshes use index arithmetic; imported
    /// meshes scan.
    pub fn locate(&self, x: &[f64; 2]) -> Result<(usize, [f64; 2])> {
        let inside = |xi: f64| (-1e-12..=1.0 + 1e-12).contains(&xi);
        match self.mesh.structure {
            MeshStructure::Interval { n } => {
                if !(0.0..=1.0 + 1e-12).contains(&x[0]) {
                    return Err(Error::InvalidArgument(format!("point {} outside (0,1)", x[0])));
                }
                let cell = ((x[0] * n as f64).floor() as usize).min(n - 1);
                let geo = self.cell_geometry(cell);
                Ok((cell, [(x[0] - geo.origin[0]) / geo.jac[0][0], 0.0]))
            }
            MeshStructure::UnitSquare { n } => {
                let i = ((x[0] * n as f64).floor() as usize).min(n - 1);
                let j = ((x[1] * n as f64).floor() as usize).min(n - 1);
                for cell in [2 * (j * n + i), 2 * (j * n + i) + 1] {
                    let geo = self.cell_geometry(cell);
                    let dx = [x[0] - geo.origin[0], x[1] - geo.origin[1]];
                    let xi = [
                        geo.inv_jac_t[0][0] * dx[0] + geo.inv_jac_t[1][0] * dx[1],
                        geo.inv_jac_t[0][1] * dx[0] + geo.inv_jac_t[1][1] * dx[1],
                    ];
                    if inside(xi[0]) && inside(xi[1]) && xi[0] + xi[1] <= 1.0 + 1e-12 {
                        return Ok((cell, xi));
                    }
                }
                Err(Error::InvalidArgument(format!(
                    "point ({}, {}) outside the unit square",
                    x[0], x[1]
                )))
            }
            MeshStructure::Imported => {
                for cell in 0..self.n_cells() {
                    let geo = self.cell_geometry(cell);
                    let dx = [x[0] - geo.origin[0], x[1] - geo.origin[1]];
                    let xi = [
                        geo.inv_jac_t[0][0] * dx[0] + geo.inv_jac_t[1][0] * dx[1],
                        geo.inv_jac_t[0][1] * dx[0] + geo.inv_jac_t[1][1] * dx[1],
                    ];
                    let ok = match self.mesh.dim {
                        1 => inside(xi[0]),
                        _ => inside(xi[0]) && inside(xi[1]) && xi[0] + xi[1] <= 1.0 + 1e-12,
                    };
                    if ok {
                        return Ok((cell, xi));
                    }
                }
                Err(Error::InvalidArgument("point outside the mesh".into()))
            }
        }
    }

    /// Point value of the FE function with interior coefficients `coeffs`.
    pub fn eval(&self, coeffs: &DVector<f64>, x: &[f64; 2]) -> Result<f64> {
        assert_eq!(coeffs.len(), self.n_dofs);
        let (cell, xi) = self.locate(x)?;
        let vals = self.ref_values(&xi);
        let mut out = 0.0;
        for (local, &node) in self.cell_nodes[cell].iter().enumerate() {
            if let Some(dof) = self.node_dof[node] {
                out += coeffs[dof] * vals[local];
            }
        }
        Ok(out)
    }
}

/// Affine geometry of one cell.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub origin: [f64; 2],
    /// Jacobian columns [d(phys)/d(xi), d(phys)/d(eta)].
    pub jac: [[f64; 2]; 2],
    /// Inverse-transpose Jacobian for gradient transformation.
    pub inv_jac_t: [[f64; 2]; 2],
    /// Cell measure (length or area).
    pub measure: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_p1_dof_count() {
        let mesh = Arc::new(Mesh::interval(2).unwrap());
        let space = FeSpace::new(mesh, 1).unwrap();
        assert_eq!(space.n_dofs(), 1);
        assert_eq!(space.bandwidth(), 0);
    }

    #[test]
    fn interval_p2_dof_layout() {
        let mesh = Arc::new(Mesh::interval(4).unwrap());
        let space = FeSpace::new(mesh, 2).unwrap();
        assert_eq!(space.n_dofs(), 2 * 4 - 1);
        assert!(space.bandwidth() <= 2);
    }

    #[test]
    fn square_p1_dof_count() {
        let mesh = Arc::new(Mesh::unit_square(4).unwrap());
        let space = FeSpace::new(mesh, 1).unwrap();
        assert_eq!(space.n_dofs(), 9);
    }

    #[test]
    fn cardinal_basis_at_nodes() {
        let mesh = Arc::new(Mesh::interval(3).unwrap());
        let space = FeSpace::new(mesh, 2).unwrap();
        for (xi, expect) in [
            (0.0, [1.0, 0.0, 0.0]),
            (0.5, [0.0, 1.0, 0.0]),
            (1.0, [0.0, 0.0, 1.0]),
        ] {
            let v = space.ref_values(&[xi, 0.0]);
            for k in 0..3 {
                assert!((v[k] - expect[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn locate_and_eval_linear_function() {
        let mesh = Arc::new(Mesh::unit_square(3).unwrap());
        let space = FeSpace::new(mesh, 1).unwrap();
        // Interpolate g(x, y) = x (1 - x) like values at the interior
        // nodes; P1 evaluation at nodes must reproduce coefficients.
        let mut coeffs = DVector::zeros(space.n_dofs());
        for node in 0..space.nodes.len() {
            if let Some(dof) = space.node_dof(node) {
                let p = space.node_position(node);
                coeffs[dof] = p[0] + 2.0 * p[1];
            }
        }
        for node in 0..space.nodes.len() {
            if let Some(_) = space.node_dof(node) {
                let p = space.node_position(node);
                let v = space.eval(&coeffs, &p).unwrap();
                assert!((v - (p[0] + 2.0 * p[1])).abs() < 1e-12);
            }
        }
    }
}
