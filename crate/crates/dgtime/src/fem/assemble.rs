//! Assembly of mass and stiffness operators on a [`FeSpace`], L2
//! projection, the discrete dual norm, and error integrals against
//! closed-form functions.
//!
//! Element integrals run in parallel over cells; accumulation into the
//! banded matrices is serial in cell order, keeping the result
//! deterministic.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::Result;
use crate::fem::space::FeSpace;
use crate::linalg::{BandCholesky, SymBand};
use crate::par;
use crate::quad::gauss_rule;

/// Quadrature on the reference cell: points with weights scaled so that
/// weights sum to the reference measure (1 for both cell types here,
/// with the triangle rule carrying the 1/2 reference area inside the
/// weights).
#[derive(Debug, Clone)]
pub struct CellRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

/// Gauss rule on the reference segment, exact to degree 2n-1.
pub fn segment_rule(points: usize) -> CellRule {
    let g = gauss_rule(points).expect("reference rule");
    CellRule {
        points: g.points.iter().map(|&x| [x, 0.0]).collect(),
        weights: g.weights.clone(),
    }
}

/// Seven-point degree-5 rule on the reference triangle; weights sum to
/// the reference area 1/2.
pub fn triangle_rule() -> CellRule {
    let s15 = 15.0f64.sqrt();
    let a = (6.0 - s15) / 21.0;
    let b = (6.0 + s15) / 21.0;
    let wa = (155.0 - s15) / 1200.0;
    let wb = (155.0 + s15) / 1200.0;
    let mut points = vec![[1.0 / 3.0, 1.0 / 3.0]];
    let mut weights = vec![9.0 / 40.0];
    for p in [[a, a], [1.0 - 2.0 * a, a], [a, 1.0 - 2.0 * a]] {
        points.push(p);
        weights.push(wa);
    }
    for p in [[b, b], [1.0 - 2.0 * b, b], [b, 1.0 - 2.0 * b]] {
        points.push(p);
        weights.push(wb);
    }
    // Scale from unit-sum to the reference triangle area.
    for w in &mut weights {
        *w *= 0.5;
    }
    CellRule { points, weights }
}

fn assembly_rule(space: &FeSpace) -> CellRule {
    match space.mesh().dim {
        1 => segment_rule(space.degree() + 1),
        _ => triangle_rule(),
    }
}

fn load_rule(space: &FeSpace) -> CellRule {
    match space.mesh().dim {
        // Degree 2k + 2 exactness for smooth loads.
        1 => segment_rule(space.degree() + 2),
        _ => triangle_rule(),
    }
}

/// Mass and stiffness matrices on the interior dofs, with factorizations.
pub struct AssembledOps {
    space: Arc<FeSpace>,
    pub mass: SymBand,
    pub stiffness: SymBand,
    mass_factor: BandCholesky,
    stiff_factor: BandCholesky,
}

struct ElementMatrices {
    mass: Vec<f64>,
    stiff: Vec<f64>,
}

impl AssembledOps {
    pub fn new(space: Arc<FeSpace>) -> Result<AssembledOps> {
        let rule = assembly_rule(&space);
        let nl = space.local_size();
        // Reference tables at the quadrature points.
        let values: Vec<Vec<f64>> = rule.points.iter().map(|p| space.ref_values(p)).collect();
        let gradients: Vec<Vec<[f64; 2]>> =
            rule.points.iter().map(|p| space.ref_gradients(p)).collect();

        let cells: Vec<usize> = (0..space.n_cells()).collect();
        let elements: Vec<ElementMatrices> = par::map(&cells, |&cell| {
            let geo = space.cell_geometry(cell);
            // Jacobian scale: measure per unit reference measure.
            let scale = match space.mesh().dim {
                1 => geo.measure,
                _ => geo.measure / 0.5,
            };
            let mut mass = vec![0.0; nl * nl];
            let mut stiff = vec![0.0; nl * nl];
            for (k, w) in rule.weights.iter().enumerate() {
                let wj = w * scale;
                for a in 0..nl {
                    let ga = &gradients[k][a];
                    let pa = [
                        geo.inv_jac_t[0][0] * ga[0] + geo.inv_jac_t[0][1] * ga[1],
                        geo.inv_jac_t[1][0] * ga[0] + geo.inv_jac_t[1][1] * ga[1],
                    ];
                    for b in 0..nl {
                        let gb = &gradients[k][b];
                        let pb = [
                            geo.inv_jac_t[0][0] * gb[0] + geo.inv_jac_t[0][1] * gb[1],
                            geo.inv_jac_t[1][0] * gb[0] + geo.inv_jac_t[1][1] * gb[1],
                        ];
                        mass[a * nl + b] += wj * values[k][a] * values[k][b];
                        stiff[a * nl + b] += wj * (pa[0] * pb[0] + pa[1] * pb[1]);
                    }
                }
            }
            ElementMatrices { mass, stiff }
        });

        let m = space.n_dofs();
        let bw = space.bandwidth();
        let mut mass = SymBand::zeros(m, bw);
        let mut stiffness = SymBand::zeros(m, bw);
        for (cell, elem) in elements.iter().enumerate() {
            let nodes = space.cell_nodes(cell);
            for (a, &na) in nodes.iter().enumerate() {
                let Some(da) = space.node_dof(na) else { continue };
                for (b, &nb) in nodes.iter().enumerate() {
                    let Some(db) = space.node_dof(nb) else { continue };
                    if db <= da {
                        mass.add(da, db, elem.mass[a * nl + b]);
                        stiffness.add(da, db, elem.stiff[a * nl + b]);
                    }
                }
            }
        }
        let mass_factor = mass.cholesky()?;
        let stiff_factor = stiffness.cholesky()?;
        Ok(AssembledOps {
            space,
            mass,
            stiffness,
            mass_factor,
            stiff_factor,
        })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    /// Load vector l_a = int f phi_a, with degree 2k+2 quadrature.
    pub fn load(&self, f: &(dyn Fn(&[f64; 2]) -> f64 + Sync)) -> DVector<f64> {
        let space = &self.space;
        let rule = load_rule(space);
        let nl = space.local_size();
        let values: Vec<Vec<f64>> = rule.points.iter().map(|p| space.ref_values(p)).collect();
        let cells: Vec<usize> = (0..space.n_cells()).collect();
        let locals: Vec<Vec<f64>> = par::map(&cells, |&cell| {
            let geo = space.cell_geometry(cell);
            let scale = match space.mesh().dim {
                1 => geo.measure,
                _ => geo.measure / 0.5,
            };
            let mut l = vec![0.0; nl];
            for (k, w) in rule.weights.iter().enumerate() {
                let x = space.map_to_physical(&geo, &rule.points[k]);
                let fx = f(&x) * w * scale;
                for a in 0..nl {
                    l[a] += fx * values[k][a];
                }
            }
            l
        });
        let mut out = DVector::zeros(space.n_dofs());
        for (cell, l) in locals.iter().enumerate() {
            for (a, &na) in space.cell_nodes(cell).iter().enumerate() {
                if let Some(da) = space.node_dof(na) {
                    out[da] += l[a];
                }
            }
        }
        out
    }

    /// L2 projection: solves M c = load(f).
    pub fn l2_project(&self, f: &(dyn Fn(&[f64; 2]) -> f64 + Sync)) -> DVector<f64> {
        self.mass_factor.solve(&self.load(f))
    }

    pub fn mass_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.mass_factor.solve(b)
    }

    pub fn stiff_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.stiff_factor.solve(b)
    }

    /// Discrete dual norm sqrt((Mv)^T K^{-1} (Mv)) of the functional
    /// (v_h, .) induced by a discrete function v_h.
    pub fn dual_norm(&self, v: &DVector<f64>) -> f64 {
        let mv = self.mass.mat_vec(v);
        self.dual_norm_of_functional(&mv)
    }

    /// Dual norm of a plain functional vector g: sqrt(g^T K^{-1} g).
    pub fn dual_norm_of_functional(&self, g: &DVector<f64>) -> f64 {
        g.dot(&self.stiff_factor.solve(g)).max(0.0).sqrt()
    }

    pub fn l2_norm(&self, v: &DVector<f64>) -> f64 {
        self.mass.quad_form(v).max(0.0).sqrt()
    }

    pub fn h1_norm(&self, v: &DVector<f64>) -> f64 {
        self.stiffness.quad_form(v).max(0.0).sqrt()
    }

    /// L2 error of the FE function against a closed-form field.
    pub fn l2_error(&self, coeffs: &DVector<f64>, g: &(dyn Fn(&[f64; 2]) -> f64 + Sync)) -> f64 {
        self.integrate_error(coeffs, g, None).sqrt()
    }

    /// H1-seminorm error; `grad` returns the exact gradient.
    pub fn h1_error(
        &self,
        coeffs: &DVector<f64>,
        grad: &(dyn Fn(&[f64; 2]) -> [f64; 2] + Sync),
    ) -> f64 {
        self.integrate_error(coeffs, &|_| 0.0, Some(grad)).sqrt()
    }

    fn integrate_error(
        &self,
        coeffs: &DVector<f64>,
        g: &(dyn Fn(&[f64; 2]) -> f64 + Sync),
        grad: Option<&(dyn Fn(&[f64; 2]) -> [f64; 2] + Sync)>,
    ) -> f64 {
        let space = &self.space;
        let rule = load_rule(space);
        let nl = space.local_size();
        let values: Vec<Vec<f64>> = rule.points.iter().map(|p| space.ref_values(p)).collect();
        let gradients: Vec<Vec<[f64; 2]>> =
            rule.points.iter().map(|p| space.ref_gradients(p)).collect();
        let cells: Vec<usize> = (0..space.n_cells()).collect();
        let contributions: Vec<f64> = par::map(&cells, |&cell| {
            let geo = space.cell_geometry(cell);
            let scale = match space.mesh().dim {
                1 => geo.measure,
                _ => geo.measure / 0.5,
            };
            let nodes = space.cell_nodes(cell);
            let mut acc = 0.0;
            for (k, w) in rule.weights.iter().enumerate() {
                let x = space.map_to_physical(&geo, &rule.points[k]);
                match grad {
                    None => {
                        let mut uh = 0.0;
                        for a in 0..nl {
                            if let Some(da) = space.node_dof(nodes[a]) {
                                uh += coeffs[da] * values[k][a];
                            }
                        }
                        let d = uh - g(&x);
                        acc += w * scale * d * d;
                    }
                    Some(grad) => {
                        let mut gh = [0.0, 0.0];
                        for a in 0..nl {
                            if let Some(da) = space.node_dof(nodes[a]) {
                                let ga = &gradients[k][a];
                                gh[0] += coeffs[da]
                                    * (geo.inv_jac_t[0][0] * ga[0] + geo.inv_jac_t[0][1] * ga[1]);
                                gh[1] += coeffs[da]
                                    * (geo.inv_jac_t[1][0] * ga[0] + geo.inv_jac_t[1][1] * ga[1]);
                            }
                        }
                        let ge = grad(&x);
                        let d = [gh[0] - ge[0], gh[1] - ge[1]];
                        acc += w * scale * (d[0] * d[0] + d[1] * d[1]);
                    }
                }
            }
            acc
        });
        contributions.iter().sum()
    }
}

/// Cross mass matrix (coarse test functions x fine trial functions) of
/// two nested spaces. Integration runs over the fine cells, where both
/// factors are polynomial, so kinks of fine functions inside coarse
/// cells are respected.
pub fn nested_cross_mass(
    coarse: &AssembledOps,
    fine: &AssembledOps,
) -> Result<nalgebra::DMatrix<f64>> {
    let cs = coarse.space();
    let fs = fine.space();
    let rule = match fs.mesh().dim {
        1 => segment_rule(fs.degree() + cs.degree()),
        _ => triangle_rule(),
    };
    let nl = fs.local_size();
    let fine_values: Vec<Vec<f64>> = rule.points.iter().map(|p| fs.ref_values(p)).collect();
    let mut c = nalgebra::DMatrix::zeros(coarse.n_dofs(), fine.n_dofs());
    for cell in 0..fs.n_cells() {
        let geo = fs.cell_geometry(cell);
        let scale = match fs.mesh().dim {
            1 => geo.measure,
            _ => geo.measure / 0.5,
        };
        let fine_nodes = fs.cell_nodes(cell);
        for (k, w) in rule.weights.iter().enumerate() {
            let x = fs.map_to_physical(&geo, &rule.points[k]);
            let (coarse_cell, xi) = cs.locate(&x)?;
            let coarse_vals = cs.ref_values(&xi);
            for (a, &na) in cs.cell_nodes(coarse_cell).iter().enumerate() {
                let Some(da) = cs.node_dof(na) else { continue };
                for b in 0..nl {
                    if let Some(db) = fs.node_dof(fine_nodes[b]) {
                        c[(da, db)] += w * scale * coarse_vals[a] * fine_values[k][b];
                    }
                }
            }
        }
    }
    Ok(c)
}

/// L2 projection onto `coarse` of a function given by coefficients on a
/// strictly finer nested space.
pub fn l2_project_nested(
    coarse: &AssembledOps,
    fine: &AssembledOps,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let c = nested_cross_mass(coarse, fine)?;
    Ok(coarse.mass_solve(&(c * v)))
}
