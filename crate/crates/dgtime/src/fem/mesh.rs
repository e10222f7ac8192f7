//! Conforming meshes of the unit interval and the unit square, with a
//! plain-text import/export format.
//!
//! The text format is line oriented:
//!
//! ```text
//! dgtime-mesh 1
//! dim 2
//! vertices <count>
//! <x> <y>          (one line per vertex; 1D lines carry a single x)
//! cells <count>
//! <v0> <v1> [<v2>] (segment or counterclockwise triangle indices)
//! boundary <count>
//! <marker>         (0 interior, 1 boundary; one line per vertex)
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum MeshCells {
    Segments(Vec<[usize; 2]>),
    Triangles(Vec<[usize; 3]>),
}

impl MeshCells {
    pub fn len(&self) -> usize {
        match self {
            MeshCells::Segments(c) => c.len(),
            MeshCells::Triangles(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// How the mesh was built; structured meshes support direct cell lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshStructure {
    Interval { n: usize },
    UnitSquare { n: usize },
    Imported,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    pub vertices: Vec<[f64; 2]>,
    pub cells: MeshCells,
    /// Dirichlet-boundary marker per vertex.
    pub boundary: Vec<bool>,
    pub structure: MeshStructure,
}

impl Mesh {
    /// n equal segments on (0, 1).
    pub fn interval(n: usize) -> Result<Mesh> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one subdivision".into()));
        }
        let vertices: Vec<[f64; 2]> = (0..=n).map(|i| [i as f64 / n as f64, 0.0]).collect();
        let cells = (0..n).map(|i| [i, i + 1]).collect();
        let boundary = (0..=n).map(|i| i == 0 || i == n).collect();
        Ok(Mesh {
            dim: 1,
            vertices,
            cells: MeshCells::Segments(cells),
            boundary,
            structure: MeshStructure::Interval { n },
        })
    }

    /// n x n grid on the unit square, each square split along the
    /// bottom-left to top-right diagonal into two counterclockwise
    /// triangles.
    pub fn unit_square(n: usize) -> Result<Mesh> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one subdivision".into()));
        }
        let np = n + 1;
        let mut vertices = Vec::with_capacity(np * np);
        let mut boundary = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let v = |i: usize, j: usize| j * np + i;
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                cells.push([v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
                cells.push([v(i, j), v(i + 1, j + 1), v(i, j + 1)]);
            }
        }
        Ok(Mesh {
            dim: 2,
            vertices,
            cells: MeshCells::Triangles(cells),
            boundary,
            structure: MeshStructure::UnitSquare { n },
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Signed area of triangle `c` (positive for counterclockwise).
    pub fn triangle_area(&self, c: &[usize; 3]) -> f64 {
        let p0 = self.vertices[c[0]];
        let p1 = self.vertices[c[1]];
        let p2 = self.vertices[c[2]];
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    /// Largest cell diameter.
    pub fn granularity(&self) -> f64 {
        match &self.cells {
            MeshCells::Segments(cells) => cells
                .iter()
                .map(|c| (self.vertices[c[1]][0] - self.vertices[c[0]][0]).abs())
                .fold(0.0, f64::max),
            MeshCells::Triangles(cells) => cells
                .iter()
                .map(|c| {
                    let mut d: f64 = 0.0;
                    for (a, b) in [(0, 1), (1, 2), (2, 0)] {
                        let pa = self.vertices[c[a]];
                        let pb = self.vertices[c[b]];
                        d = d.max(((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt());
                    }
                    d
                })
                .fold(0.0, f64::max),
        }
    }

    /// Worst diameter-to-inradius ratio over cells; constant over a
    /// shape-regular refinement family. Segments report 1.
    pub fn shape_regularity(&self) -> f64 {
        match &self.cells {
            MeshCells::Segments(_) => 1.0,
            MeshCells::Triangles(cells) => cells
                .iter()
                .map(|c| {
                    let mut sides = [0.0f64; 3];
                    for (k, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                        let pa = self.vertices[c[a]];
                        let pb = self.vertices[c[b]];
                        sides[k] = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
                    }
                    let area = self.triangle_area(c);
                    let s = 0.5 * (sides[0] + sides[1] + sides[2]);
                    let inradius = area / s;
                    sides.iter().cloned().fold(0.0, f64::max) / inradius
                })
                .fold(0.0, f64::max),
        }
    }

    /// Structural validity: index bounds, positive measures,
    /// counterclockwise triangles, consistent marker count.
    pub fn validate(&self) -> Result<()> {
        if self.boundary.len() != self.vertices.len() {
            return Err(Error::InvalidArgument(
                "boundary marker count does not match vertex count".into(),
            ));
        }
        match &self.cells {
            MeshCells::Segments(cells) => {
                for c in cells {
                    if c[0] >= self.n_vertices() || c[1] >= self.n_vertices() {
                        return Err(Error::InvalidArgument("cell index out of range".into()));
                    }
                    if self.vertices[c[1]][0] - self.vertices[c[0]][0] <= 0.0 {
                        return Err(Error::InvalidArgument("degenerate segment".into()));
                    }
                }
            }
            MeshCells::Triangles(cells) => {
                for c in cells {
                    if c.iter().any(|&v| v >= self.n_vertices()) {
                        return Err(Error::InvalidArgument("cell index out of range".into()));
                    }
                    if self.triangle_area(c) <= 0.0 {
                        return Err(Error::InvalidArgument(
                            "triangle is degenerate or clockwise".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Serializes to the plain-text format.
    pub fn export_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dgtime-mesh 1");
        let _ = writeln!(s, "dim {}", self.dim);
        let _ = writeln!(s, "vertices {}", self.n_vertices());
        for v in &self.vertices {
            if self.dim == 1 {
                let _ = writeln!(s, "{:.17e}", v[0]);
            } else {
                let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
            }
        }
        let _ = writeln!(s, "cells {}", self.n_cells());
        match &self.cells {
            MeshCells::Segments(cells) => {
                for c in cells {
                    let _ = writeln!(s, "{} {}", c[0], c[1]);
                }
            }
            MeshCells::Triangles(cells) => {
                for c in cells {
                    let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
                }
            }
        }
        let _ = writeln!(s, "boundary {}", self.boundary.len());
        for &b in &self.boundary {
            let _ = writeln!(s, "{}", if b { 1 } else { 0 });
        }
        s
    }

    /// Parses the plain-text format; errors carry 1-based line numbers.
    pub fn import_text(text: &str) -> Result<Mesh> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, &str)> {
            for (k, line) in lines.by_ref() {
                let trimmed = line.trim();
                if !trimmed.is_empty() && !trimmed.starts_with('#') {
                    return Ok((k + 1, trimmed));
                }
            }
            Err(Error::Config(format!("unexpected end of mesh file, expected {what}")))
        };
        let (ln, header) = next("header")?;
        if header != "dgtime-mesh 1" {
            return Err(Error::Config(format!("line {ln}: unknown mesh header '{header}'")));
        }
        let (ln, dim_line) = next("dim")?;
        let dim: usize = dim_line
            .strip_prefix("dim ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Config(format!("line {ln}: expected 'dim <1|2>'")))?;
        if dim != 1 && dim != 2 {
            return Err(Error::Config(format!("line {ln}: unsupported dimension {dim}")));
        }
        let (ln, vcount_line) = next("vertices")?;
        let n_vertices: usize = vcount_line
            .strip_prefix("vertices ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Config(format!("line {ln}: expected 'vertices <count>'")))?;
        let mut vertices = Vec::with_capacity(n_vertices);
        for _ in 0..n_vertices {
            let (ln, line) = next("vertex coordinates")?;
            let parts: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("line {ln}: bad vertex coordinates")))?;
            if parts.len() != dim {
                return Err(Error::Config(format!(
                    "line {ln}: expected {dim} coordinates, got {}",
                    parts.len()
                )));
            }
            vertices.push([parts[0], if dim == 2 { parts[1] } else { 0.0 }]);
        }
        let (ln, ccount_line) = next("cells")?;
        let n_cells: usize = ccount_line
            .strip_prefix("cells ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Config(format!("line {ln}: expected 'cells <count>'")))?;
        let mut segments = vec![];
        let mut triangles = vec![];
        for _ in 0..n_cells {
            let (ln, line) = next("cell indices")?;
            let parts: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("line {ln}: bad cell indices")))?;
            match (dim, parts.len()) {
                (1, 2) => segments.push([parts[0], parts[1]]),
                (2, 3) => triangles.push([parts[0], parts[1], parts[2]]),
                _ => {
                    return Err(Error::Config(format!(
                        "line {ln}: wrong number of cell indices for dimension {dim}"
                    )))
                }
            }
        }
        let (ln, bcount_line) = next("boundary")?;
        let n_markers: usize = bcount_line
            .strip_prefix("boundary ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Config(format!("line {ln}: expected 'boundary <count>'")))?;
        let mut boundary = Vec::with_capacity(n_markers);
        for _ in 0..n_markers {
            let (ln, line) = next("boundary marker")?;
            match line {
                "0" => boundary.push(false),
                "1" => boundary.push(true),
                other => {
                    return Err(Error::Config(format!("line {ln}: bad marker '{other}'")))
                }
            }
        }
        let mesh = Mesh {
            dim,
            vertices,
            cells: if dim == 1 {
                MeshCells::Segments(segments)
            } else {
                MeshCells::Triangles(triangles)
            },
            boundary,
            structure: MeshStructure::Imported,
        };
        mesh.validate()?;
        Ok(mesh)
    }
}
