//! Finite-element spaces on triangle meshes: P0, P1, P2, vector P2 and the
//! Morley element, with assembly of the operators the eigenproblems need.

mod assembly;
mod field;
mod morley;
pub mod quadrature;

pub use assembly::{
    assemble_divergence, assemble_load, assemble_mass, assemble_morley, assemble_stiffness,
    shape_functions,
};
pub use field::{
    integrate, project_p1,
    boundary_normal_derivative, boundary_trace, curl_p1, interpolate, interpolate_morley,
    interpolate_vector, l2_project_p0, morley_laplacian, morley_to_p2, p1_to_p2, recover_p1,
    BoundaryTrace, Recovery, ScalarField, TraceSample, VectorField,
};
pub use morley::MorleyElement;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Point, Topology};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    /// Piecewise constants, one dof per triangle.
    P0,
    /// Continuous linears, one dof per vertex.
    P1,
    /// Continuous quadratics: vertex dofs, then one dof per edge.
    P2,
    /// Two P2 components stored as consecutive blocks.
    VecP2,
    /// Vertex values, then one midpoint normal derivative per edge.
    Morley,
}

/// Per-triangle affine data.
#[derive(Debug, Clone, Copy)]
pub struct TriGeom {
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_bary: [[f64; 2]; 3],
}

impl TriGeom {
    pub fn new(p: [Point; 3]) -> Self {
        let area = crate::geometry::signed_area(p[0], p[1], p[2]);
        let mut g = [[0.0; 2]; 3];
        for (i, gi) in g.iter_mut().enumerate() {
            let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            *gi = [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)];
        }
        TriGeom { area, grad_bary: g }
    }
}

/// A mesh together with its edge topology and element geometry.
#[derive(Debug, Clone)]
pub struct FeMesh {
    pub mesh: Mesh,
    pub topo: Topology,
    pub geom: Vec<TriGeom>,
    pub morley: Vec<MorleyElement>,
}

impl FeMesh {
    pub fn new(mesh: Mesh) -> Result<Self> {
        let topo = mesh.topology();
        let geom = (0..mesh.triangles.len()).map(|t| TriGeom::new(mesh.triangle_points(t))).collect();
        let mut fe = FeMesh { mesh, topo, geom, morley: Vec::new() };
        fe.morley = (0..fe.n_triangles())
            .map(|t| {
                let e = fe.topo.tri_edges[t];
                MorleyElement::new(
                    fe.mesh.triangle_points(t),
                    [fe.edge_normal(e[0]), fe.edge_normal(e[1]), fe.edge_normal(e[2])],
                )
            })
            .collect::<Result<_>>()?;
        Ok(fe)
    }

    pub fn n_vertices(&self) -> usize {
        self.mesh.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.topo.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.mesh.triangles.len()
    }

    pub fn point(&self, t: usize, bary: &[f64; 3]) -> Point {
        let p = self.mesh.triangle_points(t);
        [
            bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
            bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
        ]
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.topo.edges[e];
        let (p, q) = (self.mesh.vertices[a], self.mesh.vertices[b]);
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    }

    /// Unit normal of edge `[lo, hi]`: the tangent `hi - lo` rotated clockwise.
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.topo.edges[e];
        let (p, q) = (self.mesh.vertices[a], self.mesh.vertices[b]);
        let (tx, ty) = (q[0] - p[0], q[1] - p[1]);
        let len = tx.hypot(ty);
        [ty / len, -tx / len]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.topo.edges[e];
        let (p, q) = (self.mesh.vertices[a], self.mesh.vertices[b]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    pub fn n_scalar_dofs(&self, space: Space) -> usize {
        match space {
            Space::P0 => self.n_triangles(),
            Space::P1 => self.n_vertices(),
            Space::P2 | Space::Morley => self.n_vertices() + self.n_edges(),
            Space::VecP2 => 2 * (self.n_vertices() + self.n_edges()),
        }
    }

    /// Local-to-global dofs of triangle `t` for scalar spaces.
    ///
    /// P2 and Morley order the dofs as the three vertices followed by the edges
    /// opposite those vertices.
    pub fn element_dofs(&self, space: Space, t: usize) -> Vec<usize> {
        let tri = self.mesh.triangles[t];
        let nv = self.n_vertices();
        match space {
            Space::P0 => vec![t],
            Space::P1 => tri.to_vec(),
            Space::P2 | Space::Morley => {
                let e = self.topo.tri_edges[t];
                vec![tri[0], tri[1], tri[2], nv + e[0], nv + e[1], nv + e[2]]
            }
            Space::VecP2 => {
                let s = self.element_dofs(Space::P2, t);
                let n2 = nv + self.n_edges();
                s.iter().copied().chain(s.iter().map(|d| d + n2)).collect()
            }
        }
    }
}

/// Degrees of freedom of a space with the essential (boundary) ones flagged.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub space: Space,
    pub total_dofs: usize,
    pub vertex_offset: usize,
    pub edge_offset: Option<usize>,
    pub cell_offset: Option<usize>,
    pub constrained: Vec<bool>,
}

impl DofMap {
    /// Homogeneous essential conditions: boundary vertices and boundary edges
    /// (values for P1/P2/VecP2, values plus normal derivatives for Morley).
    pub fn new(fe: &FeMesh, space: Space) -> Self {
        let nv = fe.n_vertices();
        let total = fe.n_scalar_dofs(space);
        let mut constrained = vec![false; total];
        match space {
            Space::P0 => {}
            Space::P1 => constrained[..nv].copy_from_slice(&fe.topo.boundary_vertex),
            Space::P2 | Space::Morley | Space::VecP2 => {
                let n2 = nv + fe.n_edges();
                let blocks = if space == Space::VecP2 { 2 } else { 1 };
                for b in 0..blocks {
                    let off = b * n2;
                    for v in 0..nv {
                        constrained[off + v] = fe.topo.boundary_vertex[v];
                    }
                    for e in 0..fe.n_edges() {
                        constrained[off + nv + e] = fe.topo.is_boundary_edge(e);
                    }
                }
            }
        }
        let (vertex_offset, edge_offset, cell_offset) = match space {
            Space::P0 => (0, None, Some(0)),
            Space::P1 => (0, None, None),
            _ => (0, Some(nv), None),
        };
        DofMap { space, total_dofs: total, vertex_offset, edge_offset, cell_offset, constrained }
    }

    pub fn free_count(&self) -> usize {
        self.constrained.iter().filter(|c| !**c).count()
    }
}

/// Restriction to the unconstrained dofs.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub full_to_reduced: Vec<Option<usize>>,
    pub reduced_to_full: Vec<usize>,
}

impl Reduction {
    pub fn new(constrained: &[bool]) -> Result<Self> {
        let mut full_to_reduced = vec![None; constrained.len()];
        let mut reduced_to_full = Vec::new();
        for (i, &c) in constrained.iter().enumerate() {
            if !c {
                full_to_reduced[i] = Some(reduced_to_full.len());
                reduced_to_full.push(i);
            }
        }
        if reduced_to_full.is_empty() {
            return Err(Error::EmptyInterior);
        }
        Ok(Reduction { full_to_reduced, reduced_to_full })
    }

    /// Identity reduction (nothing constrained).
    pub fn identity(n: usize) -> Self {
        Reduction { full_to_reduced: (0..n).map(Some).collect(), reduced_to_full: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.reduced_to_full.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reduced_to_full.is_empty()
    }

    pub fn full_len(&self) -> usize {
        self.full_to_reduced.len()
    }

    pub fn matrix(&self, a: &CsrMatrix) -> CsrMatrix {
        a.select(&self.full_to_reduced, self.len(), &self.full_to_reduced, self.len())
    }

    /// Rows restricted by `self`, columns by `cols`.
    pub fn rows_cols(&self, a: &CsrMatrix, cols: &Reduction) -> CsrMatrix {
        a.select(&self.full_to_reduced, self.len(), &cols.full_to_reduced, cols.len())
    }

    /// Embeds a reduced vector, zero on constrained dofs.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.full_len()];
        for (r, &f) in self.reduced_to_full.iter().enumerate() {
            full[f] = x[r];
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.reduced_to_full.iter().map(|&f| full[f]).collect()
    }
}

/// Eliminates the constrained rows and columns of a symmetric matrix pair.
pub fn apply_dirichlet(
    k: &CsrMatrix,
    m: &CsrMatrix,
    dofmap: &DofMap,
) -> Result<(Reduction, CsrMatrix, CsrMatrix)> {
    let red = Reduction::new(&dofmap.constrained)?;
    Ok((red.clone(), red.matrix(k), red.matrix(m)))
}
