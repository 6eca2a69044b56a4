use nalgebra::{Matrix3, Vector3};

use super::assembly::{assemble_load, assemble_mass, shape_functions};
use super::quadrature::TriangleRule;
use super::{FeMesh, Space};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::sparse::LdlFactor;

/// Coefficients of a scalar finite-element function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub space: Space,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(space: Space, values: Vec<f64>) -> Self {
        ScalarField { space, values }
    }

    pub fn zeros(fe: &FeMesh, space: Space) -> Self {
        ScalarField { space, values: vec![0.0; fe.n_scalar_dofs(space)] }
    }

    pub fn eval(&self, fe: &FeMesh, t: usize, bary: &[f64; 3]) -> f64 {
        let s = shape_functions(fe, self.space, t, bary);
        let dofs = fe.element_dofs(self.space, t);
        (0..s.n).map(|i| s.vals[i] * self.values[dofs[i]]).sum()
    }

    pub fn grad(&self, fe: &FeMesh, t: usize, bary: &[f64; 3]) -> [f64; 2] {
        let s = shape_functions(fe, self.space, t, bary);
        let dofs = fe.element_dofs(self.space, t);
        let mut g = [0.0; 2];
        for i in 0..s.n {
            g[0] += s.grads[i][0] * self.values[dofs[i]];
            g[1] += s.grads[i][1] * self.values[dofs[i]];
        }
        g
    }

    /// `(self, other)` with a degree-4 rule; exact for polynomial degrees up to two.
    pub fn inner(&self, fe: &FeMesh, other: &ScalarField) -> f64 {
        integrate(fe, &TriangleRule::degree4(), |t, b, _| self.eval(fe, t, b) * other.eval(fe, t, b))
    }

    pub fn integral(&self, fe: &FeMesh) -> f64 {
        integrate(fe, &TriangleRule::degree4(), |t, b, _| self.eval(fe, t, b))
    }

    pub fn l2_norm(&self, fe: &FeMesh) -> f64 {
        self.inner(fe, self).sqrt()
    }

    pub fn mean(&self, fe: &FeMesh) -> f64 {
        self.integral(fe) / fe.mesh.area()
    }

    /// `|| self - mean ||`.
    pub fn deviation_norm(&self, fe: &FeMesh) -> f64 {
        let m = self.mean(fe);
        integrate(fe, &TriangleRule::degree4(), |t, b, _| (self.eval(fe, t, b) - m).powi(2)).sqrt()
    }

    /// Adds a constant; not available for Morley, whose edge dofs are derivatives.
    pub fn add_constant(&mut self, c: f64) {
        match self.space {
            Space::Morley => panic!("add_constant on a Morley field"),
            _ => self.values.iter_mut().for_each(|v| *v += c),
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }
}

/// A vector field with two P2 components.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    /// Splits a `VecP2` coefficient vector.
    pub fn from_vec(values: &[f64]) -> Self {
        let n = values.len() / 2;
        VectorField {
            x: ScalarField::new(Space::P2, values[..n].to_vec()),
            y: ScalarField::new(Space::P2, values[n..].to_vec()),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.x.values.iter().chain(&self.y.values).copied().collect()
    }

    pub fn eval(&self, fe: &FeMesh, t: usize, bary: &[f64; 3]) -> [f64; 2] {
        [self.x.eval(fe, t, bary), self.y.eval(fe, t, bary)]
    }

    pub fn inner(&self, fe: &FeMesh, other: &VectorField) -> f64 {
        self.x.inner(fe, &other.x) + self.y.inner(fe, &other.y)
    }

    pub fn l2_norm(&self, fe: &FeMesh) -> f64 {
        self.inner(fe, self).sqrt()
    }

    /// `dv/dx - du/dx` evaluated pointwise, i.e. the scalar curl.
    pub fn curl(&self, fe: &FeMesh, t: usize, bary: &[f64; 3]) -> f64 {
        self.y.grad(fe, t, bary)[0] - self.x.grad(fe, t, bary)[1]
    }

    pub fn divergence(&self, fe: &FeMesh, t: usize, bary: &[f64; 3]) -> f64 {
        self.x.grad(fe, t, bary)[0] + self.y.grad(fe, t, bary)[1]
    }
}

/// Sum over triangles of `f` integrated with `rule`.
pub fn integrate(fe: &FeMesh, rule: &TriangleRule, f: impl Fn(usize, &[f64; 3], Point) -> f64) -> f64 {
    let mut s = 0.0;
    for t in 0..fe.n_triangles() {
        let a = fe.geom[t].area;
        for (b, w) in rule.iter() {
            s += a * w * f(t, b, fe.point(t, b));
        }
    }
    s
}

/// Nodal interpolation into P0 (centroid values), P1 or P2.
///
/// # Panics
/// For `Morley` and `VecP2`; use [`interpolate_morley`] or [`interpolate_vector`].
pub fn interpolate(fe: &FeMesh, space: Space, f: impl Fn(Point) -> f64) -> ScalarField {
    let values = match space {
        Space::P0 => (0..fe.n_triangles()).map(|t| f(fe.point(t, &[1.0 / 3.0; 3]))).collect(),
        Space::P1 => fe.mesh.vertices.iter().map(|&p| f(p)).collect(),
        Space::P2 => fe
            .mesh
            .vertices
            .iter()
            .map(|&p| f(p))
            .chain((0..fe.n_edges()).map(|e| f(fe.edge_midpoint(e))))
            .collect(),
        Space::Morley | Space::VecP2 => panic!("interpolate: unsupported space {space:?}"),
    };
    ScalarField::new(space, values)
}

/// Morley interpolant from a function and its gradient.
pub fn interpolate_morley(fe: &FeMesh, f: impl Fn(Point) -> f64, grad: impl Fn(Point) -> [f64; 2]) -> ScalarField {
    let values = fe
        .mesh
        .vertices
        .iter()
        .map(|&p| f(p))
        .chain((0..fe.n_edges()).map(|e| {
            let g = grad(fe.edge_midpoint(e));
            let n = fe.edge_normal(e);
            g[0] * n[0] + g[1] * n[1]
        }))
        .collect();
    ScalarField::new(Space::Morley, values)
}

pub fn interpolate_vector(fe: &FeMesh, f: impl Fn(Point) -> [f64; 2]) -> VectorField {
    VectorField {
        x: interpolate(fe, Space::P2, |p| f(p)[0]),
        y: interpolate(fe, Space::P2, |p| f(p)[1]),
    }
}

/// Continuous P2 function matching the Morley function at vertices and taking
/// the mean of the two one-sided values at each interior edge midpoint.
pub fn morley_to_p2(fe: &FeMesh, psi: &ScalarField) -> ScalarField {
    let nv = fe.n_vertices();
    let mut values = psi.values[..nv].to_vec();
    for e in 0..fe.n_edges() {
        let (t0, t1) = fe.topo.edge_tris[e];
        let mid = |t: usize| {
            let k = fe.topo.tri_edges[t].iter().position(|&x| x == e).expect("edge of triangle");
            let mut b = [0.5; 3];
            b[k] = 0.0;
            psi.eval(fe, t, &b)
        };
        values.push(match t1 {
            Some(t1) => 0.5 * (mid(t0) + mid(t1)),
            None => mid(t0),
        });
    }
    ScalarField::new(Space::P2, values)
}

/// Elementwise Laplacian of a Morley function.
pub fn morley_laplacian(fe: &FeMesh, psi: &ScalarField) -> ScalarField {
    let values = (0..fe.n_triangles())
        .map(|t| {
            let dofs = fe.element_dofs(Space::Morley, t);
            (0..6).map(|i| fe.morley[t].laplacian(i) * psi.values[dofs[i]]).sum()
        })
        .collect();
    ScalarField::new(Space::P0, values)
}

/// Elementwise means.
pub fn l2_project_p0(fe: &FeMesh, f: &ScalarField) -> ScalarField {
    let rule = TriangleRule::degree4();
    let values = (0..fe.n_triangles())
        .map(|t| rule.iter().map(|(b, w)| w * f.eval(fe, t, b)).sum())
        .collect();
    ScalarField::new(Space::P0, values)
}

pub fn p1_to_p2(fe: &FeMesh, f: &ScalarField) -> ScalarField {
    let mut values = f.values.clone();
    values.extend(fe.topo.edges.iter().map(|&[a, b]| 0.5 * (f.values[a] + f.values[b])));
    ScalarField::new(Space::P2, values)
}

/// L2 projection onto P1 of a function given pointwise.
pub fn project_p1(fe: &FeMesh, f: impl Fn(usize, &[f64; 3], Point) -> f64) -> Result<ScalarField> {
    let m = assemble_mass(fe, Space::P1);
    let rhs = assemble_load(fe, Space::P1, &TriangleRule::degree4(), f);
    let ldl = LdlFactor::with_nested_dissection(&m)?;
    Ok(ScalarField::new(Space::P1, ldl.solve(&rhs)))
}

/// Reconstruction of a continuous P1 function from piecewise constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recovery {
    /// Global L2 projection.
    L2Projection,
    /// Least-squares linear fit to the centroid values of the vertex patch.
    Patch,
}

pub fn recover_p1(fe: &FeMesh, f: &ScalarField, method: Recovery) -> Result<ScalarField> {
    if f.space != Space::P0 {
        return Err(Error::InvalidArgument(format!("recover_p1 expects P0, got {:?}", f.space)));
    }
    match method {
        Recovery::L2Projection => project_p1(fe, |t, _, _| f.values[t]),
        Recovery::Patch => {
            let nv = fe.n_vertices();
            let mut patches = vec![Vec::new(); nv];
            for (t, tri) in fe.mesh.triangles.iter().enumerate() {
                for &v in tri {
                    patches[v].push(t);
                }
            }
            let centroids: Vec<Point> = (0..fe.n_triangles()).map(|t| fe.point(t, &[1.0 / 3.0; 3])).collect();
            let fit = |v: usize, patch: &[usize]| -> Option<f64> {
                let p0 = fe.mesh.vertices[v];
                let h = patch
                    .iter()
                    .map(|&t| (centroids[t][0] - p0[0]).hypot(centroids[t][1] - p0[1]))
                    .fold(0.0, f64::max);
                let mut ata = Matrix3::<f64>::zeros();
                let mut atb = Vector3::<f64>::zeros();
                for &t in patch {
                    let r = Vector3::new(1.0, (centroids[t][0] - p0[0]) / h, (centroids[t][1] - p0[1]) / h);
                    ata += r * r.transpose();
                    atb += r * f.values[t];
                }
                if patch.len() < 3 || ata.determinant() < 1e-8 * patch.len() as f64 {
                    return None;
                }
                ata.cholesky().map(|c| c.solve(&atb)[0])
            };
            let values = (0..nv)
                .map(|v| {
                    fit(v, &patches[v]).unwrap_or_else(|| {
                        // Widen to the patches of all neighbouring vertices.
                        let mut wide: Vec<usize> = patches[v]
                            .iter()
                            .flat_map(|&t| fe.mesh.triangles[t])
                            .flat_map(|u| patches[u].iter().copied())
                            .collect();
                        wide.sort_unstable();
                        wide.dedup();
                        fit(v, &wide).unwrap_or_else(|| {
                            patches[v].iter().map(|&t| f.values[t]).sum::<f64>() / patches[v].len() as f64
                        })
                    })
                })
                .collect();
            Ok(ScalarField::new(Space::P1, values))
        }
    }
}

/// L2 projection onto P1 of the scalar curl of a velocity field.
pub fn curl_p1(fe: &FeMesh, u: &VectorField) -> Result<ScalarField> {
    project_p1(fe, |t, b, _| u.curl(fe, t, b))
}

/// Values of a field at the two endpoints and midpoint of a boundary edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub component: usize,
    pub length: f64,
    pub midpoint: Point,
    pub outward_normal: [f64; 2],
    pub values: [f64; 3],
}

/// Piecewise samples of a function along the boundary, integrated with
/// Simpson's rule on each edge.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub samples: Vec<TraceSample>,
}

impl BoundaryTrace {
    fn simpson(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.samples
            .iter()
            .map(|s| s.length / 6.0 * (g(s.values[0]) + 4.0 * g(s.values[1]) + g(s.values[2])))
            .sum()
    }

    pub fn length(&self) -> f64 {
        self.samples.iter().map(|s| s.length).sum()
    }

    pub fn integral(&self) -> f64 {
        self.simpson(|v| v)
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.length()
    }

    pub fn l2_norm(&self) -> f64 {
        self.simpson(|v| v * v).sqrt()
    }

    /// `|| f - mean(f) || / || f ||`, zero for a vanishing trace.
    pub fn relative_oscillation(&self) -> f64 {
        let m = self.mean();
        let dev = self.simpson(|v| (v - m) * (v - m)).sqrt();
        let n = self.l2_norm();
        if n == 0.0 {
            0.0
        } else {
            dev / n
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().flat_map(|s| s.values).fold(0.0, |a, v| a.max(v.abs()))
    }
}

fn trace_with(fe: &FeMesh, g: impl Fn(usize, &[f64; 3], [f64; 2]) -> f64) -> BoundaryTrace {
    let mut samples = Vec::with_capacity(fe.mesh.boundary_edges.len());
    for (e, be) in fe.topo.boundary_edge.iter().enumerate() {
        let Some(bi) = *be else { continue };
        let bedge = fe.mesh.boundary_edges[bi];
        let t = fe.topo.edge_tris[e].0;
        let tri = fe.mesh.triangles[t];
        let la = tri.iter().position(|&v| v == bedge.vertices[0]).expect("edge vertex");
        let lb = tri.iter().position(|&v| v == bedge.vertices[1]).expect("edge vertex");
        let (pa, pb) = (fe.mesh.vertices[bedge.vertices[0]], fe.mesh.vertices[bedge.vertices[1]]);
        let (tx, ty) = (pb[0] - pa[0], pb[1] - pa[1]);
        let length = tx.hypot(ty);
        let normal = [ty / length, -tx / length];
        let mut ba = [0.0; 3];
        ba[la] = 1.0;
        let mut bb = [0.0; 3];
        bb[lb] = 1.0;
        let mut bm = [0.0; 3];
        bm[la] = 0.5;
        bm[lb] = 0.5;
        samples.push(TraceSample {
            component: bedge.component,
            length,
            midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
            outward_normal: normal,
            values: [g(t, &ba, normal), g(t, &bm, normal), g(t, &bb, normal)],
        });
    }
    BoundaryTrace { samples }
}

/// Boundary values; discontinuous fields use the adjacent triangle.
pub fn boundary_trace(fe: &FeMesh, f: &ScalarField) -> BoundaryTrace {
    trace_with(fe, |t, b, _| f.eval(fe, t, b))
}

/// Outward normal derivative, taken from the adjacent triangle.
pub fn boundary_normal_derivative(fe: &FeMesh, f: &ScalarField) -> BoundaryTrace {
    trace_with(fe, |t, b, n| {
        let g = f.grad(fe, t, b);
        g[0] * n[0] + g[1] * n[1]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, DomainKind, DomainSpec};

    fn fe(kind: DomainKind, level: usize) -> FeMesh {
        FeMesh::new(build_mesh(&DomainSpec::new(kind).unwrap(), level).unwrap()).unwrap()
    }

    #[test]
    fn p2_reproduces_quadratics() {
        let m = fe(DomainKind::disc(1.0), 1);
        let q = |p: Point| 1.0 - p[0] + 3.0 * p[0] * p[1] - p[1] * p[1];
        let f = interpolate(&m, Space::P2, q);
        for t in [0, 7, 40] {
            let b = [0.2, 0.3, 0.5];
            assert!((f.eval(&m, t, &b) - q(m.point(t, &b))).abs() < 1e-13);
        }
    }

    #[test]
    fn morley_to_p2_keeps_quadratics() {
        let m = fe(DomainKind::ellipse(2.0, 1.0), 1);
        let q = |p: Point| p[0] * p[0] - 2.0 * p[1] + 0.5;
        let psi = interpolate_morley(&m, q, |p| [2.0 * p[0], -2.0]);
        let p2 = morley_to_p2(&m, &psi);
        let want = interpolate(&m, Space::P2, q);
        for (a, b) in p2.values.iter().zip(&want.values) {
            assert!((a - b).abs() < 1e-12);
        }
        let lap = morley_laplacian(&m, &psi);
        assert!(lap.values.iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    #[test]
    fn recovery_of_linear_data() {
        let m = fe(DomainKind::rectangle(1.0, 1.0), 2);
        let lin = |p: Point| 2.0 * p[0] - p[1] + 0.3;
        let p0 = interpolate(&m, Space::P0, lin);
        let r = recover_p1(&m, &p0, Recovery::Patch).unwrap();
        let exact = interpolate(&m, Space::P1, lin);
        let err = r.values.iter().zip(&exact.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        let l2 = recover_p1(&m, &p0, Recovery::L2Projection).unwrap();
        assert!((l2.integral(&m) - p0.integral(&m)).abs() < 1e-12);
    }

    #[test]
    fn trace_of_disc_polynomials() {
        let m = fe(DomainKind::disc(1.0), 3);
        let f = interpolate(&m, Space::P2, |p| p[0] * p[0] + p[1] * p[1]);
        let tr = boundary_trace(&m, &f);
        assert!((tr.length() - 2.0 * std::f64::consts::PI).abs() < 2e-3);
        // Chord midpoints sit slightly inside the circle.
        assert!(tr.relative_oscillation() < 1e-3);
        let dn = boundary_normal_derivative(&m, &f);
        assert!((dn.mean() - 2.0).abs() < 1e-2);
        let x = interpolate(&m, Space::P1, |p| p[0]);
        assert!(boundary_trace(&m, &x).mean().abs() < 1e-12);
        assert!((boundary_trace(&m, &x).relative_oscillation() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curl_of_rotation() {
        let m = fe(DomainKind::disc(1.0), 2);
        let u = interpolate_vector(&m, |p| [-p[1], p[0]]);
        let w = curl_p1(&m, &u).unwrap();
        assert!(w.values.iter().all(|v| (v - 2.0).abs() < 1e-10));
        assert!((u.divergence(&m, 3, &[0.2, 0.2, 0.6])).abs() < 1e-12);
    }

    #[test]
    fn norms() {
        let m = fe(DomainKind::rectangle(2.0, 1.0), 1);
        let f = interpolate(&m, Space::P1, |p| p[0]);
        // Rectangle centred at the origin: int x^2 = w^3 h / 12.
        assert!((f.l2_norm(&m).powi(2) - 8.0 / 12.0).abs() < 1e-12);
        assert!(f.mean(&m).abs() < 1e-12);
        let mut g = f.clone();
        g.add_constant(1.0);
        assert!((g.deviation_norm(&m) - f.l2_norm(&m)).abs() < 1e-12);
    }
}
