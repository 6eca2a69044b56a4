use super::quadrature::TriangleRule;
use super::{FeMesh, Space};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::sparse::CsrMatrix;

/// Values and gradients of the local basis of a scalar space at one point.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub n: usize,
    pub vals: [f64; 6],
    pub grads: [[f64; 2]; 6],
}

/// Local basis of `space` on triangle `t` at barycentric point `bary`.
///
/// `VecP2` is not a scalar space; its components use the `P2` basis.
pub fn shape_functions(fe: &FeMesh, space: Space, t: usize, bary: &[f64; 3]) -> Shape {
    let mut s = Shape { n: 0, vals: [0.0; 6], grads: [[0.0; 2]; 6] };
    let g = &fe.geom[t].grad_bary;
    match space {
        Space::P0 => {
            s.n = 1;
            s.vals[0] = 1.0;
        }
        Space::P1 => {
            s.n = 3;
            for k in 0..3 {
                s.vals[k] = bary[k];
                s.grads[k] = g[k];
            }
        }
        Space::P2 | Space::VecP2 => {
            s.n = 6;
            for k in 0..3 {
                let l = bary[k];
                s.vals[k] = l * (2.0 * l - 1.0);
                s.grads[k] = [(4.0 * l - 1.0) * g[k][0], (4.0 * l - 1.0) * g[k][1]];
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                s.vals[3 + k] = 4.0 * bary[i] * bary[j];
                s.grads[3 + k] = [
                    4.0 * (bary[j] * g[i][0] + bary[i] * g[j][0]),
                    4.0 * (bary[j] * g[i][1] + bary[i] * g[j][1]),
                ];
            }
        }
        Space::Morley => {
            s.n = 6;
            let x = fe.point(t, bary);
            let el = &fe.morley[t];
            for i in 0..6 {
                s.vals[i] = el.value(i, x);
                s.grads[i] = el.grad(i, x);
            }
        }
    }
    s
}

fn assemble_scalar(
    fe: &FeMesh,
    space: Space,
    rule: &TriangleRule,
    local: impl Fn(&Shape, usize, usize) -> f64,
) -> CsrMatrix {
    let n = fe.n_scalar_dofs(space);
    let mut trip = Vec::with_capacity(fe.n_triangles() * 36);
    for t in 0..fe.n_triangles() {
        let dofs = fe.element_dofs(space, t);
        let area = fe.geom[t].area;
        let nl = dofs.len();
        let mut ke = [[0.0; 6]; 6];
        for (b, w) in rule.iter() {
            let s = shape_functions(fe, space, t, b);
            for i in 0..nl {
                for j in 0..nl {
                    ke[i][j] += w * area * local(&s, i, j);
                }
            }
        }
        for i in 0..nl {
            for j in 0..nl {
                trip.push((dofs[i], dofs[j], ke[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, trip)
}

fn block_diag2(a: &CsrMatrix) -> CsrMatrix {
    let n = a.nrows();
    let mut trip: Vec<_> = a.triplets().collect();
    trip.extend(a.triplets().map(|(i, j, v)| (i + n, j + n, v)));
    CsrMatrix::from_triplets(2 * n, 2 * n, trip)
}

/// Gradient form `(grad u, grad v)`.
pub fn assemble_stiffness(fe: &FeMesh, space: Space) -> Result<CsrMatrix> {
    let grad = |s: &Shape, i: usize, j: usize| s.grads[i][0] * s.grads[j][0] + s.grads[i][1] * s.grads[j][1];
    match space {
        Space::P0 => Err(Error::InvalidArgument("P0 has no gradient".into())),
        Space::VecP2 => Ok(block_diag2(&assemble_scalar(fe, Space::P2, &TriangleRule::degree2(), grad))),
        _ => Ok(assemble_scalar(fe, space, &TriangleRule::degree2(), grad)),
    }
}

/// Mass form `(u, v)`.
pub fn assemble_mass(fe: &FeMesh, space: Space) -> CsrMatrix {
    let mass = |s: &Shape, i: usize, j: usize| s.vals[i] * s.vals[j];
    match space {
        Space::VecP2 => block_diag2(&assemble_scalar(fe, Space::P2, &TriangleRule::degree4(), mass)),
        _ => assemble_scalar(fe, space, &TriangleRule::degree4(), mass),
    }
}

/// Morley Hessian form `(D^2 u : D^2 v)` and gradient form `(grad u, grad v)`.
pub fn assemble_morley(fe: &FeMesh) -> (CsrMatrix, CsrMatrix) {
    let n = fe.n_scalar_dofs(Space::Morley);
    let mut trip = Vec::with_capacity(fe.n_triangles() * 36);
    for t in 0..fe.n_triangles() {
        let dofs = fe.element_dofs(Space::Morley, t);
        let el = &fe.morley[t];
        let area = fe.geom[t].area;
        let hs: Vec<[f64; 3]> = (0..6).map(|i| el.hessian(i)).collect();
        for i in 0..6 {
            for j in 0..6 {
                let v = hs[i][0] * hs[j][0] + 2.0 * hs[i][1] * hs[j][1] + hs[i][2] * hs[j][2];
                trip.push((dofs[i], dofs[j], area * v));
            }
        }
    }
    let h = CsrMatrix::from_triplets(n, n, trip);
    let g = assemble_stiffness(fe, Space::Morley).expect("Morley has a gradient");
    (h, g)
}

/// `B[q][j] = (q, div phi_j)` for P1 pressures `q` and vector P2 velocities.
pub fn assemble_divergence(fe: &FeMesh) -> CsrMatrix {
    let n2 = fe.n_scalar_dofs(Space::P2);
    let rule = TriangleRule::degree2();
    let mut trip = Vec::with_capacity(fe.n_triangles() * 36);
    for t in 0..fe.n_triangles() {
        let vdofs = fe.element_dofs(Space::P2, t);
        let tri = fe.mesh.triangles[t];
        let area = fe.geom[t].area;
        let mut be = [[[0.0; 2]; 6]; 3];
        for (b, w) in rule.iter() {
            let s = shape_functions(fe, Space::P2, t, b);
            for a in 0..3 {
                for j in 0..6 {
                    for c in 0..2 {
                        be[a][j][c] += w * area * b[a] * s.grads[j][c];
                    }
                }
            }
        }
        for a in 0..3 {
            for j in 0..6 {
                for c in 0..2 {
                    trip.push((tri[a], c * n2 + vdofs[j], be[a][j][c]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(fe.n_vertices(), 2 * n2, trip)
}

/// Load vector `(f, phi_i)` for a scalar space.
///
/// `f` receives the triangle, barycentric point and physical point.
pub fn assemble_load(
    fe: &FeMesh,
    space: Space,
    rule: &TriangleRule,
    f: impl Fn(usize, &[f64; 3], Point) -> f64,
) -> Vec<f64> {
    let mut out = vec![0.0; fe.n_scalar_dofs(space)];
    for t in 0..fe.n_triangles() {
        let dofs = fe.element_dofs(space, t);
        let area = fe.geom[t].area;
        for (b, w) in rule.iter() {
            let s = shape_functions(fe, space, t, b);
            let v = f(t, b, fe.point(t, b)) * w * area;
            for (i, &d) in dofs.iter().enumerate() {
                out[d] += v * s.vals[i];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::tests::single_triangle;
    use super::super::{interpolate, interpolate_morley, interpolate_vector};
    use super::*;
    use crate::geometry::{build_mesh, DomainKind, DomainSpec};

    fn disc_fe(level: usize) -> FeMesh {
        FeMesh::new(build_mesh(&DomainSpec::unit_disc(), level).unwrap()).unwrap()
    }

    #[test]
    fn reference_triangle_p1() {
        let fe = single_triangle();
        let k = assemble_stiffness(&fe, Space::P1).unwrap().to_dense();
        let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        let m = assemble_mass(&fe, Space::P1).to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - want[i][j]).abs() < 1e-14);
                let mw = if i == j { 2.0 } else { 1.0 } * 0.5 / 12.0;
                assert!((m[i][j] - mw).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stiffness_kills_constants_and_mass_sums_to_area() {
        let fe = disc_fe(1);
        for space in [Space::P1, Space::P2, Space::Morley] {
            let k = assemble_stiffness(&fe, space).unwrap();
            assert!(k.is_symmetric(1e-12));
            let n = fe.n_scalar_dofs(space);
            let mut one = vec![0.0; n];
            one[..fe.n_vertices()].iter_mut().for_each(|v| *v = 1.0);
            if space == Space::P2 {
                one.iter_mut().for_each(|v| *v = 1.0);
            }
            let r = k.mul_vec(&one);
            assert!(r.iter().all(|v| v.abs() < 1e-11), "{space:?}");
        }
        for space in [Space::P0, Space::P1, Space::P2] {
            let m = assemble_mass(&fe, space);
            let one = vec![1.0; fe.n_scalar_dofs(space)];
            assert!((m.bilinear(&one, &one) - fe.mesh.area()).abs() < 1e-12);
        }
    }

    #[test]
    fn p2_stiffness_is_exact_on_quadratics() {
        let fe = disc_fe(1);
        let f = interpolate(&fe, Space::P2, |p| p[0] * p[0] - 0.5 * p[0] * p[1] + p[1]);
        let k = assemble_stiffness(&fe, Space::P2).unwrap();
        // Integrate |grad f|^2 = (2x - y/2)^2 + (1 - x/2)^2 directly.
        let want: f64 = assemble_load(&fe, Space::P0, &TriangleRule::degree4(), |_, _, p| {
            (2.0 * p[0] - 0.5 * p[1]).powi(2) + (1.0 - 0.5 * p[0]).powi(2)
        })
        .iter()
        .sum();
        assert!((k.bilinear(&f.values, &f.values) - want).abs() < 1e-11);
    }

    #[test]
    fn morley_energy_of_radial_quadratic() {
        let fe = disc_fe(2);
        let (h, g) = assemble_morley(&fe);
        assert!(h.is_symmetric(1e-12));
        let f = interpolate_morley(&fe, |p| p[0] * p[0] + p[1] * p[1], |p| [2.0 * p[0], 2.0 * p[1]]);
        let area = fe.mesh.area();
        assert!((h.bilinear(&f.values, &f.values) - 8.0 * area).abs() < 1e-10);
        // Polar moment of the mesh polygon: 4 * int r^2.
        let moment: f64 = assemble_load(&fe, Space::P0, &TriangleRule::degree2(), |_, _, p| {
            4.0 * (p[0] * p[0] + p[1] * p[1])
        })
        .iter()
        .sum();
        assert!((g.bilinear(&f.values, &f.values) - moment).abs() < 1e-10);
        // Affine functions lie in the kernel of the Hessian form.
        let a = interpolate_morley(&fe, |p| 1.0 + 2.0 * p[0] - p[1], |_| [2.0, -1.0]);
        assert!(h.mul_vec(&a.values).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn divergence_of_linear_fields() {
        let fe = disc_fe(1);
        let b = assemble_divergence(&fe);
        let c = interpolate_vector(&fe, |_| [1.0, 0.0]);
        assert!(b.mul_vec(&c.to_vec()).iter().all(|v| v.abs() < 1e-13));
        let r = interpolate_vector(&fe, |p| p);
        let br = b.mul_vec(&r.to_vec());
        let m = assemble_mass(&fe, Space::P1);
        let one = vec![1.0; fe.n_vertices()];
        let want = m.mul_vec(&one);
        for (x, y) in br.iter().zip(&want) {
            assert!((x - 2.0 * y).abs() < 1e-13);
        }
    }

    #[test]
    fn vector_blocks() {
        let domain = DomainSpec::new(DomainKind::rectangle(2.0, 1.0)).unwrap();
        let fe = FeMesh::new(build_mesh(&domain, 1).unwrap()).unwrap();
        let n2 = fe.n_scalar_dofs(Space::P2);
        let k = assemble_stiffness(&fe, Space::VecP2).unwrap();
        let k2 = assemble_stiffness(&fe, Space::P2).unwrap();
        assert_eq!(k.nrows(), 2 * n2);
        assert_eq!(k.get(n2 + 3, n2 + 3), k2.get(3, 3));
        assert_eq!(k.get(3, n2 + 3), 0.0);
    }
}
