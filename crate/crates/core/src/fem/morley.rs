use nalgebra::{Matrix6, Vector6};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Local basis of the Morley element on one triangle.
///
/// Shape functions are quadratics written in scaled monomials
/// `1, s, t, s^2, s t, t^2` with `s = (x - xc)/h`, `t = (y - yc)/h`.
/// Dofs `0..3` are vertex values, dof `3 + k` is the derivative along
/// `normals[k]` at the midpoint of the edge opposite vertex `k`.
#[derive(Debug, Clone)]
pub struct MorleyElement {
    center: Point,
    h: f64,
    /// Column `i` holds the monomial coefficients of basis function `i`.
    coeffs: Matrix6<f64>,
}

fn monomials(s: f64, t: f64) -> [f64; 6] {
    [1.0, s, t, s * s, s * t, t * t]
}

/// Derivatives of the monomials with respect to `s` and `t`.
fn monomial_grads(s: f64, t: f64) -> [[f64; 2]; 6] {
    [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0 * s, 0.0], [t, s], [0.0, 2.0 * t]]
}

impl MorleyElement {
    pub fn new(p: [Point; 3], normals: [[f64; 2]; 3]) -> Result<Self> {
        let center = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
        let h = (0..3)
            .map(|k| (p[(k + 1) % 3][0] - p[k][0]).hypot(p[(k + 1) % 3][1] - p[k][1]))
            .fold(0.0, f64::max);
        let local = |q: Point| ((q[0] - center[0]) / h, (q[1] - center[1]) / h);
        let mut d = Matrix6::<f64>::zeros();
        for k in 0..3 {
            let (s, t) = local(p[k]);
            for (j, m) in monomials(s, t).iter().enumerate() {
                d[(k, j)] = *m;
            }
            let a = p[(k + 1) % 3];
            let b = p[(k + 2) % 3];
            let (s, t) = local([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            let n = normals[k];
            for (j, g) in monomial_grads(s, t).iter().enumerate() {
                d[(3 + k, j)] = (g[0] * n[0] + g[1] * n[1]) / h;
            }
        }
        let coeffs = d
            .try_inverse()
            .ok_or_else(|| Error::Mesh("degenerate Morley element".into()))?;
        Ok(MorleyElement { center, h, coeffs })
    }

    fn coeff(&self, i: usize) -> Vector6<f64> {
        self.coeffs.column(i).into_owned()
    }

    pub fn value(&self, i: usize, x: Point) -> f64 {
        let c = self.coeff(i);
        let m = monomials((x[0] - self.center[0]) / self.h, (x[1] - self.center[1]) / self.h);
        (0..6).map(|j| c[j] * m[j]).sum()
    }

    pub fn grad(&self, i: usize, x: Point) -> [f64; 2] {
        let c = self.coeff(i);
        let g = monomial_grads((x[0] - self.center[0]) / self.h, (x[1] - self.center[1]) / self.h);
        let mut out = [0.0; 2];
        for j in 0..6 {
            out[0] += c[j] * g[j][0] / self.h;
            out[1] += c[j] * g[j][1] / self.h;
        }
        out
    }

    /// Constant Hessian `[xx, xy, yy]` of basis function `i`.
    pub fn hessian(&self, i: usize) -> [f64; 3] {
        let c = self.coeff(i);
        let h2 = self.h * self.h;
        [2.0 * c[3] / h2, c[4] / h2, 2.0 * c[5] / h2]
    }

    pub fn laplacian(&self, i: usize) -> f64 {
        let h = self.hessian(i);
        h[0] + h[2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn element() -> (MorleyElement, [Point; 3], [[f64; 2]; 3]) {
        let p: [Point; 3] = [[0.1, -0.2], [1.3, 0.1], [0.4, 0.9]];
        let mut normals = [[0.0; 2]; 3];
        for (k, n) in normals.iter_mut().enumerate() {
            let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
            let (tx, ty) = (b[0] - a[0], b[1] - a[1]);
            let l = tx.hypot(ty);
            // Flip one normal to exercise the global orientation.
            let s = if k == 1 { -1.0 } else { 1.0 };
            *n = [s * ty / l, -s * tx / l];
        }
        (MorleyElement::new(p, normals).unwrap(), p, normals)
    }

    #[test]
    fn basis_is_dual_to_dofs() {
        let (el, p, normals) = element();
        for i in 0..6 {
            for k in 0..3 {
                let v = el.value(i, p[k]);
                assert!((v - if i == k { 1.0 } else { 0.0 }).abs() < 1e-12);
                let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
                let g = el.grad(i, [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                let dn = g[0] * normals[k][0] + g[1] * normals[k][1];
                assert!((dn - if i == 3 + k { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reproduces_quadratics() {
        let (el, p, normals) = element();
        let f = |x: Point| 0.3 + x[0] - 2.0 * x[1] + 0.7 * x[0] * x[0] - x[0] * x[1] + 1.5 * x[1] * x[1];
        let gf = |x: Point| [1.0 + 1.4 * x[0] - x[1], -2.0 - x[0] + 3.0 * x[1]];
        let mut dofs = [0.0; 6];
        for k in 0..3 {
            dofs[k] = f(p[k]);
            let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
            let g = gf([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            dofs[3 + k] = g[0] * normals[k][0] + g[1] * normals[k][1];
        }
        let x = [0.5, 0.3];
        let v: f64 = (0..6).map(|i| dofs[i] * el.value(i, x)).sum();
        assert!((v - f(x)).abs() < 1e-12);
        let lap: f64 = (0..6).map(|i| dofs[i] * el.laplacian(i)).sum();
        assert!((lap - 4.4).abs() < 1e-11);
    }
}
