//! Symmetric quadrature rules on triangles, in barycentric coordinates.
//! Weights sum to one; multiply by the triangle area.

#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

fn orbit3(a: f64, w: f64, pts: &mut Vec<[f64; 3]>, ws: &mut Vec<f64>) {
    let b = 1.0 - 2.0 * a;
    for p in [[b, a, a], [a, b, a], [a, a, b]] {
        pts.push(p);
        ws.push(w);
    }
}

fn orbit6(a: f64, b: f64, w: f64, pts: &mut Vec<[f64; 3]>, ws: &mut Vec<f64>) {
    let c = 1.0 - a - b;
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        pts.push(p);
        ws.push(w);
    }
}

impl TriangleRule {
    /// Three interior points, exact to degree 2.
    pub fn degree2() -> Self {
        let (mut p, mut w) = (Vec::new(), Vec::new());
        orbit3(1.0 / 6.0, 1.0 / 3.0, &mut p, &mut w);
        TriangleRule { degree: 2, points: p, weights: w }
    }

    /// Six-point Dunavant rule, exact to degree 4.
    pub fn degree4() -> Self {
        let (mut p, mut w) = (Vec::new(), Vec::new());
        orbit3(0.445948490915965, 0.223381589678011, &mut p, &mut w);
        orbit3(0.091576213509771, 0.109951743655322, &mut p, &mut w);
        TriangleRule { degree: 4, points: p, weights: w }
    }

    /// Twelve-point Dunavant rule, exact to degree 6.
    pub fn degree6() -> Self {
        let (mut p, mut w) = (Vec::new(), Vec::new());
        orbit3(0.249286745170910, 0.116786275726379, &mut p, &mut w);
        orbit3(0.063089014491502, 0.050844906370207, &mut p, &mut w);
        orbit6(0.053145049844817, 0.310352451033784, 0.082851075618374, &mut p, &mut w);
        TriangleRule { degree: 6, points: p, weights: w }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}
