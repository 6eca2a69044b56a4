//! Parametric planar domains and their triangulations.
//!
//! Every domain is centred at the origin. Simply connected kinds are meshed by
//! mapping a fixed two-ring reference triangulation of the unit disc through the
//! star-shaped parameterization; rectangles use a criss-cross grid and annuli a
//! single polar layer. Uniform refinement splits each triangle in four and
//! places new boundary vertices on the analytic curve.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Stars are rejected when `r(theta)` drops below this fraction of the base radius.
pub const STAR_MIN_RADIUS_FRACTION: f64 = 0.05;
pub const MAX_STAR_MODES: usize = 8;
pub const MAX_LEVEL: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Disc { radius: f64 },
    Ellipse { semi_a: f64, semi_b: f64 },
    Rectangle { width: f64, height: f64 },
    Annulus { inner_r: f64, outer_r: f64 },
    /// `r(theta) = base_radius * (1 + sum_k a_k cos(k theta) + b_k sin(k theta))`, `k >= 1`.
    FourierStar { base_radius: f64, cos_coeffs: Vec<f64>, sin_coeffs: Vec<f64> },
}

/// A domain: a shape scaled uniformly by `scale` so that its area is `target_area`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub target_area: f64,
    pub scale: f64,
}

impl DomainKind {
    pub fn disc(radius: f64) -> Self {
        DomainKind::Disc { radius }
    }

    pub fn ellipse(semi_a: f64, semi_b: f64) -> Self {
        DomainKind::Ellipse { semi_a, semi_b }
    }

    pub fn rectangle(width: f64, height: f64) -> Self {
        DomainKind::Rectangle { width, height }
    }

    pub fn annulus(inner_r: f64, outer_r: f64) -> Self {
        DomainKind::Annulus { inner_r, outer_r }
    }

    pub fn fourier_star(base_radius: f64, cos_coeffs: Vec<f64>, sin_coeffs: Vec<f64>) -> Self {
        DomainKind::FourierStar { base_radius, cos_coeffs, sin_coeffs }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::Disc { .. } => "disc",
            DomainKind::Ellipse { .. } => "ellipse",
            DomainKind::Rectangle { .. } => "rectangle",
            DomainKind::Annulus { .. } => "annulus",
            DomainKind::FourierStar { .. } => "fourier_star",
        }
    }

    /// Analytic area of the unscaled shape.
    pub fn area(&self) -> f64 {
        match self {
            DomainKind::Disc { radius } => PI * radius * radius,
            DomainKind::Ellipse { semi_a, semi_b } => PI * semi_a * semi_b,
            DomainKind::Rectangle { width, height } => width * height,
            DomainKind::Annulus { inner_r, outer_r } => PI * (outer_r * outer_r - inner_r * inner_r),
            DomainKind::FourierStar { base_radius, cos_coeffs, sin_coeffs } => {
                let sq: f64 = cos_coeffs.iter().chain(sin_coeffs).map(|c| c * c).sum();
                PI * base_radius * base_radius * (1.0 + 0.5 * sq)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidDomain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            DomainKind::Disc { radius } => positive("radius", *radius),
            DomainKind::Ellipse { semi_a, semi_b } => {
                positive("semi_a", *semi_a)?;
                positive("semi_b", *semi_b)
            }
            DomainKind::Rectangle { width, height } => {
                positive("width", *width)?;
                positive("height", *height)
            }
            DomainKind::Annulus { inner_r, outer_r } => {
                positive("inner_r", *inner_r)?;
                positive("outer_r", *outer_r)?;
                if inner_r >= outer_r {
                    return Err(Error::InvalidDomain(format!(
                        "annulus needs inner_r < outer_r, got {inner_r} >= {outer_r}"
                    )));
                }
                Ok(())
            }
            DomainKind::FourierStar { base_radius, cos_coeffs, sin_coeffs } => {
                positive("base_radius", *base_radius)?;
                if cos_coeffs.len() > MAX_STAR_MODES || sin_coeffs.len() > MAX_STAR_MODES {
                    return Err(Error::InvalidDomain(format!(
                        "at most {MAX_STAR_MODES} Fourier modes are supported"
                    )));
                }
                if let Some(c) = cos_coeffs.iter().chain(sin_coeffs).find(|c| !c.is_finite()) {
                    return Err(Error::InvalidDomain(format!("non-finite star coefficient {c}")));
                }
                let (theta, rel) = star_minimum(cos_coeffs, sin_coeffs);
                if rel < STAR_MIN_RADIUS_FRACTION {
                    return Err(Error::DegenerateStar {
                        theta,
                        radius: rel * base_radius,
                        min: STAR_MIN_RADIUS_FRACTION * base_radius,
                    });
                }
                Ok(())
            }
        }
    }
}

/// Relative star radius `1 + sum a_k cos k t + b_k sin k t`.
pub fn star_profile(cos_coeffs: &[f64], sin_coeffs: &[f64], theta: f64) -> f64 {
    let mut r = 1.0;
    for (k, a) in cos_coeffs.iter().enumerate() {
        r += a * ((k + 1) as f64 * theta).cos();
    }
    for (k, b) in sin_coeffs.iter().enumerate() {
        r += b * ((k + 1) as f64 * theta).sin();
    }
    r
}

/// Location and value of the minimum of the relative star profile.
fn star_minimum(cos_coeffs: &[f64], sin_coeffs: &[f64]) -> (f64, f64) {
    const SAMPLES: usize = 8192;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..SAMPLES {
        let t = 2.0 * PI * i as f64 / SAMPLES as f64;
        let r = star_profile(cos_coeffs, sin_coeffs, t);
        if r < best.1 {
            best = (t, r);
        }
    }
    // Polish with a few golden-section steps around the best sample.
    let h = 2.0 * PI / SAMPLES as f64;
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..40 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if star_profile(cos_coeffs, sin_coeffs, c) < star_profile(cos_coeffs, sin_coeffs, d) {
            b = d;
        } else {
            a = c;
        }
    }
    let t = 0.5 * (a + b);
    let r = star_profile(cos_coeffs, sin_coeffs, t);
    if r < best.1 {
        (t.rem_euclid(2.0 * PI), r)
    } else {
        best
    }
}

impl DomainSpec {
    /// Unscaled domain; `target_area` is its own analytic area.
    pub fn new(kind: DomainKind) -> Result<Self> {
        kind.validate()?;
        let area = kind.area();
        Ok(DomainSpec { kind, target_area: area, scale: 1.0 })
    }

    /// Domain rescaled to the requested area.
    pub fn with_area(kind: DomainKind, target_area: f64) -> Result<Self> {
        let spec = DomainSpec { kind, target_area, scale: 1.0 };
        normalize_area(&spec)
    }

    pub fn unit_disc() -> Self {
        DomainSpec::new(DomainKind::disc(1.0)).expect("unit disc is valid")
    }

    pub fn is_simply_connected(&self) -> bool {
        !matches!(self.kind, DomainKind::Annulus { .. })
    }

    pub fn boundary_components(&self) -> usize {
        if self.is_simply_connected() {
            1
        } else {
            2
        }
    }

    /// Analytic area of the scaled domain.
    pub fn area(&self) -> f64 {
        self.scale * self.scale * self.kind.area()
    }

    /// Radius of the disc with the same area.
    pub fn equal_area_radius(&self) -> f64 {
        (self.area() / PI).sqrt()
    }

    /// Parameter period of boundary component `component`.
    pub fn boundary_period(&self, component: usize) -> f64 {
        match (&self.kind, component) {
            (DomainKind::Rectangle { width, height }, _) => 2.0 * self.scale * (width + height),
            _ => 2.0 * PI,
        }
    }

    /// Point on the analytic boundary curve of `component` at parameter `t`.
    pub fn boundary_point(&self, component: usize, t: f64) -> Point {
        let s = self.scale;
        match &self.kind {
            DomainKind::Disc { radius } => {
                let r = s * radius;
                [r * t.cos(), r * t.sin()]
            }
            DomainKind::Ellipse { semi_a, semi_b } => [s * semi_a * t.cos(), s * semi_b * t.sin()],
            DomainKind::Annulus { inner_r, outer_r } => {
                let r = s * if component == 0 { *outer_r } else { *inner_r };
                [r * t.cos(), r * t.sin()]
            }
            DomainKind::FourierStar { base_radius, cos_coeffs, sin_coeffs } => {
                let r = s * base_radius * star_profile(cos_coeffs, sin_coeffs, t);
                [r * t.cos(), r * t.sin()]
            }
            DomainKind::Rectangle { width, height } => {
                let (w, h) = (s * width, s * height);
                let t = t.rem_euclid(2.0 * (w + h));
                let (x0, y0) = (-0.5 * w, -0.5 * h);
                if t <= w {
                    [x0 + t, y0]
                } else if t <= w + h {
                    [x0 + w, y0 + (t - w)]
                } else if t <= 2.0 * w + h {
                    [x0 + w - (t - w - h), y0 + h]
                } else {
                    [x0, y0 + h - (t - 2.0 * w - h)]
                }
            }
        }
    }

    /// Image of the reference-disc point `(rho, theta)` for star-shaped kinds.
    fn star_map(&self, rho: f64, theta: f64) -> Point {
        let b = self.boundary_point(0, theta);
        [rho * b[0], rho * b[1]]
    }

    /// Key-value serialization (`key = value` lines).
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let mut kv = vec![("domain".to_string(), self.kind.name().to_string())];
        let mut push = |k: &str, v: String| kv.push((k.to_string(), v));
        match &self.kind {
            DomainKind::Disc { radius } => push("radius", radius.to_string()),
            DomainKind::Ellipse { semi_a, semi_b } => {
                push("semi_a", semi_a.to_string());
                push("semi_b", semi_b.to_string());
            }
            DomainKind::Rectangle { width, height } => {
                push("width", width.to_string());
                push("height", height.to_string());
            }
            DomainKind::Annulus { inner_r, outer_r } => {
                push("inner_r", inner_r.to_string());
                push("outer_r", outer_r.to_string());
            }
            DomainKind::FourierStar { base_radius, cos_coeffs, sin_coeffs } => {
                push("base_radius", base_radius.to_string());
                push("cos_coeffs", join(cos_coeffs));
                push("sin_coeffs", join(sin_coeffs));
            }
        }
        push("target_area", self.target_area.to_string());
        kv
    }

    pub fn to_config_text(&self) -> String {
        self.to_key_values().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Inverse of [`DomainSpec::to_key_values`]; `target_area` is optional.
    pub fn from_key_values(kv: &HashMap<String, String>) -> Result<Self> {
        let get = |k: &str| -> Result<f64> {
            let v = kv
                .get(k)
                .ok_or_else(|| Error::InvalidDomain(format!("missing key `{k}`")))?;
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidDomain(format!("key `{k}`: cannot parse `{v}`")))
        };
        let list = |k: &str| -> Result<Vec<f64>> {
            match kv.get(k) {
                None => Ok(Vec::new()),
                Some(v) => parse_list(v)
                    .map_err(|_| Error::InvalidDomain(format!("key `{k}`: cannot parse `{v}`"))),
            }
        };
        let name = kv
            .get("domain")
            .ok_or_else(|| Error::InvalidDomain("missing key `domain`".into()))?;
        let kind = match name.trim() {
            "disc" => DomainKind::disc(get("radius")?),
            "ellipse" => DomainKind::ellipse(get("semi_a")?, get("semi_b")?),
            "rectangle" => DomainKind::rectangle(get("width")?, get("height")?),
            "annulus" => DomainKind::annulus(get("inner_r")?, get("outer_r")?),
            "fourier_star" | "star" => {
                let base = if kv.contains_key("base_radius") { get("base_radius")? } else { 1.0 };
                DomainKind::fourier_star(base, list("cos_coeffs")?, list("sin_coeffs")?)
            }
            other => return Err(Error::InvalidDomain(format!("unknown domain kind `{other}`"))),
        };
        if kv.contains_key("target_area") {
            DomainSpec::with_area(kind, get("target_area")?)
        } else {
            DomainSpec::new(kind)
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}

/// Rescales `spec` so that its analytic area equals `spec.target_area`.
///
/// Eigenvalues of the rescaled domain are those of the unscaled one divided by `scale^2`.
pub fn normalize_area(spec: &DomainSpec) -> Result<DomainSpec> {
    spec.kind.validate()?;
    if !(spec.target_area.is_finite() && spec.target_area > 0.0) {
        return Err(Error::InvalidDomain(format!(
            "target_area must be positive, got {}",
            spec.target_area
        )));
    }
    let scale = (spec.target_area / spec.kind.area()).sqrt();
    Ok(DomainSpec { kind: spec.kind.clone(), target_area: spec.target_area, scale })
}

/// Boundary edge oriented with the domain on its left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub component: usize,
    /// Curve parameters of the two endpoints (unwrapped, so the midpoint is their mean).
    pub param: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub refine_level: usize,
    pub domain: DomainSpec,
}

/// Edge connectivity derived from a [`Mesh`].
#[derive(Debug, Clone)]
pub struct Topology {
    /// Edges as `[lo, hi]` vertex pairs, numbered in order of first appearance.
    pub edges: Vec<[usize; 2]>,
    /// `tri_edges[t][k]` is the edge opposite local vertex `k`.
    pub tri_edges: Vec<[usize; 3]>,
    /// Adjacent triangles; the second is `None` on the boundary.
    pub edge_tris: Vec<(usize, Option<usize>)>,
    pub boundary_vertex: Vec<bool>,
    /// Index into `Mesh::boundary_edges` for boundary edges.
    pub boundary_edge: Vec<Option<usize>>,
}

impl Topology {
    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge[e].is_some()
    }
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

impl Mesh {
    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for tri in &self.triangles {
            for k in 0..3 {
                let (p, q) = (self.vertices[tri[k]], self.vertices[tri[(k + 1) % 3]]);
                h = h.max((p[0] - q[0]).hypot(p[1] - q[1]));
            }
        }
        h
    }

    pub fn topology(&self) -> Topology {
        let nv = self.vertices.len();
        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * self.triangles.len());
        let mut edges = Vec::new();
        let mut edge_tris: Vec<(usize, Option<usize>)> = Vec::new();
        let mut tri_edges = Vec::with_capacity(self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut te = [0; 3];
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_tris.push((t, None));
                    edges.len() - 1
                });
                if edge_tris[e].0 != t {
                    edge_tris[e].1 = Some(t);
                }
                te[k] = e;
            }
            tri_edges.push(te);
        }
        let mut boundary_vertex = vec![false; nv];
        let mut boundary_edge = vec![None; edges.len()];
        for (i, be) in self.boundary_edges.iter().enumerate() {
            let [a, b] = be.vertices;
            boundary_vertex[a] = true;
            boundary_vertex[b] = true;
            if let Some(&e) = index.get(&(a.min(b), a.max(b))) {
                boundary_edge[e] = Some(i);
            }
        }
        Topology { edges, tri_edges, edge_tris, boundary_vertex, boundary_edge }
    }

    /// Number of closed boundary loops.
    pub fn boundary_loops(&self) -> Result<usize> {
        let mut next: HashMap<usize, usize> = HashMap::new();
        for be in &self.boundary_edges {
            if next.insert(be.vertices[0], be.vertices[1]).is_some() {
                return Err(Error::Mesh(format!("boundary vertex {} starts two edges", be.vertices[0])));
            }
        }
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut seen = std::collections::HashSet::new();
        let mut loops = 0;
        for s in starts {
            if seen.contains(&s) {
                continue;
            }
            let mut v = s;
            loop {
                seen.insert(v);
                v = *next
                    .get(&v)
                    .ok_or_else(|| Error::Mesh(format!("boundary is open at vertex {v}")))?;
                if v == s {
                    break;
                }
                if seen.contains(&v) {
                    return Err(Error::Mesh("boundary loops intersect".into()));
                }
            }
            loops += 1;
        }
        Ok(loops)
    }

    pub fn euler_characteristic(&self) -> i64 {
        let e = self.topology().edges.len() as i64;
        self.vertices.len() as i64 - e + self.triangles.len() as i64
    }

    /// Checks all structural invariants.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            let a = self.triangle_area(t);
            if !(a > 0.0) {
                return Err(Error::Mesh(format!("triangle {t} has non-positive area {a:e}")));
            }
        }
        let topo = self.topology();
        let open = topo.edge_tris.iter().filter(|(_, o)| o.is_none()).count();
        if open != self.boundary_edges.len() {
            return Err(Error::Mesh(format!(
                "{open} single-sided edges but {} boundary edges",
                self.boundary_edges.len()
            )));
        }
        let loops = self.boundary_loops()?;
        let expected = self.domain.boundary_components();
        if loops != expected {
            return Err(Error::Mesh(format!("{loops} boundary loops, expected {expected}")));
        }
        let chi = self.vertices.len() as i64 - topo.edges.len() as i64 + self.triangles.len() as i64;
        let expected_chi = if self.domain.is_simply_connected() { 1 } else { 0 };
        if chi != expected_chi {
            return Err(Error::Mesh(format!("Euler characteristic {chi}, expected {expected_chi}")));
        }
        let tol = 1e-12 * (1.0 + self.domain.equal_area_radius());
        for be in &self.boundary_edges {
            for k in 0..2 {
                let p = self.vertices[be.vertices[k]];
                let q = self.domain.boundary_point(be.component, be.param[k]);
                if (p[0] - q[0]).hypot(p[1] - q[1]) > tol {
                    return Err(Error::Mesh(format!("boundary vertex {} is off the curve", be.vertices[k])));
                }
            }
        }
        Ok(())
    }

    /// Plain-text export: `v x y`, `t i j k`, `b i j component` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.vertices {
            let _ = writeln!(s, "v {} {}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "t {} {} {}", t[0], t[1], t[2]);
        }
        for b in &self.boundary_edges {
            let _ = writeln!(s, "b {} {} {}", b.vertices[0], b.vertices[1], b.component);
        }
        s
    }
}

/// Quasi-uniform mesh of `spec` after `level` uniform refinements of the base mesh.
pub fn build_mesh(spec: &DomainSpec, level: usize) -> Result<Mesh> {
    if level > MAX_LEVEL {
        return Err(Error::InvalidArgument(format!("level {level} exceeds {MAX_LEVEL}")));
    }
    spec.kind.validate()?;
    let mut mesh = base_mesh(spec);
    mesh.validate()?;
    for _ in 0..level {
        mesh = refine(&mesh)?;
    }
    Ok(mesh)
}

fn base_mesh(spec: &DomainSpec) -> Mesh {
    match &spec.kind {
        DomainKind::Rectangle { width, height } => rectangle_base(spec, spec.scale * width, spec.scale * height),
        DomainKind::Annulus { inner_r, outer_r } => annulus_base(spec, *inner_r, *outer_r),
        _ => star_base(spec),
    }
}

/// Centre, a ring of 6 at half radius, and 12 boundary vertices.
fn star_base(spec: &DomainSpec) -> Mesh {
    let mut vertices = vec![[0.0, 0.0]];
    let inner: Vec<usize> = (0..6)
        .map(|i| {
            vertices.push(spec.star_map(0.5, 2.0 * PI * i as f64 / 6.0));
            vertices.len() - 1
        })
        .collect();
    let outer: Vec<usize> = (0..12)
        .map(|j| {
            vertices.push(spec.star_map(1.0, 2.0 * PI * j as f64 / 12.0));
            vertices.len() - 1
        })
        .collect();
    let mut triangles = Vec::new();
    for i in 0..6 {
        let (n0, n1) = (inner[i], inner[(i + 1) % 6]);
        let (o0, o1, o2) = (outer[2 * i], outer[2 * i + 1], outer[(2 * i + 2) % 12]);
        triangles.push([0, n0, n1]);
        triangles.push([n0, o0, o1]);
        triangles.push([n0, o1, n1]);
        triangles.push([n1, o1, o2]);
    }
    let dt = 2.0 * PI / 12.0;
    let boundary_edges = (0..12)
        .map(|j| BoundaryEdge {
            vertices: [outer[j], outer[(j + 1) % 12]],
            component: 0,
            param: [j as f64 * dt, (j + 1) as f64 * dt],
        })
        .collect();
    Mesh { vertices, triangles, boundary_edges, refine_level: 0, domain: spec.clone() }
}

/// Criss-cross grid of near-square cells, two cells across the short side.
fn rectangle_base(spec: &DomainSpec, w: f64, h: f64) -> Mesh {
    let cell = 0.5 * w.min(h);
    let nx = ((w / cell).round() as usize).max(1);
    let ny = ((h / cell).round() as usize).max(1);
    let (dx, dy) = (w / nx as f64, h / ny as f64);
    let (x0, y0) = (-0.5 * w, -0.5 * h);
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([x0 + i as f64 * dx, y0 + j as f64 * dy]);
        }
    }
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            vertices.push([x0 + (i as f64 + 0.5) * dx, y0 + (j as f64 + 0.5) * dy]);
            let c = vertices.len() - 1;
            let (p00, p10, p11, p01) = (grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1));
            triangles.extend([[c, p00, p10], [c, p10, p11], [c, p11, p01], [c, p01, p00]]);
        }
    }
    // Counter-clockwise walk from the lower-left corner; parameter is arclength.
    let mut boundary_edges = Vec::new();
    let mut t = 0.0;
    let mut walk = |a: usize, b: usize, len: f64| {
        boundary_edges.push(BoundaryEdge { vertices: [a, b], component: 0, param: [t, t + len] });
        t += len;
    };
    for i in 0..nx {
        walk(grid(i, 0), grid(i + 1, 0), dx);
    }
    for j in 0..ny {
        walk(grid(nx, j), grid(nx, j + 1), dy);
    }
    for i in (0..nx).rev() {
        walk(grid(i + 1, ny), grid(i, ny), dx);
    }
    for j in (0..ny).rev() {
        walk(grid(0, j + 1), grid(0, j), dy);
    }
    Mesh { vertices, triangles, boundary_edges, refine_level: 0, domain: spec.clone() }
}

/// One polar layer between the circles; component 0 is the outer circle.
fn annulus_base(spec: &DomainSpec, inner_r: f64, outer_r: f64) -> Mesh {
    let n = ((PI * (outer_r + inner_r) / (outer_r - inner_r)).round() as usize).max(12);
    let dt = 2.0 * PI / n as f64;
    let mut vertices = Vec::with_capacity(2 * n);
    for i in 0..n {
        vertices.push(spec.boundary_point(0, i as f64 * dt));
    }
    for i in 0..n {
        vertices.push(spec.boundary_point(1, i as f64 * dt));
    }
    let mut triangles = Vec::with_capacity(2 * n);
    for i in 0..n {
        let (o0, o1) = (i, (i + 1) % n);
        let (n0, n1) = (n + i, n + (i + 1) % n);
        triangles.push([n0, o0, o1]);
        triangles.push([n0, o1, n1]);
    }
    let mut boundary_edges = Vec::with_capacity(2 * n);
    for i in 0..n {
        boundary_edges.push(BoundaryEdge {
            vertices: [i, (i + 1) % n],
            component: 0,
            param: [i as f64 * dt, (i + 1) as f64 * dt],
        });
    }
    for i in 0..n {
        // Inner circle runs clockwise so the domain stays on the left.
        boundary_edges.push(BoundaryEdge {
            vertices: [n + (i + 1) % n, n + i],
            component: 1,
            param: [(i + 1) as f64 * dt, i as f64 * dt],
        });
    }
    Mesh { vertices, triangles, boundary_edges, refine_level: 0, domain: spec.clone() }
}

/// Splits every triangle into four; boundary midpoints are placed on the curve.
pub fn refine(mesh: &Mesh) -> Result<Mesh> {
    let topo = mesh.topology();
    let nv = mesh.vertices.len();
    let mut vertices = mesh.vertices.clone();
    vertices.reserve(topo.edges.len());
    for (e, &[a, b]) in topo.edges.iter().enumerate() {
        let p = match topo.boundary_edge[e] {
            Some(i) => {
                let be = &mesh.boundary_edges[i];
                mesh.domain.boundary_point(be.component, 0.5 * (be.param[0] + be.param[1]))
            }
            None => {
                let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
                [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
            }
        };
        vertices.push(p);
    }
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let [ea, eb, ec] = topo.tri_edges[t];
        let (ma, mb, mc) = (nv + ea, nv + eb, nv + ec);
        triangles.push([a, mc, mb]);
        triangles.push([mc, b, ma]);
        triangles.push([mb, ma, c]);
        triangles.push([ma, mb, mc]);
    }
    let mut edge_of: HashMap<(usize, usize), usize> = HashMap::with_capacity(topo.edges.len());
    for (e, &[a, b]) in topo.edges.iter().enumerate() {
        edge_of.insert((a, b), e);
    }
    let mut boundary_edges = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for be in &mesh.boundary_edges {
        let [a, b] = be.vertices;
        let e = edge_of[&(a.min(b), a.max(b))];
        let m = nv + e;
        let tm = 0.5 * (be.param[0] + be.param[1]);
        boundary_edges.push(BoundaryEdge { vertices: [a, m], component: be.component, param: [be.param[0], tm] });
        boundary_edges.push(BoundaryEdge { vertices: [m, b], component: be.component, param: [tm, be.param[1]] });
    }
    let refined = Mesh {
        vertices,
        triangles,
        boundary_edges,
        refine_level: mesh.refine_level + 1,
        domain: mesh.domain.clone(),
    };
    for t in 0..refined.triangles.len() {
        if !(refined.triangle_area(t) > 0.0) {
            return Err(Error::Mesh(format!("refinement inverted triangle {t}")));
        }
    }
    Ok(refined)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(text: &str) -> HashMap<String, String> {
        text.lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect()
    }

    #[test]
    fn normalization_examples() {
        let d = DomainSpec::with_area(DomainKind::disc(1.0), PI).unwrap();
        assert!((d.scale - 1.0).abs() < 1e-15);
        let d = DomainSpec::with_area(DomainKind::disc(1.0), 1.0).unwrap();
        assert!((d.scale - 0.5641895835477563).abs() < 1e-15);
        let r = DomainSpec::with_area(DomainKind::rectangle(2.0, 1.0), 1.0).unwrap();
        assert!((r.scale - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn normalized_area_is_exact() {
        let kinds = [
            DomainKind::ellipse(2.0, 1.0),
            DomainKind::annulus(0.5, 1.0),
            DomainKind::fourier_star(1.0, vec![0.0, 0.15, -0.05], vec![0.02, 0.0, 0.1]),
        ];
        for k in kinds {
            let s = DomainSpec::with_area(k, 2.5).unwrap();
            assert!((s.area() - 2.5).abs() <= 1e-12 * 2.5);
        }
    }

    #[test]
    fn star_area_matches_quadrature() {
        let (a, b) = (vec![0.1, 0.15, 0.0, 0.05], vec![0.0, -0.07]);
        let kind = DomainKind::fourier_star(1.3, a.clone(), b.clone());
        let n = 20000;
        let quad: f64 = (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                0.5 * (1.3 * star_profile(&a, &b, t)).powi(2)
            })
            .sum::<f64>()
            * 2.0
            * PI
            / n as f64;
        assert!((quad - kind.area()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_star_is_rejected_with_angle() {
        let err = DomainSpec::new(DomainKind::fourier_star(1.0, vec![0.0, 0.97], vec![])).unwrap_err();
        match err {
            Error::DegenerateStar { theta, radius, .. } => {
                // 1 + 0.97 cos(2t) is smallest at t = pi/2 (or 3pi/2)
                assert!((theta - PI / 2.0).abs() < 1e-6 || (theta - 1.5 * PI).abs() < 1e-6, "{theta}");
                assert!((radius - 0.03).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(DomainSpec::new(DomainKind::annulus(1.0, 0.5)).is_err());
        assert!(DomainSpec::new(DomainKind::disc(-1.0)).is_err());
    }

    #[test]
    fn rectangle_is_meshed_exactly() {
        let spec = DomainSpec::new(DomainKind::rectangle(1.0, 1.0)).unwrap();
        let m = build_mesh(&spec, 0).unwrap();
        assert!((m.area() - 1.0).abs() < 1e-15);
        let m3 = build_mesh(&spec, 3).unwrap();
        assert!((m3.area() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn disc_area_converges_quadratically() {
        let spec = DomainSpec::unit_disc();
        let mut mesh = build_mesh(&spec, 0).unwrap();
        let mut errs = vec![(PI - mesh.area()) / PI];
        for _ in 0..5 {
            mesh = refine(&mesh).unwrap();
            errs.push((PI - mesh.area()) / PI);
        }
        assert!(errs[4] < 1e-3, "{errs:?}");
        for w in errs.windows(2).skip(1) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio} in {errs:?}");
        }
    }

    #[test]
    fn annulus_topology() {
        let spec = DomainSpec::new(DomainKind::annulus(0.5, 1.0)).unwrap();
        for level in 0..3 {
            let m = build_mesh(&spec, level).unwrap();
            assert_eq!(m.boundary_loops().unwrap(), 2);
            assert_eq!(m.euler_characteristic(), 0);
        }
    }

    #[test]
    fn refine_counts() {
        let spec = DomainSpec::new(DomainKind::ellipse(2.0, 1.0)).unwrap();
        let m = build_mesh(&spec, 1).unwrap();
        let e = m.topology().edges.len();
        let r = refine(&m).unwrap();
        assert_eq!(r.triangles.len(), 4 * m.triangles.len());
        assert_eq!(r.vertices.len(), m.vertices.len() + e);
        r.validate().unwrap();
    }

    #[test]
    fn gallery_meshes_are_valid() {
        let kinds = [
            DomainKind::disc(1.0),
            DomainKind::ellipse(2.0, 1.0),
            DomainKind::rectangle(1.0, 1.0),
            DomainKind::rectangle(2.0, 1.0),
            DomainKind::annulus(0.5, 1.0),
            DomainKind::fourier_star(1.0, vec![0.0, 0.15], vec![]),
            DomainKind::fourier_star(1.0, vec![0.0, 0.0, 0.2], vec![]),
        ];
        for k in kinds {
            let spec = DomainSpec::new(k).unwrap();
            for level in 0..4 {
                build_mesh(&spec, level).unwrap().validate().unwrap();
            }
        }
    }

    #[test]
    fn build_is_deterministic() {
        let spec = DomainSpec::new(DomainKind::fourier_star(1.0, vec![0.1, 0.2], vec![0.05])).unwrap();
        let a = build_mesh(&spec, 3).unwrap();
        let b = build_mesh(&spec, 3).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn key_value_round_trip() {
        let spec = DomainSpec::with_area(
            DomainKind::fourier_star(1.0, vec![0.0, 0.15], vec![0.0, 0.0, 0.1]),
            2.0,
        )
        .unwrap();
        let back = DomainSpec::from_key_values(&kv(&spec.to_config_text())).unwrap();
        assert_eq!(spec, back);
        assert!(DomainSpec::from_key_values(&kv("domain = blob")).is_err());
        assert!(DomainSpec::from_key_values(&kv("domain = disc\nradius = x")).is_err());
    }

    #[test]
    fn mesh_text_format() {
        let spec = DomainSpec::new(DomainKind::rectangle(1.0, 1.0)).unwrap();
        let m = build_mesh(&spec, 0).unwrap();
        let text = m.to_text();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), m.vertices.len());
        assert_eq!(text.lines().filter(|l| l.starts_with("t ")).count(), m.triangles.len());
        assert_eq!(text.lines().filter(|l| l.starts_with("b ")).count(), m.boundary_edges.len());
    }
}
