//! Optional vector-graphics output: color-mapped scalar fields and boundary traces.

use std::fmt::Write as _;

use planar_spectra::fem::{BoundaryTrace, FeMesh, ScalarField};

const SIZE: f64 = 480.0;
const MARGIN: f64 = 16.0;

/// Blue-white-red map of `t` in `[-1, 1]`.
fn diverging(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(-1.0, 1.0);
    let mix = |a: f64, b: f64, s: f64| (a + (b - a) * s).round() as u8;
    if t < 0.0 {
        let s = -t;
        (mix(255.0, 33.0, s), mix(255.0, 102.0, s), mix(255.0, 172.0, s))
    } else {
        (mix(255.0, 178.0, t), mix(255.0, 24.0, t), mix(255.0, 43.0, t))
    }
}

/// One filled triangle per mesh cell, colored by the field at its centroid.
pub fn field_svg(fe: &FeMesh, field: &ScalarField, title: &str) -> String {
    let mesh = &fe.mesh;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &mesh.vertices {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let map = |p: [f64; 2]| (MARGIN + (p[0] - lo[0]) * scale, SIZE - MARGIN - (p[1] - lo[1]) * scale);
    let centroid = [1.0 / 3.0; 3];
    let vals: Vec<f64> = (0..fe.n_triangles()).map(|t| field.eval(fe, t, &centroid)).collect();
    let vmax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{h}" viewBox="0 0 {SIZE} {h}">"#,
        h = SIZE + 24.0
    )
    .unwrap();
    writeln!(s, r#"<title>{}</title>"#, escape(title)).unwrap();
    for (t, v) in vals.iter().enumerate() {
        let (r, g, b) = diverging(v / vmax);
        let pts = mesh.triangle_points(t).map(map);
        writeln!(
            s,
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="rgb({r},{g},{b})" stroke="rgb({r},{g},{b})" stroke-width="0.3"/>"#,
            pts[0].0, pts[0].1, pts[1].0, pts[1].1, pts[2].0, pts[2].1
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{MARGIN}" y="{:.1}" font-family="sans-serif" font-size="12">{} (max |value| {vmax:.4e})</text>"#,
        SIZE + 14.0,
        escape(title)
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

/// Line plot of trace values against arc length, one polyline per component.
pub fn trace_svg(trace: &BoundaryTrace, title: &str) -> String {
    let (w, h) = (SIZE * 1.5, SIZE * 0.6);
    let total: f64 = trace.length();
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for smp in &trace.samples {
        for v in smp.values {
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
    }
    if !(vmax > vmin) {
        vmin -= 1.0;
        vmax += 1.0;
    }
    let x = |arc: f64| MARGIN + arc / total.max(f64::MIN_POSITIVE) * (w - 2.0 * MARGIN);
    let y = |v: f64| h - MARGIN - (v - vmin) / (vmax - vmin) * (h - 2.0 * MARGIN);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#)
        .unwrap();
    writeln!(s, r#"<title>{}</title>"#, escape(title)).unwrap();
    let mut arc = 0.0;
    let mut current: Option<usize> = None;
    let mut pts = String::new();
    let flush = |pts: &mut String, s: &mut String| {
        if !pts.is_empty() {
            writeln!(s, r#"<polyline fill="none" stroke="black" stroke-width="1" points="{}"/>"#, pts.trim_end()).unwrap();
            pts.clear();
        }
    };
    for smp in &trace.samples {
        if current != Some(smp.component) {
            flush(&mut pts, &mut s);
            current = Some(smp.component);
        }
        for (j, v) in smp.values.iter().enumerate() {
            if j == 0 && !pts.is_empty() {
                continue;
            }
            write!(pts, "{:.2},{:.2} ", x(arc + 0.5 * j as f64 * smp.length), y(*v)).unwrap();
        }
        arc += smp.length;
    }
    flush(&mut pts, &mut s);
    writeln!(
        s,
        r#"<text x="{MARGIN}" y="12" font-family="sans-serif" font-size="12">{} (range {vmin:.4e} to {vmax:.4e})</text>"#,
        escape(title)
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use planar_spectra::fem::{boundary_trace, interpolate, Space};
    use planar_spectra::geometry::{build_mesh, DomainSpec};

    #[test]
    fn field_and_trace_are_well_formed() {
        let fe = FeMesh::new(build_mesh(&DomainSpec::unit_disc(), 1).unwrap()).unwrap();
        let f = interpolate(&fe, Space::P1, |p| p[0] - p[1]);
        let svg = field_svg(&fe, &f, "x - y <test>");
        assert_eq!(svg.matches("<polygon").count(), fe.n_triangles());
        assert!(svg.contains("&lt;test&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
        let tr = boundary_trace(&fe, &f);
        let svg = trace_svg(&tr, "trace");
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn colormap_ends() {
        assert_eq!(diverging(0.0), (255, 255, 255));
        assert_eq!(diverging(-2.0), (33, 102, 172));
        assert_eq!(diverging(1.0), (178, 24, 43));
    }
}
