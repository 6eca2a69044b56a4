//! Named, tolerance-based checks of the spectral identities and inequalities
//! relating Dirichlet, buckling and Stokes eigenproblems.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::quadrature::TriangleRule;
use crate::fem::{
    assemble_mass, assemble_stiffness, boundary_normal_derivative, boundary_trace, integrate, p1_to_p2,
    BoundaryTrace, FeMesh, ScalarField, Space, VectorField,
};
use crate::geometry::{DomainKind, DomainSpec};
use crate::oracle::{disc_reference, DiscQuantity};
use crate::spectra::{
    buckling_eig, dirichlet_eigs, leray_project, stokes_eig, vorticity, Discretization, Mode,
    SpectrumOptions, SpectrumResult,
};

/// Where a reference value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    /// Closed-form value (Bessel zeros, separation of variables).
    Analytic,
    /// Value asserted by an exact identity or inequality.
    Theorem,
    /// Value computed by this tool.
    Computed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub name: String,
    pub value: f64,
    pub source: ReferenceSource,
}

impl ReferenceValue {
    fn new(name: &str, value: f64, source: ReferenceSource) -> Self {
        ReferenceValue { name: name.to_string(), value, source }
    }
}

/// How a metric is compared to its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Below,
    Above,
    AtLeast,
    AbsBelow,
    /// Reported only.
    Info,
}

impl Relation {
    pub fn holds(&self, metric: f64, threshold: f64) -> bool {
        match self {
            Relation::Below => metric < threshold,
            Relation::Above => metric > threshold,
            Relation::AtLeast => metric >= threshold,
            Relation::AbsBelow => metric.abs() < threshold,
            Relation::Info => true,
        }
    }
}

/// One thresholded quantity of a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub metric: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Criterion {
    fn new(name: &str, metric: f64, relation: Relation, threshold: f64) -> Self {
        let pass = metric.is_finite() && relation.holds(metric, threshold);
        Criterion { name: name.to_string(), metric, threshold, relation, pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub domain: DomainSpec,
    pub level: usize,
    /// Headline metric (the first criterion).
    pub metric: f64,
    pub threshold: f64,
    pub pass: bool,
    pub criteria: Vec<Criterion>,
    pub reference_values: Vec<ReferenceValue>,
    pub notes: Vec<String>,
}

impl CheckReport {
    fn new(
        name: &str,
        study: &Study,
        criteria: Vec<Criterion>,
        reference_values: Vec<ReferenceValue>,
        notes: Vec<String>,
    ) -> Self {
        let head = criteria.first().expect("a check has at least one criterion");
        CheckReport {
            check_name: name.to_string(),
            domain: study.disc.domain.clone(),
            level: study.disc.level,
            metric: head.metric,
            threshold: head.threshold,
            pass: criteria.iter().all(|c| c.pass),
            criteria,
            reference_values,
            notes,
        }
    }

    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }
}

/// Expected shape class of a domain for the overdetermined-problem checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Disc,
    NonDisc,
    /// No classification asserted.
    None,
}

impl Expectation {
    /// Disc for discs and stars with negligible coefficients, non-disc for
    /// other simply connected domains, none for multiply connected ones (where
    /// constant pressure does not single out the disc).
    pub fn for_domain(spec: &DomainSpec) -> Self {
        match &spec.kind {
            DomainKind::Annulus { .. } => Expectation::None,
            DomainKind::Disc { .. } => Expectation::Disc,
            DomainKind::FourierStar { cos_coeffs, sin_coeffs, .. }
                if cos_coeffs.iter().chain(sin_coeffs).all(|c| c.abs() < 1e-12) =>
            {
                Expectation::Disc
            }
            DomainKind::Ellipse { semi_a, semi_b } if (semi_a - semi_b).abs() < 1e-12 * semi_a => {
                Expectation::Disc
            }
            _ => Expectation::NonDisc,
        }
    }
}

impl std::str::FromStr for Expectation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disc" => Ok(Expectation::Disc),
            "nondisc" | "non-disc" | "non_disc" => Ok(Expectation::NonDisc),
            "none" => Ok(Expectation::None),
            _ => Err(Error::InvalidArgument(format!("unknown expectation '{s}'"))),
        }
    }
}

/// Pass/fail thresholds of every check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Slack for one-sided eigenvalue inequalities.
    pub inequality_slack: f64,
    /// Bound on `|ratio - 1|` where equality is expected.
    pub equality_tol: f64,
    /// Minimal strictness of the Weinstein inequality on non-discs.
    pub weinstein_strict: f64,
    pub schiffer_disc: f64,
    pub schiffer_nondisc: f64,
    pub pressure_disc: f64,
    pub neumann_disc: f64,
    pub pressure_nondisc: f64,
    pub orthogonality: f64,
    pub energy: f64,
    pub consequence_slack: f64,
    pub advection_disc: f64,
    pub leray_disc: f64,
    pub advection_nondisc: f64,
    pub hessian: f64,
    pub quotient_transfer: f64,
    /// Relative gap below which consecutive eigenvalues count as one cluster.
    pub cluster_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            inequality_slack: 0.02,
            equality_tol: 0.02,
            weinstein_strict: 0.05,
            schiffer_disc: 0.05,
            schiffer_nondisc: 0.15,
            pressure_disc: 0.1,
            neumann_disc: 0.1,
            pressure_nondisc: 0.15,
            orthogonality: 0.02,
            energy: 0.05,
            consequence_slack: 0.02,
            advection_disc: 0.1,
            leray_disc: 0.1,
            advection_nondisc: 0.2,
            hessian: 0.05,
            quotient_transfer: 0.05,
            cluster_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub spectrum: SpectrumOptions,
    /// Eigenpairs computed per problem (at least 2).
    pub n_eigs: usize,
    pub thresholds: Thresholds,
    pub expectation: Option<Expectation>,
    /// Viscosity for the cellular-flow decay rate.
    pub viscosity: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            spectrum: SpectrumOptions::default(),
            n_eigs: 2,
            thresholds: Thresholds::default(),
            expectation: None,
            viscosity: 1.0,
        }
    }
}

/// A discretized domain with its eigenproblems solved on demand and cached,
/// so that several checks share the same solves.
#[derive(Debug)]
pub struct Study {
    pub disc: Discretization,
    pub opts: StudyOptions,
    dirichlet: OnceLock<Result<SpectrumResult>>,
    buckling: OnceLock<Result<SpectrumResult>>,
    stokes: OnceLock<Result<SpectrumResult>>,
}

impl Study {
    pub fn new(spec: &DomainSpec, level: usize, opts: StudyOptions) -> Result<Self> {
        if opts.n_eigs < 2 {
            return Err(Error::InvalidArgument("a study needs at least two eigenpairs".into()));
        }
        Ok(Study {
            disc: Discretization::new(spec, level)?,
            opts,
            dirichlet: OnceLock::new(),
            buckling: OnceLock::new(),
            stokes: OnceLock::new(),
        })
    }

    pub fn fe(&self) -> &FeMesh {
        &self.disc.fe
    }

    fn spectrum_opts(&self) -> SpectrumOptions {
        SpectrumOptions { n_eigs: self.opts.n_eigs, ..self.opts.spectrum.clone() }
    }

    pub fn dirichlet(&self) -> Result<&SpectrumResult> {
        self.dirichlet.get_or_init(|| dirichlet_eigs(&self.disc, &self.spectrum_opts())).as_ref().map_err(Clone::clone)
    }

    pub fn buckling(&self) -> Result<&SpectrumResult> {
        self.buckling.get_or_init(|| buckling_eig(&self.disc, &self.spectrum_opts())).as_ref().map_err(Clone::clone)
    }

    pub fn stokes(&self) -> Result<&SpectrumResult> {
        self.stokes.get_or_init(|| stokes_eig(&self.disc, &self.spectrum_opts())).as_ref().map_err(Clone::clone)
    }

    pub fn expectation(&self) -> Expectation {
        self.opts.expectation.unwrap_or_else(|| Expectation::for_domain(&self.disc.domain))
    }

    /// Indices of the eigenvalues clustered with the first one.
    fn first_cluster(&self, values: &[f64]) -> Vec<usize> {
        let tol = self.opts.thresholds.cluster_tol;
        (0..values.len()).take_while(|&i| values[i] <= values[0] * (1.0 + tol)).collect()
    }

    fn disc_refs(&self, which: DiscQuantity, name: &str) -> Vec<ReferenceValue> {
        let r = self.disc.domain.equal_area_radius();
        disc_reference(r, which)
            .map(|v| vec![ReferenceValue::new(name, v, ReferenceSource::Analytic)])
            .unwrap_or_default()
    }
}

/// `rho(f) = ||f - mean|| / ||f||` on the boundary, overall and per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryVariation {
    pub rho: f64,
    pub per_component: Vec<f64>,
}

impl BoundaryVariation {
    pub fn of_trace(trace: &BoundaryTrace) -> Self {
        let ncomp = trace.samples.iter().map(|s| s.component + 1).max().unwrap_or(0);
        let per_component = (0..ncomp)
            .map(|c| {
                BoundaryTrace { samples: trace.samples.iter().filter(|s| s.component == c).copied().collect() }
                    .relative_oscillation()
            })
            .collect();
        BoundaryVariation { rho: trace.relative_oscillation(), per_component }
    }
}

fn buckling_fields(mode: &Mode) -> (&ScalarField, &ScalarField, &ScalarField, &ScalarField) {
    match mode {
        Mode::Buckling { psi, psi_p2, w, w_p1 } => (psi, psi_p2, w, w_p1),
        _ => unreachable!("buckling result holds buckling modes"),
    }
}

fn stokes_fields(mode: &Mode) -> (&VectorField, &ScalarField) {
    match mode {
        Mode::Stokes { u, p } => (u, p),
        _ => unreachable!("stokes result holds stokes modes"),
    }
}

/// `lambda_1^B >= lambda_2^D`, with equality exactly on the disc.
pub fn check_weinstein(study: &Study) -> Result<CheckReport> {
    let th = &study.opts.thresholds;
    let lb = study.buckling()?.values[0];
    let ld = study.dirichlet()?.values[1];
    let metric = lb / ld - 1.0;
    let mut criteria = vec![Criterion::new("ratio_minus_one", metric, Relation::AtLeast, -th.inequality_slack)];
    match study.expectation() {
        Expectation::Disc => criteria.push(Criterion::new("equality", metric, Relation::AbsBelow, th.equality_tol)),
        Expectation::NonDisc => criteria.push(Criterion::new("strictness", metric, Relation::Above, th.weinstein_strict)),
        Expectation::None => {}
    }
    let mut refs = vec![
        ReferenceValue::new("lambda1_buckling", lb, ReferenceSource::Computed),
        ReferenceValue::new("lambda2_dirichlet", ld, ReferenceSource::Computed),
        ReferenceValue::new("ratio_lower_bound", 1.0, ReferenceSource::Theorem),
    ];
    refs.extend(study.disc_refs(DiscQuantity::Dirichlet2, "lambda2_dirichlet_equal_area_disc"));
    Ok(CheckReport::new("weinstein", study, criteria, refs, vec![]))
}

/// `lambda_1^B >= lambda_1^S`, with equality on simply connected domains.
pub fn check_buckling_stokes(study: &Study) -> Result<CheckReport> {
    let th = &study.opts.thresholds;
    let lb = study.buckling()?.values[0];
    let ls = study.stokes()?.values[0];
    let metric = lb / ls - 1.0;
    let mut criteria = vec![Criterion::new("ratio_minus_one", metric, Relation::AtLeast, -th.inequality_slack)];
    let mut notes = vec![];
    if study.disc.domain.is_simply_connected() {
        criteria.push(Criterion::new("equality", metric, Relation::AbsBelow, th.equality_tol));
    } else {
        notes.push("multiply connected: only the one-sided inequality is asserted".to_string());
    }
    let refs = vec![
        ReferenceValue::new("lambda1_buckling", lb, ReferenceSource::Computed),
        ReferenceValue::new("lambda1_stokes", ls, ReferenceSource::Computed),
        ReferenceValue::new("ratio_lower_bound", 1.0, ReferenceSource::Theorem),
    ];
    Ok(CheckReport::new("buckling_stokes", study, criteria, refs, notes))
}

/// Harmonic test functions `Re z^k`, `Im z^k` for `0 <= k <= 4`.
pub fn harmonic_polynomials() -> Vec<(String, Box<dyn Fn([f64; 2]) -> f64 + Send + Sync>)> {
    let mut out: Vec<(String, Box<dyn Fn([f64; 2]) -> f64 + Send + Sync>)> = Vec::new();
    for k in 0..=4i32 {
        let pow = move |p: [f64; 2]| {
            let (r, t) = (p[0].hypot(p[1]), p[1].atan2(p[0]));
            (r.powi(k), t * k as f64)
        };
        out.push((format!("re_z{k}"), Box::new(move |p| {
            let (r, a) = pow(p);
            r * a.cos()
        })));
        if k > 0 {
            out.push((format!("im_z{k}"), Box::new(move |p| {
                let (r, a) = pow(p);
                r * a.sin()
            })));
        }
    }
    out
}

/// Largest normalized pairing `|(w, h)| / (||w|| ||h||)` over harmonic polynomials.
pub fn harmonic_pairing(fe: &FeMesh, w: &ScalarField) -> (f64, String) {
    let rule = TriangleRule::degree4();
    let wn = integrate(fe, &rule, |t, b, _| w.eval(fe, t, b).powi(2)).sqrt();
    let mut worst = (0.0, String::new());
    for (name, h) in harmonic_polynomials() {
        let hn = integrate(fe, &rule, |_, _, p| h(p).powi(2)).sqrt();
        let pair = integrate(fe, &rule, |t, b, p| w.eval(fe, t, b) * h(p));
        let v = if wn > 0.0 && hn > 0.0 { pair.abs() / (wn * hn) } else { 0.0 };
        if v > worst.0 {
            worst = (v, name);
        }
    }
    worst
}

/// Orthogonality of `w` to harmonic polynomials, for a field given directly.
pub fn check_harmonic_orthogonality(study: &Study, w: &ScalarField) -> CheckReport {
    let (metric, worst) = harmonic_pairing(study.fe(), w);
    let criteria = vec![Criterion::new("max_pairing", metric, Relation::Below, study.opts.thresholds.orthogonality)];
    let refs = vec![ReferenceValue::new("pairing", 0.0, ReferenceSource::Theorem)];
    CheckReport::new("harmonic_orthogonality", study, criteria, refs, vec![format!("worst test function: {worst}")])
}

/// Orthogonality check on the Laplacian of the first buckling mode.
pub fn check_harmonic_orthogonality_buckling(study: &Study) -> Result<CheckReport> {
    let b = study.buckling()?;
    let (_, _, w, _) = buckling_fields(&b.modes[0]);
    Ok(check_harmonic_orthogonality(study, w))
}

/// Boundary constancy of `Laplacian(psi)` for the first buckling cluster.
pub fn check_schiffer_boundary(study: &Study) -> Result<CheckReport> {
    let th = &study.opts.thresholds;
    let b = study.buckling()?;
    let fe = study.fe();
    let cluster = study.first_cluster(&b.values);
    let mut rho: f64 = 0.0;
    let mut neumann: f64 = 0.0;
    let mut per_mode = Vec::new();
    for (i, mode) in b.modes.iter().enumerate() {
        let (_, _, _, w_p1) = buckling_fields(mode);
        let tr = boundary_trace(fe, w_p1);
        let var = BoundaryVariation::of_trace(&tr);
        let dn = boundary_normal_derivative(fe, w_p1);
        let nd = dn.l2_norm() / (b.values[i].sqrt() * tr.l2_norm()).max(f64::MIN_POSITIVE);
        per_mode.push(format!("pair {}: lambda {:.10e}, rho {:.6e}, neumann {:.6e}", i + 1, b.values[i], var.rho, nd));
        if cluster.contains(&i) {
            rho = rho.max(var.rho);
            neumann = neumann.max(nd);
        }
    }
    let mut criteria = Vec::new();
    match study.expectation() {
        Expectation::Disc => criteria.push(Criterion::new("rho_boundary", rho, Relation::Below, th.schiffer_disc)),
        Expectation::NonDisc => criteria.push(Criterion::new("rho_boundary", rho, Relation::Above, th.schiffer_nondisc)),
        Expectation::None => criteria.push(Criterion::new("rho_boundary", rho, Relation::Info, 0.0)),
    }
    criteria.push(Criterion::new("normal_derivative_defect", neumann, Relation::Info, 0.0));
    let refs = vec![ReferenceValue::new("rho_boundary_disc", 0.0, ReferenceSource::Theorem)];
    Ok(CheckReport::new("schiffer", study, criteria, refs, per_mode))
}

/// Pressure metrics of one Stokes mode: `(rho_omega, neumann)`.
pub fn pressure_metrics(fe: &FeMesh, lambda: f64, u: &VectorField, p: &ScalarField) -> (f64, f64) {
    let un = u.l2_norm(fe);
    let rho = p.deviation_norm(fe) / (un * lambda.sqrt());
    let dn = boundary_normal_derivative(fe, p);
    let rms_dn = dn.l2_norm() / dn.length().sqrt();
    let scale = lambda * un / fe.mesh.area().sqrt();
    (rho, rms_dn / scale)
}

/// Constancy of the Stokes pressure and vanishing of its normal derivative.
pub fn check_pressure_conditions(study: &Study) -> Result<CheckReport> {
    let th = &study.opts.thresholds;
    let s = study.stokes()?;
    let fe = study.fe();
    let (mut rho, mut neu) = (0.0f64, 0.0f64);
    let mut notes = Vec::new();
    for i in study.first_cluster(&s.values) {
        let (u, p) = stokes_fields(&s.modes[i]);
        let (r, n) = pressure_metrics(fe, s.values[i], u, p);
        notes.push(format!("pair {}: rho_omega {r:.6e}, neumann {n:.6e}", i + 1));
        rho = rho.max(r);
        neu = neu.max(n);
    }
    let mut criteria = Vec::new();
    match study.expectation() {
        Expectation::Disc => {
            criteria.push(Criterion::new("rho_omega", rho, Relation::Below, th.pressure_disc));
            criteria.push(Criterion::new("neumann_defect", neu, Relation::Below, th.neumann_disc));
        }
        Expectation::NonDisc => {
            criteria.push(Criterion::new("rho_omega", rho, Relation::Above, th.pressure_nondisc));
            criteria.push(Criterion::new("neumann_defect", neu, Relation::Above, th.pressure_nondisc));
        }
        Expectation::None => {
            criteria.push(Criterion::new("rho_omega", rho, Relation::Info, 0.0));
            criteria.push(Criterion::new("neumann_defect", neu, Relation::Info, 0.0));
        }
    }
    let small = |v: f64, t: f64| v < t;
    let agree = small(rho, th.pressure_disc) == small(neu, th.neumann_disc);
    criteria.push(Criterion::new("classification_agreement", if agree { 1.0 } else { 0.0 }, Relation::Above, 0.5));
    criteria.push(Criterion::new("metric_ratio", neu / rho.max(f64::MIN_POSITIVE), Relation::Info, 0.0));
    let refs = vec![ReferenceValue::new("rho_omega_disc", 0.0, ReferenceSource::Theorem)];
    Ok(CheckReport::new("pressure", study, criteria, refs, notes))
}

/// Energy identity for `h = w + lambda psi` and the bound `lambda <= |grad w|^2 / |w|^2`.
pub fn check_energy_identity(study: &Study) -> Result<CheckReport> {
    let th = &study.opts.thresholds;
    let b = study.buckling()?;
    let fe = study.fe();
    let lambda = b.values[0];
    let (_, psi_p2, _, w_p1) = buckling_fields(&b.modes[0]);
    let k = assemble_stiffness(fe, Space::P2)?;
    let m = assemble_mass(fe, Space::P2);
    let w = p1_to_p2(fe, w_p1);
    let h: Vec<f64> = w.values.iter().zip(&psi_p2.values).map(|(a, p)| a + lambda * p).collect();
    let grad_h = k.bilinear(&h, &h);
    let grad_w = k.bilinear(&w.values, &w.values);
    let w2 = m.bilinear(&w.values, &w.values);
    let metric = (grad_h - (grad_w - lambda * w2)).abs() / grad_w;
    let bound = grad_w / w2;
    let criteria = vec![
        Criterion::new("identity_defect", metric, Relation::Below, th.energy),
        Criterion::new("consequence_ratio", lambda / bound - 1.0, Relation::Below, th.consequence_slack),
    ];
    let refs = vec![
        ReferenceValue::new("grad_h_squared", grad_h, ReferenceSource::Computed),
        ReferenceValue::new("grad_w_squared", grad_w, ReferenceSource::Computed),
        ReferenceValue::new("lambda_w_squared", lambda * w2, ReferenceSource::Computed),
    ];
    Ok(CheckReport::new("energy_identity", study, criteria, refs, vec![]))
}

/// Cellular-flow residuals of the first Stokes mode: `(advection, leray)`.
pub fn cellular_metrics(fe: &FeMesh, u: &VectorField) -> Result<(f64, f64)> {
    let w = vorticity(fe, u)?;
    let rule4 = TriangleRule::degree4();
    let adv = integrate(fe, &rule4, |t, b, _| {
        let v = u.eval(fe, t, b);
        let g = w.grad(fe, t, b);
        (v[0] * g[0] + v[1] * g[1]).powi(2)
    })
    .sqrt();
    let grad_w = integrate(fe, &rule4, |t, b, _| {
        let g = w.grad(fe, t, b);
        g[0] * g[0] + g[1] * g[1]
    })
    .sqrt();
    let advection = adv / (u.l2_norm(fe) * grad_w).max(f64::MIN_POSITIVE);
    let conv = |t: usize, b: &[f64; 3]| {
        let v = u.eval(fe, t, b);
        let gx = u.x.grad(fe, t, b);
        let gy = u.y.grad(fe, t, b);
        [v[0] * gx[0] + v[1] * gx[1], v[0] * gy[0] + v[1] * gy[1]]
    };
    let f_norm = integrate(fe, &TriangleRule::degree6(), |t, b, _| {
        let c = conv(t, b);
        c[0] * c[0] + c[1] * c[1]
    })
    .sqrt();
    let proj = leray_project(fe, |t, b, _| conv(t, b))?;
    let leray = proj.l2_norm(fe) / f_norm.max(f64::MIN_POSITIVE);
    Ok((advection, leray))
}

/// Stationarity of the vorticity under the flow and a gradient convective term.
pub fn check_cellular_flow(study: &Study) -> Result<CheckReport> {
    let th = &study.opts.thresholds;
    if !study.disc.domain.is_simply_connected() {
        return Err(Error::Topology("cellular-flow check needs a simply connected domain".into()));
    }
    let s = study.stokes()?;
    let fe = study.fe();
    let (mut adv, mut ler) = (0.0f64, 0.0f64);
    for i in study.first_cluster(&s.values) {
        let (u, _) = stokes_fields(&s.modes[i]);
        let (a, l) = cellular_metrics(fe, u)?;
        adv = adv.max(a);
        ler = ler.max(l);
    }
    let mut criteria = Vec::new();
    match study.expectation() {
        Expectation::Disc => {
            criteria.push(Criterion::new("advection", adv, Relation::Below, th.advection_disc));
            criteria.push(Criterion::new("leray_convective", ler, Relation::Below, th.leray_disc));
        }
        Expectation::NonDisc => {
            criteria.push(Criterion::new("advection", adv, Relation::Above, th.advection_nondisc));
            criteria.push(Criterion::new("leray_convective", ler, Relation::Info, 0.0));
        }
        Expectation::None => {
            criteria.push(Criterion::new("advection", adv, Relation::Info, 0.0));
            criteria.push(Criterion::new("leray_convective", ler, Relation::Info, 0.0));
        }
    }
    let decay = study.opts.viscosity * s.values[0];
    criteria.push(Criterion::new("decay_rate", decay, Relation::Info, 0.0));
    let refs = vec![ReferenceValue::new("advection_disc", 0.0, ReferenceSource::Theorem)];
    Ok(CheckReport::new("cellular_flow", study, criteria, refs, vec![]))
}

/// Hessian integrals of a Morley field: `(determinant_metric, quotient_transfer)`.
///
/// The first is `|sum_T int (psi_xy^2 - psi_xx psi_yy)| / sum_T int |D^2 psi|^2`,
/// the second compares `sum (Laplacian psi)^2` with `sum |D^2 psi|^2`, i.e.
/// the buckling quotient of `psi` with the Stokes quotient of its rotated gradient.
pub fn hessian_metrics(fe: &FeMesh, psi: &ScalarField) -> Result<(f64, f64)> {
    if psi.space != Space::Morley {
        return Err(Error::InvalidArgument("hessian metrics need a Morley field".into()));
    }
    let (mut det, mut full, mut lap) = (0.0, 0.0, 0.0);
    for t in 0..fe.n_triangles() {
        let dofs = fe.element_dofs(Space::Morley, t);
        let mut hs = [0.0; 3];
        for (i, &d) in dofs.iter().enumerate() {
            let h = fe.morley[t].hessian(i);
            for c in 0..3 {
                hs[c] += h[c] * psi.values[d];
            }
        }
        let a = fe.geom[t].area;
        det += a * (hs[1] * hs[1] - hs[0] * hs[2]);
        full += a * (hs[0] * hs[0] + 2.0 * hs[1] * hs[1] + hs[2] * hs[2]);
        lap += a * (hs[0] + hs[2]).powi(2);
    }
    let grad = integrate(fe, &TriangleRule::degree2(), |t, b, _| {
        let g = psi.grad(fe, t, b);
        g[0] * g[0] + g[1] * g[1]
    });
    let qb = lap / grad;
    let qs = full / grad;
    Ok((det.abs() / full, qb / qs - 1.0))
}

/// Vanishing Hessian-determinant integral for clamped fields.
pub fn check_hessian_integral(study: &Study) -> Result<CheckReport> {
    let th = &study.opts.thresholds;
    let b = study.buckling()?;
    let (psi, _, _, _) = buckling_fields(&b.modes[0]);
    let (metric, transfer) = hessian_metrics(study.fe(), psi)?;
    let criteria = vec![
        Criterion::new("determinant_integral", metric, Relation::Below, th.hessian),
        Criterion::new("quotient_transfer", transfer, Relation::AbsBelow, th.quotient_transfer),
    ];
    let refs = vec![ReferenceValue::new("determinant_integral", 0.0, ReferenceSource::Theorem)];
    Ok(CheckReport::new("hessian_integral", study, criteria, refs, vec![]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Weinstein,
    BucklingStokes,
    Schiffer,
    Pressure,
    HarmonicOrthogonality,
    EnergyIdentity,
    CellularFlow,
    HessianIntegral,
}

impl CheckKind {
    pub const ALL: [CheckKind; 8] = [
        CheckKind::Weinstein,
        CheckKind::BucklingStokes,
        CheckKind::Schiffer,
        CheckKind::Pressure,
        CheckKind::HarmonicOrthogonality,
        CheckKind::EnergyIdentity,
        CheckKind::CellularFlow,
        CheckKind::HessianIntegral,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Weinstein => "weinstein",
            CheckKind::BucklingStokes => "buckling-stokes",
            CheckKind::Schiffer => "schiffer",
            CheckKind::Pressure => "pressure",
            CheckKind::HarmonicOrthogonality => "harmonic-orthogonality",
            CheckKind::EnergyIdentity => "energy-identity",
            CheckKind::CellularFlow => "cellular-flow",
            CheckKind::HessianIntegral => "hessian-integral",
        }
    }

    /// Whether the check applies to the domain's topology.
    pub fn applies_to(&self, spec: &DomainSpec) -> bool {
        match self {
            CheckKind::Schiffer | CheckKind::CellularFlow => spec.is_simply_connected(),
            _ => true,
        }
    }

    pub fn run(&self, study: &Study) -> Result<CheckReport> {
        match self {
            CheckKind::Weinstein => check_weinstein(study),
            CheckKind::BucklingStokes => check_buckling_stokes(study),
            CheckKind::Schiffer => check_schiffer_boundary(study),
            CheckKind::Pressure => check_pressure_conditions(study),
            CheckKind::HarmonicOrthogonality => check_harmonic_orthogonality_buckling(study),
            CheckKind::EnergyIdentity => check_energy_identity(study),
            CheckKind::CellularFlow => check_cellular_flow(study),
            CheckKind::HessianIntegral => check_hessian_integral(study),
        }
    }
}

impl std::str::FromStr for CheckKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('_', "-");
        CheckKind::ALL
            .iter()
            .copied()
            .find(|c| c.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown check '{s}'")))
    }
}

/// The six standard test domains.
pub fn gallery() -> Vec<(&'static str, DomainSpec)> {
    let mk = |k: DomainKind| DomainSpec::new(k).expect("gallery domains are valid");
    vec![
        ("disc", mk(DomainKind::disc(1.0))),
        ("ellipse", mk(DomainKind::ellipse(2.0, 1.0))),
        ("square", mk(DomainKind::rectangle(1.0, 1.0))),
        ("star_a2", mk(DomainKind::fourier_star(1.0, vec![0.0, 0.15], vec![]))),
        ("star_a3", mk(DomainKind::fourier_star(1.0, vec![0.0, 0.0, 0.2], vec![]))),
        ("annulus", mk(DomainKind::annulus(0.5, 1.0))),
    ]
}
