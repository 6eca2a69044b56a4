//! End-to-end runs from domain to checks on coarse meshes.

use planar_spectra::error::Error;
use planar_spectra::fem::quadrature::TriangleRule;
use planar_spectra::fem::integrate;
use planar_spectra::geometry::{DomainKind, DomainSpec};
use planar_spectra::spectra::{
    buckling_eig, dirichlet_eigs, stokes_eig, stream_function, vorticity, Discretization, Mode, SpectrumOptions,
};
use planar_spectra::verify::{cellular_metrics, check_weinstein, CheckKind, Study, StudyOptions};

const J01_SQ: f64 = 5.783_185_962_946_784;
const J11_SQ: f64 = 14.681_970_642_123_893;

fn disc() -> DomainSpec {
    DomainSpec::unit_disc()
}

#[test]
fn three_problems_on_the_disc() {
    let d = Discretization::new(&disc(), 3).unwrap();
    let dir = dirichlet_eigs(&d, &SpectrumOptions::with_n_eigs(3)).unwrap();
    let b = buckling_eig(&d, &SpectrumOptions::with_n_eigs(1)).unwrap();
    let s = stokes_eig(&d, &SpectrumOptions::with_n_eigs(1)).unwrap();
    assert!((dir.values[0] / J01_SQ - 1.0).abs() < 2e-3, "{:?}", dir.values);
    for v in [dir.values[1], dir.values[2], b.values[0], s.values[0]] {
        assert!((v / J11_SQ - 1.0).abs() < 5e-3, "{v}");
    }
    // Conforming P2 bounds from above on the inscribed polygon.
    assert!(dir.values[0] > J01_SQ);
    assert_eq!(s.nullspace_dim, 1);
    assert!(s.residuals[0] <= 1e-9 && dir.residuals.iter().all(|r| *r <= 1e-9));
}

#[test]
fn weinstein_is_strict_on_the_square() {
    let sq = DomainSpec::new(DomainKind::rectangle(1.0, 1.0)).unwrap();
    let study = Study::new(&sq, 3, StudyOptions::default()).unwrap();
    let r = check_weinstein(&study).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.metric > 0.05);
}

/// `(u . grad) w` equals `grad p . grad psi` for a Stokes mode, since
/// `u . grad psi = 0`; the advection metric is cross-checked against it.
#[test]
fn advection_matches_pressure_stream_function_form() {
    let spec = DomainSpec::new(DomainKind::fourier_star(1.0, vec![0.0, 0.15], vec![])).unwrap();
    let d = Discretization::new(&spec, 3).unwrap();
    let s = stokes_eig(&d, &SpectrumOptions::with_n_eigs(1)).unwrap();
    let Mode::Stokes { u, p } = &s.modes[0] else { panic!("stokes mode expected") };
    let fe = &d.fe;
    let psi = stream_function(&d, u).unwrap();
    let w = vorticity(fe, u).unwrap();
    let rule = TriangleRule::degree4();
    let adv = integrate(fe, &rule, |t, b, _| {
        let v = u.eval(fe, t, b);
        let g = w.grad(fe, t, b);
        (v[0] * g[0] + v[1] * g[1]).powi(2)
    })
    .sqrt();
    let alt = integrate(fe, &rule, |t, b, _| {
        let gp = p.grad(fe, t, b);
        let gs = psi.grad(fe, t, b);
        (gp[0] * gs[0] + gp[1] * gs[1]).powi(2)
    })
    .sqrt();
    assert!((adv / alt - 1.0).abs() < 0.15, "advection {adv} vs pressure form {alt}");
    let (metric, _) = cellular_metrics(fe, u).unwrap();
    assert!(metric > 0.01 && metric < 0.2, "{metric}");
}

#[test]
fn annulus_rejects_stream_function_and_cellular_check() {
    let ann = DomainSpec::new(DomainKind::annulus(0.5, 1.0)).unwrap();
    let d = Discretization::new(&ann, 1).unwrap();
    let s = stokes_eig(&d, &SpectrumOptions::with_n_eigs(1)).unwrap();
    let Mode::Stokes { u, .. } = &s.modes[0] else { panic!("stokes mode expected") };
    assert!(matches!(stream_function(&d, u), Err(Error::Topology(_))));
    let study = Study::new(&ann, 1, StudyOptions::default()).unwrap();
    assert!(!CheckKind::CellularFlow.applies_to(&ann));
    assert!(matches!(CheckKind::CellularFlow.run(&study), Err(Error::Topology(_))));
}

#[test]
fn every_check_runs_on_an_ellipse() {
    let e = DomainSpec::new(DomainKind::ellipse(2.0, 1.0)).unwrap();
    let study = Study::new(&e, 2, StudyOptions::default()).unwrap();
    for c in CheckKind::ALL {
        let r = c.run(&study).unwrap();
        assert!(r.metric.is_finite(), "{}", c.name());
        assert!(!r.criteria.is_empty());
    }
}

#[test]
fn optimizer_moves_toward_the_disc() {
    use planar_spectra::shapeopt::{minimize, Objective, OptOptions, ShapeParams};
    let mut start = ShapeParams::zeros(3);
    start.cos_coeffs[1] = 0.1;
    let opts = OptOptions { level: 1, max_evaluations: 60, diameter_tol: 1e-3, ..Default::default() };
    let traj = minimize(&start, Objective::Stokes1, &opts).unwrap();
    let first = &traj.iterates[0];
    let best = traj.best();
    assert!(best.lambda <= first.lambda);
    assert!(best.params.max_abs() < 0.1, "{:?}", best.params);
    assert!(traj.evaluations <= 60);
    assert!(traj.iterates.windows(2).all(|w| w[1].lambda <= w[0].lambda));
}

#[test]
fn evaluation_budget_is_a_hard_cap() {
    use planar_spectra::shapeopt::{minimize, Objective, OptOptions, ShapeParams};
    let mut start = ShapeParams::zeros(2);
    start.cos_coeffs[1] = 0.1;
    // Two free coefficients: a three-point initial simplex.
    for budget in [3, 4, 5, 6, 9] {
        let opts = OptOptions { level: 0, max_evaluations: budget, diameter_tol: 1e-9, ..Default::default() };
        let traj = minimize(&start, Objective::Stokes1, &opts).unwrap();
        assert!(traj.evaluations <= budget, "{} > {budget}", traj.evaluations);
        assert!(!traj.converged);
    }
    let opts = OptOptions { level: 0, max_evaluations: 2, ..Default::default() };
    assert!(matches!(minimize(&start, Objective::Stokes1, &opts), Err(Error::InvalidArgument(_))));
}
