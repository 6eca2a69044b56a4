//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Exact values are pinned here independently of the library oracle. All
//! thresholds are the acceptance values; nothing is read back from the
//! library's own defaults.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use planar_spectra::geometry::{DomainKind, DomainSpec};
use planar_spectra::spectra::{
    buckling_eig, dirichlet_eigs, stokes_eig, Discretization, SpectrumOptions, SpectrumResult,
};
use planar_spectra::verify::{CheckKind, CheckReport, Study, StudyOptions};
use planar_spectra_cli::{execute, Command, RunConfig};

/// First zeros of J_0 and J_1 (standard tables).
const J01: f64 = 2.404_825_557_695_773;
const J11: f64 = 3.831_705_970_207_512;

const LEVEL: usize = 4;

struct Verdict {
    pass: bool,
    detail: String,
}

fn domains() -> Vec<(&'static str, DomainSpec)> {
    let mk = |k: DomainKind| DomainSpec::new(k).unwrap();
    vec![
        ("disc", mk(DomainKind::disc(1.0))),
        ("ellipse", mk(DomainKind::ellipse(2.0, 1.0))),
        ("square", mk(DomainKind::rectangle(1.0, 1.0))),
        ("star_a2", mk(DomainKind::fourier_star(1.0, vec![0.0, 0.15], vec![]))),
        ("star_a3", mk(DomainKind::fourier_star(1.0, vec![0.0, 0.0, 0.2], vec![]))),
        ("annulus", mk(DomainKind::annulus(0.5, 1.0))),
    ]
}

const STARS: [&str; 2] = ["star_a2", "star_a3"];
const NON_DISCS: [&str; 4] = ["ellipse", "square", "star_a2", "star_a3"];

/// Everything computed on one gallery domain at the acceptance level.
struct Gallery {
    name: &'static str,
    spec: DomainSpec,
    lambda_d: [f64; 2],
    lambda_b: f64,
    lambda_s: f64,
    reports: BTreeMap<&'static str, CheckReport>,
}

impl Gallery {
    fn metric(&self, check: &str, criterion: &str) -> f64 {
        let r = &self.reports[check];
        r.criterion(criterion)
            .unwrap_or_else(|| panic!("{} on {} lacks criterion {criterion}", r.check_name, self.name))
            .metric
    }
}

fn study_options() -> StudyOptions {
    StudyOptions { n_eigs: 2, spectrum: SpectrumOptions::with_n_eigs(2), ..StudyOptions::default() }
}

fn build_gallery(level: usize) -> Vec<Gallery> {
    domains()
        .into_par_iter()
        .map(|(name, spec)| {
            let study = Study::new(&spec, level, study_options()).unwrap();
            let mut reports = BTreeMap::new();
            for c in CheckKind::ALL {
                if c.applies_to(&spec) {
                    let r = c.run(&study).unwrap_or_else(|e| panic!("{} on {name}: {e}", c.name()));
                    reports.insert(c.name(), r);
                }
            }
            let d = study.dirichlet().unwrap();
            Gallery {
                name,
                lambda_d: [d.values[0], d.values[1]],
                lambda_b: study.buckling().unwrap().values[0],
                lambda_s: study.stokes().unwrap().values[0],
                spec,
                reports,
            }
        })
        .collect()
}

fn get<'a>(g: &'a [Gallery], name: &str) -> &'a Gallery {
    g.iter().find(|x| x.name == name).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1_disc_spectra() -> Verdict {
    let disc = DomainSpec::new(DomainKind::disc(1.0)).unwrap();
    let exact = [J01 * J01, J11 * J11, J11 * J11, J11 * J11];
    let names = ["lambda1_D", "lambda2_D", "lambda1_B", "lambda1_S"];
    let solve = |level: usize| -> (Vec<f64>, Vec<Duration>) {
        let d = Discretization::new(&disc, level).unwrap();
        let t = Instant::now();
        let dir = dirichlet_eigs(&d, &SpectrumOptions::with_n_eigs(2)).unwrap();
        let td = t.elapsed();
        let t = Instant::now();
        let b = buckling_eig(&d, &SpectrumOptions::with_n_eigs(1)).unwrap();
        let tb = t.elapsed();
        let t = Instant::now();
        let s = stokes_eig(&d, &SpectrumOptions::with_n_eigs(1)).unwrap();
        let ts = t.elapsed();
        (vec![dir.values[0], dir.values[1], b.values[0], s.values[0]], vec![td, tb, ts])
    };
    let mut pass = true;
    let mut detail = String::new();
    // Timed alone so that the per-solve budget is not shared with other work.
    let (vals, times) = solve(LEVEL);
    for i in 0..4 {
        let e = rel(vals[i], exact[i]);
        pass &= e < 0.01;
        detail += &format!("{} err {:.2e}; ", names[i], e);
    }
    let slowest = times.iter().max().unwrap().as_secs_f64();
    pass &= slowest < 60.0;
    detail += &format!("slowest level-{LEVEL} solve {slowest:.1}s; ");
    let sweep: Vec<Vec<f64>> = (2..=5).into_par_iter().map(|l| solve(l).0).collect();
    for i in 0..4 {
        let errs: Vec<f64> = sweep.iter().map(|v| rel(v[i], exact[i])).collect();
        let mono = errs.windows(2).all(|w| w[1] < w[0]);
        pass &= mono;
        detail += &format!(
            "{} errors L2..5 [{}]{}; ",
            names[i],
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", "),
            if mono { "" } else { " NOT monotone" }
        );
    }
    Verdict { pass, detail }
}

fn c2_weinstein(g: &[Gallery]) -> Verdict {
    let mut pass = true;
    let mut detail = String::new();
    for x in g {
        let metric = x.lambda_b / x.lambda_d[1] - 1.0;
        let ok = x.lambda_b >= x.lambda_d[1] * (1.0 - 0.02)
            && match x.name {
                "disc" => metric.abs() < 0.02,
                n if NON_DISCS.contains(&n) => metric > 0.05,
                _ => true,
            };
        pass &= ok;
        detail += &format!("{} {:+.4}{}; ", x.name, metric, if ok { "" } else { " FAIL" });
    }
    Verdict { pass, detail }
}

fn c3_buckling_stokes(g: &[Gallery]) -> Verdict {
    let mut pass = true;
    let mut detail = String::new();
    for x in g {
        let ratio = x.lambda_b / x.lambda_s - 1.0;
        let ok = if x.spec.is_simply_connected() {
            ratio.abs() < 0.02
        } else {
            x.lambda_b >= x.lambda_s * (1.0 - 0.02)
        };
        pass &= ok;
        detail += &format!("{} {:+.2e}{}; ", x.name, ratio, if ok { "" } else { " FAIL" });
    }
    Verdict { pass, detail }
}

fn c4_schiffer(g: &[Gallery]) -> Verdict {
    let disc = get(g, "disc").metric("schiffer", "rho_boundary");
    let stars: Vec<f64> = STARS.iter().map(|s| get(g, s).metric("schiffer", "rho_boundary")).collect();
    let min_star = stars.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = disc < 0.05 && min_star > 0.15 && min_star >= 3.0 * disc;
    Verdict {
        pass,
        detail: format!(
            "disc {disc:.3e}; star_a2 {:.3}; star_a3 {:.3}; separation factor {:.1}",
            stars[0],
            stars[1],
            min_star / disc
        ),
    }
}

fn c5_pressure(g: &[Gallery]) -> Verdict {
    let mut pass = true;
    let mut detail = String::new();
    for x in g {
        let rho = x.metric("pressure", "rho_omega");
        let neu = x.metric("pressure", "neumann_defect");
        let mut ok = (rho < 0.1) == (neu < 0.1);
        if x.name == "disc" {
            ok &= rho < 0.1 && neu < 0.1;
        }
        if STARS.contains(&x.name) {
            ok &= rho > 0.15 && neu > 0.15;
        }
        pass &= ok;
        detail += &format!("{} ({rho:.2e}, {neu:.2e}){}; ", x.name, if ok { "" } else { " FAIL" });
    }
    Verdict { pass, detail }
}

fn c6_orthogonality(g: &[Gallery], coarse: &[Gallery], fine: &[Gallery]) -> Verdict {
    let mut pass = true;
    let mut detail = String::new();
    for x in g {
        let m = |s: &[Gallery]| get(s, x.name).metric("harmonic-orthogonality", "max_pairing");
        let (m3, m4, m5) = (m(coarse), x.metric("harmonic-orthogonality", "max_pairing"), m(fine));
        // On the disc the pairing vanishes by symmetry; values at rounding
        // level carry no ordering.
        let at_rounding = m3 < 1e-12 && m4 < 1e-12 && m5 < 1e-12;
        let ok = m4 < 0.02 && (at_rounding || (m3 > m4 && m4 > m5));
        pass &= ok;
        detail += &format!("{} L3 {m3:.2e} L4 {m4:.2e} L5 {m5:.2e}{}; ", x.name, if ok { "" } else { " FAIL" });
    }
    Verdict { pass, detail }
}

fn c7_energy(g: &[Gallery]) -> Verdict {
    let mut pass = true;
    let mut detail = String::new();
    for x in g {
        let id = x.metric("energy-identity", "identity_defect");
        let cons = x.metric("energy-identity", "consequence_ratio");
        let ok = id < 0.05 && cons < 0.02;
        pass &= ok;
        detail += &format!("{} identity {id:.2e} bound {cons:+.3}{}; ", x.name, if ok { "" } else { " FAIL" });
    }
    Verdict { pass, detail }
}

fn c8_cellular(g: &[Gallery]) -> Verdict {
    let d = get(g, "disc");
    let (adv, ler) = (d.metric("cellular-flow", "advection"), d.metric("cellular-flow", "leray_convective"));
    let mut pass = adv < 0.1 && ler < 0.1;
    let mut detail = format!("disc advection {adv:.2e} leray {ler:.2e}; ");
    for s in STARS {
        let a = get(g, s).metric("cellular-flow", "advection");
        let ok = a > 0.2;
        pass &= ok;
        detail += &format!("{s} advection {a:.3}{}; ", if ok { "" } else { " (needs > 0.2)" });
    }
    Verdict { pass, detail }
}

fn c9_hessian(g: &[Gallery]) -> Verdict {
    let mut pass = true;
    let mut detail = String::new();
    for x in g {
        let det = x.metric("hessian-integral", "determinant_integral");
        let q = x.metric("hessian-integral", "quotient_transfer");
        let ok = det < 0.05 && q.abs() < 0.05;
        pass &= ok;
        detail += &format!("{} det {det:.2e} transfer {q:+.2e}{}; ", x.name, if ok { "" } else { " FAIL" });
    }
    Verdict { pass, detail }
}

fn config(command: Command, pairs: &[(&str, &str)]) -> RunConfig {
    let pairs: Vec<(String, String)> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    RunConfig::resolve(command, &[], &pairs).unwrap()
}

fn c10_optimization() -> Verdict {
    let cfg = config(
        Command::Optimize,
        &[
            ("objective", "stokes1"),
            ("modes", "4"),
            ("start", "a2=0.1"),
            ("level", "3"),
            ("max_evaluations", "400"),
            ("certificate_level", "4"),
        ],
    );
    let t = Instant::now();
    let out = execute(&cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let body = &out.report.body;
    let fin = &body["final"];
    let max_abs = fin["max_abs_coeff"].as_f64().unwrap();
    let lambda = fin["lambda"].as_f64().unwrap();
    let gap = (lambda - J11 * J11) / (J11 * J11);
    let evals = body["evaluations"].as_u64().unwrap();
    let cert = body["certificate"]["pass"].as_bool().unwrap();
    let pass = max_abs < 0.01 && gap < 0.005 && evals <= 400 && secs < 900.0 && cert;
    Verdict {
        pass,
        detail: format!(
            "max|coeff| {max_abs:.2e}; gap {gap:.2e}; {evals} evaluations; {secs:.0}s; certificate {}",
            if cert { "pass" } else { "fail" }
        ),
    }
}

fn c11_determinism() -> Verdict {
    let configs = vec![
        config(Command::Spectrum, &[("domain", "star"), ("cos", "0,0.15"), ("problem", "stokes"), ("level", "3"), ("k", "3")]),
        config(Command::Verify, &[("domain", "ellipse"), ("level", "3")]),
        config(Command::Convergence, &[("domain", "disc"), ("problem", "buckling"), ("level_min", "1"), ("level_max", "3")]),
        config(Command::Optimize, &[("start", "a2=0.1"), ("level", "2"), ("max_evaluations", "20"), ("certificate_level", "2")]),
    ];
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut pass = true;
    let mut detail = String::new();
    for cfg in &configs {
        let first = execute(cfg).unwrap().report.to_text();
        let parsed = planar_spectra_cli::Report::from_text(&first).unwrap();
        let replayed = RunConfig::from_echo(&parsed.config).unwrap();
        let again = execute(&replayed).unwrap().report.to_text();
        let serial = single.install(|| execute(&replayed).unwrap().report.to_text());
        let ok = first == again && first == serial;
        pass &= ok;
        detail += &format!("{} {}; ", cfg.command.name(), if ok { "identical" } else { "DIFFERS" });
    }
    Verdict { pass, detail }
}

fn main() {
    let start = Instant::now();
    let mut lines: Vec<(usize, &str, Verdict)> = Vec::new();
    let mut report = |id: usize, name: &'static str, v: Verdict| {
        println!("criterion {id:2} {name:<22} {} | {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        lines.push((id, name, v));
    };
    report(1, "disc_spectra", c1_disc_spectra());
    let g = build_gallery(LEVEL);
    report(2, "weinstein", c2_weinstein(&g));
    report(3, "buckling_stokes", c3_buckling_stokes(&g));
    report(4, "schiffer", c4_schiffer(&g));
    report(5, "pressure", c5_pressure(&g));
    let coarse = build_orthogonality(LEVEL - 1);
    let fine = build_orthogonality(LEVEL + 1);
    report(6, "harmonic_orthogonality", c6_orthogonality(&g, &coarse, &fine));
    report(7, "energy_identity", c7_energy(&g));
    report(8, "cellular_flow", c8_cellular(&g));
    report(9, "hessian_integral", c9_hessian(&g));
    report(10, "shape_optimization", c10_optimization());
    report(11, "determinism", c11_determinism());
    let failed: Vec<String> = lines.iter().filter(|l| !l.2.pass).map(|l| format!("{} {}", l.0, l.1)).collect();
    println!(
        "acceptance: {} of {} criteria pass in {:.0}s",
        lines.len() - failed.len(),
        lines.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failing: {}", failed.join(", "));
        std::process::exit(1);
    }
}

/// Only the buckling solve and the orthogonality check, at another level.
fn build_orthogonality(level: usize) -> Vec<Gallery> {
    domains()
        .into_par_iter()
        .map(|(name, spec)| {
            let study = Study::new(&spec, level, study_options()).unwrap();
            let r = CheckKind::HarmonicOrthogonality.run(&study).unwrap();
            let b: &SpectrumResult = study.buckling().unwrap();
            Gallery {
                name,
                lambda_d: [f64::NAN; 2],
                lambda_b: b.values[0],
                lambda_s: f64::NAN,
                spec,
                reports: BTreeMap::from([("harmonic-orthogonality", r)]),
            }
        })
        .collect()
}
