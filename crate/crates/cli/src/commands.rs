//! The four commands. Each builds a [`Report`] plus side files without
//! touching the filesystem; [`crate::write_outcome`] persists them.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use planar_spectra::fem::{boundary_trace, FeMesh};
use planar_spectra::geometry::{DomainKind, DomainSpec};
use planar_spectra::oracle::{disc_spectrum, rectangle_dirichlet, DiscSpectrum};
use planar_spectra::shapeopt::{minimize, optimality_certificate, OptOptions};
use planar_spectra::spectra::{
    buckling_eig, dirichlet_eigs, stokes_eig, vorticity, Discretization, Mode, Problem, SpectrumOptions,
    SpectrumResult,
};
use planar_spectra::verify::{gallery, CheckKind, CheckReport, Study, StudyOptions};

use crate::config::{start_text, Command, RunConfig};
use crate::plot::{field_svg, trace_svg};
use crate::report::{Footer, Report, SCHEMA_VERSION};
use crate::CliError;

/// Exit status when every computation succeeded but some check failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

/// A report and the side files (plots, tables, meshes) that go with it.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub artifacts: Vec<(PathBuf, Vec<u8>)>,
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let (body, footer_pass, exit_code, summary, artifacts) = match cfg.command {
        Command::Spectrum => spectrum(cfg)?,
        Command::Verify => verify(cfg)?,
        Command::Optimize => optimize(cfg)?,
        Command::Convergence => convergence(cfg)?,
    };
    let timing = cfg
        .timing
        .then(|| BTreeMap::from([("total_seconds".to_string(), start.elapsed().as_secs_f64())]));
    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool: "planar-spectra".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: cfg.command.name().into(),
        config: cfg.to_key_values(),
        body,
        footer: Footer { pass: footer_pass, exit_code, summary, timing },
    };
    Ok(Outcome { report, artifacts })
}

type Parts = (serde_json::Value, bool, i32, String, Vec<(PathBuf, Vec<u8>)>);

fn spectrum_options(cfg: &RunConfig, n_eigs: usize) -> SpectrumOptions {
    let mut o = SpectrumOptions::with_n_eigs(n_eigs);
    o.solve.seed = cfg.seed;
    o
}

pub fn solve_problem(problem: Problem, d: &Discretization, opts: &SpectrumOptions) -> planar_spectra::Result<SpectrumResult> {
    match problem {
        Problem::Dirichlet => dirichlet_eigs(d, opts),
        Problem::Buckling => buckling_eig(d, opts),
        Problem::Stokes => stokes_eig(d, opts),
    }
}

/// Exact eigenvalues where a closed form exists, with its name.
pub fn exact_values(problem: Problem, spec: &DomainSpec, k: usize) -> Option<(Vec<f64>, &'static str)> {
    match (&spec.kind, problem) {
        (DomainKind::Disc { .. }, Problem::Dirichlet) => {
            disc_spectrum(spec.equal_area_radius(), DiscSpectrum::Dirichlet, k).ok().map(|v| (v, "bessel_zeros"))
        }
        (DomainKind::Disc { .. }, _) => {
            disc_spectrum(spec.equal_area_radius(), DiscSpectrum::Clamped, k).ok().map(|v| (v, "bessel_zeros"))
        }
        (DomainKind::Rectangle { width, height }, Problem::Dirichlet) => {
            rectangle_dirichlet(width * spec.scale, height * spec.scale, k).ok().map(|v| (v, "separable_modes"))
        }
        _ => None,
    }
}

fn domain_echo(spec: &DomainSpec) -> BTreeMap<String, String> {
    spec.to_key_values().into_iter().collect()
}

#[derive(Serialize)]
struct EigenRecord {
    index: usize,
    value: f64,
    residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_error: Option<f64>,
}

fn eigen_records(res: &SpectrumResult, exact: Option<&[f64]>) -> Vec<EigenRecord> {
    res.values
        .iter()
        .zip(&res.residuals)
        .enumerate()
        .map(|(i, (&value, &residual))| {
            let reference = exact.map(|e| e[i]);
            EigenRecord {
                index: i + 1,
                value,
                residual,
                reference,
                relative_error: reference.map(|r| (value - r) / r),
            }
        })
        .collect()
}

fn spectrum(cfg: &RunConfig) -> Result<Parts, CliError> {
    let opts = spectrum_options(cfg, cfg.k);
    let exact = exact_values(cfg.problem, &cfg.domain, cfg.k);
    let mut levels: Vec<usize> = if cfg.history { (cfg.level_min.min(cfg.level)..cfg.level).collect() } else { vec![] };
    levels.push(cfg.level);
    let runs: Vec<Result<(Discretization, SpectrumResult), CliError>> = levels
        .par_iter()
        .map(|&l| {
            let d = Discretization::new(&cfg.domain, l)?;
            let r = solve_problem(cfg.problem, &d, &opts)?;
            Ok((d, r))
        })
        .collect();
    let mut runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let (d, res) = runs.pop().expect("the requested level is always solved");
    let exact_slice = exact.as_ref().map(|(v, _)| v.as_slice());
    let history: Vec<serde_json::Value> = runs
        .iter()
        .map(|(_, r)| json!({"level": r.level, "n_dofs": r.n_dofs, "eigenvalues": eigen_records(r, exact_slice)}))
        .collect();
    let mut artifacts = Vec::new();
    let mut plots = Vec::new();
    if let Some(dir) = &cfg.plots {
        for (name, svg) in mode_plots(&d.fe, cfg.problem, &res.modes[0])? {
            let path = dir.join(format!("{}_{name}.svg", cfg.problem.name()));
            plots.push(path.display().to_string());
            artifacts.push((path, svg.into_bytes()));
        }
    }
    if let Some(path) = &cfg.mesh {
        artifacts.push((path.clone(), d.fe.mesh.to_text().into_bytes()));
    }
    let body = json!({
        "problem": cfg.problem.name(),
        "domain": domain_echo(&cfg.domain),
        "area": cfg.domain.area(),
        "level": res.level,
        "n_triangles": d.fe.n_triangles(),
        "n_dofs": res.n_dofs,
        "iterations": res.iterations,
        "shift": res.shift,
        "nullspace_dim": res.nullspace_dim,
        "reference_source": exact.as_ref().map(|(_, s)| *s),
        "eigenvalues": eigen_records(&res, exact_slice),
        "history": history,
        "plots": plots,
    });
    let listing: Vec<String> = res.values.iter().map(|v| format!("{v:.6}")).collect();
    let summary = format!("{} eigenvalues: {}", cfg.problem.name(), listing.join(", "));
    Ok((body, true, 0, summary, artifacts))
}

fn mode_plots(fe: &FeMesh, problem: Problem, mode: &Mode) -> Result<Vec<(&'static str, String)>, CliError> {
    Ok(match (problem, mode) {
        (_, Mode::Dirichlet { u }) => vec![("u", field_svg(fe, u, "Dirichlet eigenfunction"))],
        (_, Mode::Buckling { psi_p2, w_p1, .. }) => vec![
            ("psi", field_svg(fe, psi_p2, "buckling mode psi")),
            ("w", field_svg(fe, w_p1, "Laplacian of psi")),
            ("w_trace", trace_svg(&boundary_trace(fe, w_p1), "boundary trace of the Laplacian")),
        ],
        (_, Mode::Stokes { u, p }) => {
            let w = vorticity(fe, u)?;
            vec![
                ("vorticity", field_svg(fe, &w, "vorticity")),
                ("pressure", field_svg(fe, p, "pressure")),
                ("pressure_trace", trace_svg(&boundary_trace(fe, p), "boundary trace of the pressure")),
            ]
        }
    })
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum CheckEntry {
    Done { domain_name: String, report: CheckReport },
    NotApplicable { domain_name: String, check: String },
    Error { domain_name: String, check: String, exit_code: i32, message: String },
}

fn verify(cfg: &RunConfig) -> Result<Parts, CliError> {
    let domains: Vec<(String, DomainSpec)> = if cfg.all_gallery {
        gallery().into_iter().map(|(n, s)| (n.to_string(), s)).collect()
    } else {
        vec![(cfg.domain.kind.name().to_string(), cfg.domain.clone())]
    };
    let checks: Vec<CheckKind> = match cfg.check {
        Some(c) => vec![c],
        None => CheckKind::ALL.to_vec(),
    };
    let study_opts = StudyOptions {
        spectrum: spectrum_options(cfg, 2),
        n_eigs: cfg.k.max(2),
        thresholds: cfg.thresholds.clone(),
        expectation: cfg.expect,
        viscosity: cfg.viscosity,
    };
    // Domains are independent; the checks of one domain share its solves.
    let per_domain: Vec<Vec<CheckEntry>> = domains
        .par_iter()
        .map(|(name, spec)| {
            let study = match Study::new(spec, cfg.level, study_opts.clone()) {
                Ok(s) => s,
                Err(e) => {
                    let e = CliError::Core(e);
                    return checks
                        .iter()
                        .map(|c| CheckEntry::Error {
                            domain_name: name.clone(),
                            check: c.name().into(),
                            exit_code: e.exit_code(),
                            message: e.to_string(),
                        })
                        .collect();
                }
            };
            checks
                .iter()
                .map(|c| {
                    if !c.applies_to(spec) {
                        return CheckEntry::NotApplicable { domain_name: name.clone(), check: c.name().into() };
                    }
                    match c.run(&study) {
                        Ok(report) => CheckEntry::Done { domain_name: name.clone(), report },
                        Err(e) => {
                            let e = CliError::Core(e);
                            CheckEntry::Error {
                                domain_name: name.clone(),
                                check: c.name().into(),
                                exit_code: e.exit_code(),
                                message: e.to_string(),
                            }
                        }
                    }
                })
                .collect()
        })
        .collect();
    let entries: Vec<CheckEntry> = per_domain.into_iter().flatten().collect();
    let (mut passed, mut failed, mut errors, mut exit) = (0, 0, 0, 0);
    for e in &entries {
        match e {
            CheckEntry::Done { report, .. } if report.pass => passed += 1,
            CheckEntry::Done { .. } => {
                failed += 1;
                exit = exit.max(EXIT_CHECK_FAILED);
            }
            CheckEntry::Error { exit_code, .. } => {
                errors += 1;
                exit = exit.max(*exit_code);
            }
            CheckEntry::NotApplicable { .. } => {}
        }
    }
    let body = json!({ "level": cfg.level, "checks": entries });
    let summary = format!("{passed} passed, {failed} failed, {errors} errors");
    Ok((body, exit == 0, exit, summary, vec![]))
}

fn optimize(cfg: &RunConfig) -> Result<Parts, CliError> {
    let area = std::f64::consts::PI;
    // An inadmissible start is a configuration problem, not a solver one.
    cfg.start.domain(area).map_err(|e| CliError::Config(format!("--start: {e}")))?;
    let opts = OptOptions {
        level: cfg.level,
        target_area: area,
        max_evaluations: cfg.max_evaluations,
        spectrum: spectrum_options(cfg, 1),
        ..OptOptions::default()
    };
    let traj = minimize(&cfg.start, cfg.objective, &opts)?;
    let best = traj.best().clone();
    let study_opts = StudyOptions {
        spectrum: spectrum_options(cfg, 2),
        thresholds: cfg.thresholds.clone(),
        viscosity: cfg.viscosity,
        ..StudyOptions::default()
    };
    let certificate = optimality_certificate(&best.params, cfg.certificate_level, &study_opts)?;
    let table = traj.to_table();
    let mut artifacts = Vec::new();
    if let Some(path) = &cfg.table {
        artifacts.push((path.clone(), table.clone().into_bytes()));
    }
    let exit = if !traj.converged {
        EXIT_NO_CONVERGENCE
    } else if !certificate.pass {
        EXIT_CHECK_FAILED
    } else {
        0
    };
    let summary = format!(
        "{} after {} evaluations: lambda {:.6}, relative gap {:.3e}, max |coeff| {:.3e}, converged {}, certificate {}",
        cfg.objective.name(),
        traj.evaluations,
        best.lambda,
        best.relative_gap,
        best.params.max_abs(),
        traj.converged,
        if certificate.pass { "pass" } else { "fail" }
    );
    let body = json!({
        "objective": cfg.objective.name(),
        "start": start_text(&cfg.start),
        "level": cfg.level,
        "converged": traj.converged,
        "evaluations": traj.evaluations,
        "rejected": traj.rejected,
        "trajectory": traj.iterates,
        "table": table,
        "final": {
            "params": best.params,
            "max_abs_coeff": best.params.max_abs(),
            "lambda": best.lambda,
            "gap": best.gap,
            "relative_gap": best.relative_gap,
        },
        "certificate": certificate,
    });
    Ok((body, exit == 0, exit, summary, artifacts))
}

#[derive(Serialize)]
struct LevelRow {
    level: usize,
    n_dofs: usize,
    values: Vec<f64>,
    errors: Vec<Option<f64>>,
    /// `log2(e_L / e_{L+1})` per eigenvalue; absent on the finest level.
    orders: Vec<Option<f64>>,
}

fn convergence(cfg: &RunConfig) -> Result<Parts, CliError> {
    let levels: Vec<usize> = (cfg.level_min..=cfg.level_max).collect();
    let opts = spectrum_options(cfg, cfg.k);
    let results: Vec<Result<SpectrumResult, CliError>> = levels
        .par_iter()
        .map(|&l| Ok(solve_problem(cfg.problem, &Discretization::new(&cfg.domain, l)?, &opts)?))
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let (reference, source) = match exact_values(cfg.problem, &cfg.domain, cfg.k) {
        Some((v, s)) => (v, s),
        None => (results.last().expect("at least two levels").values.clone(), "finest_level"),
    };
    let error_of = |r: &SpectrumResult, i: usize| -> Option<f64> {
        let e = ((r.values[i] - reference[i]) / reference[i]).abs();
        (source != "finest_level" || r.level != cfg.level_max).then_some(e)
    };
    let mut rows: Vec<LevelRow> = results
        .iter()
        .map(|r| LevelRow {
            level: r.level,
            n_dofs: r.n_dofs,
            values: r.values.clone(),
            errors: (0..cfg.k).map(|i| error_of(r, i)).collect(),
            orders: vec![None; cfg.k],
        })
        .collect();
    for j in 0..rows.len().saturating_sub(1) {
        for i in 0..cfg.k {
            if let (Some(a), Some(b)) = (rows[j].errors[i], rows[j + 1].errors[i]) {
                rows[j].orders[i] = (a > 0.0 && b > 0.0).then(|| (a / b).log2());
            }
        }
    }
    let monotone: Vec<bool> = (0..cfg.k)
        .map(|i| {
            let e: Vec<f64> = rows.iter().filter_map(|r| r.errors[i]).collect();
            e.windows(2).all(|w| w[1] < w[0])
        })
        .collect();
    let mut table = String::from("level n_dofs");
    for i in 1..=cfg.k {
        table += &format!(" lambda{i} error{i} order{i}");
    }
    table.push('\n');
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4e}"));
    for r in &rows {
        table += &format!("{} {}", r.level, r.n_dofs);
        for i in 0..cfg.k {
            table += &format!(" {:.12e} {} {}", r.values[i], opt(r.errors[i]), opt(r.orders[i]));
        }
        table.push('\n');
    }
    let mut artifacts = Vec::new();
    if let Some(path) = &cfg.table {
        artifacts.push((path.clone(), table.clone().into_bytes()));
    }
    let summary = format!(
        "{} on {} levels {}..{}: monotone error decrease {:?}",
        cfg.problem.name(),
        cfg.domain.kind.name(),
        cfg.level_min,
        cfg.level_max,
        monotone
    );
    let body = json!({
        "problem": cfg.problem.name(),
        "domain": domain_echo(&cfg.domain),
        "reference_source": source,
        "reference": reference,
        "rows": rows,
        "monotone": monotone,
        "table": table,
    });
    Ok((body, true, 0, summary, artifacts))
}
