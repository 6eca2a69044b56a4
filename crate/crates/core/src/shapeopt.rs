//! Area-constrained minimization of eigenvalues over Fourier star domains.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainKind, DomainSpec, MAX_STAR_MODES};
use crate::oracle::{disc_reference, DiscQuantity};
use crate::spectra::{buckling_eig, dirichlet_eigs, stokes_eig, Discretization, SpectrumOptions};
use crate::verify::{
    check_pressure_conditions, check_schiffer_boundary, CheckReport, Criterion, Expectation, Relation, Study,
    StudyOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Stokes1,
    Buckling1,
    Dirichlet2,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Stokes1 => "stokes1",
            Objective::Buckling1 => "buckling1",
            Objective::Dirichlet2 => "dirichlet2",
        }
    }

    fn disc_quantity(&self) -> DiscQuantity {
        match self {
            Objective::Stokes1 => DiscQuantity::Stokes1,
            Objective::Buckling1 => DiscQuantity::Buckling1,
            Objective::Dirichlet2 => DiscQuantity::Dirichlet2,
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stokes1" => Ok(Objective::Stokes1),
            "buckling1" => Ok(Objective::Buckling1),
            "dirichlet2" => Ok(Objective::Dirichlet2),
            _ => Err(Error::InvalidArgument(format!("unknown objective '{s}'"))),
        }
    }
}

/// Fourier coefficients `a_1..a_m`, `b_1..b_m` of a star boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub cos_coeffs: Vec<f64>,
    pub sin_coeffs: Vec<f64>,
}

impl ShapeParams {
    pub fn zeros(modes: usize) -> Self {
        ShapeParams { cos_coeffs: vec![0.0; modes], sin_coeffs: vec![0.0; modes] }
    }

    pub fn modes(&self) -> usize {
        self.cos_coeffs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.cos_coeffs.len() != self.sin_coeffs.len() {
            return Err(Error::InvalidArgument("cosine and sine coefficient counts differ".into()));
        }
        if self.modes() == 0 || self.modes() > MAX_STAR_MODES {
            return Err(Error::InvalidArgument(format!("mode count must be in 1..={MAX_STAR_MODES}")));
        }
        if self.cos_coeffs.iter().chain(&self.sin_coeffs).any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite shape coefficient".into()));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.cos_coeffs.iter().chain(&self.sin_coeffs).fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Normalized star domain of the requested area.
    pub fn domain(&self, target_area: f64) -> Result<DomainSpec> {
        self.validate()?;
        DomainSpec::with_area(
            DomainKind::fourier_star(1.0, self.cos_coeffs.clone(), self.sin_coeffs.clone()),
            target_area,
        )
    }

    /// Coefficients of the boundary rotated by `phi`.
    pub fn rotated(&self, phi: f64) -> Self {
        let mut out = self.clone();
        for k in 0..self.modes() {
            let (s, c) = (((k + 1) as f64) * phi).sin_cos();
            let (a, b) = (self.cos_coeffs[k], self.sin_coeffs[k]);
            out.cos_coeffs[k] = a * c - b * s;
            out.sin_coeffs[k] = a * s + b * c;
        }
        out
    }

    /// Optimization variables: modes `2..=m` (translations stay fixed).
    fn to_vars(&self) -> Vec<f64> {
        self.cos_coeffs[1..].iter().chain(&self.sin_coeffs[1..]).copied().collect()
    }

    fn from_vars(modes: usize, v: &[f64]) -> Self {
        let mut p = ShapeParams::zeros(modes);
        let n = modes - 1;
        p.cos_coeffs[1..].copy_from_slice(&v[..n]);
        p.sin_coeffs[1..].copy_from_slice(&v[n..]);
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub lambda: f64,
    /// `lambda` minus the disc value of the same area.
    pub gap: f64,
    pub relative_gap: f64,
}

/// Eigenvalue of the normalized star and its gap to the equal-area disc.
pub fn evaluate_objective(
    params: &ShapeParams,
    objective: Objective,
    level: usize,
    target_area: f64,
    spectrum: &SpectrumOptions,
) -> Result<Evaluation> {
    let spec = params.domain(target_area)?;
    let d = Discretization::new(&spec, level)?;
    let (res, idx) = match objective {
        Objective::Stokes1 => (stokes_eig(&d, spectrum)?, 0),
        Objective::Buckling1 => (buckling_eig(&d, spectrum)?, 0),
        Objective::Dirichlet2 => {
            let o = SpectrumOptions { n_eigs: spectrum.n_eigs.max(2), ..spectrum.clone() };
            (dirichlet_eigs(&d, &o)?, 1)
        }
    };
    let lambda = res.values[idx];
    let disc = disc_reference(spec.equal_area_radius(), objective.disc_quantity())?;
    Ok(Evaluation { lambda, gap: lambda - disc, relative_gap: (lambda - disc) / disc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptOptions {
    pub level: usize,
    pub target_area: f64,
    pub max_evaluations: usize,
    /// Stop once the simplex diameter falls below this.
    pub diameter_tol: f64,
    pub spectrum: SpectrumOptions,
}

impl Default for OptOptions {
    fn default() -> Self {
        OptOptions {
            level: 3,
            target_area: std::f64::consts::PI,
            max_evaluations: 400,
            diameter_tol: 1e-4,
            spectrum: SpectrumOptions::default(),
        }
    }
}

/// Best point after one simplex iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub iteration: usize,
    pub evaluations: usize,
    pub params: ShapeParams,
    pub lambda: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptTrajectory {
    pub objective: Objective,
    pub iterates: Vec<Iterate>,
    pub converged: bool,
    pub evaluations: usize,
    /// Evaluations rejected by geometry validation.
    pub rejected: usize,
}

impl OptTrajectory {
    pub fn best(&self) -> &Iterate {
        self.iterates.last().expect("trajectory has at least the start point")
    }

    /// Plain-text table: iteration, evaluations, coefficients, lambda, gap.
    pub fn to_table(&self) -> String {
        let m = self.best().params.modes();
        let mut s = String::from("iteration evaluations");
        for k in 1..=m {
            s += &format!(" a{k}");
        }
        for k in 1..=m {
            s += &format!(" b{k}");
        }
        s += " lambda gap relative_gap diameter\n";
        for it in &self.iterates {
            s += &format!("{} {}", it.iteration, it.evaluations);
            for c in it.params.cos_coeffs.iter().chain(&it.params.sin_coeffs) {
                s += &format!(" {c:.9e}");
            }
            s += &format!(" {:.12e} {:.6e} {:.6e} {:.3e}\n", it.lambda, it.gap, it.relative_gap, it.diameter);
        }
        s
    }
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Nelder-Mead minimization of the objective over modes `2..=m`.
///
/// Shapes rejected by geometry validation score `+inf`. The initial simplex
/// step is half the largest start coefficient, or `diameter_tol / 2` at the
/// origin so that a disc start stops at once.
pub fn minimize(params0: &ShapeParams, objective: Objective, opts: &OptOptions) -> Result<OptTrajectory> {
    params0.validate()?;
    if params0.modes() < 2 {
        return Err(Error::InvalidArgument("optimization needs at least two modes".into()));
    }
    if params0.cos_coeffs[0] != 0.0 || params0.sin_coeffs[0] != 0.0 {
        return Err(Error::InvalidArgument("first-mode (translation) coefficients must be zero".into()));
    }
    // Surface invalid starts as errors rather than penalties.
    params0.domain(opts.target_area)?;
    let m = params0.modes();
    let eval = |v: &[f64]| -> Result<Option<Evaluation>> {
        match evaluate_objective(&ShapeParams::from_vars(m, v), objective, opts.level, opts.target_area, &opts.spectrum) {
            Ok(e) => Ok(Some(e)),
            // Large coefficients can fold the coarse mesh of a valid star.
            Err(Error::DegenerateStar { .. } | Error::Mesh(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let score = |e: &Option<Evaluation>| e.map_or(f64::INFINITY, |e| e.gap);

    let x0 = params0.to_vars();
    let n = x0.len();
    let start_max = x0.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let step = if start_max > 0.0 { 0.5 * start_max } else { 0.5 * opts.diameter_tol };
    let points: Vec<Vec<f64>> = std::iter::once(x0.clone())
        .chain((0..n).map(|i| {
            let mut x = x0.clone();
            x[i] += step;
            x
        }))
        .collect();
    if opts.max_evaluations < points.len() {
        return Err(Error::InvalidArgument(format!(
            "evaluation budget {} is smaller than the initial simplex ({} points)",
            opts.max_evaluations,
            points.len()
        )));
    }
    let evals: Vec<Option<Evaluation>> = points.par_iter().map(|x| eval(x)).collect::<Result<_>>()?;
    let mut evaluations = points.len();
    let mut rejected = evals.iter().filter(|e| e.is_none()).count();
    let mut simplex: Vec<(Vec<f64>, f64)> = points.into_iter().zip(&evals).map(|(x, e)| (x, score(e))).collect();
    let mut info: Vec<Option<Evaluation>> = evals;

    let sort = |s: &mut Vec<(Vec<f64>, f64)>, info: &mut Vec<Option<Evaluation>>| {
        let mut idx: Vec<usize> = (0..s.len()).collect();
        idx.sort_by(|&a, &b| s[a].1.total_cmp(&s[b].1));
        *s = idx.iter().map(|&i| s[i].clone()).collect();
        *info = idx.iter().map(|&i| info[i]).collect();
    };
    sort(&mut simplex, &mut info);

    let record = |iteration: usize, evaluations: usize, s: &[(Vec<f64>, f64)], e: &Option<Evaluation>| {
        let e = e.unwrap_or(Evaluation { lambda: f64::INFINITY, gap: f64::INFINITY, relative_gap: f64::INFINITY });
        Iterate {
            iteration,
            evaluations,
            params: ShapeParams::from_vars(m, &s[0].0),
            lambda: e.lambda,
            gap: e.gap,
            relative_gap: e.relative_gap,
            diameter: diameter(s),
        }
    };
    let mut iterates = vec![record(0, evaluations, &simplex, &info[0])];
    let mut converged = diameter(&simplex) < opts.diameter_tol;
    let mut iteration = 0;
    while !converged && evaluations < opts.max_evaluations {
        iteration += 1;
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64).collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
        // The budget is a hard cap: a step runs only if all its evaluations fit.
        // Evaluations still available after the reflection.
        let left = opts.max_evaluations - evaluations - 1;
        let mut try_point = |x: Vec<f64>| -> Result<(Vec<f64>, f64, Option<Evaluation>)> {
            let e = eval(&x)?;
            evaluations += 1;
            if e.is_none() {
                rejected += 1;
            }
            let f = score(&e);
            Ok((x, f, e))
        };
        let (xr, fr, er) = try_point(along(1.0))?;
        if fr < simplex[0].1 && left >= 1 {
            let (xe, fe, ee) = try_point(along(2.0))?;
            if fe < fr {
                simplex[n] = (xe, fe);
                info[n] = ee;
            } else {
                simplex[n] = (xr, fr);
                info[n] = er;
            }
        } else if fr < simplex[n - 1].1 || left == 0 {
            // Accept the reflection when there is no room to refine it.
            if fr >= worst.1 {
                break;
            }
            simplex[n] = (xr, fr);
            info[n] = er;
        } else {
            let (xc, fc, ec) = if fr < worst.1 { try_point(along(0.5))? } else { try_point(along(-0.5))? };
            if fc < fr.min(worst.1) {
                simplex[n] = (xc, fc);
                info[n] = ec;
            } else if left < 1 + n {
                break;
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0.clone();
                let shrunk: Vec<Vec<f64>> = simplex[1..]
                    .iter()
                    .map(|(x, _)| x.iter().zip(&best).map(|(a, b)| b + 0.5 * (a - b)).collect())
                    .collect();
                let evs: Vec<Option<Evaluation>> = shrunk.par_iter().map(|x| eval(x)).collect::<Result<_>>()?;
                evaluations += shrunk.len();
                rejected += evs.iter().filter(|e| e.is_none()).count();
                for (i, (x, e)) in shrunk.into_iter().zip(evs).enumerate() {
                    simplex[i + 1] = (x, score(&e));
                    info[i + 1] = e;
                }
            }
        }
        sort(&mut simplex, &mut info);
        iterates.push(record(iteration, evaluations, &simplex, &info[0]));
        converged = diameter(&simplex) < opts.diameter_tol;
    }
    Ok(OptTrajectory { objective, iterates, converged, evaluations, rejected })
}

/// Necessary optimality conditions at a shape: boundary-constant Laplacian of
/// the buckling mode and constant Stokes pressure, both judged as for a disc.
pub fn optimality_certificate(params: &ShapeParams, level: usize, opts: &StudyOptions) -> Result<CheckReport> {
    let spec = params.domain(std::f64::consts::PI)?;
    let study = Study::new(&spec, level, StudyOptions { expectation: Some(Expectation::Disc), ..opts.clone() })?;
    let schiffer = check_schiffer_boundary(&study)?;
    let pressure = check_pressure_conditions(&study)?;
    let mut criteria: Vec<Criterion> = Vec::new();
    for (prefix, r) in [("schiffer", &schiffer), ("pressure", &pressure)] {
        for c in &r.criteria {
            if c.relation != Relation::Info {
                let mut c = c.clone();
                c.name = format!("{prefix}.{}", c.name);
                criteria.push(c);
            }
        }
    }
    let pass = criteria.iter().all(|c| c.pass);
    let head = &criteria[0];
    Ok(CheckReport {
        check_name: "optimality_certificate".into(),
        domain: spec,
        level,
        metric: head.metric,
        threshold: head.threshold,
        pass,
        criteria,
        reference_values: [schiffer.reference_values, pressure.reference_values].concat(),
        notes: [schiffer.notes, pressure.notes].concat(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a2(v: f64) -> ShapeParams {
        let mut p = ShapeParams::zeros(4);
        p.cos_coeffs[1] = v;
        p
    }

    #[test]
    fn disc_gap_is_small_and_perturbation_positive() {
        let so = SpectrumOptions::default();
        let e0 = evaluate_objective(&ShapeParams::zeros(3), Objective::Stokes1, 2, std::f64::consts::PI, &so).unwrap();
        assert!(e0.relative_gap.abs() < 0.01);
        let e1 = evaluate_objective(&a2(0.1), Objective::Stokes1, 2, std::f64::consts::PI, &so).unwrap();
        assert!(e1.gap > e0.gap);
    }

    #[test]
    fn area_scaling() {
        let so = SpectrumOptions::default();
        let p = a2(0.1);
        let e1 = evaluate_objective(&p, Objective::Buckling1, 2, 1.0, &so).unwrap();
        let e2 = evaluate_objective(&p, Objective::Buckling1, 2, 2.0, &so).unwrap();
        assert!((e1.lambda / e2.lambda - 2.0).abs() < 1e-9);
        assert!((e1.gap / e2.gap - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rotation_invariance() {
        let so = SpectrumOptions::default();
        let mut p = a2(0.12);
        p.sin_coeffs[2] = 0.05;
        let e = evaluate_objective(&p, Objective::Stokes1, 3, std::f64::consts::PI, &so).unwrap();
        let r = evaluate_objective(&p.rotated(0.7), Objective::Stokes1, 3, std::f64::consts::PI, &so).unwrap();
        assert!((e.lambda / r.lambda - 1.0).abs() < 1e-3, "{} {}", e.lambda, r.lambda);
    }

    #[test]
    fn zero_start_stops_immediately() {
        let t = minimize(&ShapeParams::zeros(4), Objective::Stokes1, &OptOptions { level: 1, ..Default::default() }).unwrap();
        assert!(t.converged);
        assert_eq!(t.iterates.len(), 1);
        assert_eq!(t.evaluations, 7);
    }

    #[test]
    fn invalid_start_is_an_error() {
        let err = minimize(&a2(1.5), Objective::Stokes1, &OptOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateStar { .. }));
        let mut p = a2(0.1);
        p.cos_coeffs[0] = 0.1;
        assert!(minimize(&p, Objective::Stokes1, &OptOptions::default()).is_err());
    }

    #[test]
    fn table_has_a_row_per_iterate() {
        let t = minimize(
            &a2(0.1),
            Objective::Dirichlet2,
            &OptOptions { level: 1, max_evaluations: 15, ..Default::default() },
        )
        .unwrap();
        assert!(!t.converged);
        assert_eq!(t.to_table().lines().count(), t.iterates.len() + 1);
        // Best value never increases.
        assert!(t.iterates.windows(2).all(|w| w[1].gap <= w[0].gap));
    }
}
