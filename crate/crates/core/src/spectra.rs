//! Problem-level drivers: Dirichlet, clamped-plate buckling and Stokes
//! eigenproblems on a domain, plus field post-processing.

use serde::{Deserialize, Serialize};

use crate::eigensolve::{constrained_smallest, smallest_eigenpairs, SaddleSolver, SolveOptions};
use crate::error::{Error, Result};
use crate::fem::quadrature::TriangleRule;
use crate::fem::{
    apply_dirichlet, assemble_divergence, assemble_load, assemble_mass, assemble_morley,
    assemble_stiffness, curl_p1, morley_laplacian, morley_to_p2, recover_p1, DofMap, FeMesh,
    Recovery, Reduction, ScalarField, Space, VectorField,
};
use crate::geometry::{build_mesh, DomainSpec, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Dirichlet,
    Buckling,
    Stokes,
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Problem::Dirichlet => "dirichlet",
            Problem::Buckling => "buckling",
            Problem::Stokes => "stokes",
        }
    }
}

impl std::str::FromStr for Problem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(Problem::Dirichlet),
            "buckling" => Ok(Problem::Buckling),
            "stokes" => Ok(Problem::Stokes),
            _ => Err(Error::InvalidArgument(format!("unknown problem '{s}'"))),
        }
    }
}

/// A meshed domain ready for assembly.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub domain: DomainSpec,
    pub level: usize,
    pub fe: FeMesh,
}

impl Discretization {
    pub fn new(domain: &DomainSpec, level: usize) -> Result<Self> {
        let mesh = build_mesh(domain, level)?;
        Ok(Discretization { domain: domain.clone(), level, fe: FeMesh::new(mesh)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub n_eigs: usize,
    pub solve: SolveOptions,
    /// How `w = Laplacian(psi)` is made continuous for buckling modes.
    pub recovery: Recovery,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { n_eigs: 1, solve: SolveOptions::default(), recovery: Recovery::Patch }
    }
}

impl SpectrumOptions {
    pub fn with_n_eigs(n_eigs: usize) -> Self {
        SpectrumOptions { n_eigs, ..Default::default() }
    }

    fn solve_opts(&self) -> SolveOptions {
        SolveOptions { n_eigs: self.n_eigs, ..self.solve.clone() }
    }
}

/// Fields attached to one eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Dirichlet {
        /// P2 eigenfunction, unit L2 norm.
        u: ScalarField,
    },
    Buckling {
        /// Morley eigenfunction, unit gradient norm.
        psi: ScalarField,
        /// Continuous P2 version of `psi`.
        psi_p2: ScalarField,
        /// Elementwise Laplacian of `psi` (P0).
        w: ScalarField,
        /// `w` recovered as a continuous P1 function.
        w_p1: ScalarField,
    },
    Stokes {
        /// Velocity, unit L2 norm.
        u: VectorField,
        /// Pressure, zero mean.
        p: ScalarField,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub problem: Problem,
    pub domain: DomainSpec,
    pub level: usize,
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Unknowns after elimination of boundary conditions.
    pub n_dofs: usize,
    pub iterations: usize,
    pub shift: f64,
    pub nullspace_dim: usize,
    pub modes: Vec<Mode>,
}

/// Smallest Dirichlet-Laplacian eigenpairs with P2 elements.
pub fn dirichlet_eigs(d: &Discretization, opts: &SpectrumOptions) -> Result<SpectrumResult> {
    let fe = &d.fe;
    let k = assemble_stiffness(fe, Space::P2)?;
    let m = assemble_mass(fe, Space::P2);
    let (red, kr, mr) = apply_dirichlet(&k, &m, &DofMap::new(fe, Space::P2))?;
    let sol = smallest_eigenpairs(&kr, &mr, &opts.solve_opts())?;
    let modes = sol
        .pairs
        .iter()
        .map(|p| Mode::Dirichlet { u: ScalarField::new(Space::P2, red.expand(&p.vector)) })
        .collect();
    Ok(SpectrumResult {
        problem: Problem::Dirichlet,
        domain: d.domain.clone(),
        level: d.level,
        values: sol.values(),
        residuals: sol.pairs.iter().map(|p| p.residual).collect(),
        n_dofs: red.len(),
        iterations: sol.iterations,
        shift: sol.shift,
        nullspace_dim: 0,
        modes,
    })
}

/// Smallest clamped-plate buckling eigenpairs with the Morley element.
pub fn buckling_eig(d: &Discretization, opts: &SpectrumOptions) -> Result<SpectrumResult> {
    let fe = &d.fe;
    let (h, g) = assemble_morley(fe);
    let (red, hr, gr) = apply_dirichlet(&h, &g, &DofMap::new(fe, Space::Morley))?;
    let sol = smallest_eigenpairs(&hr, &gr, &opts.solve_opts())?;
    let modes = sol
        .pairs
        .iter()
        .map(|p| {
            let psi = ScalarField::new(Space::Morley, red.expand(&p.vector));
            let w = morley_laplacian(fe, &psi);
            let w_p1 = recover_p1(fe, &w, opts.recovery)?;
            Ok(Mode::Buckling { psi_p2: morley_to_p2(fe, &psi), psi, w, w_p1 })
        })
        .collect::<Result<_>>()?;
    Ok(SpectrumResult {
        problem: Problem::Buckling,
        domain: d.domain.clone(),
        level: d.level,
        values: sol.values(),
        residuals: sol.pairs.iter().map(|p| p.residual).collect(),
        n_dofs: red.len(),
        iterations: sol.iterations,
        shift: sol.shift,
        nullspace_dim: 0,
        modes,
    })
}

/// Assembled Taylor-Hood operators with the no-slip condition eliminated.
struct StokesSystem {
    vel: Reduction,
    a: CsrPair,
    b: crate::sparse::CsrMatrix,
}

struct CsrPair {
    stiff: crate::sparse::CsrMatrix,
    mass: crate::sparse::CsrMatrix,
}

fn stokes_system(fe: &FeMesh) -> Result<StokesSystem> {
    let a = assemble_stiffness(fe, Space::VecP2)?;
    let m = assemble_mass(fe, Space::VecP2);
    let (vel, ar, mr) = apply_dirichlet(&a, &m, &DofMap::new(fe, Space::VecP2))?;
    let b = assemble_divergence(fe);
    let pres = Reduction::identity(fe.n_vertices());
    let br = pres.rows_cols(&b, &vel);
    Ok(StokesSystem { vel, a: CsrPair { stiff: ar, mass: mr }, b: br })
}

/// Smallest Stokes eigenpairs with Taylor-Hood elements; each mode carries
/// its zero-mean pressure.
pub fn stokes_eig(d: &Discretization, opts: &SpectrumOptions) -> Result<SpectrumResult> {
    let fe = &d.fe;
    let sys = stokes_system(fe)?;
    let mut so = opts.solve_opts();
    if so.expected_nullspace.is_none() {
        so.expected_nullspace = Some(1);
    }
    let sol = constrained_smallest(&sys.a.stiff, &sys.a.mass, &sys.b, &so)?;
    let saddle = SaddleSolver::new(&sys.a.stiff, &sys.b)?;
    let modes = sol
        .pairs
        .iter()
        .map(|pair| {
            let p = pressure_from(fe, &sys, &saddle, &pair.vector, pair.value);
            Mode::Stokes { u: VectorField::from_vec(&sys.vel.expand(&pair.vector)), p }
        })
        .collect();
    Ok(SpectrumResult {
        problem: Problem::Stokes,
        domain: d.domain.clone(),
        level: d.level,
        values: sol.values(),
        residuals: sol.pairs.iter().map(|p| p.residual).collect(),
        n_dofs: sys.vel.len() + sys.b.nrows(),
        iterations: sol.iterations,
        shift: sol.shift,
        nullspace_dim: sol.nullspace_dim,
        modes,
    })
}

fn pressure_from(fe: &FeMesh, sys: &StokesSystem, saddle: &SaddleSolver, x: &[f64], lambda: f64) -> ScalarField {
    let ax = sys.a.stiff.mul_vec(x);
    let mx = sys.a.mass.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(&mx).map(|(a, m)| a - lambda * m).collect();
    let (_, p) = saddle.solve(&r, &vec![0.0; sys.b.nrows()]);
    let mut p = ScalarField::new(Space::P1, p);
    let mean = p.mean(fe);
    p.add_constant(-mean);
    p
}

/// Pressure multiplier of a Stokes eigenpair: `A u - B^T p = lambda M u`
/// tested against all no-slip velocities, normalized to zero mean.
pub fn recover_pressure(fe: &FeMesh, u: &VectorField, lambda: f64) -> Result<ScalarField> {
    let sys = stokes_system(fe)?;
    let saddle = SaddleSolver::new(&sys.a.stiff, &sys.b)?;
    Ok(pressure_from(fe, &sys, &saddle, &sys.vel.restrict(&u.to_vec()), lambda))
}

/// `curl u` projected onto P1.
pub fn vorticity(fe: &FeMesh, u: &VectorField) -> Result<ScalarField> {
    curl_p1(fe, u)
}

/// P2 solution of `Laplacian(psi) = f` with the boundary values of `boundary`
/// (a P2 field; only its boundary dofs are read, `None` means zero).
pub fn solve_dirichlet_problem(
    fe: &FeMesh,
    f: impl Fn(usize, &[f64; 3], Point) -> f64,
    boundary: Option<&ScalarField>,
) -> Result<ScalarField> {
    let k = assemble_stiffness(fe, Space::P2)?;
    let dm = DofMap::new(fe, Space::P2);
    let red = Reduction::new(&dm.constrained)?;
    let load = assemble_load(fe, Space::P2, &TriangleRule::degree6(), f);
    let mut g = vec![0.0; dm.total_dofs];
    if let Some(b) = boundary {
        if b.space != Space::P2 {
            return Err(Error::InvalidArgument("boundary data must be a P2 field".into()));
        }
        for (i, c) in dm.constrained.iter().enumerate() {
            if *c {
                g[i] = b.values[i];
            }
        }
    }
    // -K psi = F with psi = g on the boundary.
    let kg = k.mul_vec(&g);
    let rhs: Vec<f64> = red.reduced_to_full.iter().map(|&i| -load[i] - kg[i]).collect();
    let kr = red.matrix(&k);
    let ldl = crate::sparse::LdlFactor::with_nested_dissection(&kr)?;
    let x = ldl.solve(&rhs);
    let mut full = red.expand(&x);
    for (i, c) in dm.constrained.iter().enumerate() {
        if *c {
            full[i] = g[i];
        }
    }
    Ok(ScalarField::new(Space::P2, full))
}

/// `Laplacian(psi) = rhs` with `psi = 0` on the boundary.
pub fn solve_poisson(fe: &FeMesh, rhs: &ScalarField) -> Result<ScalarField> {
    solve_dirichlet_problem(fe, |t, b, _| rhs.eval(fe, t, b), None)
}

/// Harmonic function with the boundary values of the P2 field `boundary`.
pub fn harmonic_extension(fe: &FeMesh, boundary: &ScalarField) -> Result<ScalarField> {
    solve_dirichlet_problem(fe, |_, _, _| 0.0, Some(boundary))
}

/// Stream function `psi` with `u = (-psi_y, psi_x)` and `psi = 0` on the
/// boundary; requires a simply connected domain.
pub fn stream_function(d: &Discretization, u: &VectorField) -> Result<ScalarField> {
    if !d.domain.is_simply_connected() {
        return Err(Error::Topology("stream function needs a simply connected domain".into()));
    }
    solve_dirichlet_problem(&d.fe, |t, b, _| u.curl(&d.fe, t, b), None)
}

/// Discrete Leray projection: the L2-closest velocity in the no-slip,
/// discretely divergence-free Taylor-Hood space to the field `f`.
pub fn leray_project(fe: &FeMesh, f: impl Fn(usize, &[f64; 3], Point) -> [f64; 2]) -> Result<VectorField> {
    let m = assemble_mass(fe, Space::VecP2);
    let (vel, mr, _) = apply_dirichlet(&m, &m, &DofMap::new(fe, Space::VecP2))?;
    let b = assemble_divergence(fe);
    let br = Reduction::identity(fe.n_vertices()).rows_cols(&b, &vel);
    let rule = TriangleRule::degree6();
    let fx = assemble_load(fe, Space::P2, &rule, |t, bc, p| f(t, bc, p)[0]);
    let fy = assemble_load(fe, Space::P2, &rule, |t, bc, p| f(t, bc, p)[1]);
    let full: Vec<f64> = fx.into_iter().chain(fy).collect();
    let saddle = SaddleSolver::new(&mr, &br)?;
    let (x, _) = saddle.solve(&vel.restrict(&full), &vec![0.0; br.nrows()]);
    Ok(VectorField::from_vec(&vel.expand(&x)))
}
