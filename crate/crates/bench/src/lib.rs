//! Shared fixtures for the solver benchmarks in `benches/`.

use planar_spectra::fem::{assemble_mass, assemble_stiffness, FeMesh, Space};
use planar_spectra::geometry::{DomainKind, DomainSpec};
use planar_spectra::sparse::CsrMatrix;
use planar_spectra::spectra::Discretization;

/// Domains timed by the benchmarks: the disc and a perturbed star.
pub fn domains() -> Vec<(&'static str, DomainSpec)> {
    vec![
        ("disc", DomainSpec::unit_disc()),
        ("star", DomainSpec::new(DomainKind::fourier_star(1.0, vec![0.0, 0.15], vec![])).expect("valid star")),
    ]
}

pub fn discretization(spec: &DomainSpec, level: usize) -> Discretization {
    Discretization::new(spec, level).expect("bench meshes build")
}

/// `K + M` for P2 on the whole mesh; symmetric positive definite.
pub fn shifted_stiffness(fe: &FeMesh) -> CsrMatrix {
    let k = assemble_stiffness(fe, Space::P2).expect("stiffness assembles");
    k.add_scaled(&assemble_mass(fe, Space::P2), 1.0)
}
