//! Shared inputs for the kernel benchmarks.

use std::sync::Arc;

use css_core::spectrum::assemble_spectrum;
use css_core::{AngularCoefficient, ModalSolution, PerturbationH, Problem};

pub fn cylinder() -> AngularCoefficient {
    AngularCoefficient::cylindrical(5, 3, 3.0 / 16.0).expect("valid coefficient")
}

/// Two overlapping cylinders: no separation, so the Galerkin path runs.
pub fn overlapping() -> AngularCoefficient {
    AngularCoefficient::new(5, 3)
        .and_then(|c| c.with_cyl(&[1, 2, 3], 0.1))
        .and_then(|c| c.with_cyl(&[3, 4, 5], 0.1))
        .expect("valid coefficient")
}

/// Perturbed ground-mode solution on B_1 with h = 0.1|x|^{-3/2}.
pub fn perturbed_solution() -> (Problem, ModalSolution) {
    let c = cylinder();
    let dec = Arc::new(assemble_spectrum(&c, 2, 8).expect("spectrum"));
    let h = PerturbationH::radial_power(0.1, 0.5).expect("h");
    let mut pb = Problem::unperturbed(c, 4).expect("problem");
    pb.h = h.clone();
    let u = ModalSolution::generate(dec, h, &[0], &[1.0], 1.0).expect("solution");
    (pb, u)
}
