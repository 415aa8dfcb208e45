//! Numerical toolkit for Schrödinger operators with inverse-square potentials
//! singular on coordinate subspaces and collision sets.

pub mod almgren;
pub mod asymptotics;
pub mod bounds;
pub mod error;
pub mod field;
pub mod identities;
pub mod numerics;
pub mod potential;
pub mod projection;
pub mod radial;
pub mod spectrum;

pub use error::{CssError, Result};
pub use potential::{AngularCoefficient, NonlinearityF, PerturbationH, Term};
pub use field::{kelvin_transform, Field, FnField, Problem, SphereQuad};
pub use radial::ModalSolution;
