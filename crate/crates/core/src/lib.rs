//! Finite-level construction of a continuous path `t ↦ A(t)` of singular
//! Tauer masas in the hyperfinite II₁ factor, together with mechanical
//! checks of the finite-dimensional identities behind it.

pub mod certificates;
pub mod construction;
pub mod error;
pub mod expectation;
pub mod masas;
pub mod matrix;
pub mod report;
pub mod tower;

pub use certificates::{BlockUnitary, Certificate, CertificateKind};
pub use construction::{Approximant, BlockMasa, Construction, LegEntry, ProjLabel, SeedingRule};
pub use expectation::{ExpectationOperator, GapEstimate, GapOptions, Strategy};
pub use error::{Error, Result};
pub use masas::{MasaBasis, OrthoFamily};
pub use matrix::ComplexMatrix;
pub use tower::{PrimeTower, TowerRational};
