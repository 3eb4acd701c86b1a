//! Jacobi operators of multi-band measures with point masses, the hyperelliptic
//! surface functionals behind their trace formulas, and numerical verification.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod divisor;
pub mod error;
pub mod inversion;
pub mod measure;
pub mod numerics;
pub mod recurrence;
pub mod surface;
pub mod validator;

pub use divisor::{Divisor, DivisorPoint, Sheet, SurfacePoint};
pub use error::{Error, Result};
pub use inversion::{InversionSolution, InversionTarget, Mode, NewtonSettings, Trajectory};
pub use measure::{Band, MultiBandMeasure, PointMass, ValidatedMeasure, Weight};
pub use numerics::{BranchedRoot, GaussLegendre, SegmentRule, Side};
pub use recurrence::{RecurrenceCoefficients, SpuriousPole};
pub use surface::{AbelImage, Pole, Surface, SurfaceData, Szego, ThirdKind};
pub use validator::{DecayFit, Pipeline, Psi, VerificationReport};
