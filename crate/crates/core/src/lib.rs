//! Adjoint sensitivity analysis for a one-dimensional slab diffusion problem.
//!
//! A homogeneous slab `[-a, a]` with a uniform source `Q` is described by
//! `D φ'' − Σa φ + Q = 0`, `φ(±a) = 0`, and observed by a point detector
//! `R = Σd φ(b)`. The crate computes first- and second-order sensitivities
//! of `R` to `(Σa, D, Q, Σd)` with the adjoint method, checks them against
//! closed forms and finite differences, and propagates parameter
//! uncertainties into response moments.

pub mod adjoint;
pub mod bvp;
pub mod cli;
pub mod config;
pub mod error;
pub mod forward;
pub mod hyperbolic;
pub mod model;
pub mod report;
pub mod sensitivities;
pub mod uncertainty;
pub mod verification;

pub use adjoint::{build_bundle, AdjointBundle};
pub use bvp::{Grid, QuadratureRule, ScalarField, SolveLedger, SolveTag, SourceSpec};
pub use error::{Error, Result};

pub use model::{ModelParameters, Param};


pub use sensitivities::{Method, SensitivityMatrix, SensitivityVector};
pub use forward::ParameterVariation;
pub use uncertainty::{ResponseMoments, UncertaintyCase};
