//! Numerical toolkit for one-dimensional p-Laplacian Dirichlet problems
//!
//! ```text
//! -(|u'|^{p-2} u')' = h(x)          in (a, b),  u(a) = u(b) = 0
//! -(|u'|^{p-2} u')' = m(x) u^{-gamma}, u > 0     (singular, m may change sign)
//! ```
//!
//! The linear-in-`h` problem is solved exactly through its integral
//! representation ([`dirichlet`]). On top of it the crate checks necessary
//! and sufficient existence conditions for the singular problem
//! ([`existence`]), builds ordered sub- and supersolutions and computes
//! solutions between them ([`singular`]). Every constructive result is
//! accepted only after a residual audit. A finite-difference Newton solver
//! ([`fdoracle`]) provides an independent cross-check.

pub mod bounds;
pub mod config;
pub mod dirichlet;
pub mod error;
pub mod existence;
pub mod fdoracle;
pub mod pcalc;
pub mod profile;
pub mod quadrature;
pub mod roots;
pub mod singular;
pub mod weights;

pub use config::SolverConfig;
pub use dirichlet::{solve_dirichlet, C1Solution, Source};
pub use error::{PlapError, Result};
pub use existence::{ExistenceCertificate, ProblemSpec, Verdict};
pub use pcalc::{Interval, PExponent};
pub use profile::{GridProfile, Profile};
pub use weights::WeightFn;
