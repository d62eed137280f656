//! Sparse spectral-Galerkin methods on a single tetrahedron built from
//! generalized Koornwinder polynomials.

pub mod analytic;
pub mod assembly;
pub mod error;
pub mod geometry;
pub mod jacobi;
pub mod koornwinder;
pub mod modal;
pub mod problems;
pub mod quadrature;
pub mod recurrence;
pub mod solvers;
pub mod sparse;

pub use assembly::{Coefficient, Field};
pub use error::{Error, Result};
pub use geometry::{Preset, Tetrahedron};
pub use jacobi::JacobiParams;
pub use koornwinder::{
    CollapsedPoint, Derivative, DubinerExpansion, Expansion, ExpansionTerm, MultiIndex, ParamVector, RefPoint,
};
pub use modal::{ModeClass, ModeId};
pub use problems::Example;
pub use sparse::{OpCounter, SparseSymMatrix};
