//! Smooth convex bodies given by support functions, integral functionals of
//! their area measures, and numerical checks of monotonicity and
//! Brunn-Minkowski type concavity for those functionals.
//!
//! Module map:
//! - [`symfun`]: elementary symmetric functions of symmetric matrices, their
//!   cofactor tensors and mixed discriminants.
//! - [`sphere`]: spherical functions, the matrix `Q(f,u)`, tangent frames and
//!   quadrature grids.
//! - [`bodies`]: support-function bodies of class C²₊ and perturbation families.
//! - [`functionals`]: area densities, the functional `F`, mixed volumes and
//!   first/second variations.
//! - [`conditions`]: the eigenvalue-sum condition and its equivalent forms.
//! - [`identities`]: integration-by-parts and divergence identities.
//! - [`experiments`]: monotonicity and concavity drivers, counterexample search.
//! - [`mollify`]: rotation-group mollification.
//! - [`reduction`]: cylinder decomposition and the dimension-reduction limit in R³.
//! - [`specs`]: text specifications of functions and bodies.
//! - [`corpus`]: the seeded probe corpus.

pub mod bodies;
pub mod corpus;
pub mod conditions;
pub mod error;
pub mod experiments;
pub mod functionals;
pub mod identities;
pub mod mollify;
pub mod par;
pub mod reduction;
pub mod specs;
pub mod sphere;
pub mod symfun;

pub use error::{Error, Result};
pub use sphere::{QuadratureGrid, SphericalFunction};
pub use symfun::SymMatrix;
