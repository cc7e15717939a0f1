//! Bounded spherical functions of the Gelfand pair `(O(p), F(p))` on the free
//! two-step nilpotent group, with the numerical machinery needed to evaluate,
//! transform and test them.

pub mod error;
pub mod experiments;
pub mod fock;
pub mod haar;
pub mod heisenberg;
pub mod laguerre;
pub mod nilgroup;
pub mod quadrature;
pub mod quotient;
pub mod report;
pub mod topology;
pub mod transform;

pub use error::{NilError, Result};
pub use num_complex::Complex64;
