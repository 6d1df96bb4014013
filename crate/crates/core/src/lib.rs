//! Weighted permanents of restricted-permutation shifts of finite type over `Z^d`.
//!
//! A finitely supported nonnegative `f` on the lattice defines the shift `X_A`
//! (with `A = supp(f)`) of configurations whose displacement field `s -> s + x_s`
//! is a bijection of the lattice. The growth rate of the weighted pattern sums
//! on finite windows is the permanent `per(f)`, which equals the topological
//! pressure of `X_A` for the potential `log f` (the topological entropy when `f`
//! is an indicator).
//!
//! The crate is organised bottom-up:
//!
//! - [`group_ring`]: lattice points, windows, group-ring elements and torus projections.
//! - [`patterns`]: enumeration of injective / admissible / fixed-image patterns and signs.
//! - [`permanent`]: exact permanent kernels, signed target sums, finite-section
//!   determinants and the classical permanent bounds.
//! - [`entropy`]: certified window upper bounds, torus estimates, the exact `Z`
//!   transfer matrix and the closed-form bounds.
//! - [`fkdet`]: Mahler measures, finite sections and the permanent-vs-determinant
//!   example families.

pub mod entropy;
pub mod error;
pub mod fkdet;
pub mod group_ring;
pub mod par;
pub mod patterns;
pub mod permanent;

pub use error::{Error, Result};
pub use group_ring::{GroupRingElement, LatticePoint, TorusQuotient, Window};
pub use par::Exec;
pub use permanent::LogValue;
