//! Low-order mixed virtual elements for 2D linear elasticity.
//!
//! Stresses are a-priori symmetric and carried by three traction unknowns per
//! edge; displacements are one rigid motion per cell. The crate covers polygonal
//! mesh generation, local element matrices, assembly and direct solution of the
//! saddle-point system, error norms and the benchmark drivers.

pub mod assembly;
pub mod bench;
pub mod element;
pub mod error;
pub mod material;
pub mod mesh;
pub mod postproc;
pub mod problems;
pub mod quadrature;

pub use error::{Error, Result};

use std::sync::Arc;

use material::SymTensor2;

/// Points and vectors in the plane.
pub type Point2 = nalgebra::Vector2<f64>;

/// Analytic vector data: loads, displacements, tractions.
pub type VectorField = Arc<dyn Fn(Point2) -> Point2 + Send + Sync>;

/// Analytic symmetric tensor data: exact stresses.
pub type TensorField = Arc<dyn Fn(Point2) -> SymTensor2 + Send + Sync>;

/// `(c1, c2)^⊥ = (c2, -c1)`
#[inline]
pub fn perp(v: Point2) -> Point2 {
    Point2::new(v.y, -v.x)
}
