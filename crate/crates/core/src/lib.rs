//! Nodal nonconforming finite elements on convex quadrilaterals.
//!
//! A scalar element with vertex values and gradients as degrees of freedom
//! for fourth-order problems, and a companion vector element with vertex
//! values and edge normal fluxes for Brinkman flow. Together with a
//! piecewise-constant pressure they form a discrete de Rham sequence.
//!
//! The crate is `no_std` with `alloc`.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod assembly;
pub mod element;
pub mod exec;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod poly;
pub mod quadrature;
pub mod verify;

pub use element::{build_scalar_element, build_vector_element, ScalarElement, VectorElement};
pub use geometry::{compute_geometry, Point, QuadGeometry};
pub use poly::{Poly2, VecPoly2};
