//! Stabilizer-free conforming discontinuous Galerkin discretization of the
//! Poisson problem `-Δu = f`, `u = 0` on the boundary of the unit square.
//!
//! The discrete problem is `(∇_w u_h, ∇_w v)_{T_h} = (f, v)` over
//! element-wise polynomials of degree `k`, where the weak gradient `∇_w` is
//! a polynomial field of degree `j` computed cell by cell from the values of
//! `v` on the cell and the edge averages shared with its neighbors. No
//! penalty or stabilization term is needed.

pub mod analysis;
pub mod basis;
pub mod error;
pub mod field;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod study;
pub mod system;
pub mod verify;
pub mod weakgrad;

pub use error::{Error, Result};
pub use field::BrokenPolynomial;
pub use mesh::{Mesh, MeshFamily};
pub use weakgrad::BcMode;
