//! Decoupled implicit Bidomain discretization on structured hexahedral
//! grids, its variational potential, and a family of nonlinear solvers.

pub mod bench;
pub mod bidomain;
pub mod error;
pub mod fem;
pub mod ionic;
pub mod nsolve;
pub mod scalar;
pub mod sparse;
pub mod timeloop;

pub use error::{Error, Result};
pub use scalar::Real;

pub type CsrMatrixF64 = sparse::CsrMatrix<f64>;
pub type CsrMatrixF32 = sparse::CsrMatrix<f32>;
pub type GridF64 = fem::StructuredGrid<f64>;
pub type GridF32 = fem::StructuredGrid<f32>;
pub type FitzHughNagumoF64 = ionic::FitzHughNagumo<f64>;
pub type FitzHughNagumoF32 = ionic::FitzHughNagumo<f32>;
