//! Sparse linear algebra: CSR kernels, preconditioned CG and geometric multigrid.

pub mod csr;
pub mod dense;
pub mod gmg;
pub mod pcg;
pub mod vecops;

pub use csr::CsrMatrix;
pub use dense::{DenseLu, DenseMatrix};
pub use gmg::{GmgHierarchy, GmgOptions};
pub use pcg::{pcg_solve, IdentityPc, JacobiPc, KspMethod, LinearSolveOutcome, LinearSolveSpec, PcKind, Preconditioner};
