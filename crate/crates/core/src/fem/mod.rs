//! Structured hexahedral meshes, fiber fields and Q1 finite-element assembly.

pub mod assembly;
pub mod conductivity;
pub mod fibers;
pub mod grid;
pub mod reaction;

pub use assembly::{
    assemble_conductivity, assemble_laplacian, assemble_mass, assemble_stiffness, conductivity_tensor, element_slots,
    q1_pattern, Q1Element,
};
pub use conductivity::{ConductivitySet, IschemicRegion, Medium};
pub use fibers::{fiber_angle, rotated_fibers, FiberField, FiberFrame};
pub use grid::{AxisBox, StructuredGrid};
pub use reaction::GaussIntegrator;
