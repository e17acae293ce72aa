//! Numerical laboratory for the self-dual U(1) Yang–Mills–Higgs (abelian
//! Higgs) model on flat lattices in dimensions two to four.
//!
//! The modules build on each other: [`lattice`] holds the discretisation,
//! [`vortex2d`] constructs planar vortices, [`relax`] minimises the energy,
//! [`excess`] measures how far a pair is from a flat self-dual sheet,
//! [`competitor`] pulls the planar vortex back along graphs, [`gauge`]
//! fixes gauges on cylinders and [`harness`] runs reproducible
//! experiments.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod competitor;
pub mod error;
pub mod excess;
pub mod gauge;
pub mod harness;
pub mod lattice;
pub mod relax;
pub mod util;
pub mod vortex2d;

pub use error::{Error, Result};
pub use excess::PlaneFrame;
pub use lattice::{Cylinder, FieldPair, GaugeTransform, LatticeSpec, Region, C64};
