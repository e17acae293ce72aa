//! Gauge fixing on cylinders, phase alignment, the patched interpolation
//! gauge and numerical checks of the Gaffney and Poincaré inequalities.

mod coulomb;
mod inequalities;
mod interpolation;
mod neumann;

pub use coulomb::{coulomb_potential, divergence, region_link, CoulombSolve};
pub use inequalities::{
    annulus_poincare_check, gaffney_constant, gaffney_schedule, poincare_dilation_sweep, GaffneyDomain, GaffneyEstimate,
    GaffneyOptions, PoincareReport, ThinAnnulus,
};
pub use interpolation::{
    interpolation_gauge, AxialAnnulus, CoverCylinder, InterpolationAudit, InterpolationGauge, InterpolationParams,
};
pub use neumann::{coulomb_fix, phase_align, CoulombFix, NeumannProblem};
