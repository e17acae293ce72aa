//! Planar vortices: radial profiles, the Taubes construction of
//! multi-vortex solutions, topological counts and the stability experiment.

mod oracle;
mod stability;
mod taubes;
mod topology;

pub use oracle::{radial_profile_oracle, radial_profile_with_step, RadialProfile};
pub use stability::{perturb, stability_experiment, PerturbationSchedule, StabilityRecord, StabilityReport};
pub use taubes::{solve_vortex, solve_vortex_detailed, NewtonConfig, VortexConfig, VortexSolution, Zero};
pub use topology::{
    bogomolny_split, degree, digital_circle, vortex_equation_residuals, vortex_number, BogomolnySplit, LoopSpec,
};
