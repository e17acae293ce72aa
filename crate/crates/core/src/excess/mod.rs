//! Excess of a pair relative to an oriented plane, vertical slicing, the
//! Lipschitz and harmonic approximations and the tilt-excess decay
//! experiment.

mod approx;
mod decay;
mod frame;
mod moments;
mod slices;

pub use approx::{
    caccioppoli_check, harmonic_approximation, lipschitz_approximation, slice_zeros, ApproximationBundle,
    CaccioppoliReport, HarmonicApproximation,
};
pub use decay::{calibrate_floor, decay_experiment, Alternative, DecayConfig, DecayRow, DecayTable, FloorModel};
pub use frame::PlaneFrame;
pub use moments::{
    excess, minimize_over_planes, normalized_energy, ExcessReport, PlaneSearch, PlaneSearchResult, RegionMoments,
};
pub use slices::{bv_defect, classify_slices, slice_profile, BvDefect, SliceClassification, SliceRow, SliceTest};
