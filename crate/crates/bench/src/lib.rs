//! Fixtures shared by the kernel benchmarks.

use vortexlab::competitor::{pullback_pair, GraphFunction};
use vortexlab::vortex2d::{solve_vortex, VortexConfig};
use vortexlab::{FieldPair, LatticeSpec};

/// Planar degree-one vortex on `[-6, 6]²`.
pub fn planar_vortex(h: f64) -> FieldPair {
    let spec = LatticeSpec::cube(2, 6.0, h).expect("valid lattice");
    solve_vortex(&VortexConfig::single([0.0, 0.0], 1.0), &spec).expect("vortex solve")
}

/// Straight vortex line pulled back along a linear graph of slope `eta`.
pub fn tilted_line(eta: f64, h: f64) -> FieldPair {
    let spec = LatticeSpec::new(3, &[1.5, 1.5, 1.1], h).expect("valid lattice");
    pullback_pair(&GraphFunction::linear(3, [0.0; 2], vec![[eta, 0.0]]), 0.1, &spec).expect("pullback")
}

/// Flat line on the same lattice as [`tilted_line`].
pub fn flat_line(h: f64) -> FieldPair {
    tilted_line(0.0, h)
}
