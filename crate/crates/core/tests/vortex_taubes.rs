use vortexlab::*;
use vortexlab::vortex2d::*;
use vortexlab::lattice::{total_energy, Region};
use std::f64::consts::PI;

#[test]
fn vacuum_for_empty_zero_set() {
    let spec = LatticeSpec::cube(2, 4.0, 0.25).unwrap();
    let cfg = VortexConfig { zeros: vec![], ..VortexConfig::single([0.0, 0.0], 1.0) };
    let fp = solve_vortex(&cfg, &spec).unwrap();
    assert_eq!(total_energy(&fp, &Region::Full).unwrap(), 0.0);
}

#[test]
fn zero_near_boundary_is_rejected() {
    let spec = LatticeSpec::cube(2, 4.0, 0.25).unwrap();
    let cfg = VortexConfig::single([3.0, 0.0], 1.0);
    assert!(matches!(solve_vortex(&cfg, &spec), Err(Error::ZeroTooCloseToBoundary { .. })));
}

#[test]
fn coarse_single_vortex_energy() {
    let spec = LatticeSpec::cube(2, 8.0, 0.1).unwrap();
    let sol = solve_vortex_detailed(&VortexConfig::single([0.0, 0.0], 1.0), &spec).unwrap();
    assert!(sol.residual <= 1e-10);
    let e = total_energy(&sol.pair, &Region::Full).unwrap();
    assert!((e / (2.0 * PI) - 1.0).abs() < 0.01, "E/2π = {}", e / (2.0 * PI));
    assert_eq!(sol.pair.u[spec.geometry().index(&[80, 80])], C64::new(0.0, 0.0));
}
