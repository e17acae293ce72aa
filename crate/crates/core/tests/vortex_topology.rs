use vortexlab::*;
use vortexlab::vortex2d::*;
use vortexlab::lattice::{gauge_apply, total_energy, GaugeTransform, LatticeSpec, Region};

fn winding_field() -> FieldPair {
    let spec = LatticeSpec::cube(2, 2.0, 0.05).unwrap();
    FieldPair::from_fn(&spec, 1.0, |x| C64::new(x[0], x[1]), |_, _| 0.0)
}

#[test]
fn identity_map_has_degree_one() {
    let fp = winding_field();
    assert_eq!(degree(&fp, &LoopSpec::circle([0.0, 0.0], 1.0)).unwrap(), 1);
    assert_eq!(degree(&fp.conjugate(), &LoopSpec::circle([0.0, 0.0], 1.0)).unwrap(), -1);
    assert!(matches!(degree(&fp, &LoopSpec::circle([0.0, 0.0], 0.3)), Err(Error::VorticityOnLoop { .. })));
}

#[test]
fn degree_is_gauge_invariant() {
    let fp = winding_field();
    let xi = GaugeTransform::from_fn(&fp.spec, |x| 3.0 * x[0] * x[1] + x[0].sin() * 5.0);
    let gp = gauge_apply(&fp, &xi).unwrap();
    assert_eq!(degree(&gp, &LoopSpec::circle([0.1, -0.1], 1.2)).unwrap(), 1);
}

#[test]
fn split_sums_to_energy_for_arbitrary_pairs() {
    let spec = LatticeSpec::cube(2, 2.0, 0.1).unwrap();
    let fp = FieldPair::from_fn(&spec, 0.7, |x| C64::new(x[0] * x[1] + 0.3, x[0].cos()), |j, x| x[j] * x[0] + 0.2 * j as f64);
    let sp = bogomolny_split(&fp).unwrap();
    let e = total_energy(&fp, &Region::Full).unwrap();
    assert!((sp.flux_term + sp.residual - e).abs() <= 1e-12 * e);
    let vac = bogomolny_split(&FieldPair::vacuum(&spec, 1.0)).unwrap();
    assert_eq!((vac.flux_term, vac.residual), (0.0, 0.0));
}
