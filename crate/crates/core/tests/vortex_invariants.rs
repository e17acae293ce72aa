mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use common::{random_gauge, random_pair};
use proptest::prelude::*;
use vortexlab::lattice::{gauge_apply, total_energy};
use vortexlab::vortex2d::{bogomolny_split, degree, solve_vortex, vortex_number, LoopSpec, VortexConfig, Zero};
use vortexlab::{FieldPair, LatticeSpec, Region};

fn vortex() -> &'static FieldPair {
    static V: OnceLock<FieldPair> = OnceLock::new();
    V.get_or_init(|| {
        let spec = LatticeSpec::cube(2, 6.0, 0.1).unwrap();
        solve_vortex(&VortexConfig::single([0.3, -0.2], 1.0), &spec).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bogomolny_split_sums_to_energy(seed in any::<u64>(), eps in 0.3f64..2.0) {
        let spec = LatticeSpec::cube(2, 1.0, 0.1).unwrap();
        let fp = random_pair(&spec, eps, seed);
        let b = bogomolny_split(&fp).unwrap();
        let e = total_energy(&fp, &Region::Full).unwrap();
        prop_assert!((b.flux_term + b.squares + b.boundary_defect - e).abs() <= 1e-12 * e,
            "{} + {} + {} vs {}", b.flux_term, b.squares, b.boundary_defect, e);
    }

    #[test]
    fn degree_is_gauge_and_radius_invariant(seed in any::<u64>(), scale in 0.0f64..8.0, r in 1.5f64..5.0) {
        let fp = vortex();
        let moved = gauge_apply(fp, &random_gauge(&fp.spec, seed, scale)).unwrap();
        let lp = LoopSpec::circle([0.3, -0.2], r);
        prop_assert_eq!(degree(fp, &lp).unwrap(), 1);
        prop_assert_eq!(degree(&moved, &lp).unwrap(), 1);
    }
}

#[test]
fn conjugation_negates_topology_and_keeps_energy() {
    let fp = vortex();
    let c = fp.conjugate();
    assert_eq!(total_energy(&c, &Region::Full).unwrap(), total_energy(fp, &Region::Full).unwrap());
    assert_eq!(vortex_number(&c).unwrap(), -vortex_number(fp).unwrap());
    let lp = LoopSpec::circle([0.3, -0.2], 3.0);
    assert_eq!(degree(&c, &lp).unwrap(), -1);
}

#[test]
fn translating_zeros_keeps_energy() {
    let spec = LatticeSpec::cube(2, 8.0, 0.05).unwrap();
    let e = |p: [f64; 2]| total_energy(&solve_vortex(&VortexConfig::single(p, 1.0), &spec).unwrap(), &Region::Full).unwrap();
    let (a, b) = (e([0.0, 0.0]), e([0.73, -0.41]));
    assert!((a - b).abs() <= 5e-3 * a, "{a} vs {b}");
    assert!((a - 2.0 * PI).abs() <= 0.02 * 2.0 * PI);
}

#[test]
fn double_zero_quantizes_to_four_pi() {
    let spec = LatticeSpec::cube(2, 8.0, 0.05).unwrap();
    let cfg = VortexConfig {
        zeros: vec![Zero { position: [-1.0, 0.0], multiplicity: 1 }, Zero { position: [1.2, 0.5], multiplicity: 1 }],
        ..VortexConfig::single([0.0, 0.0], 1.0)
    };
    let fp = solve_vortex(&cfg, &spec).unwrap();
    let e = total_energy(&fp, &Region::Full).unwrap();
    assert!((e - 4.0 * PI).abs() <= 0.02 * 4.0 * PI, "energy {e}");
    let n = vortex_number(&fp).unwrap();
    assert!((n - 2.0).abs() < 1e-2, "vortex number {n}");
}
