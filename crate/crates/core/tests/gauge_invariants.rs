use std::sync::OnceLock;

use proptest::prelude::*;
use vortexlab::competitor::{plane_pair, pullback_pair, GraphFunction};
use vortexlab::excess::PlaneFrame;
use vortexlab::gauge::{
    coulomb_fix, gaffney_constant, interpolation_gauge, phase_align, poincare_dilation_sweep, AxialAnnulus,
    GaffneyDomain, GaffneyOptions, InterpolationParams, ThinAnnulus,
};
use vortexlab::lattice::{energy_density, gauge_apply, jacobian_field};
use vortexlab::{Cylinder, FieldPair, GaugeTransform, LatticeSpec};

const EPS: f64 = 0.1;

fn spec() -> &'static LatticeSpec {
    static S: OnceLock<LatticeSpec> = OnceLock::new();
    S.get_or_init(|| LatticeSpec::new(3, &[1.3, 1.3, 0.8], 0.05).unwrap())
}

fn target() -> &'static FieldPair {
    static T: OnceLock<FieldPair> = OnceLock::new();
    T.get_or_init(|| pullback_pair(&GraphFunction::constant(3, [0.0, 0.0]), EPS, spec()).unwrap())
}

fn smooth_gauge(a: f64, b: f64) -> GaugeTransform {
    GaugeTransform::from_fn(spec(), |x| a * (x[0] + 2.0 * x[2]).sin() + b * x[1])
}

fn unit_cylinder() -> Cylinder {
    Cylinder::new(&[0.0; 3], PlaneFrame::standard(3), 1.0, 0.3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn coulomb_fix_undoes_exact_gauges(a in -0.5f64..0.5, b in -0.5f64..0.5) {
        let psi = smooth_gauge(a, b);
        let fp = gauge_apply(target(), &psi).unwrap();
        let fix = coulomb_fix(&fp, target(), &unit_cylinder(), 0.6).unwrap();
        prop_assert!(fix.solver_residual <= 1e-10);
        prop_assert!(fix.residual <= 1e-8, "residual {}", fix.residual);
        prop_assert!(fix.mean_defect.abs() <= 1e-10);
        let err = fix.xi.xi.iter().zip(&psi.xi).filter(|(x, _)| **x != 0.0).map(|(x, p)| (x + p).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-8, "gauge error {err}");
    }

    #[test]
    fn phase_align_is_idempotent(a in -0.5f64..0.5, b in -0.5f64..0.5, tilt in -0.2f64..0.2) {
        let frame = PlaneFrame::standard(3).tilted(&[tilt, 0.0]).unwrap();
        let bent = gauge_apply(&plane_pair(&frame, &[0.0; 3], EPS, spec()).unwrap(), &smooth_gauge(a, b)).unwrap();
        let g = spec().geometry();
        let region: Vec<usize> = (0..g.n_sites)
            .filter(|&s| {
                let x = g.position(s);
                let r = x[0].hypot(x[1]);
                (0.6..=0.9).contains(&r) && x[2].abs() <= 0.3
            })
            .collect();
        let xi = phase_align(&bent, target(), &region).unwrap();
        let once = gauge_apply(&bent, &xi).unwrap();
        let again = phase_align(&once, target(), &region).unwrap();
        for &s in &region {
            let r = again.xi[s].rem_euclid(2.0 * std::f64::consts::PI);
            prop_assert!(r.min(2.0 * std::f64::consts::PI - r) <= 1e-10);
        }
    }
}

#[test]
fn interpolation_gauge_preserves_invariants_and_partitions_unity() {
    let psi = smooth_gauge(0.3, 0.2);
    let frame = PlaneFrame::standard(3).tilted(&[0.1, 0.0]).unwrap();
    let bent = gauge_apply(&plane_pair(&frame, &[0.0; 3], EPS, spec()).unwrap(), &psi).unwrap();
    let ig = interpolation_gauge(&bent, target(), &AxialAnnulus { s: 0.1, delta: 0.2 }, &InterpolationParams::default())
        .unwrap();
    assert!(ig.audit.partition_defect <= 1e-12, "partition defect {}", ig.audit.partition_defect);
    assert!(ig.audit.integral <= ig.audit.envelope);
    let close = |a: &[f64], b: &[f64]| {
        let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * scale)
    };
    assert!(close(&energy_density(&bent).values, &energy_density(&ig.pair).values));
    assert!(close(&jacobian_field(&bent, 0, 1).values, &jacobian_field(&ig.pair, 0, 1).values));
    assert!(close(&bent.modulus(), &ig.pair.modulus()));
}

#[test]
fn self_interpolation_is_trivial() {
    let ig = interpolation_gauge(target(), target(), &AxialAnnulus { s: 0.1, delta: 0.2 }, &InterpolationParams::default())
        .unwrap();
    assert!(ig.audit.integral <= 1e-20, "integral {}", ig.audit.integral);
    assert!(!ig.cover.is_empty());
}

#[test]
fn square_gaffney_constant_matches_the_first_eigenvalue() {
    // on the unit square the smallest eigenvalue of the Hodge problem is π²
    let e = gaffney_constant(&GaffneyDomain::Square { side: 1.0 }, &GaffneyOptions { spacing: 0.05, ..Default::default() })
        .unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!(e.converged);
    assert!((e.lambda_min - pi2).abs() <= 0.01 * pi2, "λ = {}", e.lambda_min);
}

#[test]
fn poincare_constant_is_stable_under_dilation() {
    let reps = poincare_dilation_sweep(3, ThinAnnulus::new(1.0, 0.5, 0.2, 0.2), &[0.1, 0.2, 0.4], 0.025, |x| x[2]).unwrap();
    let c: Vec<f64> = reps.iter().map(|r| r.constant).collect();
    let (lo, hi) = c.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    assert!(hi / lo <= 1.1, "{c:?}");
    // for f = z on |z| ≤ ℓ with diam = 2ℓ the ratio is ∫z² / (diam² ∫1) = 1/12
    for v in &c {
        assert!((v - 1.0 / 12.0).abs() <= 0.1 / 12.0, "{c:?}");
    }
}
