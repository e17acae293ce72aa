mod common;

use common::{max_rel_diff, random_gauge, random_pair, smooth_pair};
use proptest::prelude::*;
use vortexlab::lattice::{
    curvature, curvature_field, energy_density, gauge_apply, jacobian_field, pairs, total_energy,
};
use vortexlab::{GaugeTransform, LatticeSpec, Region};

const TOL: f64 = 10.0 * f64::EPSILON;

fn spec(dim: usize) -> LatticeSpec {
    LatticeSpec::cube(dim, 0.5, 0.1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariant_diagnostics_are_gauge_covariant(dim in 2usize..=4, seed in any::<u64>(), scale in 0.1f64..6.0) {
        let s = spec(dim);
        let fp = random_pair(&s, 0.7, seed);
        let moved = gauge_apply(&fp, &random_gauge(&s, seed, scale)).unwrap();
        // rounding of e^{iξ} grows with |ξ|
        let tol = TOL * scale.max(1.0);
        let de = max_rel_diff(&energy_density(&fp).values, &energy_density(&moved).values);
        prop_assert!(de <= tol, "energy density moved by {de}");
        prop_assert!(max_rel_diff(&fp.modulus(), &moved.modulus()) <= tol);
        // curvature is relative to the plaquette operands |α + dξ|/h
        let link_scale = moved.alpha.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs())) * 4.0 / s.spacing;
        for (j, k) in pairs(dim) {
            prop_assert!(max_rel_diff(&jacobian_field(&fp, j, k).values, &jacobian_field(&moved, j, k).values) <= tol);
            let a = curvature_field(&fp, j, k).values;
            let b = curvature_field(&moved, j, k).values;
            let d = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assert!(d <= tol * link_scale, "curvature moved by {d}");
        }
    }

    #[test]
    fn jacobian_is_bounded_by_energy_density(dim in 2usize..=4, seed in any::<u64>(), eps in 0.2f64..1.5) {
        let s = spec(dim);
        let fp = random_pair(&s, eps, seed);
        let e = energy_density(&fp).values;
        for (j, k) in pairs(dim) {
            let jac = jacobian_field(&fp, j, k).values;
            for (a, b) in jac.iter().zip(&e) {
                prop_assert!(a.abs() <= b * (1.0 + 1e-12) + 1e-14, "|J| = {} > e = {}", a.abs(), b);
            }
        }
    }

    #[test]
    fn exact_forms_have_no_curvature(dim in 2usize..=4, seed in any::<u64>()) {
        let s = spec(dim);
        let xi = random_gauge(&s, seed, 3.0);
        let mut fp = vortexlab::FieldPair::vacuum(&s, 1.0);
        let g = s.geometry();
        for j in 0..dim {
            for x in 0..g.n_sites {
                if let Some(y) = g.shift(x, j, 1) {
                    fp.alpha[j][x] = (xi.xi[y] - xi.xi[x]) / g.h;
                }
            }
        }
        let w = curvature(&fp);
        prop_assert!(w.values.iter().flatten().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn total_energy_is_gauge_invariant_on_smooth_pairs(
        c in proptest::array::uniform4(-1.0f64..1.0),
        seed in any::<u64>(),
    ) {
        let s = LatticeSpec::cube(3, 0.6, 0.1).unwrap();
        let fp = smooth_pair(&s, 0.5, c);
        let moved = gauge_apply(&fp, &random_gauge(&s, seed, 2.0)).unwrap();
        let a = total_energy(&fp, &Region::Full).unwrap();
        let b = total_energy(&moved, &Region::Full).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 * a);
    }
}

#[test]
fn analytic_profile_energy_converges_at_second_order() {
    // u = tanh(r/ε) e^{iθ}, α = a(r) dθ with a(r) = 1 − sech(r/ε)², on a disk
    let eps = 0.5;
    let pair_on = |h: f64| {
        let s = LatticeSpec::cube(2, 4.0, h).unwrap();
        vortexlab::FieldPair::from_fn(
            &s,
            eps,
            |x| {
                let r = x[0].hypot(x[1]);
                vortexlab::C64::from_polar((r / eps).tanh(), x[1].atan2(x[0]))
            },
            |j, x| {
                // link midpoint value of a(r) dθ along axis j
                let r2 = x[0] * x[0] + x[1] * x[1];
                if r2 == 0.0 {
                    return 0.0;
                }
                let a = 1.0 - 1.0 / (r2.sqrt() / eps).cosh().powi(2);
                if j == 0 { -a * x[1] / r2 } else { a * x[0] / r2 }
            },
        )
    };
    let e = |h: f64| total_energy(&pair_on(h), &Region::ball(&[0.0, 0.0], 3.5)).unwrap();
    let (e1, e2, e3) = (e(0.1), e(0.05), e(0.025));
    let order = ((e1 - e2) / (e2 - e3)).abs().log2();
    assert!(order >= 1.8, "observed order {order} from {e1} {e2} {e3}");
}

#[test]
fn identity_gauge_is_neutral() {
    let s = spec(3);
    let fp = random_pair(&s, 1.0, 11);
    assert_eq!(gauge_apply(&fp, &GaugeTransform::identity(s.num_sites())).unwrap(), fp);
}
