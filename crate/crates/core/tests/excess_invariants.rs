mod common;

use common::{random_pair, smooth_pair};
use proptest::prelude::*;
use vortexlab::competitor::plane_pair;
use vortexlab::excess::{classify_slices, excess, PlaneFrame};
use vortexlab::{Cylinder, LatticeSpec, Region};

fn tilted(n: usize, p: &[f64]) -> PlaneFrame {
    PlaneFrame::standard(n).tilted(&p[..2 * (n - 2)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn split_is_exact_on_arbitrary_pairs(
        dim in 3usize..=4,
        seed in any::<u64>(),
        p in proptest::collection::vec(-0.6f64..0.6, 4),
    ) {
        let spec = LatticeSpec::cube(dim, 0.5, 0.1).unwrap();
        let fp = random_pair(&spec, 0.4, seed);
        let r = excess(&fp, &Region::ball(&vec![0.0; dim], 0.4), &tilted(dim, &p)).unwrap();
        prop_assert!(r.split_defect <= 1e-12, "split defect {}", r.split_defect);
        prop_assert!((r.e - r.e1 - r.e2).abs() <= 1e-12 * r.normalized_energy.max(1e-300));
    }

    #[test]
    fn e1_ignores_orientation(seed in any::<u64>(), p in proptest::collection::vec(-0.5f64..0.5, 2)) {
        let spec = LatticeSpec::cube(3, 0.5, 0.1).unwrap();
        let fp = random_pair(&spec, 0.5, seed);
        let region = Region::ball(&[0.0; 3], 0.4);
        let frame = tilted(3, &p);
        let base = excess(&fp, &region, &frame).unwrap();
        let flipped = excess(&fp, &region, &frame.flipped()).unwrap();
        let conj = excess(&fp.conjugate(), &region, &frame).unwrap();
        let tol = 1e-13 * base.normalized_energy;
        prop_assert!((base.e1 - flipped.e1).abs() <= tol);
        prop_assert!((base.e1 - conj.e1).abs() <= tol);
        prop_assert_eq!(base.normalized_energy, conj.normalized_energy);
    }

    #[test]
    fn good_set_grows_with_threshold(
        c in proptest::array::uniform4(-1.0f64..1.0),
        eta in 0.01f64..0.5,
        factor in 1.0f64..4.0,
    ) {
        let spec = LatticeSpec::new(3, &[1.0, 1.0, 0.5], 0.1).unwrap();
        let fp = smooth_pair(&spec, 0.3, c);
        let cyl = Cylinder::new(&[0.0; 3], PlaneFrame::standard(3), 0.9, 0.4);
        let r = excess(&fp, &Region::Cylinder(cyl), &PlaneFrame::standard(3)).unwrap();
        let small = classify_slices(&r, eta).unwrap();
        let large = classify_slices(&r, eta * factor).unwrap();
        for (a, b) in small.good_set.iter().zip(&large.good_set) {
            prop_assert!(!a || *b);
        }
    }
}

#[test]
fn aligned_straight_line_has_no_tilt_excess() {
    let spec = LatticeSpec::new(3, &[1.5, 1.5, 0.5], 0.05).unwrap();
    let fp = plane_pair(&PlaneFrame::standard(3), &[0.0; 3], 0.2, &spec).unwrap();
    let r = excess(&fp, &Region::ball(&[0.0; 3], 0.4), &PlaneFrame::standard(3)).unwrap();
    assert!(r.e1.abs() <= 1e-12 * r.normalized_energy, "E1 = {}", r.e1);
    let t = excess(&fp, &Region::ball(&[0.0; 3], 0.4), &tilted(3, &[0.2, 0.0])).unwrap();
    assert!(t.e1 > 1e3 * r.e1.abs().max(1e-15));
}
