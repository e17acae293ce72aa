use vortexlab::lattice::pair_index;
use vortexlab::excess::*;

#[test]
fn standard_frame_properties() {
    let f = PlaneFrame::standard(3);
    assert_eq!(f.orientation(), 1);
    assert_eq!(f.flipped().orientation(), -1);
    let b = f.normal_bivector();
    assert_eq!(b[pair_index(0, 1)], 1.0);
    assert!(PlaneFrame::new(vec![vec![1.0, 0.0], vec![0.5, 1.0]]).is_err());
}

#[test]
fn tilt_is_orthonormal_and_continuous() {
    let f = PlaneFrame::standard(4);
    let t = f.tilted(&[0.1, -0.2, 0.05, 0.3]).unwrap();
    assert_eq!(t.orientation(), 1);
    assert!(t.tilt_distance(&f) > 0.0);
    let z = f.tilted(&[0.0; 4]).unwrap();
    assert!(z.tilt_distance(&f) < 1e-14);
    // plane of the tilted frame contains e_3 + 0.1 e_1 + 0.05 e_2
    let v = [0.1, 0.05, 1.0, 0.0];
    let p = t.plane_projector();
    for a in 0..4 {
        let pv: f64 = (0..4).map(|b| p[a][b] * v[b]).sum();
        assert!((pv - v[a]).abs() < 1e-12);
    }
}

#[test]
fn lattice_axes_detection() {
    let f = PlaneFrame::new(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, -1.0], vec![1.0, 0.0, 0.0]]).unwrap();
    assert_eq!(f.lattice_axes().unwrap(), vec![(1, 1.0), (2, -1.0), (0, 1.0)]);
    assert!(PlaneFrame::standard(3).rotated(2, 0.1).lattice_axes().is_none());
}
