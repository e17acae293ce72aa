use std::f64::consts::PI;
use vortexlab::vortex2d::*;

#[test]
fn degree_one_profile() {
    let p = radial_profile_oracle(1, 1.0).unwrap();
    assert_eq!(p.modulus[0], 0.0);
    assert!(p.modulus.windows(2).all(|w| w[1] >= w[0]));
    assert!(p.deficit.windows(2).all(|w| w[1] < w[0]), "modulus must increase strictly");
    assert!(p.ode_residual <= 1e-10, "residual {}", p.ode_residual);
    assert!((p.energy() - 2.0 * PI).abs() < 1e-6, "energy {}", p.energy());
    assert!((p.decay_rate - 1.0).abs() < 0.1, "rate {}", p.decay_rate);
    assert!((p.modulus_at(50.0) - 1.0).abs() < 1e-15);
}

#[test]
fn mesh_doubling_is_stable() {
    let fine = radial_profile_with_step(1, 1.0, 1e-3).unwrap();
    let coarse = radial_profile_with_step(1, 1.0, 2e-3).unwrap();
    assert!((fine.second_moment() - coarse.second_moment()).abs() < 1e-9);
    assert!((fine.core_slope - coarse.core_slope).abs() < 1e-9);
}

#[test]
fn degree_two_quantization() {
    let p = radial_profile_oracle(2, 1.0).unwrap();
    assert!((p.energy() - 4.0 * PI).abs() < 1e-6, "energy {}", p.energy());
}

#[test]
fn eps_rescaling() {
    let p1 = radial_profile_oracle(1, 1.0).unwrap();
    let p = radial_profile_oracle(1, 0.25).unwrap();
    assert!((p.energy() - 2.0 * PI).abs() < 1e-6);
    assert!((p.second_moment() - 0.0625 * p1.second_moment()).abs() < 1e-9);
    assert!((p.modulus_at(0.25) - p1.modulus_at(1.0)).abs() < 1e-12);
}

#[test]
fn csv_round_trip() {
    let p = radial_profile_oracle(1, 1.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("oracle.csv");
    p.write_csv(&path, "test").unwrap();
    let q = RadialProfile::read_csv(&path, 1, 1.0).unwrap();
    for &r in &[0.01, 0.5, 1.3, 4.0] {
        assert!((p.modulus_at(r) - q.modulus_at(r)).abs() < 1e-12);
        assert!((p.gauge_at(r) - q.gauge_at(r)).abs() < 1e-12);
    }
}
