use vortexlab::*;
use vortexlab::lattice::*;

fn spec2(l: f64, h: f64) -> LatticeSpec {
    LatticeSpec::cube(2, l, h).unwrap()
}

#[test]
fn spec_validation() {
    assert!(LatticeSpec::cube(2, 1.0, 0.1).is_ok());
    assert!(LatticeSpec::cube(2, 1.0, 0.3).is_err());
    assert!(LatticeSpec::cube(5, 1.0, 0.1).is_err());
    assert!(LatticeSpec::cube(1, 1.0, 0.1).is_err());
    let s = LatticeSpec::cube(3, 1.0, 0.1).unwrap();
    assert_eq!(s.counts(), vec![21, 21, 21]);
    let p = s.with_periodic(2).unwrap();
    assert_eq!(p.counts(), vec![21, 21, 20]);
}

#[test]
fn row_major_indexing() {
    let s = LatticeSpec::new(3, &[1.0, 0.5, 0.2], 0.1).unwrap();
    let g = s.geometry();
    let idx = g.index(&[3, 4, 2]);
    assert_eq!(g.coords(idx)[..3], [3, 4, 2]);
    assert_eq!(g.strides[2], 1);
    let x = g.position(idx);
    assert!((x[0] - (-0.7)).abs() < 1e-12 && (x[1] + 0.1).abs() < 1e-12 && x[2].abs() < 1e-12);
}

#[test]
fn periodic_shift_wraps() {
    let s = LatticeSpec::cube(2, 1.0, 0.5).unwrap().with_periodic(1).unwrap();
    let g = s.geometry();
    let i = g.index(&[2, 3]);
    assert_eq!(g.shift(i, 1, 1), Some(g.index(&[2, 0])));
    assert_eq!(g.shift(g.index(&[2, 0]), 1, -1), Some(i));
    assert_eq!(g.shift(g.index(&[4, 0]), 0, 1), None);
}

#[test]
fn covariant_derivative_examples() {
    let s = spec2(1.0, 0.1);
    let fp = FieldPair::vacuum(&s, 1.0);
    assert!(covariant_derivative(&fp, 0).unwrap().iter().all(|z| z.norm() == 0.0));
    assert!(covariant_derivative(&fp, 2).is_err());
    let c = 1.7;
    let pure = FieldPair::from_fn(&s, 1.0, |x| C64::from_polar(1.0, c * x[0]), |j, _| if j == 0 { c } else { 0.0 });
    let g = s.geometry();
    let d = covariant_derivative(&pure, 0).unwrap();
    for i in 0..g.n_sites {
        assert!(d[i].norm() < 1e-13);
    }
    let lin = FieldPair::from_fn(&s, 1.0, |x| C64::new(x[0], x[1]), |_, _| 0.0);
    let d = covariant_derivative(&lin, 0).unwrap();
    for i in 0..g.n_sites {
        if g.has_link(i, 0) {
            assert!((d[i] - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn curvature_examples() {
    let s = LatticeSpec::cube(3, 1.0, 0.1).unwrap();
    let fp = FieldPair::from_fn(&s, 1.0, |_| C64::new(1.0, 0.0), |j, x| match j {
        0 => -x[1] / 2.0,
        1 => x[0] / 2.0,
        _ => 0.0,
    });
    let w = curvature(&fp);
    let g = s.geometry();
    for b in 0..g.n_sites {
        let c = g.coords(b);
        if c[0] < 20 && c[1] < 20 {
            assert!((w.get(0, 1, b) - 1.0).abs() < 1e-12);
            assert!((w.get(1, 0, b) + 1.0).abs() < 1e-12);
        }
    }
    let xi = GaugeTransform::from_fn(&s, |x| (3.0 * x[0]).sin() * x[1] + x[2] * x[2] * 4.0);
    let exact = gauge_apply(&FieldPair::vacuum(&s, 1.0), &xi).unwrap();
    let w = curvature(&exact);
    assert!(w.values.iter().all(|v| v.iter().all(|x| x.abs() < 1e-12)));
}

#[test]
fn density_examples() {
    let s = spec2(1.0, 0.1);
    let vac = FieldPair::vacuum(&s, 1.0);
    assert!(energy_density(&vac).values.iter().all(|&v| v == 0.0));
    let mut zero = vac.clone();
    zero.u.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    let g = s.geometry();
    let e = energy_density(&zero);
    for i in 0..g.n_sites {
        if g.is_interior(i) {
            assert!((e.values[i] - 0.25).abs() < 1e-15);
        }
    }
    assert_eq!(total_energy(&vac, &Region::Full).unwrap(), 0.0);
    assert!(total_energy(&vac, &Region::ball(&[0.0, 0.0], 0.95)).is_err());
    assert!(total_energy(&vac, &Region::ball(&[0.0, 0.0], 0.9)).is_ok());
}

#[test]
fn corner_average_matches_fast_density() {
    let s = LatticeSpec::cube(3, 0.4, 0.1).unwrap();
    let fp = FieldPair::from_fn(
        &s,
        0.7,
        |x| C64::new(x[0] + 0.3 * x[1] * x[2], (2.0 * x[1]).sin() - x[2]),
        |j, x| (j as f64 + 1.0) * x[(j + 1) % 3] + x[0] * x[0],
    );
    let g = s.geometry();
    for i in g.interior_sites() {
        let st = fp.stencil(&g, i);
        let a = st.average(|j| j.density(0.7));
        assert!((a - st.density(0.7)).abs() < 1e-12 * a.max(1.0));
        for (j, k) in pairs(3) {
            let b = st.average(|jt| jt.jacobian(j, k));
            assert!((b - st.jacobian(j, k)).abs() < 1e-12 * a.max(1.0));
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let s = LatticeSpec::cube(3, 0.3, 0.1).unwrap();
    let fp = FieldPair::from_fn(
        &s,
        0.8,
        |x| C64::new(0.5 + x[0] - x[1] * x[2], 0.2 + (3.0 * x[1]).cos() * 0.3),
        |j, x| 0.4 * (j as f64 - 1.0) + x[(j + 2) % 3] * 1.3,
    );
    let g = s.geometry();
    let w = interior_weights(&g);
    let grad = energy_gradient(&fp, &w);
    assert!((grad.energy - total_energy(&fp, &Region::Full).unwrap()).abs() < 1e-12);
    let d = 1e-6;
    for idx in [0usize, 17, 171, 200, 342] {
        let mut p = fp.clone();
        let mut m = fp.clone();
        p.u[idx].re += d;
        m.u[idx].re -= d;
        let fd = (weighted_energy(&p, &w) - weighted_energy(&m, &w)) / (2.0 * d);
        assert!((fd - grad.du[idx].re).abs() < 1e-6 * (1.0 + fd.abs()), "re {idx}: {fd} {}", grad.du[idx].re);
        let mut p = fp.clone();
        let mut m = fp.clone();
        p.u[idx].im += d;
        m.u[idx].im -= d;
        let fd = (weighted_energy(&p, &w) - weighted_energy(&m, &w)) / (2.0 * d);
        assert!((fd - grad.du[idx].im).abs() < 1e-6 * (1.0 + fd.abs()));
        for j in 0..3 {
            let mut p = fp.clone();
            let mut m = fp.clone();
            p.alpha[j][idx] += d;
            m.alpha[j][idx] -= d;
            let fd = (weighted_energy(&p, &w) - weighted_energy(&m, &w)) / (2.0 * d);
            assert!(
                (fd - grad.dalpha[j][idx]).abs() < 1e-6 * (1.0 + fd.abs()),
                "alpha {j} {idx}: {fd} {}",
                grad.dalpha[j][idx]
            );
        }
    }
}

#[test]
fn vacuum_has_zero_residuals() {
    let s = LatticeSpec::cube(2, 1.0, 0.1).unwrap();
    let r = el_residuals(&FieldPair::vacuum(&s, 1.0));
    assert_eq!(r.el_scalar_sup, 0.0);
    assert_eq!(r.el_curvature_sup, 0.0);
    assert_eq!(r.stress_energy_divergence, 0.0);
    let rnd = FieldPair::from_fn(&s, 1.0, |x| C64::new(x[0].sin(), x[1]), |_, x| x[0]);
    assert!(el_residuals(&rnd).el_scalar_sup > 0.0);
}

#[test]
fn gauge_apply_examples() {
    let s = spec2(1.0, 0.1);
    let fp = FieldPair::from_fn(&s, 1.0, |x| C64::new(x[0], x[1]), |j, x| 0.3 * x[1 - j]);
    let id = gauge_apply(&fp, &GaugeTransform::identity(s.num_sites())).unwrap();
    assert_eq!(id, fp);
    let c = GaugeTransform { xi: vec![0.7; s.num_sites()] };
    let r = gauge_apply(&fp, &c).unwrap();
    assert_eq!(r.alpha, fp.alpha);
    assert!((r.u[5] - fp.u[5] * C64::from_polar(1.0, 0.7)).norm() < 1e-15);
    assert!(gauge_apply(&fp, &GaugeTransform { xi: vec![0.0; 3] }).is_err());
}

#[test]
fn modica_vacuum_and_violation() {
    let s = spec2(1.0, 0.1);
    let vac = FieldPair::vacuum(&s, 1.0);
    let d = discrepancy_fields(&vac);
    assert!(d.discrepancy.values.iter().all(|v| *v == 0.0));
    assert!(d.violations.is_empty());
    let mut big = vac.clone();
    big.u.iter_mut().for_each(|z| *z = C64::new(1.2, 0.0));
    let d = discrepancy_fields(&big);
    let g = s.geometry();
    let i = g.index(&[10, 10]);
    assert!(d.margin_gradient.values[i] < 0.0);
    assert!(!d.violations.is_empty());
}
