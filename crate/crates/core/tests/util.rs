use vortexlab::util::*;

#[test]
fn bessel_k0_values() {
    assert!((bessel_k0(1.0) - 0.42102443824070834).abs() < 1e-7);
    assert!((bessel_k0(5.0) / 0.0036910983340425942 - 1.0).abs() < 1e-6);
}

#[test]
fn cutoff_is_c2_and_bounded() {
    let c = Cutoff::slice(1.0);
    assert_eq!(c.value(0.3), 1.0);
    assert_eq!(c.value(0.8), 0.0);
    let eps = 1e-6;
    for &s in &[0.55, 0.6, 0.7] {
        let (v, d, dd) = c.eval(s);
        assert!((0.0..=1.0).contains(&v));
        let fd = (c.value(s + eps) - c.value(s - eps)) / (2.0 * eps);
        let fdd = (c.eval(s + eps).1 - c.eval(s - eps).1) / (2.0 * eps);
        assert!((fd - d).abs() < 1e-6);
        assert!((fdd - dd).abs() < 1e-4);
    }
    // continuity of derivatives at the joints
    assert!(c.eval(0.5 + 1e-9).1.abs() < 1e-12);
    assert!(c.eval(0.75 - 1e-9).2.abs() < 1e-4);
}

#[test]
fn spline_reproduces_cubic() {
    let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.1).powf(1.3)).collect();
    let f = |t: f64| 1.0 + 2.0 * t - t * t + 0.3 * t * t * t;
    let df = |t: f64| 2.0 - 2.0 * t + 0.9 * t * t;
    let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
    let s = CubicSpline::clamped(x.clone(), y, df(x[0]), df(*x.last().unwrap()));
    for &t in &[0.05, 0.33, 1.2, 2.1] {
        let (v, d) = s.eval(t);
        assert!((v - f(t)).abs() < 1e-12, "{t}");
        assert!((d - df(t)).abs() < 1e-10);
    }
}

#[test]
fn cg_solves_spd_system() {
    let n = 50;
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            let l = if i > 0 { x[i - 1] } else { 0.0 };
            let r = if i + 1 < n { x[i + 1] } else { 0.0 };
            y[i] = 3.0 * x[i] - l - r;
        }
    };
    let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
    let out = conjugate_gradient(apply, &b, None, 1e-12, 500, None);
    assert!(out.converged);
    let mut y = vec![0.0; n];
    apply(&out.x, &mut y);
    for i in 0..n {
        assert!((y[i] - b[i]).abs() < 1e-10);
    }
}

#[test]
fn deterministic_sum_matches_serial() {
    let n = 100_000;
    let s = par_sum(n, |i| 1.0 / (1.0 + i as f64));
    let s2 = par_sum(n, |i| 1.0 / (1.0 + i as f64));
    assert_eq!(s.to_bits(), s2.to_bits());
    let serial: f64 = (0..n).map(|i| 1.0 / (1.0 + i as f64)).sum();
    assert!((s - serial).abs() < 1e-10);
}
