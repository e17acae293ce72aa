use vortexlab::*;
use vortexlab::gauge::*;


#[test]
fn exact_gradient_is_removed() {
    let spec = LatticeSpec::cube(2, 1.0, 0.1).unwrap();
    let g = spec.geometry();
    let psi: Vec<f64> = (0..g.n_sites).map(|i| {
        let x = g.position(i);
        (2.0 * x[0]).sin() + x[0] * x[1]
    }).collect();
    let a: Vec<Vec<f64>> = (0..2)
        .map(|j| (0..g.n_sites).map(|i| g.shift(i, j, 1).map_or(0.0, |q| (psi[q] - psi[i]) / g.h)).collect())
        .collect();
    let active = vec![true; g.n_sites];
    let fixed = vec![false; g.n_sites];
    let s = coulomb_potential(&g, &a, &active, &fixed, 1e-12).unwrap();
    let mean = psi.iter().sum::<f64>() / psi.len() as f64;
    for i in 0..g.n_sites {
        assert!((s.xi[i] + psi[i] - mean).abs() < 1e-8);
    }
}
