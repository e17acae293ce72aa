mod common;

use common::{random_pair, smooth_pair};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vortexlab::lattice::{discrepancy_fields, energy_gradient, interior_weights, weighted_energy};
use vortexlab::relax::{relax, Boundary, DescentConfig, Initializer, RelaxConfig};
use vortexlab::{FieldPair, LatticeSpec, C64};

fn step(fp: &FieldPair, d: &FieldPair, t: f64) -> FieldPair {
    let mut out = fp.clone();
    for (a, b) in out.u.iter_mut().zip(&d.u) {
        *a += b * t;
    }
    for (a, b) in out.alpha.iter_mut().flatten().zip(d.alpha.iter().flatten()) {
        *a += b * t;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn gradient_matches_directional_differences(dim in 2usize..=3, seed in any::<u64>()) {
        let spec = LatticeSpec::cube(dim, 0.4, 0.1).unwrap();
        let fp = smooth_pair(&spec, 0.6, [0.3, 0.5, 0.2, -0.4]);
        let w = interior_weights(&spec.geometry());
        let grad = energy_gradient(&fp, &w);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..20 {
            let d = random_pair(&spec, fp.eps, rng.gen());
            let exact: f64 = grad.du.iter().zip(&d.u).map(|(g, v)| g.re * v.re + g.im * v.im).sum::<f64>()
                + grad.dalpha.iter().flatten().zip(d.alpha.iter().flatten()).map(|(g, v)| g * v).sum::<f64>();
            // Richardson-extrapolated central differences over a step sweep
            let best = [1e-3, 5e-4, 2.5e-4]
                .iter()
                .map(|&t| {
                    let c = |s: f64| (weighted_energy(&step(&fp, &d, s), &w) - weighted_energy(&step(&fp, &d, -s), &w)) / (2.0 * s);
                    let fd = (4.0 * c(t / 2.0) - c(t)) / 3.0;
                    (fd - exact).abs() / exact.abs().max(1e-12)
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert!(best <= 1e-5, "direction {k}: relative error {best}");
        }
    }
}

#[test]
fn converged_relaxation_respects_modica_margins() {
    let spec = LatticeSpec::cube(2, 2.0, 0.1).unwrap();
    let fp = FieldPair::from_fn(
        &spec,
        0.5,
        |x| {
            let r = x[0].hypot(x[1]);
            C64::from_polar((r / 0.5).tanh() * (1.0 + 0.05 * x[0]), x[1].atan2(x[0]))
        },
        |_, _| 0.0,
    );
    let tol = 1e-6;
    let cfg = RelaxConfig {
        boundary: Boundary::Dirichlet,
        initializer: Initializer::ProductExtension,
        descent: DescentConfig { tol, max_iter: 20000, ..DescentConfig::default() },
    };
    let out = relax(&fp, &cfg).unwrap();
    assert!(out.converged);
    assert!(out.log.windows(2).all(|w| w[1].energy <= w[0].energy));
    let d = discrepancy_fields(&out.pair);
    let g = spec.geometry();
    // margins are checked away from the fixed boundary layer
    let worst = (0..g.n_sites)
        .filter(|&i| g.depth(i) >= 3)
        .map(|i| d.margin_gradient.values[i].min(d.margin_curvature.values[i]))
        .fold(f64::INFINITY, f64::min);
    assert!(worst >= -5.0 * (g.h + tol), "worst Modica margin {worst}");
}
