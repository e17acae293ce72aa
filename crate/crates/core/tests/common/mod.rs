#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vortexlab::{C64, FieldPair, GaugeTransform, LatticeSpec};

/// Pair with independent uniform site and link values.
pub fn random_pair(spec: &LatticeSpec, eps: f64, seed: u64) -> FieldPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fp = FieldPair::vacuum(spec, eps);
    for z in fp.u.iter_mut() {
        *z = C64::new(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2));
    }
    for a in fp.alpha.iter_mut() {
        for v in a.iter_mut() {
            *v = rng.gen_range(-2.0..2.0);
        }
    }
    fp
}

/// Smooth pair close to a vortex-like configuration.
pub fn smooth_pair(spec: &LatticeSpec, eps: f64, c: [f64; 4]) -> FieldPair {
    FieldPair::from_fn(
        spec,
        eps,
        move |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let m = (r2 / (eps * eps + r2)).sqrt();
            C64::from_polar(m * (1.0 + 0.1 * c[0] * x[0]), x[1].atan2(x[0]) + c[1] * x[x.len() - 1])
        },
        move |j, x| c[2] * (x[(j + 1) % x.len()] + c[3] * (j as f64 + 1.0) * x[0] * x[0]),
    )
}

pub fn random_gauge(spec: &LatticeSpec, seed: u64, scale: f64) -> GaugeTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    GaugeTransform { xi: (0..spec.num_sites()).map(|_| rng.gen_range(-scale..scale)).collect() }
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}
