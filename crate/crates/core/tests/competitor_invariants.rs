use proptest::prelude::*;
use vortexlab::competitor::{pullback_energy_audit, pullback_pair, GraphFunction};
use vortexlab::lattice::energy_density;
use vortexlab::LatticeSpec;

fn spec() -> LatticeSpec {
    LatticeSpec::new(3, &[1.0, 1.0, 0.5], 0.05).unwrap()
}

fn audit_spec() -> LatticeSpec {
    LatticeSpec::new(3, &[1.5, 1.5, 1.1], 0.1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn expansion_is_even_in_the_graph(a in -0.3f64..0.3, b in -0.3f64..0.3) {
        let s = audit_spec();
        let plus = pullback_energy_audit(&GraphFunction::linear(3, [0.0; 2], vec![[a, b]]), 0.2, &s).unwrap();
        let minus = pullback_energy_audit(&GraphFunction::linear(3, [0.0; 2], vec![[-a, -b]]), 0.2, &s).unwrap();
        prop_assert!((plus.energy - minus.energy).abs() <= 1e-12 * plus.energy);
        prop_assert!((plus.correction - minus.correction).abs() <= 1e-12 * plus.energy);
        prop_assert!((plus.dirichlet_term - minus.dirichlet_term).abs() <= 1e-12 * plus.dirichlet_term.max(1e-300));
    }

    #[test]
    fn commensurate_translation_moves_diagnostics(i in -3i64..=3, j in -3i64..=3, slope in -0.2f64..0.2) {
        let s = spec();
        let h = s.spacing;
        let f0 = GraphFunction::linear(3, [0.0; 2], vec![[slope, 0.0]]);
        let f1 = GraphFunction::linear(3, [i as f64 * h, j as f64 * h], vec![[slope, 0.0]]);
        let e0 = energy_density(&pullback_pair(&f0, 0.15, &s).unwrap()).values;
        let e1 = energy_density(&pullback_pair(&f1, 0.15, &s).unwrap()).values;
        let g = s.geometry();
        for x in 0..g.n_sites {
            let c = g.coords(x);
            let (a, b) = (c[0] as i64 - i, c[1] as i64 - j);
            if c[0] < 4 || c[1] < 4 || c[0] + 4 >= g.counts[0] || c[1] + 4 >= g.counts[1] || c[2] == 0 || c[2] + 1 == g.counts[2] {
                continue;
            }
            let y = g.index(&[a as usize, b as usize, c[2]]);
            prop_assert!((e1[x] - e0[y]).abs() <= 1e-12 * e0[y].abs().max(1.0));
        }
    }
}

#[test]
fn flat_graph_reproduces_the_product() {
    let s = audit_spec();
    let a = pullback_energy_audit(&GraphFunction::constant(3, [0.0; 2]), 0.2, &s).unwrap();
    assert_eq!(a.dirichlet_term, 0.0);
    assert_eq!(a.eta, 0.0);
    let fine = LatticeSpec::new(3, &[1.5, 1.5, 1.1], 0.05).unwrap();
    let b = pullback_energy_audit(&GraphFunction::constant(3, [0.0; 2]), 0.2, &fine).unwrap();
    for (c, f) in a.identity_mismatch.iter().zip(&b.identity_mismatch) {
        assert!(*f <= 0.5 * c + 1e-12, "{:?} -> {:?}", a.identity_mismatch, b.identity_mismatch);
    }
}
