//! Desk-scale acceptance run: one line per criterion, non-zero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vortexlab::competitor::{
    plane_pair, pullback_energy_audit, pullback_pair, variance_constant, variance_constant_with_step, variance_of_slice,
    GraphFunction,
};
use vortexlab::excess::{calibrate_floor, decay_experiment, excess, slice_profile, DecayConfig, DecayTable, PlaneFrame};
use vortexlab::gauge::{
    coulomb_fix, gaffney_schedule, interpolation_gauge, AxialAnnulus, GaffneyOptions, InterpolationParams,
};
use vortexlab::harness::{decode_snapshot, encode_snapshot, run_experiment, Config, Experiment};
use vortexlab::lattice::{
    curvature_field, discrepancy_fields, el_residuals, energy_density, gauge_apply, jacobian_field, pairs, total_energy,
};
use vortexlab::relax::{monotonicity_profile, product_extension};
use vortexlab::vortex2d::{bogomolny_split, radial_profile_oracle, solve_vortex, stability_experiment, PerturbationSchedule, VortexConfig};
use vortexlab::{Cylinder, FieldPair, GaugeTransform, LatticeSpec, Region, Result, C64};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn random_pair(spec: &LatticeSpec, eps: f64, rng: &mut ChaCha8Rng) -> FieldPair {
    let mut fp = FieldPair::vacuum(spec, eps);
    fp.u.iter_mut().for_each(|z| *z = C64::new(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)));
    fp.alpha.iter_mut().flatten().for_each(|a| *a = rng.gen_range(-2.0..2.0));
    fp
}

fn quantization() -> Result<Outcome> {
    let err = |h: f64| -> Result<f64> {
        let spec = LatticeSpec::cube(2, 12.0, h)?;
        let fp = solve_vortex(&VortexConfig::single([0.0, 0.0], 1.0), &spec)?;
        Ok((total_energy(&fp, &Region::Full)? - 2.0 * PI).abs() / (2.0 * PI))
    };
    let (coarse, fine) = (err(0.05)?, err(0.025)?);
    let order = (coarse / fine).log2();
    Ok(outcome(
        coarse <= 0.01 && fine <= 0.003 && order >= 1.8,
        format!("rel err {coarse:.3e} (h=0.05) <= 1e-2, {fine:.3e} (h=0.025) <= 3e-3, order {order:.2} >= 1.8"),
    ))
}

fn algebraic_identities() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut split, mut bogo, mut jac, mut gauge) = (0.0f64, 0.0f64, f64::NEG_INFINITY, 0.0f64);
    for k in 0..50 {
        let dim = 2 + k % 3;
        let spec = LatticeSpec::cube(dim, 0.5, 0.1)?;
        let fp = random_pair(&spec, rng.gen_range(0.3..1.5), &mut rng);
        let e = energy_density(&fp).values;
        if dim >= 3 {
            let frame = PlaneFrame::standard(dim).tilted(&vec![rng.gen_range(-0.5..0.5); 2 * (dim - 2)])?;
            let r = excess(&fp, &Region::ball(&vec![0.0; dim], 0.4), &frame)?;
            split = split.max(r.split_defect).max((r.e - r.e1 - r.e2).abs() / r.normalized_energy);
        } else {
            let b = bogomolny_split(&fp)?;
            let total = total_energy(&fp, &Region::Full)?;
            bogo = bogo.max((b.flux_term + b.squares + b.boundary_defect - total).abs() / total);
        }
        for (j, k) in pairs(dim) {
            let jv = jacobian_field(&fp, j, k).values;
            jac = jac.max(jv.iter().zip(&e).map(|(a, b)| (a.abs() - b) / b.max(1e-300)).fold(f64::NEG_INFINITY, f64::max));
        }
        let xi = GaugeTransform { xi: (0..spec.num_sites()).map(|_| rng.gen_range(-PI..PI)).collect() };
        let moved = gauge_apply(&fp, &xi)?;
        let rel = |a: &[f64], b: &[f64]| sup(a.iter().zip(b).map(|(x, y)| x - y)) / sup(a.iter().copied()).max(1e-300);
        gauge = gauge.max(rel(&e, &energy_density(&moved).values)).max(rel(&fp.modulus(), &moved.modulus()));
        for (j, k) in pairs(dim) {
            gauge = gauge.max(rel(&jacobian_field(&fp, j, k).values, &jacobian_field(&moved, j, k).values));
            gauge = gauge.max(rel(&curvature_field(&fp, j, k).values, &curvature_field(&moved, j, k).values));
        }
    }
    Ok(outcome(
        split <= 1e-12 && bogo <= 1e-12 && jac <= 1e-12 && gauge <= 1e-12,
        format!("split {split:.1e}, bogomolny {bogo:.1e}, max (|J| - e)/e {jac:.1e}, gauge {gauge:.1e}; all <= 1e-12"),
    ))
}

fn modica_saturation() -> Result<Outcome> {
    // ξ-discrepancy and Modica margins per unit h on two lattices
    let envelope = |h: f64| -> Result<(f64, f64)> {
        let spec = LatticeSpec::cube(2, 8.0, h)?;
        let fp = solve_vortex(&VortexConfig::single([0.0, 0.0], 1.0), &spec)?;
        let d = discrepancy_fields(&fp);
        let g = spec.geometry();
        let inner: Vec<usize> = (0..g.n_sites).filter(|&i| g.depth(i) >= 1).collect();
        let xi = sup(inner.iter().map(|&i| d.discrepancy.values[i]));
        let margin = inner
            .iter()
            .map(|&i| d.margin_curvature.values[i].min(d.margin_gradient.values[i]))
            .fold(f64::INFINITY, f64::min)
            .min(0.0);
        Ok((xi / h, -margin / h))
    };
    let (c1, m1) = envelope(0.1)?;
    let (c2, m2) = envelope(0.05)?;
    Ok(outcome(
        c2 <= 1.5 * c1 && m2 <= 1.5 * m1.max(c1),
        format!("sup|ξ|/h = {c1:.3} (h=0.1), {c2:.3} (h=0.05); negative margin/h = {m1:.3}, {m2:.3}; constants do not grow"),
    ))
}

fn monotonicity() -> Result<Outcome> {
    let h = 0.1;
    let spec = LatticeSpec::new(3, &[6.0, 6.0, 4.5], h)?;
    let planar = LatticeSpec::new(2, &[6.0, 6.0], h)?;
    let fp = product_extension(&solve_vortex(&VortexConfig::single([0.0, 0.0], 1.0), &planar)?, &spec)?;
    let radii: Vec<f64> = (0..=30).map(|k| 1.0 + 0.1 * k as f64).collect();
    let prof = monotonicity_profile(&fp, &[0.0; 3], &radii)?;
    let worst_drop = prof
        .rows
        .windows(2)
        .map(|w| (w[0].normalized_energy - w[1].normalized_energy) / w[1].normalized_energy)
        .fold(f64::NEG_INFINITY, f64::max);
    let el = el_residuals(&fp).el_scalar_sup.max(el_residuals(&fp).el_curvature_sup);
    let mismatch = sup(prof.rows.iter().filter(|r| r.mismatch.is_finite()).map(|r| r.mismatch / r.identity_rhs.abs().max(1.0)));
    Ok(outcome(
        worst_drop <= 1e-3 && mismatch <= h + el,
        format!("max relative drop {worst_drop:.2e} <= 1e-3; identity mismatch {mismatch:.3e} <= h + EL = {:.3e}", h + el),
    ))
}

fn slice_identity() -> Result<Outcome> {
    let spec = LatticeSpec::new(3, &[2.2, 2.2, 0.2], 0.02)?;
    let fp = pullback_pair(&GraphFunction::constant(3, [0.0; 2]), 0.25, &spec)?;
    let defect = |r: f64| -> Result<(f64, usize)> {
        let rows = slice_profile(&fp, &Cylinder::new(&[0.0; 3], PlaneFrame::standard(3), r, 0.1))?;
        let ok: Vec<_> = rows.iter().filter(|r| r.degree.is_some() && r.annulus_min_modulus >= 0.5).collect();
        Ok((sup(ok.iter().map(|r| r.identity_defect)), ok.len()))
    };
    let (d2, n2) = defect(2.0)?;
    let (d1, _) = defect(1.0)?;
    Ok(outcome(
        d2 <= 1e-3 && n2 > 0,
        format!("max defect {d2:.3e} <= 1e-3 over {n2} slices of B²_2 (B²_1 gives {d1:.3e})"),
    ))
}

fn stability() -> Result<Outcome> {
    let spec = LatticeSpec::cube(2, 8.0, 0.1)?;
    let sched = PerturbationSchedule { amplitudes: vec![0.02, 0.04, 0.08], ..PerturbationSchedule::default() };
    let rep = stability_experiment(&VortexConfig::single([0.0, 0.0], 1.0), &spec, &sched)?;
    let c = rep.fitted_constant;
    let bounded = rep.records.iter().all(|r| r.moduli_distance_sq <= c * r.discrepancy * (1.0 + 1e-12));
    let ratios: Vec<f64> = rep.records.windows(2).map(|w| w[1].moduli_distance_sq / w[0].moduli_distance_sq).collect();
    let scaling = ratios.iter().all(|r| (2.8..=5.7).contains(r));
    Ok(outcome(
        bounded && scaling && c.is_finite() && c > 0.0,
        format!("fitted C = {c:.4}; distance ratios {ratios:.3?} in [2.8, 5.7]"),
    ))
}

fn pullback_expansion() -> Result<Outcome> {
    let spec = LatticeSpec::new(3, &[1.5, 1.5, 1.1], 0.05)?;
    let eps = 0.1;
    let flat = pullback_energy_audit(&GraphFunction::constant(3, [0.0; 2]), eps, &spec)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for eta in [0.05, 0.1, 0.2] {
        let a = pullback_energy_audit(&GraphFunction::linear(3, [0.0; 2], vec![[eta, 0.0]]), eps, &spec)?;
        let floor = flat.correction.abs() * a.dirichlet_term / flat.area_term;
        let excess = (a.correction - flat.correction).abs();
        let bound = 0.15 * 2.0 * a.dirichlet_term * a.eta * a.eta + floor;
        pass &= excess <= bound;
        parts.push(format!("η={eta}: {excess:.2e} <= {bound:.2e}"));
    }
    Ok(outcome(pass, format!("{} (quadrature floor from the flat graph, correction {:.3e})", parts.join(", "), flat.correction)))
}

fn decay() -> Result<Outcome> {
    let spec = LatticeSpec::cube(4, 1.1, 0.05)?;
    let eps = 0.1;
    let base = DecayConfig { initial_radius: 1.0, rho: 0.5, levels: 3, ..DecayConfig::default() };
    let run = |fp: &FieldPair, cfg: &DecayConfig| decay_experiment(fp, &[0.0; 4], &PlaneFrame::standard(4), cfg);
    // ε-floor fitted once on an off-lattice straight sheet
    let straight_frame = PlaneFrame::standard(4).tilted(&[0.1, 0.0, 0.0, 0.05])?;
    let straight = plane_pair(&straight_frame, &[0.0; 4], eps, &spec)?;
    let cal = decay_experiment(&straight, &[0.0; 4], &straight_frame, &base)?;
    let floor = calibrate_floor(&cal, base.floor.k);
    let cfg = DecayConfig { floor, ..base.clone() };
    let tilt_constant = |t: &DecayTable| {
        t.rows.iter().skip(1).filter(|r| r.e1 > 0.0).map(|r| r.tilt / r.e1.sqrt()).fold(0.0, f64::max)
    };
    let c_tilt = tilt_constant(&run(&pullback_pair(&GraphFunction::harmonic(4, 0.05)?, eps, &spec)?, &cfg)?)
        .max(tilt_constant(&cal));
    let table = run(&pullback_pair(&GraphFunction::harmonic(4, 0.1)?, eps, &spec)?, &cfg)?;
    let mut pass = true;
    let mut above_floor = true;
    let mut ratios = Vec::new();
    for w in table.rows.windows(2) {
        above_floor &= w[0].e1 > w[0].floor;
        if above_floor {
            pass &= w[1].ratio <= 0.5;
            ratios.push(w[1].ratio);
        }
        pass &= w[1].tilt <= c_tilt * w[1].e1.sqrt() + 1e-12;
    }
    Ok(outcome(
        pass,
        format!(
            "ratios above floor {ratios:.3?} <= 0.5; floor C = {:.3e}; tilts {:.2e} <= {c_tilt:.2e}·√E1",
            floor.c,
            sup(table.rows.iter().map(|r| r.tilt))
        ),
    ))
}

fn gauge_audits() -> Result<Outcome> {
    let opts = GaffneyOptions::default();
    let est = gaffney_schedule(3, &[1.0, 0.5, 0.25, 0.125], &opts)?;
    let max = est.iter().map(|e| e.constant).fold(0.0, f64::max);
    let min = est.iter().map(|e| e.constant).fold(f64::INFINITY, f64::min);
    let gaffney_c = est[0].constant;
    let spec = LatticeSpec::new(3, &[1.3, 1.3, 0.8], 0.05)?;
    let eps = 0.1;
    let target = pullback_pair(&GraphFunction::constant(3, [0.0; 2]), eps, &spec)?;
    let psi = GaugeTransform::from_fn(&spec, |x| 0.3 * (x[0] + 2.0 * x[2]).sin() + 0.2 * x[1]);
    let cyl = Cylinder::new(&[0.0; 3], PlaneFrame::standard(3), 1.0, 0.3);
    let (mut worst_gaffney, mut worst_envelope) = (0.0f64, 0.0f64);
    for t in [0.05, 0.1, 0.2] {
        let bent = plane_pair(&PlaneFrame::standard(3).tilted(&[t, 0.0])?, &[0.0; 3], eps, &spec)?;
        let bent = gauge_apply(&bent, &psi)?;
        let fix = coulomb_fix(&bent, &target, &cyl, 0.6)?;
        worst_gaffney = worst_gaffney.max(fix.gaffney_ratio);
        let ig = interpolation_gauge(&bent, &target, &AxialAnnulus { s: 0.1, delta: 0.2 }, &InterpolationParams::default())?;
        worst_envelope = worst_envelope.max(ig.audit.integral / ig.audit.envelope);
    }
    Ok(outcome(
        max / min <= 3.0 && worst_gaffney <= gaffney_c && worst_envelope <= 1.0,
        format!(
            "Gaffney max/min {:.3} <= 3; coulomb ‖α−α_h‖²/(R²‖dα−dα_h‖²) {worst_gaffney:.3e} <= C_G = {gaffney_c:.3}; interpolation integral/envelope {worst_envelope:.3e} <= 1",
            max / min
        ),
    ))
}

fn variance() -> Result<Outcome> {
    let v0 = variance_constant()?;
    let v_half = variance_constant_with_step(5e-4)?;
    let mesh = (v0 - v_half).abs();
    let eps = 0.25;
    let spec = LatticeSpec::new(3, &[4.2, 4.2, 0.2], 0.04)?;
    let fp = pullback_pair(&GraphFunction::constant(3, [0.0; 2]), eps, &spec)?;
    let cyl = Cylinder::new(&[0.0; 3], PlaneFrame::standard(3), 4.0, 0.1);
    let centered = variance_of_slice(&fp, &cyl, &[0], [0.0, 0.0], [0.0, 0.0], 0.0)?;
    let rel = (centered.variance - eps * eps * v0).abs() / (eps * eps * v0);
    let offset = 0.1;
    let shifted = variance_of_slice(&fp, &cyl, &[0], [offset, 0.0], [0.0, 0.0], 0.0)?;
    let added = (shifted.variance - centered.variance) / (offset * offset);
    let shift_rel = (added - 1.0).abs();
    let oracle = radial_profile_oracle(1, 1.0)?;
    Ok(outcome(
        mesh <= 1e-6 && rel <= 0.01 && shift_rel <= 0.01,
        format!(
            "v0 = {v0:.10} (mesh doubling {mesh:.1e} <= 1e-6, oracle energy {:.6}); slice variance rel err {rel:.2e} <= 1e-2; recentering adds {added:.4}·offset² (err {shift_rel:.2e} <= 1e-2)",
            oracle.energy()
        ),
    ))
}

fn determinism() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut exact = true;
    for dim in 2..=4 {
        let fp = random_pair(&LatticeSpec::cube(dim, 0.3, 0.1)?.with_periodic(dim - 1)?, 0.37, &mut rng);
        let back = decode_snapshot(&encode_snapshot(&fp)?)?;
        exact &= back.spec == fp.spec
            && back.eps.to_bits() == fp.eps.to_bits()
            && back.u.iter().zip(&fp.u).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits())
            && back.alpha.iter().flatten().zip(fp.alpha.iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits());
    }
    let text = "[lattice]\ndim = 3\nextent = 3, 3, 1\nspacing = 0.1\n[init]\nkind = product\neps = 0.5\n[monotonicity]\nradii = 0.5, 0.8\n";
    let dir = tempfile::tempdir()?;
    let a = run_experiment(Experiment::Diagnose, &Config::parse(text)?, &dir.path().join("a"))?;
    let b = run_experiment(Experiment::Diagnose, &Config::parse(text)?, &dir.path().join("b"))?;
    let mut same = a.manifest.hash() == b.manifest.hash();
    for name in a.manifest.outputs.iter().filter(|n| n.ends_with(".csv")) {
        same &= std::fs::read(a.dir.join(name))? == std::fs::read(b.dir.join(name))?;
    }
    Ok(outcome(
        exact && same,
        format!("snapshot bit-exact: {exact}; {} CSVs identical across runs: {same}", a.manifest.outputs.len()),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 11] = [
        ("quantization", quantization),
        ("algebraic identities", algebraic_identities),
        ("Modica saturation", modica_saturation),
        ("monotonicity", monotonicity),
        ("slice identity", slice_identity),
        ("stability scaling", stability),
        ("pullback expansion", pullback_expansion),
        ("excess decay", decay),
        ("gauge audits", gauge_audits),
        ("variance constant", variance),
        ("determinism and round-trip", determinism),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 11 passed in {:.0}s", 11 - failed, start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
