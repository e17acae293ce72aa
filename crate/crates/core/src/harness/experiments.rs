//! Experiment runners behind the command-line subcommands.
//!
//! Every runner reads a [`Config`], writes snapshots and CSV tables into a
//! run directory and finishes with `manifest.json`.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use super::config::Config;
use super::manifest::{RunManifest, Table};
use super::snapshot::{read_snapshot, write_snapshot};
use crate::competitor::{plane_pair, pullback_energy_audit, pullback_pair, variance_constant, GraphFunction};
use crate::error::{Error, Result};
use crate::excess::{
    classify_slices, decay_experiment, excess, minimize_over_planes, slice_profile, DecayConfig, FloorModel,
    PlaneFrame, PlaneSearch,
};
use crate::gauge::{coulomb_fix, gaffney_schedule, interpolation_gauge, AxialAnnulus, GaffneyOptions, InterpolationParams};
use crate::lattice::{discrepancy_fields, el_residuals, total_energy, Cylinder, FieldPair, LatticeSpec, Region};
use crate::relax::{
    monotonicity_profile, product_extension, relax, Boundary, DescentConfig, DescentMethod, Initializer, RelaxConfig,
};
use crate::vortex2d::{
    bogomolny_split, solve_vortex_detailed, stability_experiment, vortex_number, NewtonConfig, PerturbationSchedule,
    VortexConfig, Zero,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Experiment {
    SolveVortex,
    Relax,
    Diagnose,
    Excess,
    Slices,
    Decay,
    Stability,
    CompetitorAudit,
    GaugeAudit,
    Gaffney,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::SolveVortex,
        Experiment::Relax,
        Experiment::Diagnose,
        Experiment::Excess,
        Experiment::Slices,
        Experiment::Decay,
        Experiment::Stability,
        Experiment::CompetitorAudit,
        Experiment::GaugeAudit,
        Experiment::Gaffney,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::SolveVortex => "solve-vortex",
            Experiment::Relax => "relax",
            Experiment::Diagnose => "diagnose",
            Experiment::Excess => "excess",
            Experiment::Slices => "slices",
            Experiment::Decay => "decay",
            Experiment::Stability => "stability",
            Experiment::CompetitorAudit => "competitor-audit",
            Experiment::GaugeAudit => "gauge-audit",
            Experiment::Gaffney => "gaffney",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

/// Outcome of one numerical assertion, `value ≤ bound`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub checks: Vec<Check>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

struct Run<'a> {
    cfg: &'a Config,
    dir: PathBuf,
    manifest: RunManifest,
    hash: Option<String>,
    checks: Vec<Check>,
}

impl<'a> Run<'a> {
    fn new(exp: Experiment, cfg: &'a Config, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let mut manifest = RunManifest::new(exp.name(), &cfg.hash());
        manifest.seed = cfg.get_or("run", "seed", 0u64)?;
        Ok(Run { cfg, dir: dir.to_path_buf(), manifest, hash: None, checks: Vec::new() })
    }

    fn describe(&mut self, fp: &FieldPair) {
        self.manifest.lattice = Some(fp.spec.clone());
        self.manifest.eps = Some(fp.eps);
    }

    /// Freezes the manifest inputs; later outputs carry this hash.
    fn hash(&mut self) -> String {
        self.hash.get_or_insert_with(|| self.manifest.hash()).clone()
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        let hash = self.hash();
        t.write(&self.dir.join(name), &hash)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn snapshot(&mut self, name: &str, fp: &FieldPair) -> Result<()> {
        write_snapshot(&self.dir.join(name), fp)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn check(&mut self, name: &str, value: f64, bound: f64) {
        self.checks.push(Check { name: name.to_string(), value, bound, pass: value <= bound });
    }

    fn finish(mut self) -> Result<RunSummary> {
        self.cfg.finish()?;
        let hash = self.hash();
        debug_assert_eq!(hash, self.manifest.hash(), "manifest inputs changed after the first output");
        let mut t = Table::new(&["check", "value", "bound", "pass"]);
        for c in &self.checks {
            t.push([c.name.clone(), c.value.to_string(), c.bound.to_string(), c.pass.to_string()]);
        }
        t.write(&self.dir.join("checks.csv"), &hash)?;
        self.manifest.outputs.push("checks.csv".into());
        self.manifest.outputs.push("manifest.json".into());
        self.manifest.write(&self.dir.join("manifest.json"))?;
        Ok(RunSummary { dir: self.dir, manifest: self.manifest, checks: self.checks })
    }
}

/// Runs one experiment into `dir`.
pub fn run_experiment(exp: Experiment, cfg: &Config, dir: &Path) -> Result<RunSummary> {
    let mut run = Run::new(exp, cfg, dir)?;
    match exp {
        Experiment::SolveVortex => solve_vortex_run(&mut run)?,
        Experiment::Relax => relax_run(&mut run)?,
        Experiment::Diagnose => diagnose_run(&mut run)?,
        Experiment::Excess => excess_run(&mut run)?,
        Experiment::Slices => slices_run(&mut run)?,
        Experiment::Decay => decay_run(&mut run)?,
        Experiment::Stability => stability_run(&mut run)?,
        Experiment::CompetitorAudit => competitor_run(&mut run)?,
        Experiment::GaugeAudit => gauge_run(&mut run)?,
        Experiment::Gaffney => gaffney_run(&mut run)?,
    }
    run.finish()
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

/// `[lattice]`: `dim`, `extent` (one value or one per axis), `spacing`,
/// optional `origin` and `periodic` (axis list).
pub fn lattice_from(cfg: &Config) -> Result<LatticeSpec> {
    let dim: usize = cfg.require("lattice", "dim")?;
    let mut extent: Vec<f64> = cfg.list("lattice", "extent")?.ok_or_else(|| cfg_err("missing lattice.extent"))?;
    if extent.len() == 1 {
        extent = vec![extent[0]; dim];
    }
    let spacing: f64 = cfg.require("lattice", "spacing")?;
    let mut spec = LatticeSpec::new(dim, &extent, spacing)?;
    if let Some(origin) = cfg.list::<f64>("lattice", "origin")? {
        spec = spec.with_origin(&origin)?;
    }
    for a in cfg.list_or::<usize>("lattice", "periodic", Vec::new())? {
        spec = spec.with_periodic(a)?;
    }
    Ok(spec)
}

fn vortex_config(cfg: &Config, section: &str, eps: f64) -> Result<VortexConfig> {
    let zeros = cfg.records(section, "zeros")?.unwrap_or_else(|| vec![vec![0.0, 0.0, 1.0]]);
    let zeros = zeros
        .into_iter()
        .map(|r| match r.as_slice() {
            [x, y] => Ok(Zero { position: [*x, *y], multiplicity: 1 }),
            [x, y, m] if *m >= 1.0 && m.fract() == 0.0 => Ok(Zero { position: [*x, *y], multiplicity: *m as u32 }),
            _ => Err(cfg_err(format!("{section}.zeros records are `x, y[, multiplicity]`"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let d = NewtonConfig::default();
    Ok(VortexConfig {
        zeros,
        sign: cfg.get_or(section, "sign", 1)?,
        eps,
        solver: NewtonConfig {
            newton_tol: cfg.get_or(section, "newton_tol", d.newton_tol)?,
            max_iter: cfg.get_or(section, "newton_max_iter", d.max_iter)?,
            damping: cfg.get_or(section, "damping", d.damping)?,
        },
    })
}

/// Builds a pair from a `[init]`-style section: `snapshot = path`, or
/// `kind` ∈ {taubes, product, pullback, linear, plane} with `eps` and the
/// kind's parameters.
pub fn pair_from(cfg: &Config, section: &str) -> Result<FieldPair> {
    if let Some(path) = cfg.get::<String>(section, "snapshot")? {
        return read_snapshot(Path::new(&path));
    }
    let spec = lattice_from(cfg)?;
    let n = spec.dim;
    let eps: f64 = cfg.require(section, "eps")?;
    let kind: String = cfg.get_or(section, "kind", "taubes".to_string())?;
    match kind.as_str() {
        "taubes" => {
            if n != 2 {
                return Err(Error::DimensionMismatch { expected: 2, found: n });
            }
            Ok(solve_vortex_detailed(&vortex_config(cfg, section, eps)?, &spec)?.pair)
        }
        "product" => {
            let planar = LatticeSpec::new(2, &spec.extents[..2], spec.spacing)?.with_origin(&spec.origin[..2])?;
            let fp2 = solve_vortex_detailed(&vortex_config(cfg, section, eps)?, &planar)?.pair;
            product_extension(&fp2, &spec)
        }
        "pullback" => {
            let t: f64 = cfg.get_or(section, "amplitude", 0.0)?;
            pullback_pair(&GraphFunction::harmonic(n, t)?, eps, &spec)
        }
        "linear" => {
            let slope = cfg.records(section, "slopes")?.ok_or_else(|| cfg_err(format!("missing {section}.slopes")))?;
            let slope = slope
                .into_iter()
                .map(|r| <[f64; 2]>::try_from(r.as_slice()).map_err(|_| cfg_err("slopes records are `a, b`")))
                .collect::<Result<Vec<_>>>()?;
            if slope.len() != n - 2 {
                return Err(Error::DimensionMismatch { expected: n - 2, found: slope.len() });
            }
            pullback_pair(&GraphFunction::linear(n, [0.0; 2], slope), eps, &spec)
        }
        "plane" => {
            let tilt = cfg.list_or(section, "tilt", vec![0.0; 2 * (n - 2)])?;
            let point = cfg.list_or(section, "point", vec![0.0; n])?;
            plane_pair(&PlaneFrame::standard(n).tilted(&tilt)?, &point, eps, &spec)
        }
        other => Err(cfg_err(format!("unknown {section}.kind `{other}`"))),
    }
}

fn descent_from(cfg: &Config, section: &str, base: DescentConfig) -> Result<DescentConfig> {
    let method = match cfg.get_or(section, "method", "cg".to_string())?.as_str() {
        "cg" => DescentMethod::NonlinearCg,
        "flow" => DescentMethod::GradientFlow,
        other => return Err(cfg_err(format!("unknown {section}.method `{other}`"))),
    };
    Ok(DescentConfig {
        method,
        step: cfg.get_or(section, "step", base.step)?,
        tol: cfg.get_or(section, "tol", base.tol)?,
        max_iter: cfg.get_or(section, "max_iter", base.max_iter)?,
        coulomb_every: cfg.get_or(section, "coulomb_every", base.coulomb_every)?,
    })
}

fn frame_from(cfg: &Config, section: &str, n: usize) -> Result<PlaneFrame> {
    let tilt = cfg.list_or(section, "tilt", vec![0.0; 2 * (n - 2)])?;
    let frame = PlaneFrame::standard(n).tilted(&tilt)?;
    Ok(if cfg.get_or(section, "flipped", false)? { frame.flipped() } else { frame })
}

fn region_from(cfg: &Config, section: &str, n: usize) -> Result<Region> {
    let center = cfg.list_or(section, "center", vec![0.0; n])?;
    if center.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: center.len() });
    }
    let radius: f64 = cfg.get_or(section, "radius", 1.0)?;
    match cfg.get_or(section, "kind", "ball".to_string())?.as_str() {
        "ball" => Ok(Region::ball(&center, radius)),
        "cylinder" => {
            let half: f64 = cfg.get_or(section, "half_length", 1.0)?;
            Ok(Region::Cylinder(Cylinder::new(&center, frame_from(cfg, section, n)?, radius, half)))
        }
        "full" => Ok(Region::Full),
        other => Err(cfg_err(format!("unknown {section}.kind `{other}`"))),
    }
}

fn search_from(cfg: &Config) -> Result<PlaneSearch> {
    let d = PlaneSearch::default();
    Ok(PlaneSearch {
        half_range: cfg.get_or("search", "half_range", d.half_range)?,
        grid_points: cfg.get_or("search", "grid_points", d.grid_points)?,
        sweeps: cfg.get_or("search", "sweeps", d.sweeps)?,
        tol: cfg.get_or("search", "tol", d.tol)?,
    })
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn solve_vortex_run(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let spec = lattice_from(cfg)?;
    let eps: f64 = cfg.require("vortex", "eps")?;
    let vc = vortex_config(cfg, "vortex", eps)?;
    let tol = cfg.get_or("check", "quantization_tol", 0.01)?;
    run.manifest.tolerances.insert("newton_tol".into(), vc.solver.newton_tol);
    run.manifest.tolerances.insert("quantization_tol".into(), tol);
    let sol = solve_vortex_detailed(&vc, &spec)?;
    run.describe(&sol.pair);
    let energy = total_energy(&sol.pair, &Region::Full)?;
    let expected = TAU * vc.total_multiplicity() as f64;
    let rel = (energy - expected).abs() / expected;
    let nv = vortex_number(&sol.pair)?;
    let res = el_residuals(&sol.pair);
    run.snapshot("pair.vxls", &sol.pair)?;
    let mut t = Table::new(&[
        "energy",
        "expected",
        "rel_error",
        "vortex_number",
        "newton_residual",
        "newton_iterations",
        "el_scalar_sup",
        "el_curvature_sup",
    ]);
    t.push([
        energy.to_string(),
        expected.to_string(),
        rel.to_string(),
        nv.to_string(),
        sol.residual.to_string(),
        sol.iterations.to_string(),
        res.el_scalar_sup.to_string(),
        res.el_curvature_sup.to_string(),
    ]);
    run.table("energy.csv", &t)?;
    run.check("quantization", rel, tol);
    Ok(())
}

fn relax_run(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let init = pair_from(cfg, "init")?;
    run.describe(&init);
    let descent = descent_from(cfg, "relax", DescentConfig::default())?;
    let axes = cfg.list_or::<usize>("relax", "periodic_axes", Vec::new())?;
    let boundary = if axes.is_empty() { Boundary::Dirichlet } else { Boundary::Periodic { axes } };
    let initializer = match cfg.raw("init", "kind").map(|(v, _)| v.to_string()).as_deref() {
        Some("pullback") => Initializer::Pullback { amplitude: cfg.get_or("init", "amplitude", 0.0)? },
        _ if cfg.contains("init", "snapshot") => Initializer::Snapshot { path: cfg.require("init", "snapshot")? },
        _ => Initializer::ProductExtension,
    };
    run.manifest.tolerances.insert("descent_tol".into(), descent.tol);
    let rc = RelaxConfig { boundary, initializer, descent };
    let out = relax(&init, &rc)?;
    let mut t = Table::new(&["iteration", "energy", "gradient_norm", "step"]);
    for e in &out.log {
        t.push([e.iteration.to_string(), e.energy.to_string(), e.gradient_norm.to_string(), e.step.to_string()]);
    }
    run.table("log.csv", &t)?;
    run.snapshot("relaxed.vxls", &out.pair)?;
    run.table("residuals.csv", &residual_table(&out.residuals))?;
    if !out.converged {
        let last = out.log.last().map_or(f64::NAN, |e| e.gradient_norm);
        return Err(Error::NonConvergence { iterations: out.log.len().saturating_sub(1), residual: last });
    }
    Ok(())
}

fn residual_table(r: &crate::lattice::ResidualReport) -> Table {
    let mut t = Table::new(&[
        "el_scalar_sup",
        "el_scalar_l2",
        "el_curvature_sup",
        "el_curvature_l2",
        "stress_energy_divergence",
        "sites_checked",
    ]);
    t.push([
        r.el_scalar_sup.to_string(),
        r.el_scalar_l2.to_string(),
        r.el_curvature_sup.to_string(),
        r.el_curvature_l2.to_string(),
        r.stress_energy_divergence.to_string(),
        r.sites_checked.to_string(),
    ]);
    t
}

fn diagnose_run(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let fp = pair_from(cfg, "init")?;
    run.describe(&fp);
    let n = fp.dim();
    let energy = total_energy(&fp, &Region::Full)?;
    let mut t = Table::new(&["energy", "vortex_number", "flux_term", "squares", "boundary_defect"]);
    if n == 2 {
        let b = bogomolny_split(&fp)?;
        t.push([
            energy.to_string(),
            b.vortex_number.to_string(),
            b.flux_term.to_string(),
            b.squares.to_string(),
            b.boundary_defect.to_string(),
        ]);
    } else {
        t.push([energy.to_string(), "".into(), "".into(), "".into(), "".into()]);
    }
    run.table("energy.csv", &t)?;
    let d = discrepancy_fields(&fp);
    let g = fp.geometry();
    let interior = g.interior_sites();
    let sup = |v: &[f64]| interior.iter().map(|&i| v[i].abs()).fold(0.0, f64::max);
    let min = |v: &[f64]| interior.iter().map(|&i| v[i]).fold(f64::INFINITY, f64::min);
    let mut t = Table::new(&["discrepancy_sup", "margin_curvature_min", "margin_gradient_min", "violations"]);
    t.push([
        sup(&d.discrepancy.values).to_string(),
        min(&d.margin_curvature.values).to_string(),
        min(&d.margin_gradient.values).to_string(),
        d.violations.len().to_string(),
    ]);
    run.table("modica.csv", &t)?;
    run.table("el.csv", &residual_table(&el_residuals(&fp)))?;
    if let Some(radii) = cfg.list::<f64>("monotonicity", "radii")? {
        let center = cfg.list_or("monotonicity", "center", vec![0.0; n])?;
        let prof = monotonicity_profile(&fp, &center, &radii)?;
        let mut t = Table::new(&["r", "normalized_energy", "derivative", "identity_rhs", "mismatch"]);
        for r in &prof.rows {
            t.push([r.r, r.normalized_energy, r.derivative, r.identity_rhs, r.mismatch].map(|v| v.to_string()));
        }
        run.table("monotonicity.csv", &t)?;
        let drop = prof
            .rows
            .windows(2)
            .map(|w| (w[0].normalized_energy - w[1].normalized_energy) / w[0].normalized_energy.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        let tol = cfg.get_or("check", "monotonicity_tol", 1e-3)?;
        run.check("monotone_normalized_energy", drop, tol);
    }
    Ok(())
}

fn excess_run(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let fp = pair_from(cfg, "init")?;
    run.describe(&fp);
    let n = fp.dim();
    let region = region_from(cfg, "region", n)?;
    let frame = frame_from(cfg, "frame", n)?;
    let (report, budget) = if cfg.get_or("search", "enabled", false)? {
        let r = minimize_over_planes(&fp, &region, &frame, &search_from(cfg)?)?;
        (r.report, r.budget_exhausted)
    } else {
        (excess(&fp, &region, &frame)?, false)
    };
    let mut t = Table::new(&["normalized_energy", "E", "E1", "E2", "split_defect", "frame", "budget_exhausted"]);
    let basis: Vec<f64> = report.frame.basis().iter().flatten().copied().collect();
    t.push([
        report.normalized_energy.to_string(),
        report.e.to_string(),
        report.e1.to_string(),
        report.e2.to_string(),
        report.split_defect.to_string(),
        fmt_list(&basis),
        budget.to_string(),
    ]);
    run.table("excess.csv", &t)?;
    let tol = cfg.get_or("check", "split_tol", 1e-10)?;
    run.check("split_identity", report.split_defect, tol);
    Ok(())
}

fn cylinder_from(cfg: &Config, section: &str, n: usize) -> Result<Cylinder> {
    match region_from(cfg, section, n)? {
        Region::Cylinder(c) => Ok(c),
        _ => Err(cfg_err(format!("{section}.kind must be `cylinder`"))),
    }
}

fn slices_run(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let fp = pair_from(cfg, "init")?;
    run.describe(&fp);
    let n = fp.dim();
    let cyl = cylinder_from(cfg, "region", n)?;
    let eta: f64 = cfg.get_or("slices", "eta", 0.3)?;
    let tol = cfg.get_or("check", "identity_tol", 1e-3)?;
    run.manifest.tolerances.insert("identity_tol".into(), tol);
    let rows = slice_profile(&fp, &cyl)?;
    let mut t = Table::new(&[
        "index",
        "z",
        "E_z",
        "E1_z",
        "E2_z",
        "slice_energy",
        "flux",
        "degree",
        "barycenter",
        "identity_defect",
        "annulus_min_modulus",
    ]);
    for r in &rows {
        t.push([
            r.index.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "),
            fmt_list(&r.z),
            r.e.to_string(),
            r.e1.to_string(),
            r.e2.to_string(),
            r.slice_energy.to_string(),
            r.flux.to_string(),
            r.degree.map_or(String::new(), |d| d.to_string()),
            fmt_list(&r.barycenter),
            r.identity_defect.to_string(),
            r.annulus_min_modulus.to_string(),
        ]);
    }
    run.table("slices.csv", &t)?;
    let report = excess(&fp, &Region::Cylinder(cyl.clone()), &cyl.frame)?;
    let cls = classify_slices(&report, eta)?;
    let mut t = Table::new(&["index", "maximal_function", "good"]);
    for ((idx, m), good) in cls.index.iter().zip(&cls.maximal_fn).zip(&cls.good_set) {
        t.push([idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "), m.to_string(), good.to_string()]);
    }
    run.table("classification.csv", &t)?;
    let worst = rows
        .iter()
        .filter(|r| r.degree.is_some() && r.annulus_min_modulus >= 0.5)
        .map(|r| r.identity_defect)
        .fold(0.0, f64::max);
    run.check("slice_identity", worst, tol);
    Ok(())
}

fn decay_run(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let fp = pair_from(cfg, "init")?;
    run.describe(&fp);
    let n = fp.dim();
    let d = DecayConfig::default();
    let dc = DecayConfig {
        initial_radius: cfg.get_or("decay", "initial_radius", d.initial_radius)?,
        rho: cfg.get_or("decay", "rho", d.rho)?,
        levels: cfg.get_or("decay", "levels", d.levels)?,
        min_radius_eps: cfg.get_or("decay", "min_radius_eps", d.min_radius_eps)?,
        decay_constant: cfg.get_or("decay", "decay_constant", d.decay_constant)?,
        floor: FloorModel { c: cfg.get_or("decay", "floor_c", d.floor.c)?, k: cfg.get_or("decay", "floor_k", d.floor.k)? },
        search: search_from(cfg)?,
    };
    run.manifest.constants.insert("floor_c".into(), dc.floor.c);
    run.manifest.constants.insert("floor_k".into(), dc.floor.k);
    run.manifest.constants.insert("decay_constant".into(), dc.decay_constant);
    let center = cfg.list_or("decay", "center", vec![0.0; n])?;
    let frame = frame_from(cfg, "frame", n)?;
    let table = decay_experiment(&fp, &center, &frame, &dc)?;
    let mut t = Table::new(&["level", "radius", "E", "E1", "E2", "tilt", "alternative", "ratio", "floor"]);
    for r in &table.rows {
        t.push([
            r.level.to_string(),
            r.radius.to_string(),
            r.e.to_string(),
            r.e1.to_string(),
            r.e2.to_string(),
            r.tilt.to_string(),
            r.alternative.as_str().to_string(),
            r.ratio.to_string(),
            r.floor.to_string(),
        ]);
    }
    run.table("decay.csv", &t)?;
    let neither = table.rows.iter().filter(|r| r.alternative == crate::excess::Alternative::Neither).count();
    run.check("levels_without_alternative", neither as f64, 0.0);
    Ok(())
}

fn stability_run(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let spec = lattice_from(cfg)?;
    let eps: f64 = cfg.require("vortex", "eps")?;
    let vc = vortex_config(cfg, "vortex", eps)?;
    let d = PerturbationSchedule::default();
    let sched = PerturbationSchedule {
        amplitudes: cfg.list_or("stability", "amplitudes", d.amplitudes.clone())?,
        modulus_center: <[f64; 2]>::try_from(cfg.list_or("stability", "modulus_center", d.modulus_center.to_vec())?.as_slice())
            .map_err(|_| cfg_err("stability.modulus_center needs two values"))?,
        form_center: <[f64; 2]>::try_from(cfg.list_or("stability", "form_center", d.form_center.to_vec())?.as_slice())
            .map_err(|_| cfg_err("stability.form_center needs two values"))?,
        bump_radius: cfg.get_or("stability", "bump_radius", d.bump_radius)?,
        form_weight: cfg.get_or("stability", "form_weight", d.form_weight)?,
        base_descent: descent_from(cfg, "stability", d.base_descent.clone())?,
        search_cells: cfg.get_or("stability", "search_cells", d.search_cells)?,
    };
    run.manifest.lattice = Some(spec.clone());
    run.manifest.eps = Some(eps);
    let rep = stability_experiment(&vc, &spec, &sched)?;
    let mut t = Table::new(&["amplitude", "energy", "discrepancy", "moduli_distance_sq", "translation", "fitted_constant"]);
    for r in &rep.records {
        t.push([
            r.amplitude.to_string(),
            r.energy.to_string(),
            r.discrepancy.to_string(),
            r.moduli_distance_sq.to_string(),
            fmt_list(&r.translation),
            r.fitted_constant.to_string(),
        ]);
    }
    let bound = cfg.get::<f64>("check", "stability_constant")?;
    if let Some(c) = bound {
        run.manifest.constants.insert("stability_constant".into(), c);
    }
    run.table("stability.csv", &t)?;
    if let Some(c) = bound {
        run.check("stability_constant", rep.fitted_constant, c);
    }
    Ok(())
}

fn competitor_run(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let spec = lattice_from(cfg)?;
    let n = spec.dim;
    let eps: f64 = cfg.require("competitor", "eps")?;
    let f = match cfg.get_or("competitor", "kind", "harmonic".to_string())?.as_str() {
        "harmonic" => GraphFunction::harmonic(n, cfg.get_or("competitor", "amplitude", 0.0)?)?,
        "linear" => {
            let s = cfg.records("competitor", "slopes")?.ok_or_else(|| cfg_err("missing competitor.slopes"))?;
            let s = s
                .into_iter()
                .map(|r| <[f64; 2]>::try_from(r.as_slice()).map_err(|_| cfg_err("slopes records are `a, b`")))
                .collect::<Result<Vec<_>>>()?;
            GraphFunction::linear(n, [0.0; 2], s)
        }
        other => return Err(cfg_err(format!("unknown competitor.kind `{other}`"))),
    };
    run.manifest.lattice = Some(spec.clone());
    run.manifest.eps = Some(eps);
    let a = pullback_energy_audit(&f, eps, &spec)?;
    // the flat graph on the same lattice measures the quadrature floor
    let flat = pullback_energy_audit(&GraphFunction::constant(n, [0.0; 2]), eps, &spec)?;
    let v0 = variance_constant()?;
    let mut t = Table::new(&[
        "eta",
        "energy",
        "area_term",
        "dirichlet_term",
        "correction",
        "flat_correction",
        "identity_mismatch",
        "tube_tail",
        "planar_tail",
        "v0",
    ]);
    t.push([
        a.eta.to_string(),
        a.energy.to_string(),
        a.area_term.to_string(),
        a.dirichlet_term.to_string(),
        a.correction.to_string(),
        flat.correction.to_string(),
        fmt_list(&a.identity_mismatch),
        a.tube_tail.to_string(),
        a.planar_tail.to_string(),
        v0.to_string(),
    ]);
    let c = cfg.get_or("check", "correction_constant", 0.15)?;
    run.manifest.constants.insert("correction_constant".into(), c);
    run.table("competitor.csv", &t)?;
    let floor = flat.correction.abs() * a.dirichlet_term / flat.area_term;
    let excess = (a.correction - flat.correction).abs();
    run.check("pullback_correction", excess, c * 2.0 * a.dirichlet_term * a.eta * a.eta + floor);
    Ok(())
}

fn gauge_run(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let fp = pair_from(cfg, "init")?;
    let target = pair_from(cfg, "target")?;
    run.describe(&fp);
    let n = fp.dim();
    let cyl = cylinder_from(cfg, "region", n)?;
    let inner: f64 = cfg.get_or("gauge", "annulus_inner", 0.5 * cyl.radius)?;
    let fix = coulomb_fix(&fp, &target, &cyl, inner)?;
    let mut t = Table::new(&[
        "compatibility_defect",
        "residual",
        "mean_defect",
        "solver_residual",
        "form_distance",
        "curvature_distance",
        "gaffney_ratio",
    ]);
    t.push(
        [
            fix.compatibility_defect,
            fix.residual,
            fix.mean_defect,
            fix.solver_residual,
            fix.form_distance,
            fix.curvature_distance,
            fix.gaffney_ratio,
        ]
        .map(|v| v.to_string()),
    );
    let d = InterpolationParams::default();
    let params = InterpolationParams {
        c0: cfg.get_or("gauge", "c0", d.c0)?,
        eta0: cfg.get_or("gauge", "eta0", d.eta0)?,
        beta: cfg.get_or("gauge", "beta", d.beta)?,
    };
    let ann = AxialAnnulus { s: cfg.get_or("gauge", "s", 0.1)?, delta: cfg.get_or("gauge", "delta", 0.2)? };
    let gaffney_c = cfg.get_or("gauge", "gaffney_constant", 1.0)?;
    let envelope_c = cfg.get_or("gauge", "envelope_constant", 1.0)?;
    run.manifest.constants.insert("c0".into(), params.c0);
    run.manifest.constants.insert("eta0".into(), params.eta0);
    run.manifest.constants.insert("beta".into(), params.beta);
    run.manifest.constants.insert("gaffney_constant".into(), gaffney_c);
    run.manifest.constants.insert("envelope_constant".into(), envelope_c);
    run.table("coulomb.csv", &t)?;
    let ig = interpolation_gauge(&fp, &target, &ann, &params)?;
    let mut t = Table::new(&["cylinder", "y", "z", "excess", "good", "gaffney_ratio"]);
    for (k, c) in ig.cover.iter().enumerate() {
        t.push([
            (k + 1).to_string(),
            fmt_list(&c.y),
            fmt_list(&c.z),
            c.excess.to_string(),
            c.good.to_string(),
            c.gaffney_ratio.to_string(),
        ]);
    }
    run.table("cover.csv", &t)?;
    let mut t = Table::new(&["j", "k", "difference"]);
    for &(j, k, v) in &ig.audit.overlap {
        t.push([j.to_string(), k.to_string(), v.to_string()]);
    }
    run.table("overlap.csv", &t)?;
    let a = &ig.audit;
    let mut t = Table::new(&[
        "modulus_term",
        "form_term",
        "integral",
        "excess_integral",
        "envelope",
        "far_phase_defect",
        "partition_defect",
    ]);
    t.push(
        [a.modulus_term, a.form_term, a.integral, a.excess_integral, a.envelope, a.far_phase_defect, a.partition_defect]
            .map(|v| v.to_string()),
    );
    run.table("audit.csv", &t)?;
    run.check("gaffney_bound", fix.gaffney_ratio, gaffney_c);
    run.check("interpolation_envelope", a.integral, envelope_c * a.envelope);
    run.check("partition_of_unity", a.partition_defect, 1e-12);
    Ok(())
}

fn gaffney_run(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let dim: usize = cfg.get_or("gaffney", "dim", 3)?;
    let widths = cfg.list_or("gaffney", "widths", vec![1.0, 0.5, 0.25, 0.125])?;
    let d = GaffneyOptions::default();
    let opts = GaffneyOptions {
        spacing: cfg.get_or("gaffney", "spacing", d.spacing)?,
        max_iter: cfg.get_or("gaffney", "max_iter", d.max_iter)?,
        tol: cfg.get_or("gaffney", "tol", d.tol)?,
        cg_rtol: cfg.get_or("gaffney", "cg_rtol", d.cg_rtol)?,
        seed: run.manifest.seed,
    };
    let bound = cfg.get_or("check", "uniformity_bound", 3.0)?;
    run.manifest.tolerances.insert("inverse_iteration_tol".into(), opts.tol);
    let est = gaffney_schedule(dim, &widths, &opts)?;
    let mut t = Table::new(&["width", "lambda_min", "constant", "iterations", "converged"]);
    for (w, e) in widths.iter().zip(&est) {
        t.push([w.to_string(), e.lambda_min.to_string(), e.constant.to_string(), e.iterations.to_string(), e.converged.to_string()]);
    }
    run.table("gaffney.csv", &t)?;
    let max = est.iter().map(|e| e.constant).fold(0.0, f64::max);
    let min = est.iter().map(|e| e.constant).fold(f64::INFINITY, f64::min);
    run.check("width_uniformity", max / min, bound);
    if est.iter().any(|e| !e.converged) {
        return Err(Error::NonConvergence { iterations: opts.max_iter, residual: f64::NAN });
    }
    Ok(())
}
