//! Energy minimisation with fixed boundary data.
//!
//! The free variables are `u` at interior sites and `α` on links whose two
//! end points are interior; everything else is held fixed bit for bit.
//! Periodic axes have no boundary. Descent runs on the density gradient
//! `∇E/hⁿ` with an Armijo line search, and every `coulomb_every` steps the
//! gauge is projected to `d*α = 0` on the free links, which leaves the
//! energy unchanged and keeps the iteration away from the flat gauge
//! directions.
//!
//! The logged energy starts from the directly evaluated initial energy and
//! accumulates the per-step changes, each evaluated in difference form, so
//! the log stays meaningful below the rounding level of the total.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::coulomb_potential;
use crate::lattice::{
    el_residuals, gauge_apply, interior_weights, weighted_energy, weighted_gradient, FieldPair, GaugeTransform, Geometry,
    LatticeSpec, ResidualReport, C64, MAX_DIM,
};
use crate::util::par_sum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DescentMethod {
    GradientFlow,
    NonlinearCg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub method: DescentMethod,
    /// Initial trial step in units of `h²`.
    pub step: f64,
    /// Tolerance on the sup norm of the density gradient.
    pub tol: f64,
    pub max_iter: usize,
    /// Coulomb projection period; 0 disables it.
    pub coulomb_every: usize,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig { method: DescentMethod::NonlinearCg, step: 0.1, tol: 1e-7, max_iter: 20_000, coulomb_every: 50 }
    }
}

/// Boundary treatment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    /// Hold the initial values on the boundary layer.
    Dirichlet,
    /// Periodic along the listed axes, Dirichlet on the rest.
    Periodic { axes: Vec<usize> },
}

/// How the initial pair is produced; interpreted by the experiment harness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Initializer {
    /// Lattice planar vortex extended as a product along the remaining axes.
    ProductExtension,
    /// Pullback of the degree-one solution along the graph
    /// `amplitude·(harmonic polynomial)`.
    Pullback { amplitude: f64 },
    /// Pair read from a snapshot file.
    Snapshot { path: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxConfig {
    pub boundary: Boundary,
    pub initializer: Initializer,
    pub descent: DescentConfig,
}

impl RelaxConfig {
    pub fn validate(&self) -> Result<()> {
        let d = &self.descent;
        if !(d.step > 0.0) || !(d.tol > 0.0) || d.max_iter == 0 {
            return Err(Error::InvalidConfig("step > 0, tol > 0 and max_iter ≥ 1 required".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: usize,
    pub energy: f64,
    pub gradient_norm: f64,
    /// Accepted step in units of `h²`; 0 for a gauge projection.
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct RelaxOutcome {
    pub pair: FieldPair,
    pub log: Vec<LogEntry>,
    pub converged: bool,
    pub residuals: ResidualReport,
}

impl RelaxOutcome {
    /// Writes the convergence log as CSV.
    pub fn write_log(&self, path: &Path, header_comment: &str) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "# {header_comment}")?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["iteration", "energy", "gradient_norm", "step"])?;
        for e in &self.log {
            w.write_record([e.iteration.to_string(), e.energy.to_string(), e.gradient_norm.to_string(), e.step.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Free-variable masks.
struct Free {
    u: Vec<bool>,
    alpha: Vec<Vec<bool>>,
}

fn free_masks(g: &Geometry) -> Free {
    let u: Vec<bool> = (0..g.n_sites).map(|i| g.is_interior(i)).collect();
    let alpha = (0..g.dim)
        .map(|j| (0..g.n_sites).map(|i| u[i] && g.shift(i, j, 1).is_some_and(|q| u[q])).collect())
        .collect();
    Free { u, alpha }
}

/// Direction in the free variables.
#[derive(Clone)]
struct Dir {
    u: Vec<C64>,
    alpha: Vec<Vec<f64>>,
}

impl Dir {
    fn dot(&self, o: &Dir) -> f64 {
        let a = par_sum(self.u.len(), |i| self.u[i].re * o.u[i].re + self.u[i].im * o.u[i].im);
        a + self.alpha.iter().zip(&o.alpha).map(|(x, y)| par_sum(x.len(), |i| x[i] * y[i])).sum::<f64>()
    }

    fn sup(&self) -> f64 {
        let a = self.u.par_iter().map(|z| z.norm()).reduce(|| 0.0, f64::max);
        self.alpha.iter().map(|v| v.par_iter().map(|x| x.abs()).reduce(|| 0.0, f64::max)).fold(a, f64::max)
    }
}

fn density_gradient(fp: &FieldPair, w: &[f64], free: &Free) -> Dir {
    let (du, dalpha) = weighted_gradient(fp, w);
    let vol = fp.geometry().cell_volume();
    let u = du.par_iter().enumerate().map(|(i, z)| if free.u[i] { z / vol } else { C64::new(0.0, 0.0) }).collect();
    let alpha = dalpha
        .iter()
        .enumerate()
        .map(|(j, v)| v.par_iter().enumerate().map(|(i, x)| if free.alpha[j][i] { x / vol } else { 0.0 }).collect())
        .collect();
    Dir { u, alpha }
}

fn step_pair(fp: &FieldPair, d: &Dir, t: f64) -> FieldPair {
    let u = fp.u.par_iter().zip(&d.u).map(|(a, b)| a + b * t).collect();
    let alpha = fp.alpha.iter().zip(&d.alpha).map(|(a, b)| a.par_iter().zip(b).map(|(x, y)| x + t * y).collect()).collect();
    FieldPair { spec: fp.spec.clone(), eps: fp.eps, u, alpha }
}

/// Gauge transform to `d*α = 0` on the free links, `ξ = 0` at depth ≤ 1.
pub fn coulomb_projection(fp: &FieldPair) -> Result<FieldPair> {
    let g = fp.geometry();
    let active = vec![true; g.n_sites];
    let fixed: Vec<bool> = (0..g.n_sites).map(|i| g.depth(i) <= 1).collect();
    let sol = coulomb_potential(&g, &fp.alpha, &active, &fixed, 1e-10)?;
    gauge_apply(fp, &GaugeTransform { xi: sol.xi })
}

fn check_boundary(fp: &FieldPair, cfg: &RelaxConfig) -> Result<()> {
    match &cfg.boundary {
        Boundary::Dirichlet => Ok(()),
        Boundary::Periodic { axes } => {
            for &a in axes {
                if a >= fp.dim() {
                    return Err(Error::AxisOutOfRange { axis: a, dim: fp.dim() });
                }
                if !fp.spec.periodic[a] {
                    return Err(Error::InvalidConfig(format!("axis {a} is not periodic in the lattice")));
                }
            }
            Ok(())
        }
    }
}

/// Minimises the energy of `init` with its boundary data held fixed.
pub fn relax(init: &FieldPair, cfg: &RelaxConfig) -> Result<RelaxOutcome> {
    cfg.validate()?;
    check_boundary(init, cfg)?;
    let g = init.geometry();
    let free = free_masks(&g);
    let w = interior_weights(&g);
    let h2 = g.h * g.h;
    let d = &cfg.descent;
    let mut fp = init.clone();
    let mut energy = weighted_energy(&fp, &w);
    let mut grad = density_gradient(&fp, &w, &free);
    let mut gnorm = grad.sup();
    let mut log = vec![LogEntry { iteration: 0, energy, gradient_norm: gnorm, step: 0.0 }];
    let mut dir: Option<Dir> = None;
    let mut prev_grad: Option<Dir> = None;
    let mut t = d.step * h2;
    let mut converged = gnorm <= d.tol;
    let mut it = 0;
    while !converged && it < d.max_iter {
        it += 1;
        // search direction
        let mut p = match (d.method, &dir, &prev_grad) {
            (DescentMethod::NonlinearCg, Some(pd), Some(pg)) => {
                let gg = pg.dot(pg);
                let beta = ((grad.dot(&grad) - grad.dot(pg)) / gg).max(0.0);
                let mut nd = pd.clone();
                nd.u.par_iter_mut().zip(&grad.u).for_each(|(a, b)| *a = -b + *a * beta);
                for (a, b) in nd.alpha.iter_mut().zip(&grad.alpha) {
                    a.par_iter_mut().zip(b).for_each(|(x, y)| *x = -y + beta * *x);
                }
                nd
            }
            _ => neg(&grad),
        };
        let mut slope = grad.dot(&p);
        if slope >= 0.0 {
            p = neg(&grad);
            slope = grad.dot(&p);
        }
        let search = line_search(&fp, &p, energy, slope, t, &w, &free, d.method).map_err(|e| match e {
            Error::EnergyIncrease { .. } => Error::EnergyIncrease { iteration: it },
            other => other,
        })?;
        let Some(step) = search else {
            // energy differences no longer resolvable in floating point
            break;
        };
        fp = step.pair;
        t = step.t * if d.method == DescentMethod::GradientFlow { 1.5 } else { 1.0 };
        prev_grad = Some(grad);
        dir = Some(p);
        energy += step.change;
        grad = step.grad;
        gnorm = grad.sup();
        log.push(LogEntry { iteration: it, energy, gradient_norm: gnorm, step: step.t / h2 });
        converged = gnorm <= d.tol;
        if !converged && d.coulomb_every > 0 && it % d.coulomb_every == 0 {
            let proj = coulomb_projection(&fp)?;
            let gp = density_gradient(&proj, &w, &free);
            fp = proj;
            grad = gp;
            gnorm = grad.sup();
            log.push(LogEntry { iteration: it, energy, gradient_norm: gnorm, step: 0.0 });
            dir = None;
            prev_grad = None;
            converged = gnorm <= d.tol;
        }
    }
    let residuals = el_residuals(&fp);
    if !converged {
        return Err(Error::NonConvergence { iterations: it, residual: gnorm });
    }
    Ok(RelaxOutcome { pair: fp, log, converged, residuals })
}

struct Step {
    pair: FieldPair,
    t: f64,
    change: f64,
    grad: Dir,
}

/// `E(x + t·p) − E(x)` for the weighted energy, assembled from per-link,
/// per-plaquette and per-site differences so that its relative accuracy
/// does not degrade as the change shrinks.
fn energy_change(fp: &FieldPair, p: &Dir, t: f64, w: &[f64]) -> f64 {
    let g = fp.geometry();
    let n = g.dim;
    let h = g.h;
    let e2 = fp.eps * fp.eps;
    let em1 = |theta: f64| {
        let s = (0.5 * theta).sin();
        C64::new(-2.0 * s * s, theta.sin())
    };
    let total = par_sum(g.n_sites, |x| {
        let mut acc = 0.0;
        let du = p.u[x] * t;
        if w[x] != 0.0 {
            let q = 1.0 - fp.u[x].norm_sqr();
            let dq = -(2.0 * (fp.u[x].conj() * du).re + du.norm_sqr());
            acc += w[x] * dq * (2.0 * q + dq) / (4.0 * e2);
        }
        for j in 0..n {
            let Some(xp) = g.shift(x, j, 1) else { continue };
            let c = 0.5 * (w[x] + w[xp]);
            if c != 0.0 {
                let link = fp.link(j, x);
                let a = link * fp.u[xp] - fp.u[x];
                let dup = p.u[xp] * t;
                let da = link * em1(-h * t * p.alpha[j][x]) * (fp.u[xp] + dup) + link * dup - du;
                acc += c * (2.0 * (a.conj() * da).re + da.norm_sqr()) / (h * h);
            }
            for k in j + 1..n {
                let Some(xk) = g.shift(x, k, 1) else { continue };
                let Some(xjk) = g.shift(xp, k, 1) else { continue };
                let cp = 0.25 * (w[x] + w[xp] + w[xk] + w[xjk]);
                if cp == 0.0 {
                    continue;
                }
                let om = (fp.alpha[j][x] + fp.alpha[k][xp] - fp.alpha[j][xk] - fp.alpha[k][x]) / h;
                let dom = t * (p.alpha[j][x] + p.alpha[k][xp] - p.alpha[j][xk] - p.alpha[k][x]) / h;
                acc += cp * e2 * dom * (2.0 * om + dom);
            }
        }
        acc
    });
    total * g.cell_volume()
}

/// Line search along `p` from the current pair.
///
/// Uses secant steps on the directional derivative `φ'(t) = ⟨∇E(x + tp), p⟩`
/// and accepts a step only if the energy change is non-positive and
/// satisfies the Armijo condition. Returns `None` when the predicted
/// change is below the rounding level of the energy itself.
#[allow(clippy::too_many_arguments)]
fn line_search(
    fp: &FieldPair,
    p: &Dir,
    e0: f64,
    s0: f64,
    t0: f64,
    w: &[f64],
    free: &Free,
    method: DescentMethod,
) -> Result<Option<Step>> {
    let c1 = 1e-4;
    let vol = fp.geometry().cell_volume();
    let (mut lo, mut s_lo) = (0.0, s0);
    let mut hi: Option<(f64, f64)> = None;
    let mut t = t0;
    let mut best: Option<Step> = None;
    for _ in 0..40 {
        let cand = step_pair(fp, p, t);
        let de = energy_change(fp, p, t, w);
        if !de.is_finite() {
            hi = Some((t, f64::INFINITY));
            t = 0.5 * (lo + t);
            continue;
        }
        let gr = density_gradient(&cand, w, free);
        let s = gr.dot(p);
        let decreased = de <= 0.0 && de <= c1 * t * vol * s0;
        if decreased && best.as_ref().is_none_or(|b| de <= b.change) {
            best = Some(Step { pair: cand, t, change: de, grad: gr });
        }
        if method == DescentMethod::GradientFlow {
            if decreased {
                break;
            }
            hi = Some((t, s));
            t *= 0.5;
            continue;
        }
        if decreased && s.abs() <= 0.3 * s0.abs() {
            break;
        }
        if s < 0.0 && de <= 0.0 {
            // still descending: extrapolate
            let next = if s > s_lo { t - s * (t - lo) / (s - s_lo) } else { 4.0 * t };
            lo = t;
            s_lo = s;
            t = match hi {
                Some((th, _)) => 0.5 * (lo + th),
                None => next.clamp(1.5 * t, 4.0 * t),
            };
        } else {
            hi = Some((t, s));
            let (th, sh) = (t, s);
            let sec = if sh.is_finite() && sh > s_lo { lo - s_lo * (th - lo) / (sh - s_lo) } else { 0.5 * (lo + th) };
            let span = th - lo;
            t = sec.clamp(lo + 0.1 * span, th - 0.1 * span);
        }
    }
    match best {
        Some(b) => Ok(Some(b)),
        None if (t0 * vol * s0).abs() <= 1e-15 * e0.abs() => Ok(None),
        None => Err(Error::EnergyIncrease { iteration: 0 }),
    }
}

fn neg(d: &Dir) -> Dir {
    Dir { u: d.u.par_iter().map(|z| -z).collect(), alpha: d.alpha.iter().map(|v| v.par_iter().map(|x| -x).collect()).collect() }
}

/// Extends a planar pair to `spec` (whose first two axes carry the same
/// lattice) as a product along the remaining axes, with vanishing
/// transverse connection.
pub fn product_extension(fp2: &FieldPair, spec: &LatticeSpec) -> Result<FieldPair> {
    if fp2.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: fp2.dim() });
    }
    spec.validate()?;
    let g2 = fp2.geometry();
    let g = spec.geometry();
    if spec.spacing != fp2.spec.spacing || (0..2).any(|a| g.counts[a] != g2.counts[a] || (g.lo[a] - g2.lo[a]).abs() > 1e-12) {
        return Err(Error::ShapeMismatch("planar lattice does not match the first two axes".into()));
    }
    let planar = |i: usize| {
        let c = g.coords(i);
        g2.index(&c[..2])
    };
    let u = (0..g.n_sites).into_par_iter().map(|i| fp2.u[planar(i)]).collect();
    let alpha = (0..g.dim)
        .map(|j| {
            (0..g.n_sites)
                .into_par_iter()
                .map(|i| if j < 2 && g.has_link(i, j) { fp2.alpha[j][planar(i)] } else { 0.0 })
                .collect()
        })
        .collect();
    FieldPair::new(spec.clone(), fp2.eps, u, alpha)
}

/// One row of a monotonicity table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityRow {
    pub r: f64,
    /// `Ẽ(r) = r^{2−n} ∫ χ_r e`.
    pub normalized_energy: f64,
    /// Centred difference of `Ẽ`; NaN at the end points.
    pub derivative: f64,
    /// `r^{2−n} ∫_{∂B_r} (2|∇_ν u|² + 2ε²|ι_ν ω|²) + r^{1−n} ∫_{B_r} (2W − 2ε²|ω|²)`.
    pub identity_rhs: f64,
    /// `|derivative − identity_rhs|`.
    pub mismatch: f64,
}

#[derive(Clone, Debug)]
pub struct MonotonicityProfile {
    pub rows: Vec<MonotonicityRow>,
    /// EL residuals of the pair, reported alongside.
    pub residuals: ResidualReport,
}

/// Smoothed ball indicator of radius `r` with a linear ramp of width `2h`
/// and its radial derivative.
fn ramp(s: f64, r: f64, h: f64) -> (f64, f64) {
    if s <= r - h {
        (1.0, 0.0)
    } else if s >= r + h {
        (0.0, 0.0)
    } else {
        ((r + h - s) / (2.0 * h), -1.0 / (2.0 * h))
    }
}

/// Normalised energy and the terms of its derivative identity over balls
/// centred at `center`.
pub fn monotonicity_profile(fp: &FieldPair, center: &[f64], radii: &[f64]) -> Result<MonotonicityProfile> {
    let g = fp.geometry();
    let n = g.dim;
    if center.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: center.len() });
    }
    let h = g.h;
    let eps = fp.eps;
    let e2 = eps * eps;
    for &r in radii {
        if !(r > 0.0) {
            return Err(Error::InvalidConfig("radii must be positive".into()));
        }
        for a in 0..n {
            if g.periodic[a] {
                continue;
            }
            let (lo, hi) = fp.spec.bounds(a);
            if center[a] - r - h < lo + h || center[a] + r + h > hi - h {
                return Err(Error::RegionExceedsDomain);
            }
        }
    }
    let rmax = radii.iter().cloned().fold(0.0, f64::max) + h;
    // per-site data near the center: (|x − c|, e, 2|∇_ν u|² + 2ε²|ι_ν ω|², 2W − 2ε²|ω|²)
    let data: Vec<[f64; 4]> = (0..g.n_sites)
        .into_par_iter()
        .filter_map(|i| {
            if !g.is_interior(i) {
                return None;
            }
            let x = g.position(i);
            let mut nu = [0.0; MAX_DIM];
            let mut s2 = 0.0;
            for a in 0..n {
                let mut d = x[a] - center[a];
                if g.periodic[a] {
                    let len = g.counts[a] as f64 * h;
                    d -= len * (d / len).round();
                }
                nu[a] = d;
                s2 += d * d;
            }
            let s = s2.sqrt();
            if s > rmax {
                return None;
            }
            if s > 0.0 {
                nu.iter_mut().for_each(|v| *v /= s);
            }
            let st = fp.stencil(&g, i);
            let normal = st.average(|jet| {
                let mut dn = C64::new(0.0, 0.0);
                for a in 0..n {
                    dn += jet.du[a] * nu[a];
                }
                let mut io = 0.0;
                for k in 0..n {
                    let c: f64 = (0..n).map(|a| nu[a] * jet.om[a][k]).sum();
                    io += c * c;
                }
                2.0 * dn.norm_sqr() + 2.0 * e2 * io
            });
            let bulk = 2.0 * st.potential(eps) - 2.0 * e2 * st.curv_sq();
            Some([s, st.density(eps), normal, bulk])
        })
        .collect();
    let vol = g.cell_volume();
    let pw = |r: f64, k: i32| r.powi(k);
    let mut rows: Vec<MonotonicityRow> = radii
        .iter()
        .map(|&r| {
            let (mut mass, mut surf, mut bulk) = (0.0, 0.0, 0.0);
            for d in &data {
                let (chi, dchi) = ramp(d[0], r, h);
                mass += chi * d[1];
                surf += -dchi * d[2];
                bulk += chi * d[3];
            }
            let ne = pw(r, 2 - n as i32) * mass * vol;
            let rhs = pw(r, 2 - n as i32) * surf * vol + pw(r, 1 - n as i32) * bulk * vol;
            MonotonicityRow { r, normalized_energy: ne, derivative: f64::NAN, identity_rhs: rhs, mismatch: f64::NAN }
        })
        .collect();
    for k in 1..rows.len().saturating_sub(1) {
        let d = (rows[k + 1].normalized_energy - rows[k - 1].normalized_energy) / (rows[k + 1].r - rows[k - 1].r);
        rows[k].derivative = d;
        rows[k].mismatch = (d - rows[k].identity_rhs).abs();
    }
    Ok(MonotonicityProfile { rows, residuals: el_residuals(fp) })
}
