//! Coulomb gauge of a pair relative to a target on a cylinder, and phase
//! alignment away from the vorticity set.

use std::collections::VecDeque;

use super::coulomb::{coulomb_potential, divergence, region_link};
use crate::error::{Error, Result};
use crate::lattice::{Cylinder, FieldPair, GaugeTransform, Geometry, Region};
use crate::util::wrap_angle;

/// Neumann data of the Coulomb problem `Δξ = d*(α − α_h)`,
/// `∂_νξ = −(α − α_h)(ν)` on a lattice region.
///
/// On the lattice both pieces enter through the divergence of the link
/// form restricted to the region: boundary sites carry the flux of the
/// links leaving the region.
#[derive(Clone, Debug)]
pub struct NeumannProblem {
    pub active: Vec<bool>,
    /// `d*(α − α_h)` at interior sites of the region.
    pub source: Vec<f64>,
    /// Net flux at boundary sites of the region.
    pub flux: Vec<f64>,
    /// Sites of the mean-constraint annulus.
    pub annulus: Vec<usize>,
}

impl NeumannProblem {
    pub fn new(g: &Geometry, a: &[Vec<f64>], active: Vec<bool>, annulus: Vec<usize>) -> Self {
        let div = divergence(g, a, &active);
        let mut source = vec![0.0; g.n_sites];
        let mut flux = vec![0.0; g.n_sites];
        for x in 0..g.n_sites {
            if !active[x] {
                continue;
            }
            let full = (0..g.dim).all(|j| {
                region_link(g, &active, x, j).is_some()
                    && g.shift(x, j, -1).is_some_and(|p| region_link(g, &active, p, j).is_some())
            });
            if full {
                source[x] = div[x];
            } else {
                flux[x] = div[x];
            }
        }
        NeumannProblem { active, source, flux, annulus }
    }

    /// `|Σ source + Σ flux|` relative to `Σ|source| + Σ|flux|`.
    pub fn compatibility_defect(&self) -> f64 {
        let total: f64 = self.source.iter().chain(&self.flux).sum();
        let scale: f64 = self.source.iter().chain(&self.flux).map(|v| v.abs()).sum();
        if scale == 0.0 {
            0.0
        } else {
            total.abs() / scale
        }
    }
}

/// Link form `α − α_h` on all links.
pub(crate) fn difference_form(fp: &FieldPair, target: &FieldPair) -> Vec<Vec<f64>> {
    fp.alpha.iter().zip(&target.alpha).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect()
}

/// Unwraps `θ_h − θ = arg(u_h ū)` over a connected site set along a
/// breadth-first spanning tree; inconsistent non-tree edges mean the
/// phase difference winds.
pub(crate) fn unwrap_phase_difference(fp: &FieldPair, target: &FieldPair, sites: &[usize]) -> Result<Vec<(usize, f64)>> {
    let g = fp.geometry();
    let mut mark = vec![usize::MAX; g.n_sites];
    for (k, &s) in sites.iter().enumerate() {
        mark[s] = k;
    }
    let raw = |x: usize| (target.u[x] * fp.u[x].conj()).arg();
    let mut value = vec![f64::NAN; sites.len()];
    let mut queue = VecDeque::new();
    for start in 0..sites.len() {
        if !value[start].is_nan() {
            continue;
        }
        value[start] = raw(sites[start]);
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let x = sites[k];
            for j in 0..g.dim {
                for d in [-1isize, 1] {
                    let Some(y) = g.shift(x, j, d) else { continue };
                    let m = mark[y];
                    if m == usize::MAX {
                        continue;
                    }
                    let step = wrap_angle(raw(y) - raw(x));
                    if value[m].is_nan() {
                        value[m] = value[k] + step;
                        queue.push_back(m);
                    } else if (value[m] - value[k] - step).abs() > 1.0 {
                        return Err(Error::DegreeMismatch);
                    }
                }
            }
        }
    }
    Ok(sites.iter().copied().zip(value).collect())
}

/// Coulomb gauge of `fp` relative to `target` on a cylinder.
#[derive(Clone, Debug)]
pub struct CoulombFix {
    pub xi: GaugeTransform,
    pub compatibility_defect: f64,
    /// `‖d*(α + dξ − α_h)‖∞ / ‖d*(α − α_h)‖∞` over the region.
    pub residual: f64,
    /// Mean of `(θ + ξ) − θ_h` over the annulus.
    pub mean_defect: f64,
    pub solver_residual: f64,
    /// `‖(α + dξ) − α_h‖²` over the region links.
    pub form_distance: f64,
    /// `‖dα − dα_h‖²` over the region plaquettes.
    pub curvature_distance: f64,
    /// `form_distance / (R² curvature_distance)` with `R` the disk radius.
    pub gaffney_ratio: f64,
}

/// Sites of a cylinder and of its mean-constraint annulus
/// `inner ≤ |y| ≤ R`.
pub(crate) fn cylinder_sites(g: &Geometry, cyl: &Cylinder, inner: f64) -> (Vec<bool>, Vec<usize>) {
    let sites = Region::Cylinder(cyl.clone()).sites(g);
    let mut active = vec![false; g.n_sites];
    let mut annulus = Vec::new();
    for &s in &sites {
        active[s] = true;
        let y = cyl.local(&g.position(s)[..g.dim]);
        if y[0].hypot(y[1]) >= inner {
            annulus.push(s);
        }
    }
    (active, annulus)
}

/// Solves the Neumann problem on the cylinder and fixes the constant by
/// the annulus mean; `annulus_inner` is the inner radius of the annulus.
pub fn coulomb_fix(fp: &FieldPair, target: &FieldPair, cyl: &Cylinder, annulus_inner: f64) -> Result<CoulombFix> {
    if fp.spec != target.spec {
        return Err(Error::ShapeMismatch("pair and target live on different lattices".into()));
    }
    Region::Cylinder(cyl.clone()).check_inside(&fp.spec)?;
    let g = fp.geometry();
    let (active, annulus) = cylinder_sites(&g, cyl, annulus_inner);
    fix_on(fp, target, &g, active, annulus, cyl.radius)
}

pub(crate) fn fix_on(
    fp: &FieldPair,
    target: &FieldPair,
    g: &Geometry,
    active: Vec<bool>,
    annulus: Vec<usize>,
    radius: f64,
) -> Result<CoulombFix> {
    if annulus.is_empty() {
        return Err(Error::InvalidConfig("empty mean-constraint annulus".into()));
    }
    let min_target = annulus.iter().map(|&s| target.u[s].norm()).fold(f64::INFINITY, f64::min);
    if min_target < 0.5 {
        return Err(Error::SingularTarget { min_modulus: min_target });
    }
    let min_pair = annulus.iter().map(|&s| fp.u[s].norm()).fold(f64::INFINITY, f64::min);
    if min_pair < 0.5 {
        return Err(Error::SingularPair { min_modulus: min_pair });
    }
    let a = difference_form(fp, target);
    let problem = NeumannProblem::new(g, &a, active.clone(), annulus.clone());
    let compatibility_defect = problem.compatibility_defect();
    if compatibility_defect > 1e-8 {
        return Err(Error::IncompatibleData { defect: compatibility_defect });
    }
    let none = vec![false; g.n_sites];
    let sol = coulomb_potential(g, &a, &active, &none, 1e-12)?;
    let mut xi = sol.xi;
    // θ_h − θ on the annulus, then mean of (θ + ξ) − θ_h = mean(ξ − d)
    let d = unwrap_phase_difference(fp, target, &annulus)?;
    let mean = d.iter().map(|&(s, v)| xi[s] - v).sum::<f64>() / d.len() as f64;
    for (x, v) in xi.iter_mut().enumerate() {
        if active[x] {
            *v -= mean;
        }
    }
    let mean_defect = d.iter().map(|&(s, v)| xi[s] - v).sum::<f64>() / d.len() as f64;
    // residual and distances after the transformation
    let h = g.h;
    let mut shifted = a.clone();
    let mut form_distance = 0.0;
    for j in 0..g.dim {
        for x in 0..g.n_sites {
            if let Some(q) = region_link(g, &active, x, j) {
                shifted[j][x] = a[j][x] + (xi[q] - xi[x]) / h;
                form_distance += shifted[j][x].powi(2);
            }
        }
    }
    let before = divergence(g, &a, &active);
    let after = divergence(g, &shifted, &active);
    let sup = |v: &[f64]| v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let residual = if sup(&before) > 0.0 { sup(&after) / sup(&before) } else { sup(&after) };
    let mut curvature_distance = 0.0;
    for x in 0..g.n_sites {
        for j in 0..g.dim {
            for k in j + 1..g.dim {
                let (Some(p), Some(q)) = (region_link(g, &active, x, j), region_link(g, &active, x, k)) else { continue };
                if region_link(g, &active, p, k).is_none() || region_link(g, &active, q, j).is_none() {
                    continue;
                }
                let w = (a[j][x] + a[k][p] - a[j][q] - a[k][x]) / h;
                curvature_distance += w * w;
            }
        }
    }
    let vol = g.cell_volume();
    form_distance *= vol;
    curvature_distance *= vol;
    let gaffney_ratio =
        if curvature_distance > 0.0 { form_distance / (radius * radius * curvature_distance) } else { 0.0 };
    Ok(CoulombFix {
        xi: GaugeTransform { xi },
        compatibility_defect,
        residual,
        mean_defect,
        solver_residual: sol.rel_residual,
        form_distance,
        curvature_distance,
        gaffney_ratio,
    })
}

/// `ξ₀ = θ_h − θ` on the sites of `region`, zero elsewhere, so that
/// `e^{iξ₀}u/u_h` is positive there. The phase is unwrapped over the
/// region.
pub fn phase_align(fp: &FieldPair, target: &FieldPair, region: &[usize]) -> Result<GaugeTransform> {
    if fp.spec != target.spec {
        return Err(Error::ShapeMismatch("pair and target live on different lattices".into()));
    }
    if region.iter().any(|&s| fp.u[s].norm() < 0.75 || target.u[s].norm() < 0.75) {
        return Err(Error::VorticityInRegion);
    }
    let mut xi = vec![0.0; fp.u.len()];
    for (s, v) in unwrap_phase_difference(fp, target, region)? {
        xi[s] = v;
    }
    Ok(GaugeTransform { xi })
}
