//! Winding numbers, vortex number and the completion of squares.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FieldPair, Geometry, C64, MAX_DIM};
use crate::util::{par_sum, par_sum_vec};

/// A circle in the coordinate plane `(plane.0, plane.1)` through the point
/// `center`; the remaining coordinates of `center` fix the slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub plane: (usize, usize),
}

impl LoopSpec {
    /// Circle in a planar lattice.
    pub fn circle(center: [f64; 2], radius: f64) -> Self {
        LoopSpec { center: center.to_vec(), radius, plane: (0, 1) }
    }

    /// Circle in the `(0, 1)` plane at height `z` along the remaining axes.
    pub fn slice(center: [f64; 2], z: &[f64], radius: f64) -> Self {
        let mut c = center.to_vec();
        c.extend_from_slice(z);
        LoopSpec { center: c, radius, plane: (0, 1) }
    }
}

/// Closed path of lattice sites approximating the loop, consecutive sites
/// joined by single links.
pub fn digital_circle(g: &Geometry, lp: &LoopSpec) -> Result<Vec<usize>> {
    let (a, b) = lp.plane;
    if a >= g.dim || b >= g.dim || a == b || lp.center.len() != g.dim {
        return Err(Error::InvalidConfig("loop plane or center does not match the lattice".into()));
    }
    if !(lp.radius > 0.0) {
        return Err(Error::InvalidConfig("loop radius must be positive".into()));
    }
    let to_index = |x: f64, axis: usize| -> Result<usize> {
        let c = ((x - g.lo[axis]) / g.h).round();
        if c < 0.0 || c >= g.counts[axis] as f64 {
            return Err(Error::RegionExceedsDomain);
        }
        Ok(c as usize)
    };
    let mut base = [0usize; MAX_DIM];
    for k in 0..g.dim {
        base[k] = to_index(lp.center[k], k)?;
    }
    let samples = ((16.0 * PI * lp.radius / g.h).ceil() as usize).max(64);
    let mut pts: Vec<(usize, usize)> = Vec::with_capacity(samples);
    for s in 0..samples {
        let t = 2.0 * PI * s as f64 / samples as f64;
        let p = (to_index(lp.center[a] + lp.radius * t.cos(), a)?, to_index(lp.center[b] + lp.radius * t.sin(), b)?);
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.len() < 4 {
        return Err(Error::InvalidConfig("loop radius below the lattice resolution".into()));
    }
    let mut path = Vec::new();
    let site = |p: (usize, usize)| {
        let mut c = base;
        c[a] = p.0;
        c[b] = p.1;
        g.index(&c[..g.dim])
    };
    let m = pts.len();
    for i in 0..m {
        let (mut x, mut y) = pts[i];
        let (tx, ty) = pts[(i + 1) % m];
        path.push(site((x, y)));
        while x != tx {
            x = if tx > x { x + 1 } else { x - 1 };
            if (x, y) != (tx, ty) {
                path.push(site((x, y)));
            }
        }
        while y != ty {
            y = if ty > y { y + 1 } else { y - 1 };
            if (x, y) != (tx, ty) {
                path.push(site((x, y)));
            }
        }
    }
    Ok(path)
}

/// Gauge-invariant phase increment from `x` to its lattice neighbour `y`.
fn increment(fp: &FieldPair, g: &Geometry, x: usize, y: usize) -> f64 {
    let h = g.h;
    for j in 0..g.dim {
        if g.shift(x, j, 1) == Some(y) {
            let z = fp.u[x].conj() * fp.link(j, x) * fp.u[y];
            return z.arg() + h * fp.alpha[j][x];
        }
        if g.shift(x, j, -1) == Some(y) {
            let z = fp.u[x].conj() * fp.link(j, y).conj() * fp.u[y];
            return z.arg() - h * fp.alpha[j][y];
        }
    }
    unreachable!("path sites must be neighbours")
}

/// Winding number of `u/|u|` along the loop.
///
/// Each step contributes the principal argument of the covariant
/// increment `ū(x) U u(y)` plus the link phase it removes, so the sum is
/// exactly the winding of `u` and is unchanged by lattice gauge
/// transformations.
pub fn degree(fp: &FieldPair, lp: &LoopSpec) -> Result<i32> {
    let g = fp.geometry();
    let path = digital_circle(&g, lp)?;
    let min_modulus = path.iter().map(|&i| fp.u[i].norm()).fold(f64::INFINITY, f64::min);
    if min_modulus < 0.5 {
        return Err(Error::VorticityOnLoop { min_modulus });
    }
    let m = path.len();
    let total: f64 = (0..m).map(|i| increment(fp, &g, path[i], path[(i + 1) % m])).sum();
    Ok((total / (2.0 * PI)).round() as i32)
}

/// `(1/2π) Σ ω₁₂ h²` over all plaquettes.
pub fn vortex_number(fp: &FieldPair) -> Result<f64> {
    if fp.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: fp.dim() });
    }
    let g = fp.geometry();
    let s = par_sum(g.n_sites, |b| {
        if g.has_link(b, 0) && g.has_link(b, 1) {
            fp.plaquette(&g, b, 0, 1)
        } else {
            0.0
        }
    });
    Ok(s * g.h * g.h / (2.0 * PI))
}

/// Completion of squares `E = 2π|N| + R` for a planar pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BogomolnySplit {
    /// `2π|N|` with `N` the vortex number.
    pub flux_term: f64,
    /// `R = squares + boundary_defect`.
    pub residual: f64,
    /// `Σ (|∇₁u + iσ∇₂u|² + (εω₁₂ − σ(1 − |u|²)/2ε)²) h²`, `σ = sign N`.
    pub squares: f64,
    /// `σ Σ J₁₂ h² − 2π|N|`.
    pub boundary_defect: f64,
    pub vortex_number: f64,
}

/// Splits the energy of a planar pair pointwise at every corner.
///
/// At each corner `e = |∇₁u + iσ∇₂u|² + (εω₁₂ − σ(1−|u|²)/2ε)² + σJ₁₂`,
/// an algebraic identity valid for every ε; the planar energy is invariant
/// under `x ↦ x/ε`, so this equals the split of the rescaled pair at ε = 1.
pub fn bogomolny_split(fp: &FieldPair) -> Result<BogomolnySplit> {
    let nv = vortex_number(fp)?;
    let sigma = if nv >= 0.0 { 1.0 } else { -1.0 };
    let g = fp.geometry();
    let eps = fp.eps;
    let [sq, jac] = par_sum_vec::<_, 2>(g.n_sites, |i| {
        if !g.is_interior(i) {
            return [0.0; 2];
        }
        let st = fp.stencil(&g, i);
        let square = st.average(|jet| {
            let a = jet.du[0] + C64::new(0.0, sigma) * jet.du[1];
            let b = eps * jet.om[0][1] - sigma * (1.0 - jet.u.norm_sqr()) / (2.0 * eps);
            a.norm_sqr() + b * b
        });
        [square, st.jacobian(0, 1)]
    });
    let vol = g.h * g.h;
    let flux_term = 2.0 * PI * nv.abs();
    let squares = sq * vol;
    let boundary_defect = sigma * jac * vol - flux_term;
    Ok(BogomolnySplit { flux_term, residual: squares + boundary_defect, squares, boundary_defect, vortex_number: nv })
}

/// Sup norms of the two vortex equations over interior corners,
/// `|∇₁u + iσ∇₂u|` and `|ω₁₂ − σ(1 − |u|²)/2ε²|`.
pub fn vortex_equation_residuals(fp: &FieldPair, sigma: i32) -> Result<(f64, f64)> {
    if fp.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: fp.dim() });
    }
    let g = fp.geometry();
    let s = sigma as f64;
    let eps = fp.eps;
    let sites = g.interior_sites();
    let (mut a, mut b) = (0.0_f64, 0.0_f64);
    for &i in &sites {
        let st = fp.stencil(&g, i);
        for c in 0..4 {
            let jet = st.corner(c);
            a = a.max((jet.du[0] + C64::new(0.0, s) * jet.du[1]).norm());
            b = b.max((jet.om[0][1] - s * (1.0 - jet.u.norm_sqr()) / (2.0 * eps * eps)).abs());
        }
    }
    Ok((a, b))
}
