//! Lipschitz and harmonic approximation of the slice barycenters, zero
//! localisation on slices and the Caccioppoli-type check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::moments::excess;
use super::slices::{aligned_axes, classify_rows, slice_sites, SliceClassification, SliceRow};
use crate::error::{Error, Result};
use crate::lattice::{Cylinder, FieldPair, Region, C64, MAX_DIM};
use crate::util::{conjugate_gradient, Cutoff};

const TWO_PI: f64 = std::f64::consts::TAU;

/// Zeros of the bilinear interpolant of `u` on one slice, in frame
/// coordinates `y`, restricted to `|y| ≤ max_radius`.
///
/// Each cell is first transported to its lower corner along the links
/// (an axial gauge), so the result does not depend on the gauge. Cells
/// without sign changes of both `Re u` and `Im u` are skipped; in the
/// others the bilinear system is solved by Newton's method.
pub fn slice_zeros(fp: &FieldPair, cyl: &Cylinder, sites: &[usize], max_radius: f64) -> Result<Vec<[f64; 2]>> {
    let g = fp.geometry();
    let n = g.dim;
    let axes = aligned_axes(&cyl.frame)?;
    let (a0, a1) = (axes[0].0, axes[1].0);
    let h = g.h;
    let mut zeros: Vec<[f64; 2]> = Vec::new();
    for &i in sites {
        let (Some(p), Some(q)) = (g.shift(i, a0, 1), g.shift(i, a1, 1)) else { continue };
        let Some(d) = g.shift(p, a1, 1) else { continue };
        let a = fp.u[i];
        let b = fp.link(a0, i) * fp.u[p];
        let c = fp.link(a1, i) * fp.u[q];
        let dd = fp.link(a0, i) * fp.link(a1, p) * fp.u[d];
        let corners = [a, b, c, dd];
        let changes = |f: fn(&C64) -> f64| {
            let lo = corners.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = corners.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            lo <= 0.0 && hi >= 0.0
        };
        if !changes(|z| z.re) || !changes(|z| z.im) {
            continue;
        }
        let Some((s, t)) = bilinear_root(a, b, c, dd) else { continue };
        let mut x = g.position(i);
        x[a0] += s * h;
        x[a1] += t * h;
        let y = cyl.local(&x[..n]);
        let pt = [y[0], y[1]];
        if pt[0].hypot(pt[1]) > max_radius {
            continue;
        }
        if zeros.iter().all(|z| (z[0] - pt[0]).hypot(z[1] - pt[1]) > 0.5 * h) {
            zeros.push(pt);
        }
    }
    Ok(zeros)
}

/// Root in `[0,1]²` of `a(1−s)(1−t) + b s(1−t) + c(1−s)t + d st`.
fn bilinear_root(a: C64, b: C64, c: C64, d: C64) -> Option<(f64, f64)> {
    let (mut s, mut t) = (0.5, 0.5);
    let scale = a.norm().max(b.norm()).max(c.norm()).max(d.norm()).max(1e-300);
    for _ in 0..50 {
        let f = a * (1.0 - s) * (1.0 - t) + b * s * (1.0 - t) + c * (1.0 - s) * t + d * s * t;
        let fs = (b - a) * (1.0 - t) + (d - c) * t;
        let ft = (c - a) * (1.0 - s) + (d - b) * s;
        let det = fs.re * ft.im - ft.re * fs.im;
        if det.abs() < 1e-300 {
            return None;
        }
        let ds = (f.re * ft.im - ft.re * f.im) / det;
        let dt = (fs.re * f.im - f.re * fs.im) / det;
        s -= ds;
        t -= dt;
        if !(s.is_finite() && t.is_finite()) || s.abs() > 4.0 || t.abs() > 4.0 {
            return None;
        }
        if ds.abs().max(dt.abs()) < 1e-14 {
            break;
        }
    }
    let f = a * (1.0 - s) * (1.0 - t) + b * s * (1.0 - t) + c * (1.0 - s) * t + d * s * t;
    let tol = 1e-9;
    (f.norm() <= 1e-10 * scale && (-tol..=1.0 + tol).contains(&s) && (-tol..=1.0 + tol).contains(&t)).then_some((s, t))
}

/// Barycenter and zero-set approximations over the slices of a cylinder.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApproximationBundle {
    pub rows: Vec<SliceRow>,
    /// Final classification; slices without a unique zero are bad.
    pub classification: SliceClassification,
    /// Indices of good slices reclassified for lack of a unique zero.
    pub reclassified: Vec<Vec<i64>>,
    pub spacing: f64,
    pub half_length: f64,
    /// `h(z)`: the barycenter on good slices, McShane-extended elsewhere.
    pub h: Vec<[f64; 2]>,
    /// Zero of `u` on good slices, extended likewise.
    pub h0: Vec<[f64; 2]>,
    /// Average of `h`.
    pub c: [f64; 2],
    /// Lipschitz constant of the barycenter restricted to the good set.
    pub lip_good: f64,
    /// Lipschitz constant of the extension over neighbouring slices.
    pub lip_extension: f64,
    /// `lip_good / η`.
    pub lip_ratio: f64,
    /// `∫|dh|²` by forward differences.
    pub dirichlet: f64,
    /// `∫|dh|² / E1`, NaN at zero excess.
    pub dirichlet_ratio: f64,
    /// `‖h0 − h‖²_{L²}`.
    pub zero_defect: f64,
    pub e: f64,
    pub e1: f64,
}

fn pairwise_lip(pts: &[(Vec<f64>, [f64; 2])]) -> f64 {
    let mut lip: f64 = 0.0;
    for (i, (za, ha)) in pts.iter().enumerate() {
        for (zb, hb) in &pts[i + 1..] {
            let dz = za.iter().zip(zb).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if dz > 0.0 {
                lip = lip.max((ha[0] - hb[0]).hypot(ha[1] - hb[1]) / dz);
            }
        }
    }
    lip
}

/// Componentwise McShane extension `inf_g (v(g) + L|z − g|)` with `L` the
/// componentwise Lipschitz constant on the good points.
fn mcshane(z: &[Vec<f64>], good: &[bool], v: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let pts: Vec<usize> = (0..z.len()).filter(|&i| good[i]).collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut out = v.to_vec();
    for comp in 0..2 {
        let mut l: f64 = 0.0;
        for (k, &i) in pts.iter().enumerate() {
            for &j in &pts[k + 1..] {
                let d = dist(&z[i], &z[j]);
                if d > 0.0 {
                    l = l.max((v[i][comp] - v[j][comp]).abs() / d);
                }
            }
        }
        for i in 0..z.len() {
            if good[i] {
                continue;
            }
            out[i][comp] = pts.iter().map(|&j| v[j][comp] + l * dist(&z[i], &z[j])).fold(f64::INFINITY, f64::min);
        }
    }
    out
}

/// Builds `h` and `h0` on the slices of a lattice-aligned cylinder.
pub fn lipschitz_approximation(fp: &FieldPair, cyl: &Cylinder, eta: f64) -> Result<ApproximationBundle> {
    let region = Region::Cylinder(cyl.clone());
    let report = excess(fp, &region, &cyl.frame)?;
    let g = fp.geometry();
    let spacing = g.h;
    let m = fp.dim() - 2;
    let rows = report.per_slice.clone();
    if rows.is_empty() {
        return Err(Error::UnsupportedFrame);
    }
    let mut cls = classify_rows(&rows, spacing, cyl.half_length, eta)?;
    let groups = slice_sites(&g, cyl)?;
    let mut zero = vec![[f64::NAN; 2]; rows.len()];
    let mut reclassified = Vec::new();
    for (k, row) in rows.iter().enumerate() {
        if !cls.good_set[k] {
            continue;
        }
        let zs = slice_zeros(fp, cyl, &groups[&row.index], 0.75 * cyl.radius)?;
        if zs.len() == 1 {
            zero[k] = zs[0];
        } else {
            cls.good_set[k] = false;
            reclassified.push(row.index.clone());
        }
    }
    let cell = spacing.powi(m as i32);
    cls.bad_measure = cls.good_set.iter().filter(|g| !**g).count() as f64 * cell;
    cls.fitted_constant = if cls.bad_measure > 0.0 { cls.bad_measure * eta * eta / cls.e1 } else { 0.0 };
    if !cls.good_set.iter().any(|&g| g) {
        return Err(Error::BadSlice(0));
    }
    let z: Vec<Vec<f64>> = rows.iter().map(|r| r.index.iter().map(|&c| c as f64 * spacing).collect()).collect();
    let bary: Vec<[f64; 2]> = rows.iter().map(|r| r.barycenter).collect();
    let good_pts: Vec<(Vec<f64>, [f64; 2])> =
        (0..rows.len()).filter(|&k| cls.good_set[k]).map(|k| (z[k].clone(), bary[k])).collect();
    let lip_good = pairwise_lip(&good_pts);
    let h = mcshane(&z, &cls.good_set, &bary);
    let h0 = mcshane(&z, &cls.good_set, &zero);
    let lookup: BTreeMap<&Vec<i64>, usize> = rows.iter().enumerate().map(|(k, r)| (&r.index, k)).collect();
    let mut dirichlet = 0.0;
    let mut lip_extension: f64 = 0.0;
    for (k, row) in rows.iter().enumerate() {
        for a in 0..m {
            let mut nb = row.index.clone();
            nb[a] += 1;
            if let Some(&j) = lookup.get(&nb) {
                let d2 = (h[j][0] - h[k][0]).powi(2) + (h[j][1] - h[k][1]).powi(2);
                dirichlet += d2 / (spacing * spacing) * cell;
                lip_extension = lip_extension.max(d2.sqrt() / spacing);
            }
        }
    }
    let count = rows.len() as f64;
    let c = [h.iter().map(|v| v[0]).sum::<f64>() / count, h.iter().map(|v| v[1]).sum::<f64>() / count];
    let zero_defect: f64 = h.iter().zip(&h0).map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sum::<f64>() * cell;
    let e1 = cls.e1;
    let e: f64 = rows.iter().map(|r| r.e).sum::<f64>() * cell;
    Ok(ApproximationBundle {
        rows,
        classification: cls,
        reclassified,
        spacing,
        half_length: cyl.half_length,
        h,
        h0,
        c,
        lip_good,
        lip_extension,
        lip_ratio: lip_good / eta,
        dirichlet,
        dirichlet_ratio: if e1 > 0.0 { dirichlet / e1 } else { f64::NAN },
        zero_defect,
        e,
        e1,
    })
}

/// Discrete harmonic approximation of the normalised barycenter map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarmonicApproximation {
    /// Slice indices of the domain `|z| ≤ 3L/4`.
    pub index: Vec<Vec<i64>>,
    pub boundary: Vec<bool>,
    /// Harmonic extension of the boundary values of `(h − c)/√E1`.
    pub w: Vec<[f64; 2]>,
    /// `w − w(0)`.
    pub w_centered: Vec<[f64; 2]>,
    /// Centred-difference gradient of `w` at the origin, `[component][axis]`.
    pub dw0: [[f64; MAX_DIM]; 2],
    /// `‖(h − c)/√E1 − w‖²_{L²}`.
    pub l2_defect: f64,
    pub dirichlet_w: f64,
    /// Largest mean-value defect of `w` at interior nodes.
    pub laplacian_residual: f64,
    /// Largest `|∫⟨dh, dφ⟩|` over the test library.
    pub weak_defect: f64,
    /// `η⁻¹E1 + √(E·E1)`.
    pub weak_bound: f64,
}

/// Solves the discrete Laplace equation on `|z| ≤ 3L/4` with boundary
/// data `(h − c)/√E1`.
pub fn harmonic_approximation(bundle: &ApproximationBundle, e1_floor: f64) -> Result<HarmonicApproximation> {
    if !(bundle.e1 > e1_floor) {
        return Err(Error::DegenerateExcess { e1: bundle.e1 });
    }
    let sp = bundle.spacing;
    let m = bundle.rows.first().map_or(0, |r| r.index.len());
    let reach = 0.75 * bundle.half_length;
    let sel: Vec<usize> = (0..bundle.rows.len())
        .filter(|&k| {
            let r2: f64 = bundle.rows[k].index.iter().map(|&c| (c as f64 * sp).powi(2)).sum();
            r2.sqrt() <= reach * (1.0 + 1e-12)
        })
        .collect();
    let index: Vec<Vec<i64>> = sel.iter().map(|&k| bundle.rows[k].index.clone()).collect();
    let pos: BTreeMap<&Vec<i64>, usize> = index.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let scale = bundle.e1.sqrt();
    let data: Vec<[f64; 2]> = sel
        .iter()
        .map(|&k| [(bundle.h[k][0] - bundle.c[0]) / scale, (bundle.h[k][1] - bundle.c[1]) / scale])
        .collect();
    let neighbours = |key: &Vec<i64>| -> Vec<Option<usize>> {
        let mut out = Vec::with_capacity(2 * m);
        for a in 0..m {
            for d in [-1, 1] {
                let mut nb = key.clone();
                nb[a] += d;
                out.push(pos.get(&nb).copied());
            }
        }
        out
    };
    let nbs: Vec<Vec<Option<usize>>> = index.iter().map(neighbours).collect();
    let boundary: Vec<bool> = nbs.iter().map(|l| l.iter().any(|x| x.is_none())).collect();
    let mut unknown = vec![usize::MAX; index.len()];
    let mut free = Vec::new();
    for i in 0..index.len() {
        if !boundary[i] {
            unknown[i] = free.len();
            free.push(i);
        }
    }
    let mut w = data.clone();
    for comp in 0..2 {
        let rhs: Vec<f64> = free
            .iter()
            .map(|&i| nbs[i].iter().flatten().filter(|&&j| boundary[j]).map(|&j| data[j][comp]).sum())
            .collect();
        let apply = |x: &[f64], out: &mut [f64]| {
            for (k, &i) in free.iter().enumerate() {
                let mut s = 2.0 * m as f64 * x[k];
                for &j in nbs[i].iter().flatten() {
                    if !boundary[j] {
                        s -= x[unknown[j]];
                    }
                }
                out[k] = s;
            }
        };
        let cg = conjugate_gradient(apply, &rhs, None, 1e-14, 10 * free.len() + 100, None);
        for (k, &i) in free.iter().enumerate() {
            w[i][comp] = cg.x[k];
        }
    }
    let mut laplacian_residual: f64 = 0.0;
    for &i in &free {
        for comp in 0..2 {
            let mean = nbs[i].iter().flatten().map(|&j| w[j][comp]).sum::<f64>() / (2 * m) as f64;
            laplacian_residual = laplacian_residual.max((mean - w[i][comp]).abs());
        }
    }
    let origin = vec![0i64; m];
    let o = pos.get(&origin).copied();
    let w0 = o.map_or([0.0; 2], |i| w[i]);
    let w_centered: Vec<[f64; 2]> = w.iter().map(|v| [v[0] - w0[0], v[1] - w0[1]]).collect();
    let mut dw0 = [[0.0; MAX_DIM]; 2];
    if let Some(i) = o {
        for a in 0..m {
            if let (Some(lo), Some(hi)) = (nbs[i][2 * a], nbs[i][2 * a + 1]) {
                for comp in 0..2 {
                    dw0[comp][a] = (w[hi][comp] - w[lo][comp]) / (2.0 * sp);
                }
            }
        }
    }
    let cell = sp.powi(m as i32);
    let l2_defect: f64 =
        data.iter().zip(&w).map(|(d, v)| (d[0] - v[0]).powi(2) + (d[1] - v[1]).powi(2)).sum::<f64>() * cell;
    let mut dirichlet_w = 0.0;
    for i in 0..index.len() {
        for a in 0..m {
            if let Some(j) = nbs[i][2 * a + 1] {
                dirichlet_w += ((w[j][0] - w[i][0]).powi(2) + (w[j][1] - w[i][1]).powi(2)) / (sp * sp) * cell;
            }
        }
    }
    // weak Laplacian of h against radial bumps of radius L/4
    let all: BTreeMap<&Vec<i64>, usize> = bundle.rows.iter().enumerate().map(|(k, r)| (&r.index, k)).collect();
    let bump = Cutoff::new(0.0, 0.25 * bundle.half_length);
    let mut centers = vec![vec![0.0; m]];
    for a in 0..m {
        for s in [-1.0, 1.0] {
            let mut c = vec![0.0; m];
            c[a] = s * 0.25 * bundle.half_length;
            centers.push(c);
        }
    }
    let mut weak_defect: f64 = 0.0;
    for c in &centers {
        let mut acc = [0.0; 2];
        for (k, row) in bundle.rows.iter().enumerate() {
            let zk: Vec<f64> = row.index.iter().map(|&v| v as f64 * sp).collect();
            for a in 0..m {
                let mut nb = row.index.clone();
                nb[a] += 1;
                if let Some(&j) = all.get(&nb) {
                    let mut zj = zk.clone();
                    zj[a] += sp;
                    let dphi = bump.radial(&zj, c).value - bump.radial(&zk, c).value;
                    for comp in 0..2 {
                        acc[comp] += (bundle.h[j][comp] - bundle.h[k][comp]) * dphi / (sp * sp) * cell;
                    }
                }
            }
        }
        weak_defect = weak_defect.max(acc[0].abs()).max(acc[1].abs());
    }
    let eta = bundle.classification.eta;
    let weak_bound = bundle.e1 / eta + (bundle.e.max(0.0) * bundle.e1).sqrt();
    Ok(HarmonicApproximation {
        index,
        boundary,
        w,
        w_centered,
        dw0,
        l2_defect,
        dirichlet_w,
        laplacian_residual,
        weak_defect,
        weak_bound,
    })
}

/// Two sides of the Caccioppoli-type inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaccioppoliReport {
    /// `∫φ²(E1)_z dz`.
    pub lhs: f64,
    /// `(1/2π)∫_{B²_{R/2}×B_{3L/4}} |y − c|² e Δ(φ²)`.
    pub moment_term: f64,
    /// `(σ²E1 + floor)‖D²φ‖∞`.
    pub tail_term: f64,
    /// `moment_term + tail_term − lhs`.
    pub margin: f64,
    /// `lhs / (moment_term + tail_term)`, zero when the left side vanishes.
    pub required_constant: f64,
}

/// Evaluates both sides for `φ(z) = χ(|z|)` with the cutoff `phi`.
pub fn caccioppoli_check(
    fp: &FieldPair,
    cyl: &Cylinder,
    phi: &Cutoff,
    c: [f64; 2],
    sigma: f64,
    floor: f64,
) -> Result<CaccioppoliReport> {
    if phi.outer > 0.75 * cyl.half_length * (1.0 + 1e-12) {
        return Err(Error::InvalidConfig("test function must be supported in the inner three quarters".into()));
    }
    let report = excess(fp, &Region::Cylinder(cyl.clone()), &cyl.frame)?;
    if report.per_slice.is_empty() {
        return Err(Error::UnsupportedFrame);
    }
    let g = fp.geometry();
    let n = g.dim;
    let m = n - 2;
    let sp = g.h;
    let cell = sp.powi(m as i32);
    let zero = [0.0; MAX_DIM];
    let mut lhs = 0.0;
    let mut e1 = 0.0;
    let mut d2_sup: f64 = 0.0;
    for row in &report.per_slice {
        let j = phi.radial(&row.z, &zero[..m]);
        lhs += j.value * j.value * row.e1 * cell;
        e1 += row.e1 * cell;
        let frob: f64 = (0..m).flat_map(|a| (0..m).map(move |b| (a, b))).map(|(a, b)| j.hess[a][b].powi(2)).sum();
        d2_sup = d2_sup.max(frob.sqrt());
    }
    let groups = slice_sites(&g, cyl)?;
    let mut moment = 0.0;
    for sites in groups.values() {
        for &i in sites {
            let y = cyl.local(&g.position(i)[..n]);
            if y[0].hypot(y[1]) > 0.5 * cyl.radius * (1.0 + 1e-12) {
                continue;
            }
            let j = phi.radial(&y[2..n], &zero[..m]);
            let lap: f64 = (0..m).map(|a| j.hess[a][a]).sum();
            let grad2: f64 = (0..m).map(|a| j.grad[a] * j.grad[a]).sum();
            let lap_sq = 2.0 * j.value * lap + 2.0 * grad2;
            if lap_sq == 0.0 {
                continue;
            }
            let r2 = (y[0] - c[0]).powi(2) + (y[1] - c[1]).powi(2);
            moment += r2 * fp.stencil(&g, i).density(fp.eps) * lap_sq;
        }
    }
    let moment_term = moment * g.cell_volume() / TWO_PI;
    let tail_term = (sigma * sigma * e1 + floor) * d2_sup;
    let rhs = moment_term + tail_term;
    Ok(CaccioppoliReport {
        lhs,
        moment_term,
        tail_term,
        margin: rhs - lhs,
        required_constant: if lhs > 0.0 { lhs / rhs } else { 0.0 },
    })
}
