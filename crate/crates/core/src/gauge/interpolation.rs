//! The interpolation gauge: local Coulomb gauges on a cover of the
//! vorticity set and phase alignment far from it, patched by a partition
//! of unity on an axial annulus.

use serde::{Deserialize, Serialize};

use super::coulomb::region_link;
use super::neumann::{fix_on, unwrap_phase_difference};
use crate::error::{Error, Result};
use crate::excess::{slice_profile, PlaneFrame};
use crate::lattice::{gauge_apply, Cylinder, FieldPair, GaugeTransform, Region, C64};
use crate::util::Cutoff;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Construction constants.
///
/// Cylinders have disk radius `c0·ε|ln ε|` and axial radius `c0·ε`; a
/// cylinder is good when its normalised excess is at most `eta0²`; the
/// exponential floor of the audit envelope is `ε^β`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationParams {
    pub c0: f64,
    pub eta0: f64,
    pub beta: f64,
}

impl Default for InterpolationParams {
    fn default() -> Self {
        InterpolationParams { c0: 2.0, eta0: 0.3, beta: 4.0 }
    }
}

/// `B²_1 × (B^{n−2}_{s+δ} \ B̄^{n−2}_s)` in the coordinates of the first two
/// lattice axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxialAnnulus {
    pub s: f64,
    pub delta: f64,
}

impl AxialAnnulus {
    fn contains(&self, x: &[f64]) -> bool {
        let y = x[0].hypot(x[1]);
        let z = x[2..].iter().map(|v| v * v).sum::<f64>().sqrt();
        y <= 1.0 + 1e-9 && z > self.s + 1e-9 && z <= self.s + self.delta + 1e-9
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverCylinder {
    pub y: [f64; 2],
    pub z: Vec<f64>,
    /// `(c0ε)^{2−n}(1/2π)∫(e − J(e_1,e_2))` over the cylinder.
    pub excess: f64,
    pub good: bool,
    pub gaffney_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationAudit {
    /// `ε⁻²∫|e^{iξ}u − u_h|²` over the annulus.
    pub modulus_term: f64,
    /// `∫|(α + dξ) − α_h|²` over the links of the annulus.
    pub form_term: f64,
    /// `modulus_term + form_term`.
    pub integral: f64,
    /// `∫E_z` over the slices `s − δ ≤ |z| ≤ s + 2δ`.
    pub excess_integral: f64,
    /// `|ln ε|^{10} · excess_integral + ε^β`, the envelope with unit constant.
    pub envelope: f64,
    /// Largest `|arg(e^{iξ}u/u_h)|` where only the far-field gauge acts.
    pub far_phase_defect: f64,
    /// `(j, k, ‖ξ_j − ξ_k‖_{L²})` over overlapping supports; index 0 is
    /// the far-field gauge.
    pub overlap: Vec<(usize, usize, f64)>,
    /// Largest deviation of the partition of unity from 1.
    pub partition_defect: f64,
}

#[derive(Clone, Debug)]
pub struct InterpolationGauge {
    pub xi: GaugeTransform,
    pub pair: FieldPair,
    pub cover: Vec<CoverCylinder>,
    pub audit: InterpolationAudit,
}

fn zgrid(m: usize, lo: f64, hi: f64, step: f64) -> Vec<Vec<f64>> {
    let k = (hi / step).ceil() as i64;
    let mut out = Vec::new();
    let mut idx = vec![-k; m];
    loop {
        let z: Vec<f64> = idx.iter().map(|&c| c as f64 * step).collect();
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > lo - 0.5 * step && r <= hi + 0.5 * step {
            out.push(z);
        }
        let mut d = 0;
        loop {
            if d == m {
                return out;
            }
            idx[d] += 1;
            if idx[d] <= k {
                break;
            }
            idx[d] = -k;
            d += 1;
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Builds the patched gauge of `fp` towards `target` on the annulus.
pub fn interpolation_gauge(
    fp: &FieldPair,
    target: &FieldPair,
    annulus: &AxialAnnulus,
    params: &InterpolationParams,
) -> Result<InterpolationGauge> {
    if fp.spec != target.spec {
        return Err(Error::ShapeMismatch("pair and target live on different lattices".into()));
    }
    let g = fp.geometry();
    let n = g.dim;
    if n < 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: n });
    }
    let m = n - 2;
    let eps = fp.eps;
    let disk = params.c0 * eps * eps.ln().abs();
    let axial = params.c0 * eps;
    let outer = Cylinder::new(&vec![0.0; n], PlaneFrame::standard(n), 1.0, annulus.s + 2.0 * annulus.delta);
    Region::Cylinder(outer.clone()).check_inside(&fp.spec)?;
    let sites: Vec<usize> = (0..g.n_sites).filter(|&i| g.is_interior(i) && annulus.contains(&g.position(i)[..n])).collect();
    let mut in_a = vec![false; g.n_sites];
    sites.iter().for_each(|&s| in_a[s] = true);
    // centres: the deepest point of u on the slice nearest each grid node
    let step = axial.max(g.h);
    let mut cover_pts: Vec<([f64; 2], Vec<f64>)> = Vec::new();
    for zc in zgrid(m, annulus.s, annulus.s + annulus.delta, step) {
        let best = sites
            .iter()
            .filter(|&&i| dist(&g.position(i)[2..n], &zc) <= 0.5 * g.h + 1e-9 || m == 1 && (g.position(i)[2] - zc[0]).abs() <= 0.5 * g.h)
            .min_by(|&&a, &&b| fp.u[a].norm().total_cmp(&fp.u[b].norm()));
        if let Some(&i) = best {
            if fp.u[i].norm() <= 0.75 {
                let x = g.position(i);
                cover_pts.push(([x[0], x[1]], x[2..n].to_vec()));
            }
        }
    }
    if cover_pts.is_empty() {
        return Err(Error::CoveringFailure("no vorticity on the annulus".into()));
    }
    for &i in &sites {
        if fp.u[i].norm() > 0.75 {
            continue;
        }
        let x = g.position(i);
        let covered = cover_pts
            .iter()
            .any(|(y, z)| (x[0] - y[0]).hypot(x[1] - y[1]) <= 0.4 * disk && dist(&x[2..n], z) <= step);
        if !covered {
            return Err(Error::CoveringFailure(format!("vorticity at {:?} escapes the cylinders", &x[..n])));
        }
    }
    let chi_y = Cutoff::new(0.7 * disk, 0.9 * disk);
    let chi_z = Cutoff::new(step, 1.5 * step);
    let chi_far = Cutoff::new(0.5 * disk, 0.7 * disk);
    let near = |x: &[f64]| -> f64 {
        cover_pts
            .iter()
            .filter(|(_, z)| dist(&x[2..n], z) <= 1.5 * step)
            .map(|(y, _)| (x[0] - y[0]).hypot(x[1] - y[1]))
            .fold(f64::INFINITY, f64::min)
    };
    // far-field gauge
    let far: Vec<usize> = sites.iter().copied().filter(|&i| near(&g.position(i)[..n]) > 0.5 * disk).collect();
    if far.iter().any(|&s| fp.u[s].norm() < 0.75 || target.u[s].norm() < 0.75) {
        return Err(Error::VorticityInRegion);
    }
    let mut xi0 = vec![f64::NAN; g.n_sites];
    for (s, v) in unwrap_phase_difference(fp, target, &far)? {
        xi0[s] = v;
    }
    // local Coulomb gauges
    let mut locals: Vec<Vec<f64>> = Vec::with_capacity(cover_pts.len());
    let mut supports: Vec<Vec<bool>> = Vec::with_capacity(cover_pts.len());
    let mut cover = Vec::with_capacity(cover_pts.len());
    for (y, z) in &cover_pts {
        let mut active = vec![false; g.n_sites];
        let mut ann = Vec::new();
        let (mut ex, mut cnt) = (0.0, 0usize);
        for &i in &sites {
            let x = g.position(i);
            let r = (x[0] - y[0]).hypot(x[1] - y[1]);
            if r <= disk && dist(&x[2..n], z) <= 1.5 * step {
                active[i] = true;
                if r >= 0.5 * disk {
                    ann.push(i);
                }
                let st = fp.stencil(&g, i);
                ex += st.density(eps) - st.jacobian(0, 1);
                cnt += 1;
            }
        }
        if cnt == 0 {
            return Err(Error::CoveringFailure("empty cylinder".into()));
        }
        let fix = fix_on(fp, target, &g, active.clone(), ann, disk)?;
        let mut xi = fix.xi.xi;
        // align the 2π branch with the far-field gauge on the overlap
        let (mut s, mut c) = (0.0, 0usize);
        for &i in &far {
            if active[i] {
                s += xi0[i] - xi[i];
                c += 1;
            }
        }
        if c > 0 {
            let shift = TWO_PI * (s / c as f64 / TWO_PI).round();
            for (v, &a) in xi.iter_mut().zip(&active) {
                if a {
                    *v += shift;
                }
            }
        }
        let excess = ex * g.cell_volume() / TWO_PI * axial.powi(2 - n as i32);
        cover.push(CoverCylinder {
            y: *y,
            z: z.clone(),
            excess,
            good: excess <= params.eta0 * params.eta0,
            gaffney_ratio: fix.gaffney_ratio,
        });
        locals.push(xi);
        supports.push(active);
    }
    // patch
    let mut xi = vec![0.0; g.n_sites];
    let mut partition_defect: f64 = 0.0;
    for &i in &sites {
        let x = g.position(i);
        let w0 = 1.0 - chi_far.value(near(&x[..n]));
        let mut total = w0;
        let mut acc = if w0 > 0.0 { w0 * xi0[i] } else { 0.0 };
        let mut weights = Vec::new();
        for (k, (y, z)) in cover_pts.iter().enumerate() {
            if !supports[k][i] {
                continue;
            }
            let w = chi_y.value((x[0] - y[0]).hypot(x[1] - y[1])) * chi_z.value(dist(&x[2..n], z));
            if w > 0.0 {
                total += w;
                acc += w * locals[k][i];
                weights.push(w);
            }
        }
        if !(total > 0.0) {
            return Err(Error::CoveringFailure(format!("partition of unity vanishes at {:?}", &x[..n])));
        }
        xi[i] = acc / total;
        let sum = w0 / total + weights.iter().map(|w| w / total).sum::<f64>();
        partition_defect = partition_defect.max((sum - 1.0).abs());
    }
    let transform = GaugeTransform { xi };
    let pair = gauge_apply(fp, &transform)?;
    // audit
    let vol = g.cell_volume();
    let mut modulus_term = 0.0;
    let mut form_term = 0.0;
    let mut far_phase_defect: f64 = 0.0;
    for &i in &sites {
        modulus_term += (pair.u[i] - target.u[i]).norm_sqr();
        for j in 0..n {
            if region_link(&g, &in_a, i, j).is_some() {
                form_term += (pair.alpha[j][i] - target.alpha[j][i]).powi(2);
            }
        }
        if near(&g.position(i)[..n]) >= 0.7 * disk {
            let z: C64 = pair.u[i] / target.u[i];
            far_phase_defect = far_phase_defect.max(z.arg().abs());
        }
    }
    modulus_term *= vol / (eps * eps);
    form_term *= vol;
    let mut overlap = Vec::new();
    let parts: Vec<(&Vec<f64>, Vec<bool>)> = std::iter::once((&xi0, {
        let mut f = vec![false; g.n_sites];
        far.iter().for_each(|&s| f[s] = true);
        f
    }))
    .chain(locals.iter().zip(supports.iter().cloned()))
    .collect();
    for a in 0..parts.len() {
        for b in a + 1..parts.len() {
            let (mut s, mut c) = (0.0, 0usize);
            for &i in &sites {
                if parts[a].1[i] && parts[b].1[i] {
                    s += (parts[a].0[i] - parts[b].0[i]).powi(2);
                    c += 1;
                }
            }
            if c > 0 {
                overlap.push((a, b, (s * vol).sqrt()));
            }
        }
    }
    // excess on the widened slices
    let rows = slice_profile(fp, &outer)?;
    let lo = (annulus.s - annulus.delta).max(0.0);
    let cell = g.h.powi(m as i32);
    let excess_integral: f64 = rows
        .iter()
        .filter(|r| r.z.iter().map(|v| v * v).sum::<f64>().sqrt() >= lo - 1e-9)
        .map(|r| r.e * cell)
        .sum();
    let envelope = eps.ln().abs().powi(10) * excess_integral + eps.powf(params.beta);
    Ok(InterpolationGauge {
        xi: transform,
        pair,
        cover,
        audit: InterpolationAudit {
            modulus_term,
            form_term,
            integral: modulus_term + form_term,
            excess_integral,
            envelope,
            far_phase_defect,
            overlap,
            partition_defect,
        },
    })
}
