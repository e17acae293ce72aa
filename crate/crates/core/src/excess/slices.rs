//! Vertical slices of a cylinder: per-slice excess, degree, barycenter and
//! the good/bad classification by the maximal function of `(E1)_z`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::frame::PlaneFrame;
use super::moments::{split_densities, ExcessReport};
use crate::error::{Error, Result};
use crate::lattice::{pair_index, pairs, Cylinder, FieldPair, Geometry, Region, SiteStencil, MAX_DIM};
use crate::util::Cutoff;
use crate::vortex2d::{degree, LoopSpec};

const TWO_PI: f64 = std::f64::consts::TAU;

/// One vertical slice `B²_R × {z}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceRow {
    /// Integer offset of the slice along the axes of `S`, in lattice cells.
    pub index: Vec<i64>,
    /// Frame coordinates `z` of the slice.
    pub z: Vec<f64>,
    /// `(1/2π)∫(e − J(e_1, e_2))`.
    pub e: f64,
    pub e1: f64,
    pub e2: f64,
    /// Raw `∫e` over the disk.
    pub slice_energy: f64,
    /// `(1/2π)∫J(e_1, e_2)`.
    pub flux: f64,
    /// Degree on the boundary circle; `None` when `|u| < 1/2` on the
    /// annulus `R/2 ≤ |y| ≤ R` or the loop.
    pub degree: Option<i32>,
    /// `Φ_χ(z) = (1/2π)∫χ(|y|)·y·J(e_1, e_2)`.
    pub barycenter: [f64; 2],
    /// `|deg + E_z − slice_energy/2π|`, NaN for flagged slices.
    pub identity_defect: f64,
    pub annulus_min_modulus: f64,
}

#[derive(Default, Clone)]
struct Acc {
    energy: f64,
    pairing: f64,
    e1: f64,
    e2: f64,
    bary: [f64; 2],
    annulus_min: f64,
}

/// Signed lattice axes of an aligned frame, or an error.
pub(crate) fn aligned_axes(frame: &PlaneFrame) -> Result<Vec<(usize, f64)>> {
    frame.lattice_axes().ok_or(Error::UnsupportedFrame)
}

/// `J(e_1, e_2)` at a site for a frame with bivector `b`.
pub(crate) fn normal_jacobian(st: &SiteStencil, b: &[f64; 6]) -> f64 {
    pairs(st.dim).iter().map(|&(j, k)| b[pair_index(j, k)] * st.jacobian(j, k)).sum()
}

/// Slices of the cylinder keyed by their integer offset.
pub(crate) fn slice_sites(g: &Geometry, cyl: &Cylinder) -> Result<BTreeMap<Vec<i64>, Vec<usize>>> {
    aligned_axes(&cyl.frame)?;
    let n = g.dim;
    let region = Region::Cylinder(cyl.clone());
    let mut out: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for i in region.sites(g) {
        let y = cyl.local(&g.position(i)[..n]);
        let key: Vec<i64> = (2..n).map(|a| (y[a] / g.h).round() as i64).collect();
        out.entry(key).or_default().push(i);
    }
    Ok(out)
}

/// Per-slice table of a cylinder whose frame is made of lattice axes.
pub fn slice_profile(fp: &FieldPair, cyl: &Cylinder) -> Result<Vec<SliceRow>> {
    Region::Cylinder(cyl.clone()).check_inside(&fp.spec)?;
    if cyl.frame.dim() != fp.dim() || cyl.center.len() != fp.dim() {
        return Err(Error::DimensionMismatch { expected: fp.dim(), found: cyl.frame.dim() });
    }
    slice_rows(fp, cyl)
}

pub(crate) fn slice_rows(fp: &FieldPair, cyl: &Cylinder) -> Result<Vec<SliceRow>> {
    let g = fp.geometry();
    let n = g.dim;
    let axes = aligned_axes(&cyl.frame)?;
    let b = cyl.frame.normal_bivector();
    let rows = cyl.frame.rows();
    let chi = Cutoff::slice(cyl.radius);
    let area = g.h * g.h;
    let groups = slice_sites(&g, cyl)?;
    let eps = fp.eps;
    let r = cyl.radius;
    let mut out = Vec::with_capacity(groups.len());
    for (key, sites) in groups {
        let mut acc = Acc { annulus_min: f64::INFINITY, ..Acc::default() };
        let mut zc = [0.0; MAX_DIM];
        for &i in &sites {
            let x = g.position(i);
            let y = cyl.local(&x[..n]);
            zc = y;
            let st = fp.stencil(&g, i);
            let j = normal_jacobian(&st, &b);
            let (d1, d2) = split_densities(&st, &rows, eps);
            acc.energy += st.density(eps);
            acc.pairing += j;
            acc.e1 += d1;
            acc.e2 += d2;
            let rho = y[0].hypot(y[1]);
            let c = chi.value(rho);
            acc.bary[0] += c * y[0] * j;
            acc.bary[1] += c * y[1] * j;
            if rho >= 0.5 * r - 1e-9 {
                acc.annulus_min = acc.annulus_min.min(fp.u[i].norm());
            }
        }
        let z: Vec<f64> = zc[2..n].to_vec();
        // loop through the slice in the (e_1, e_2) lattice plane
        let mut center = cyl.center.clone();
        for (k, &(ax, sign)) in axes.iter().enumerate().skip(2) {
            center[ax] = cyl.center[ax] + sign * zc[k];
        }
        let deg = if acc.annulus_min >= 0.5 {
            let lp = LoopSpec { center, radius: r, plane: (axes[0].0, axes[1].0) };
            match degree(fp, &lp) {
                Ok(d) => Some(d * (axes[0].1 * axes[1].1) as i32),
                Err(Error::VorticityOnLoop { .. }) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let e = (acc.energy - acc.pairing) * area / TWO_PI;
        let slice_energy = acc.energy * area;
        let identity_defect = match deg {
            Some(d) => (d as f64 + e - slice_energy / TWO_PI).abs(),
            None => f64::NAN,
        };
        out.push(SliceRow {
            index: key,
            z,
            e,
            e1: acc.e1 * area / TWO_PI,
            e2: acc.e2 * area / TWO_PI,
            slice_energy,
            flux: acc.pairing * area / TWO_PI,
            degree: deg,
            barycenter: [acc.bary[0] * area / TWO_PI, acc.bary[1] * area / TWO_PI],
            identity_defect,
            annulus_min_modulus: acc.annulus_min,
        });
    }
    Ok(out)
}

/// Test data for the slice distribution: `ψ(y) = χ_ψ(|y|)` on the disk and
/// `φ(z) = direction·χ_φ(|z|)` on `S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceTest {
    pub psi_inner: f64,
    pub psi_outer: f64,
    pub phi_inner: f64,
    pub phi_outer: f64,
    pub direction: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BvDefect {
    /// `⟨dΦ_ψ, φ⟩` through the interior-product formula.
    pub formula: f64,
    /// The same pairing through centred differences of `Φ_ψ` in `z`.
    pub finite_difference: f64,
    /// `Λ = ∫e/2π` over the cylinder.
    pub lambda: f64,
    pub e1: f64,
    pub sup_dpsi: f64,
    pub sup_phi: f64,
    /// `|formula| / (‖dψ‖∞ ‖φ‖∞ √Λ √E1)`.
    pub required_constant: f64,
}

/// Evaluates `⟨dΦ_ψ, φ⟩` for `Φ_ψ(z) = (1/2π)∫ψ J(e_1, e_2)(·, z)`.
///
/// The formula route integrates
/// `Σ_{k≥3} [J(e_2, e_k) ∂_1ψ − J(e_1, e_k) ∂_2ψ] φ_k` over the cylinder.
pub fn bv_defect(fp: &FieldPair, cyl: &Cylinder, test: &SliceTest) -> Result<BvDefect> {
    Region::Cylinder(cyl.clone()).check_inside(&fp.spec)?;
    let g = fp.geometry();
    let n = g.dim;
    let m = n - 2;
    if test.direction.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: test.direction.len() });
    }
    let h = g.h;
    let psi = Cutoff::new(test.psi_inner, test.psi_outer);
    let phi = Cutoff::new(test.phi_inner, test.phi_outer);
    let frame = &cyl.frame;
    let b12 = frame.normal_bivector();
    let bivec = |a: usize, c: usize| -> [f64; 6] {
        let (ea, ec) = (frame.vector(a), frame.vector(c));
        let mut out = [0.0; 6];
        for (j, k) in pairs(n) {
            out[pair_index(j, k)] = ea[j] * ec[k] - ea[k] * ec[j];
        }
        out
    };
    let b1k: Vec<[f64; 6]> = (2..n).map(|k| bivec(0, k)).collect();
    let b2k: Vec<[f64; 6]> = (2..n).map(|k| bivec(1, k)).collect();
    let groups = slice_sites(&g, cyl)?;
    let mut formula = 0.0;
    let mut energy = 0.0;
    let mut e1 = 0.0;
    let mut phi_map: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let rows = frame.rows();
    let origin = [0.0; 2];
    for (key, sites) in &groups {
        let mut slice_phi = 0.0;
        for &i in sites {
            let y = cyl.local(&g.position(i)[..n]);
            let st = fp.stencil(&g, i);
            let pj = psi.radial(&y[..2], &origin);
            let fj = phi.radial(&y[2..n], &[0.0; MAX_DIM][..m]);
            for k in 0..m {
                let phk = test.direction[k] * fj.value;
                if phk != 0.0 {
                    formula += (normal_jacobian(&st, &b2k[k]) * pj.grad[0] - normal_jacobian(&st, &b1k[k]) * pj.grad[1]) * phk;
                }
            }
            slice_phi += pj.value * normal_jacobian(&st, &b12);
            energy += st.density(fp.eps);
            e1 += split_densities(&st, &rows, fp.eps).0;
        }
        phi_map.insert(key.clone(), slice_phi * h * h / TWO_PI);
    }
    let vol = g.cell_volume();
    formula *= vol / TWO_PI;
    // Σ_k ∂_kΦ_ψ φ_k over slices with both neighbours present
    let mut fd = 0.0;
    for key in phi_map.keys() {
        let z: Vec<f64> = key.iter().map(|&c| c as f64 * h).collect();
        let fj = phi.radial(&z, &[0.0; MAX_DIM][..m]);
        if fj.value == 0.0 {
            continue;
        }
        for k in 0..m {
            let mut kp = key.clone();
            let mut km = key.clone();
            kp[k] += 1;
            km[k] -= 1;
            if let (Some(a), Some(c)) = (phi_map.get(&kp), phi_map.get(&km)) {
                fd += (a - c) / (2.0 * h) * test.direction[k] * fj.value;
            }
        }
    }
    fd *= h.powi(m as i32);
    let lambda = energy * vol / TWO_PI;
    let e1 = e1 * vol / TWO_PI;
    let sup_dpsi = sup_derivative(&psi);
    let sup_phi = test.direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    let denom = sup_dpsi * sup_phi * lambda.sqrt() * e1.sqrt();
    let required_constant = if denom > 0.0 { formula.abs() / denom } else { 0.0 };
    Ok(BvDefect { formula, finite_difference: fd, lambda, e1, sup_dpsi, sup_phi, required_constant })
}

/// `sup |χ'|` of a cutoff, sampled finely.
pub(crate) fn sup_derivative(c: &Cutoff) -> f64 {
    (0..=1000)
        .map(|s| c.eval(c.inner + (c.outer - c.inner) * s as f64 / 1000.0).1.abs())
        .fold(0.0, f64::max)
}

/// Good/bad classification of slices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceClassification {
    pub eta: f64,
    pub index: Vec<Vec<i64>>,
    pub good_set: Vec<bool>,
    pub maximal_fn: Vec<f64>,
    /// `h^{n−2}·#bad`.
    pub bad_measure: f64,
    /// `∫(E1)_z dz`.
    pub e1: f64,
    /// `bad_measure·η²/E1`, zero when nothing is bad.
    pub fitted_constant: f64,
    pub radii: Vec<f64>,
}

/// Maximal function of `(E1)_z` over the discrete radii
/// `{0, h, 2h, 4h, …}` up to `max(h, L/50)` and the good set
/// `M(z) ≤ η²`.
pub fn classify_slices(report: &ExcessReport, eta: f64) -> Result<SliceClassification> {
    if report.per_slice.is_empty() {
        return Err(Error::InvalidConfig("the report carries no slices".into()));
    }
    classify_rows(&report.per_slice, report.slice_spacing, report.slice_half_length, eta)
}

pub(crate) fn classify_rows(rows: &[SliceRow], spacing: f64, half_length: f64, eta: f64) -> Result<SliceClassification> {
    if !(eta > 0.0) || !(spacing > 0.0) {
        return Err(Error::InvalidConfig("η and the slice spacing must be positive".into()));
    }
    let m = rows.first().map_or(0, |r| r.index.len());
    let cap = (half_length / 50.0).max(spacing);
    let mut radii = vec![0.0];
    let mut r = spacing;
    while r <= cap * (1.0 + 1e-12) {
        radii.push(r);
        r *= 2.0;
    }
    let maximal_fn: Vec<f64> = rows
        .iter()
        .map(|row| {
            radii
                .iter()
                .map(|&rad| {
                    let (mut s, mut c) = (0.0, 0usize);
                    for other in rows {
                        let d2: f64 = row.index.iter().zip(&other.index).map(|(a, b)| ((a - b) as f64 * spacing).powi(2)).sum();
                        if d2.sqrt() <= rad * (1.0 + 1e-12) {
                            s += other.e1;
                            c += 1;
                        }
                    }
                    s / c as f64
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let good_set: Vec<bool> = maximal_fn.iter().map(|&v| v <= eta * eta).collect();
    let cell = spacing.powi(m as i32);
    let bad_measure = good_set.iter().filter(|g| !**g).count() as f64 * cell;
    let e1: f64 = rows.iter().map(|r| r.e1).sum::<f64>() * cell;
    let fitted_constant = if bad_measure > 0.0 { bad_measure * eta * eta / e1 } else { 0.0 };
    Ok(SliceClassification {
        eta,
        index: rows.iter().map(|r| r.index.clone()).collect(),
        good_set,
        maximal_fn,
        bad_measure,
        e1,
        fitted_constant,
        radii,
    })
}
