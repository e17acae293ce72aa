//! Excess of a pair on a region with respect to an oriented plane.

use serde::{Deserialize, Serialize};

use super::frame::PlaneFrame;
use super::slices::{slice_rows, SliceRow};
use crate::error::{Error, Result};
use crate::lattice::{pair_index, pairs, FieldPair, Region, C64, MAX_DIM};
use crate::util::{par_sum_over, par_sum_vec};

const TWO_PI: f64 = std::f64::consts::TAU;

/// Integrated quadratic data of a pair over a region, from which the
/// excess with respect to any frame follows by linear algebra.
///
/// All integrals are raw lattice sums times `hⁿ`, without normalisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionMoments {
    pub dim: usize,
    pub eps: f64,
    /// Normalising factor `r^{2−n}/2π`.
    pub normalization: f64,
    pub energy: f64,
    /// `∫J_p` indexed by [`pair_index`].
    pub jacobian: [f64; 6],
    /// `∫⟨∇_a u, ∇_b u⟩`.
    pub gradient_gram: [[f64; MAX_DIM]; MAX_DIM],
    /// `∫ω_p ω_q`.
    pub curvature_gram: [[f64; 6]; 6],
}

const K: usize = 1 + 6 + MAX_DIM * MAX_DIM + 36;

impl RegionMoments {
    pub fn compute(fp: &FieldPair, region: &Region) -> Result<Self> {
        region.check_inside(&fp.spec)?;
        let g = fp.geometry();
        let n = g.dim;
        let sites = region.sites(&g);
        let ps = pairs(n);
        let eps = fp.eps;
        let acc = par_sum_vec::<_, K>(sites.len(), |s| {
            let st = fp.stencil(&g, sites[s]);
            let m = st.num_corners();
            let mut v = [0.0; K];
            for c in 0..m {
                let jet = st.corner(c);
                v[0] += jet.density(eps);
                for &(j, k) in &ps {
                    v[1 + pair_index(j, k)] += jet.jacobian(j, k);
                }
                for a in 0..n {
                    for b in 0..n {
                        v[7 + a * MAX_DIM + b] += (jet.du[a] * jet.du[b].conj()).re;
                    }
                }
                for &(a, b) in &ps {
                    for &(c2, d) in &ps {
                        v[7 + MAX_DIM * MAX_DIM + 6 * pair_index(a, b) + pair_index(c2, d)] += jet.om[a][b] * jet.om[c2][d];
                    }
                }
            }
            v.iter_mut().for_each(|x| *x /= m as f64);
            v
        });
        let vol = g.cell_volume();
        let mut jacobian = [0.0; 6];
        let mut gradient_gram = [[0.0; MAX_DIM]; MAX_DIM];
        let mut curvature_gram = [[0.0; 6]; 6];
        for p in 0..6 {
            jacobian[p] = acc[1 + p] * vol;
            for q in 0..6 {
                curvature_gram[p][q] = acc[7 + MAX_DIM * MAX_DIM + 6 * p + q] * vol;
            }
        }
        for a in 0..MAX_DIM {
            for b in 0..MAX_DIM {
                gradient_gram[a][b] = acc[7 + a * MAX_DIM + b] * vol;
            }
        }
        let r = region.scale();
        Ok(RegionMoments {
            dim: n,
            eps,
            normalization: r.powi(2 - n as i32) / TWO_PI,
            energy: acc[0] * vol,
            jacobian,
            gradient_gram,
            curvature_gram,
        })
    }

    /// `(E, E1)` for the frame, normalised.
    pub fn evaluate(&self, frame: &PlaneFrame) -> (f64, f64) {
        let n = self.dim;
        let b = frame.normal_bivector();
        let pairing: f64 = (0..6).map(|p| b[p] * self.jacobian[p]).sum();
        let mut tangential = 0.0;
        for k in 2..n {
            let e = frame.vector(k);
            for a in 0..n {
                for c in 0..n {
                    tangential += e[a] * self.gradient_gram[a][c] * e[c];
                }
            }
        }
        let total_curv: f64 = (0..6).map(|p| self.curvature_gram[p][p]).sum();
        let mut normal_curv = 0.0;
        for p in 0..6 {
            for q in 0..6 {
                normal_curv += b[p] * self.curvature_gram[p][q] * b[q];
            }
        }
        let e1 = tangential + self.eps * self.eps * (total_curv - normal_curv);
        (self.normalization * (self.energy - pairing), self.normalization * e1)
    }
}

/// Excess of a pair on a region.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExcessReport {
    pub frame: PlaneFrame,
    /// Normalised energy `r^{2−n}/2π ∫e`.
    pub normalized_energy: f64,
    /// `r^{2−n}/2π ∫(e − J(e_1, e_2))`.
    pub e: f64,
    pub e1: f64,
    pub e2: f64,
    /// `|E − (E1 + E2)|` relative to the normalised energy.
    pub split_defect: f64,
    /// Per-slice data, filled for cylinders with a lattice-aligned frame.
    pub per_slice: Vec<SliceRow>,
    /// Distance between consecutive slices; zero without slices.
    pub slice_spacing: f64,
    /// Half-length of the cylinder; zero without slices.
    pub slice_half_length: f64,
}

/// Computes `E` through the Jacobian pairing and `E1`, `E2` through the
/// pointwise completion of squares in the rotated frame.
///
/// At every corner `e − J(e_1,e_2)` equals the sum of the two integrands
/// identically, so the two routes agree to rounding.
pub fn excess(fp: &FieldPair, region: &Region, frame: &PlaneFrame) -> Result<ExcessReport> {
    let n = fp.dim();
    if frame.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: frame.dim() });
    }
    if n < 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: n });
    }
    region.check_inside(&fp.spec)?;
    let g = fp.geometry();
    let sites = region.sites(&g);
    let rows = frame.rows();
    let b = frame.normal_bivector();
    let ps = pairs(n);
    let eps = fp.eps;
    let [energy, pairing, e1, e2] = par_sum_vec::<_, 4>(sites.len(), |s| {
        let st = fp.stencil(&g, sites[s]);
        let j: f64 = ps.iter().map(|&(a, c)| b[pair_index(a, c)] * st.jacobian(a, c)).sum();
        let (d1, d2) = split_densities(&st, &rows, eps);
        [st.density(eps), j, d1, d2]
    });
    let vol = g.cell_volume();
    let norm = region.scale().powi(2 - n as i32) / TWO_PI;
    let e = norm * (energy - pairing) * vol;
    let (e1, e2) = (norm * e1 * vol, norm * e2 * vol);
    let normalized_energy = norm * energy * vol;
    let split_defect = (e - e1 - e2).abs() / normalized_energy.max(f64::MIN_POSITIVE);
    let (per_slice, slice_spacing, slice_half_length) = match region {
        Region::Cylinder(c) if c.frame.lattice_axes().is_some() && c.frame == *frame => (slice_rows(fp, c)?, g.h, c.half_length),
        _ => (Vec::new(), 0.0, 0.0),
    };
    Ok(ExcessReport {
        frame: frame.clone(),
        normalized_energy,
        e,
        e1,
        e2,
        split_defect,
        per_slice,
        slice_spacing,
        slice_half_length,
    })
}

/// Corner averages of the `E1` and `E2` integrands in the frame `rows`.
pub(crate) fn split_densities(st: &crate::lattice::SiteStencil, rows: &[[f64; MAX_DIM]], eps: f64) -> (f64, f64) {
    let n = st.dim;
    let m = st.num_corners();
    let (mut d1, mut d2) = (0.0, 0.0);
    for c in 0..m {
        let jet = st.corner(c).rotated(rows);
        let mut t = 0.0;
        for k in 2..n {
            t += jet.du[k].norm_sqr();
        }
        let mut w = 0.0;
        for a in 0..n {
            for bb in a + 1..n {
                if (a, bb) != (0, 1) {
                    w += jet.om[a][bb] * jet.om[a][bb];
                }
            }
        }
        d1 += t + eps * eps * w;
        let z = jet.du[0] + C64::new(0.0, 1.0) * jet.du[1];
        let q = eps * jet.om[0][1] - (1.0 - jet.u.norm_sqr()) / (2.0 * eps);
        d2 += z.norm_sqr() + q * q;
    }
    (d1 / m as f64, d2 / m as f64)
}

/// Normalised energy of a region.
pub fn normalized_energy(fp: &FieldPair, region: &Region) -> Result<f64> {
    region.check_inside(&fp.spec)?;
    let g = fp.geometry();
    let sites = region.sites(&g);
    let eps = fp.eps;
    let n = g.dim;
    Ok(par_sum_over(&sites, |i| fp.stencil(&g, i).density(eps)) * g.cell_volume() * region.scale().powi(2 - n as i32) / TWO_PI)
}

/// Tilt search around an initial frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneSearch {
    /// Half-range of each tilt parameter on the initial grid.
    pub half_range: f64,
    /// Grid points per parameter (odd).
    pub grid_points: usize,
    /// Golden-section sweeps over the parameters.
    pub sweeps: usize,
    pub tol: f64,
}

impl Default for PlaneSearch {
    fn default() -> Self {
        PlaneSearch { half_range: 0.3, grid_points: 7, sweeps: 6, tol: 1e-9 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlaneSearchResult {
    pub frame: PlaneFrame,
    /// Tilt parameters relative to the initial frame (row-major `L`).
    pub params: Vec<f64>,
    pub report: ExcessReport,
    /// Whether the orientation of the initial frame was reversed.
    pub flipped: bool,
    /// Set when the sweeps ended before the tolerance was met.
    pub budget_exhausted: bool,
}

/// Local minimiser of `E` over tilts of `initial` and both orientations.
///
/// Candidates replace the incumbent only on strict decrease, so ties
/// (the vacuum in particular) keep the initial frame.
pub fn minimize_over_planes(
    fp: &FieldPair,
    region: &Region,
    initial: &PlaneFrame,
    search: &PlaneSearch,
) -> Result<PlaneSearchResult> {
    if search.grid_points < 1 || !(search.half_range > 0.0) {
        return Err(Error::InvalidConfig("plane search needs a positive range and grid".into()));
    }
    let mom = RegionMoments::compute(fp, region)?;
    let n = mom.dim;
    let m = 2 * (n - 2);
    let objective = |base: &PlaneFrame, p: &[f64]| -> f64 {
        match base.tilted(p) {
            Ok(f) => mom.evaluate(&f).0,
            Err(_) => f64::INFINITY,
        }
    };
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    let mut exhausted = false;
    for (flip, base) in [(false, initial.clone()), (true, initial.flipped())] {
        let mut p = vec![0.0; m];
        let mut val = objective(&base, &p);
        // coarse grid, one parameter at a time
        let gp = search.grid_points.max(1);
        for k in 0..m {
            for s in 0..gp {
                let t = if gp == 1 { 0.0 } else { -search.half_range + 2.0 * search.half_range * s as f64 / (gp - 1) as f64 };
                let mut q = p.clone();
                q[k] = t;
                let v = objective(&base, &q);
                if v < val {
                    val = v;
                    p = q;
                }
            }
        }
        let step = if gp > 1 { 2.0 * search.half_range / (gp - 1) as f64 } else { search.half_range };
        let mut converged = false;
        for _ in 0..search.sweeps {
            let before = val;
            for k in 0..m {
                let (lo, hi) = (p[k] - step, p[k] + step);
                let (t, v) = golden(|t| {
                    let mut q = p.clone();
                    q[k] = t;
                    objective(&base, &q)
                }, lo, hi, search.tol);
                if v < val {
                    val = v;
                    p[k] = t;
                }
            }
            if before - val <= search.tol * before.abs().max(1e-300) {
                converged = true;
                break;
            }
        }
        exhausted |= !converged;
        let better = best.as_ref().is_none_or(|b| val < b.0);
        if better {
            best = Some((val, p, flip));
        }
    }
    let (_, params, flipped) = best.expect("two orientations evaluated");
    let base = if flipped { initial.flipped() } else { initial.clone() };
    let frame = if params.iter().all(|&x| x == 0.0) { base } else { base.tilted(&params)? };
    let report = excess(fp, region, &frame)?;
    Ok(PlaneSearchResult { frame, params, report, flipped, budget_exhausted: exhausted })
}

/// Golden-section minimisation on `[a, b]`.
fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol.max(1e-14) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
