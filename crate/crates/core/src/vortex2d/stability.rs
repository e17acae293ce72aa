//! Quantitative stability of the degree-N vortex under compactly supported
//! perturbations.

use serde::{Deserialize, Serialize};

use super::taubes::{solve_vortex, VortexConfig};
use super::topology::vortex_number;
use crate::error::{Error, Result};
use crate::gauge::coulomb_potential;
use crate::lattice::{
    curvature, energy_density, gauge_apply, jacobian_field, pair_index, total_energy, FieldPair, GaugeTransform,
    Geometry, LatticeSpec, Region, ResidualReport, C64,
};
use crate::relax::{relax, Boundary, DescentConfig, Initializer, RelaxConfig};
use crate::util::{catmull_rom_weights, par_sum, Cutoff};

/// Amplitudes and perturbation shapes.
///
/// The pair `(u, α)` becomes `((1 + t·g)u, α + t·⋆dψ)` with
/// `g = χ(|x − modulus_center|)` and `ψ = form_weight·χ(|x − form_center|)`,
/// `χ` the smooth step from 1 at the centre to 0 at `bump_radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSchedule {
    pub amplitudes: Vec<f64>,
    pub modulus_center: [f64; 2],
    pub form_center: [f64; 2],
    pub bump_radius: f64,
    pub form_weight: f64,
    /// Relaxation of the base vortex to a discrete critical point.
    pub base_descent: DescentConfig,
    /// Half-width of the translation search in lattice cells.
    pub search_cells: usize,
}

impl Default for PerturbationSchedule {
    fn default() -> Self {
        PerturbationSchedule {
            amplitudes: vec![0.0, 0.02, 0.04, 0.08],
            modulus_center: [0.7, 0.0],
            form_center: [-0.4, 0.5],
            bump_radius: 1.5,
            form_weight: 0.5,
            base_descent: DescentConfig { tol: 1e-9, ..DescentConfig::default() },
            search_cells: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub amplitude: f64,
    pub energy: f64,
    /// Energy above that of the discrete base solution.
    pub discrepancy: f64,
    /// `inf ‖u − u₀‖² + ‖F − F₀‖²` over translations and the residual
    /// global phase, both pairs in Coulomb gauge.
    pub moduli_distance_sq: f64,
    /// Optimal translation of the base solution.
    pub translation: [f64; 2],
    pub jacobian_l1: f64,
    pub energy_density_l1: f64,
    /// `moduli_distance_sq / discrepancy`; NaN at zero discrepancy.
    pub fitted_constant: f64,
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub records: Vec<StabilityRecord>,
    /// Energy of the relaxed base solution.
    pub base_energy: f64,
    pub vortex_number: f64,
    pub base_residuals: ResidualReport,
    /// Smallest constant `C` with `distance ≤ C·discrepancy` on every record.
    pub fitted_constant: f64,
}

/// Neumann Coulomb gauge on the whole lattice.
fn coulomb_gauge(fp: &FieldPair) -> Result<FieldPair> {
    let g = fp.geometry();
    let all = vec![true; g.n_sites];
    let none = vec![false; g.n_sites];
    let sol = coulomb_potential(&g, &fp.alpha, &all, &none, 1e-12)?;
    gauge_apply(fp, &GaugeTransform { xi: sol.xi })
}

/// Applies the perturbation of amplitude `t`.
pub fn perturb(fp: &FieldPair, schedule: &PerturbationSchedule, t: f64) -> Result<FieldPair> {
    if fp.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: fp.dim() });
    }
    let g = fp.geometry();
    let bump = Cutoff::new(0.0, schedule.bump_radius);
    let h = g.h;
    let mut out = fp.clone();
    for i in 0..g.n_sites {
        if !g.is_interior(i) {
            continue;
        }
        let x = g.position(i);
        out.u[i] = fp.u[i] * (1.0 + t * bump.value(dist(&x, &schedule.modulus_center)));
        for j in 0..2 {
            if !g.shift(i, j, 1).is_some_and(|q| g.is_interior(q)) {
                continue;
            }
            let mut m = [x[0], x[1]];
            m[j] += 0.5 * h;
            let jet = bump.radial(&m, &schedule.form_center);
            let beta = if j == 0 { -jet.grad[1] } else { jet.grad[0] };
            out.alpha[j][i] += t * schedule.form_weight * beta;
        }
    }
    Ok(out)
}

fn dist(x: &[f64], c: &[f64; 2]) -> f64 {
    ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt()
}

/// Gauge-aligned fields entering the distance.
struct Fields {
    u: Vec<C64>,
    f: Vec<f64>,
    jac: Vec<f64>,
    dens: Vec<f64>,
}

fn fields(fp: &FieldPair) -> Result<Fields> {
    let cg = coulomb_gauge(fp)?;
    Ok(Fields {
        f: curvature(&cg).values[pair_index(0, 1)].clone(),
        jac: jacobian_field(&cg, 0, 1).values,
        dens: energy_density(&cg).values,
        u: cg.u,
    })
}

/// Bicubic translation `f ↦ f(· − c)` on the lattice index grid.
struct Shift {
    offset: [isize; 2],
    weights: [[f64; 4]; 2],
}

impl Shift {
    fn new(c: [f64; 2], h: f64) -> Self {
        let mut offset = [0; 2];
        let mut weights = [[0.0; 4]; 2];
        for a in 0..2 {
            let s = -c[a] / h;
            let fl = s.floor();
            offset[a] = fl as isize;
            weights[a] = catmull_rom_weights(s - fl);
        }
        Shift { offset, weights }
    }

    fn apply<T>(&self, g: &Geometry, v: &[T], x: usize) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        let c = g.coords(x);
        let mut acc = T::default();
        for (p, wp) in self.weights[0].iter().enumerate() {
            let i0 = (c[0] as isize + self.offset[0] + p as isize - 1) as usize;
            for (q, wq) in self.weights[1].iter().enumerate() {
                let i1 = (c[1] as isize + self.offset[1] + q as isize - 1) as usize;
                acc = acc + v[i0 * g.strides[0] + i1 * g.strides[1]] * (wp * wq);
            }
        }
        acc
    }
}

struct Comparison<'a> {
    g: Geometry,
    sites: Vec<usize>,
    base: &'a Fields,
    pert: &'a Fields,
}

impl Comparison<'_> {
    /// Squared distance after translating the base by `c`, with the optimal
    /// global phase.
    fn distance(&self, c: [f64; 2]) -> f64 {
        let sh = Shift::new(c, self.g.h);
        let vol = self.g.cell_volume();
        let n = self.sites.len();
        let (b, p, g) = (self.base, self.pert, &self.g);
        let uu = par_sum(n, |k| p.u[self.sites[k]].norm_sqr());
        let vv = par_sum(n, |k| sh.apply(g, &b.u, self.sites[k]).norm_sqr());
        let cross_re = par_sum(n, |k| {
            let x = self.sites[k];
            (sh.apply(g, &b.u, x).conj() * p.u[x]).re
        });
        let cross_im = par_sum(n, |k| {
            let x = self.sites[k];
            (sh.apply(g, &b.u, x).conj() * p.u[x]).im
        });
        let ff = par_sum(n, |k| {
            let x = self.sites[k];
            (p.f[x] - sh.apply(g, &b.f, x)).powi(2)
        });
        ((uu + vv - 2.0 * cross_re.hypot(cross_im)).max(0.0) + ff) * vol
    }

    fn l1(&self, c: [f64; 2], pick: impl Fn(&Fields) -> &[f64] + Sync) -> f64 {
        let sh = Shift::new(c, self.g.h);
        let (b, p) = (pick(self.base), pick(self.pert));
        par_sum(self.sites.len(), |k| {
            let x = self.sites[k];
            (p[x] - sh.apply(&self.g, b, x)).abs()
        }) * self.g.cell_volume()
    }

    /// Grid search with spacing `h/4`, then one parabolic refinement per
    /// axis around the best grid point.
    fn minimise(&self, cells: usize) -> ([f64; 2], f64) {
        let q = self.g.h / 4.0;
        let k = 4 * cells as isize;
        let mut best = ([0.0, 0.0], self.distance([0.0, 0.0]), (0isize, 0isize));
        for a in -k..=k {
            for b in -k..=k {
                let c = [a as f64 * q, b as f64 * q];
                let d = self.distance(c);
                if d < best.1 {
                    best = (c, d, (a, b));
                }
            }
        }
        let (c0, d0, _) = best;
        let mut refined = c0;
        for axis in 0..2 {
            let mut lo = c0;
            let mut hi = c0;
            lo[axis] -= q;
            hi[axis] += q;
            let (dl, dh) = (self.distance(lo), self.distance(hi));
            let curv = dl - 2.0 * d0 + dh;
            if curv > 0.0 {
                refined[axis] = c0[axis] + (0.5 * (dl - dh) / curv).clamp(-1.0, 1.0) * q;
            }
        }
        let dr = self.distance(refined);
        if dr < d0 {
            (refined, dr)
        } else {
            (c0, d0)
        }
    }
}

/// Runs the stability experiment around the vortex `base`.
///
/// The Taubes solution is relaxed to a critical point of the lattice
/// energy with its boundary data fixed, so that the discrepancy of every
/// perturbation is measured against the lattice realisation of `2π|N|`.
pub fn stability_experiment(
    base: &VortexConfig,
    spec: &LatticeSpec,
    schedule: &PerturbationSchedule,
) -> Result<StabilityReport> {
    if schedule.amplitudes.iter().any(|t| !t.is_finite()) || !(schedule.bump_radius > 0.0) {
        return Err(Error::InvalidConfig("amplitudes must be finite and the bump radius positive".into()));
    }
    let taubes = solve_vortex(base, spec)?;
    let cfg = RelaxConfig {
        boundary: Boundary::Dirichlet,
        initializer: Initializer::ProductExtension,
        descent: schedule.base_descent.clone(),
    };
    let relaxed = relax(&taubes, &cfg)?;
    let b = relaxed.pair;
    let base_energy = total_energy(&b, &Region::Full)?;
    let nv = vortex_number(&b)?;
    let g = b.geometry();
    let margin = schedule.search_cells + 4;
    let sites: Vec<usize> = (0..g.n_sites).filter(|&i| g.depth(i) >= margin).collect();
    let base_fields = fields(&b)?;
    let mut records = Vec::with_capacity(schedule.amplitudes.len());
    for &t in &schedule.amplitudes {
        let p = perturb(&b, schedule, t)?;
        let energy = total_energy(&p, &Region::Full)?;
        let pert_fields = fields(&p)?;
        let cmp = Comparison { g, sites: sites.clone(), base: &base_fields, pert: &pert_fields };
        let (c, d) = cmp.minimise(schedule.search_cells);
        let discrepancy = energy - base_energy;
        records.push(StabilityRecord {
            amplitude: t,
            energy,
            discrepancy,
            moduli_distance_sq: d,
            translation: c,
            jacobian_l1: cmp.l1(c, |f| &f.jac),
            energy_density_l1: cmp.l1(c, |f| &f.dens),
            fitted_constant: if discrepancy > 0.0 { d / discrepancy } else { f64::NAN },
        });
    }
    let fitted_constant = records.iter().map(|r| r.fitted_constant).filter(|c| c.is_finite()).fold(0.0, f64::max);
    Ok(StabilityReport { records, base_energy, vortex_number: nv, base_residuals: relaxed.residuals, fitted_constant })
}
