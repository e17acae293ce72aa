//! Multi-vortex solutions through the scalar reduction of the vortex
//! equations.
//!
//! With `v = log|u|²` the vortex equations become
//! `Δv = ε⁻²(eᵛ − 1) + 4π Σ mᵢ δ_{aᵢ}`. Writing `v = w + Σ 2mᵢ log|x − aᵢ|`
//! removes the singular part and leaves
//!
//! ```text
//! Δw = ε⁻² (eʷ P − 1),    P(x) = Π |x − aᵢ|^{2mᵢ},
//! ```
//!
//! a smooth monotone equation solved here by Newton's method on the
//! five-point lattice. The pair is then
//! `u = e^{w/2} Π (z − aᵢ)^{mᵢ}`, `α₁ = ½ ∂₂w`, `α₂ = −½ ∂₁w`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oracle::radial_profile_oracle;
use crate::error::{Error, Result};
use crate::lattice::{FieldPair, LatticeSpec, C64};
use crate::util::{bessel_k0, conjugate_gradient};

/// A prescribed zero with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub position: [f64; 2],
    pub multiplicity: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Sup-norm tolerance on the reduced equation.
    pub newton_tol: f64,
    pub max_iter: usize,
    /// Step length multiplier in `(0, 1]`.
    pub damping: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { newton_tol: 1e-10, max_iter: 50, damping: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VortexConfig {
    pub zeros: Vec<Zero>,
    /// `+1` for vortices, `−1` for anti-vortices.
    pub sign: i32,
    pub eps: f64,
    pub solver: NewtonConfig,
}

impl VortexConfig {
    /// One degree-one vortex at `center`.
    pub fn single(center: [f64; 2], eps: f64) -> Self {
        VortexConfig {
            zeros: vec![Zero { position: center, multiplicity: 1 }],
            sign: 1,
            eps,
            solver: NewtonConfig::default(),
        }
    }

    pub fn total_multiplicity(&self) -> u32 {
        self.zeros.iter().map(|z| z.multiplicity).sum()
    }

    /// Checks the configuration against a lattice.
    pub fn validate(&self, spec: &LatticeSpec) -> Result<()> {
        if spec.dim != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: spec.dim });
        }
        if spec.periodic.iter().any(|&p| p) {
            return Err(Error::InvalidLattice("the vortex solver needs a non-periodic domain".into()));
        }
        if self.sign != 1 && self.sign != -1 {
            return Err(Error::InvalidConfig("sign must be +1 or -1".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig("eps must be positive".into()));
        }
        let s = &self.solver;
        if !(s.newton_tol > 0.0) || s.max_iter == 0 || !(s.damping > 0.0 && s.damping <= 1.0) {
            return Err(Error::InvalidConfig("newton_tol > 0, max_iter ≥ 1 and damping in (0, 1] required".into()));
        }
        for z in &self.zeros {
            if z.multiplicity == 0 {
                return Err(Error::InvalidConfig("multiplicities must be positive".into()));
            }
            for a in 0..2 {
                let (lo, hi) = spec.bounds(a);
                let p = z.position[a];
                if p - lo < 5.0 * self.eps || hi - p < 5.0 * self.eps {
                    return Err(Error::ZeroTooCloseToBoundary { x: z.position[0], y: z.position[1] });
                }
            }
        }
        Ok(())
    }
}

/// Solver output with the reduced unknown and its certificate.
#[derive(Clone, Debug)]
pub struct VortexSolution {
    pub pair: FieldPair,
    /// Regular part `w` of `log|u|²` on all sites.
    pub w: Vec<f64>,
    /// Sup norm of the reduced-equation residual at interior sites.
    pub residual: f64,
    pub iterations: usize,
}

/// Solves for the vortex pair with the prescribed zeros.
pub fn solve_vortex(cfg: &VortexConfig, spec: &LatticeSpec) -> Result<FieldPair> {
    Ok(solve_vortex_detailed(cfg, spec)?.pair)
}

/// Interior-site numbering and five-point neighbour table.
struct Unknowns {
    sites: Vec<usize>,
    /// `usize::MAX` marks a boundary neighbour.
    nbrs: Vec<[usize; 4]>,
    /// Sum of boundary-neighbour values of `w`, per unknown.
    boundary_sum: Vec<f64>,
}

pub fn solve_vortex_detailed(cfg: &VortexConfig, spec: &LatticeSpec) -> Result<VortexSolution> {
    cfg.validate(spec)?;
    spec.validate()?;
    let g = spec.geometry();
    let n = g.n_sites;
    let h = g.h;
    let eps = cfg.eps;
    if cfg.zeros.is_empty() {
        let pair = FieldPair::vacuum(spec, eps);
        return Ok(VortexSolution { pair, w: vec![0.0; n], residual: 0.0, iterations: 0 });
    }
    let zeros = cfg.zeros.clone();
    // P(x) = Π |x − a|^{2m}
    let weight: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = g.position(i);
            zeros
                .iter()
                .map(|z| ((x[0] - z.position[0]).powi(2) + (x[1] - z.position[1]).powi(2)).powi(z.multiplicity as i32))
                .product()
        })
        .collect();
    // far-field data: v ≈ −2 Σ A_m K₀(|x − a|/ε), A_m from the radial oracle
    let mut tails = std::collections::BTreeMap::new();
    for z in &zeros {
        if let std::collections::btree_map::Entry::Vacant(e) = tails.entry(z.multiplicity) {
            e.insert(radial_profile_oracle(z.multiplicity, 1.0)?.tail_amplitude);
        }
    }
    let singular = |x: &[f64]| -> f64 {
        zeros
            .iter()
            .map(|z| z.multiplicity as f64 * ((x[0] - z.position[0]).powi(2) + (x[1] - z.position[1]).powi(2)).ln())
            .sum()
    };
    let far = |x: &[f64]| -> f64 {
        zeros
            .iter()
            .map(|z| {
                let r = ((x[0] - z.position[0]).powi(2) + (x[1] - z.position[1]).powi(2)).sqrt();
                -2.0 * tails[&z.multiplicity] * bessel_k0(r / eps)
            })
            .sum()
    };
    // initial guess −Σ m log(r² + 4ε²) inside, exact data on the boundary
    let mut w: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = g.position(i);
            if g.is_interior(i) {
                -zeros
                    .iter()
                    .map(|z| {
                        z.multiplicity as f64
                            * ((x[0] - z.position[0]).powi(2) + (x[1] - z.position[1]).powi(2) + 4.0 * eps * eps).ln()
                    })
                    .sum::<f64>()
            } else {
                far(&x) - singular(&x)
            }
        })
        .collect();
    let mut number = vec![usize::MAX; n];
    let sites: Vec<usize> = g.interior_sites();
    for (k, &s) in sites.iter().enumerate() {
        number[s] = k;
    }
    let mut unk = Unknowns { nbrs: Vec::with_capacity(sites.len()), boundary_sum: vec![0.0; sites.len()], sites };
    for (k, &s) in unk.sites.iter().enumerate() {
        let mut nb = [usize::MAX; 4];
        for (slot, (axis, d)) in [(0, 1), (0, -1), (1, 1), (1, -1)].into_iter().enumerate() {
            let t = g.nb(s, axis, d);
            if number[t] == usize::MAX {
                unk.boundary_sum[k] += w[t];
            } else {
                nb[slot] = number[t];
            }
        }
        unk.nbrs.push(nb);
    }
    let m = unk.sites.len();
    let (h2, e2) = (h * h, eps * eps);
    let residual_of = |x: &[f64]| -> Vec<f64> {
        (0..m)
            .into_par_iter()
            .map(|k| {
                let mut lap = unk.boundary_sum[k] - 4.0 * x[k];
                for &t in &unk.nbrs[k] {
                    if t != usize::MAX {
                        lap += x[t];
                    }
                }
                lap / h2 - (x[k].exp() * weight[unk.sites[k]] - 1.0) / e2
            })
            .collect()
    };
    let sup = |v: &[f64]| v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x: Vec<f64> = unk.sites.iter().map(|&s| w[s]).collect();
    let mut f = residual_of(&x);
    let mut res = sup(&f);
    let mut it = 0;
    while res > cfg.solver.newton_tol {
        if it >= cfg.solver.max_iter {
            return Err(Error::NonConvergence { iterations: it, residual: res });
        }
        let q: Vec<f64> = (0..m).into_par_iter().map(|k| x[k].exp() * weight[unk.sites[k]] / e2).collect();
        let apply = |p: &[f64], out: &mut [f64]| {
            out.par_iter_mut().enumerate().for_each(|(k, o)| {
                let mut s = 4.0 * p[k];
                for &t in &unk.nbrs[k] {
                    if t != usize::MAX {
                        s -= p[t];
                    }
                }
                *o = s / h2 + q[k] * p[k];
            });
        };
        // inexact Newton: the linear tolerance follows the nonlinear residual
        let rtol = (0.1 * res).clamp(1e-13, 1e-3);
        let cg = conjugate_gradient(apply, &f, None, rtol, 20 * m.max(100), None);
        let delta = cg.x;
        let base = l2(&f);
        let mut t = cfg.solver.damping;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
            let ft = residual_of(&trial);
            let nt = l2(&ft);
            if nt.is_finite() && nt < base {
                x = trial;
                f = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        it += 1;
        if !accepted {
            return Err(Error::NonConvergence { iterations: it, residual: res });
        }
        res = sup(&f);
    }
    for (k, &s) in unk.sites.iter().enumerate() {
        w[s] = x[k];
    }
    let boundary = |x: &[f64]| far(x) - singular(x);
    let pair = reconstruct(cfg, spec, &w, &boundary)?;
    Ok(VortexSolution { pair, w, residual: res, iterations: it })
}

/// Builds `(u, α)` from the regular part `w`; `ghost` extends `w` past
/// the faces.
fn reconstruct(
    cfg: &VortexConfig,
    spec: &LatticeSpec,
    w: &[f64],
    ghost: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<FieldPair> {
    let g = spec.geometry();
    let n = g.n_sites;
    let h = g.h;
    let u: Vec<C64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = g.position(i);
            let z = C64::new(x[0], x[1]);
            let mut p = C64::new((0.5 * w[i]).exp(), 0.0);
            for a in &cfg.zeros {
                p *= (z - C64::new(a.position[0], a.position[1])).powu(a.multiplicity);
            }
            p
        })
        .collect();
    let value = |i: usize, axis: usize, d: isize| -> f64 {
        match g.shift(i, axis, d) {
            Some(p) => w[p],
            None => {
                let mut x = g.position(i);
                x[axis] += d as f64 * h;
                ghost(&x[..2])
            }
        }
    };
    let dw = |i: usize, axis: usize| (value(i, axis, 1) - value(i, axis, -1)) / (2.0 * h);
    let alpha: Vec<Vec<f64>> = (0..2)
        .map(|j| {
            let other = 1 - j;
            // α₁ = ½∂₂w, α₂ = −½∂₁w
            let s = if j == 0 { 0.5 } else { -0.5 };
            (0..n)
                .into_par_iter()
                .map(|i| match g.shift(i, j, 1) {
                    Some(ip) => s * 0.5 * (dw(i, other) + dw(ip, other)),
                    None => 0.0,
                })
                .collect()
        })
        .collect();
    let pair = FieldPair::new(spec.clone(), cfg.eps, u, alpha)?;
    Ok(if cfg.sign < 0 { pair.conjugate() } else { pair })
}
