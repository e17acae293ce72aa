//! Lattice Coulomb gauge: the gauge function minimising the L² norm of a
//! shifted one-form over the links of a region.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::Geometry;
use crate::util::conjugate_gradient;

/// Result of a Coulomb solve.
#[derive(Clone, Debug)]
pub struct CoulombSolve {
    /// Gauge function on all sites; zero outside the region and on fixed
    /// sites.
    pub xi: Vec<f64>,
    pub rel_residual: f64,
    pub iterations: usize,
}

/// Whether the link from `i` along `j` lies inside the region.
#[inline]
pub fn region_link(g: &Geometry, active: &[bool], i: usize, j: usize) -> Option<usize> {
    if !active[i] {
        return None;
    }
    g.shift(i, j, 1).filter(|&q| active[q])
}

/// Outward divergence `(Σ_out a − Σ_in a)/h` of a link one-form at every
/// site of the region; `a*` of the lattice up to sign.
pub fn divergence(g: &Geometry, a: &[Vec<f64>], active: &[bool]) -> Vec<f64> {
    (0..g.n_sites)
        .into_par_iter()
        .map(|x| {
            if !active[x] {
                return 0.0;
            }
            let mut s = 0.0;
            for j in 0..g.dim {
                if region_link(g, active, x, j).is_some() {
                    s += a[j][x];
                }
                if let Some(p) = g.shift(x, j, -1) {
                    if region_link(g, active, p, j).is_some() {
                        s -= a[j][p];
                    }
                }
            }
            s / g.h
        })
        .collect()
}

/// Minimises `Σ (a + dξ)²` over the links of the region, with `ξ = 0` on
/// `fixed` sites.
///
/// Without fixed sites this is the Neumann problem and the result has zero
/// mean over the region. The region must be connected.
pub fn coulomb_potential(
    g: &Geometry,
    a: &[Vec<f64>],
    active: &[bool],
    fixed: &[bool],
    rtol: f64,
) -> Result<CoulombSolve> {
    let n = g.n_sites;
    let h2 = g.h * g.h;
    let mut number = vec![usize::MAX; n];
    let mut free = Vec::new();
    for x in 0..n {
        if active[x] && !fixed[x] {
            number[x] = free.len();
            free.push(x);
        }
    }
    let m = free.len();
    let neumann = (0..n).all(|x| !(active[x] && fixed[x]));
    if m == 0 {
        return Ok(CoulombSolve { xi: vec![0.0; n], rel_residual: 0.0, iterations: 0 });
    }
    // neighbour lists: (unknown or MAX for fixed) per region link
    let mut nbr: Vec<Vec<usize>> = Vec::with_capacity(m);
    for &x in &free {
        let mut list = Vec::with_capacity(2 * g.dim);
        for j in 0..g.dim {
            if let Some(q) = region_link(g, active, x, j) {
                list.push(number[q]);
            }
            if let Some(p) = g.shift(x, j, -1) {
                if region_link(g, active, p, j).is_some() {
                    list.push(number[p]);
                }
            }
        }
        nbr.push(list);
    }
    let div = divergence(g, a, active);
    let rhs: Vec<f64> = free.iter().map(|&x| div[x]).collect();
    let apply = |p: &[f64], out: &mut [f64]| {
        out.par_iter_mut().enumerate().for_each(|(k, o)| {
            let mut s = 0.0;
            for &t in &nbr[k] {
                s += p[k] - if t == usize::MAX { 0.0 } else { p[t] };
            }
            *o = s / h2;
        });
    };
    let remove_mean = |v: &mut [f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= mean);
    };
    let project: Option<&(dyn Fn(&mut [f64]) + Sync)> = if neumann { Some(&remove_mean) } else { None };
    let cg = conjugate_gradient(apply, &rhs, None, rtol, 50 * m + 1000, project);
    if !cg.converged {
        return Err(Error::SolverFailure(format!("Coulomb solve stalled at relative residual {:.3e}", cg.rel_residual)));
    }
    let mut sol = cg.x;
    if neumann {
        remove_mean(&mut sol);
    }
    let mut xi = vec![0.0; n];
    for (k, &x) in free.iter().enumerate() {
        xi[x] = sol[k];
    }
    Ok(CoulombSolve { xi, rel_residual: cg.rel_residual, iterations: cg.iterations })
}
