//! Pullback of the planar degree-one vortex along graphs and planes, the
//! energy audit of the pullback and the variance of slices.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excess::{slice_profile, PlaneFrame};
use crate::lattice::{Cylinder, FieldPair, LatticeSpec, Region, C64, MAX_DIM};
use crate::util::par_sum_vec;
use crate::vortex2d::{radial_profile_oracle, radial_profile_with_step, RadialProfile};

const TWO_PI: f64 = std::f64::consts::TAU;

/// Shape of a graph `f: ℝ^{n−2} → ℝ²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GraphShape {
    /// `f(z) = value + Σ_k gradient[k]·z_k + ½ Σ_{kl} hessian[a][k][l] z_k z_l`.
    Quadratic { value: [f64; 2], gradient: Vec<[f64; 2]>, hessian: [Vec<Vec<f64>>; 2] },
}

/// Graph together with its Lipschitz bound `η`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFunction {
    pub dim: usize,
    pub shape: GraphShape,
    pub lipschitz_bound: f64,
}

impl GraphFunction {
    fn quadratic(m: usize, value: [f64; 2], gradient: Vec<[f64; 2]>, hessian: [Vec<Vec<f64>>; 2], eta: f64) -> Self {
        GraphFunction { dim: m + 2, shape: GraphShape::Quadratic { value, gradient, hessian }, lipschitz_bound: eta }
    }

    pub fn constant(n: usize, value: [f64; 2]) -> Self {
        let m = n - 2;
        Self::quadratic(m, value, vec![[0.0; 2]; m], [vec![vec![0.0; m]; m], vec![vec![0.0; m]; m]], 0.0)
    }

    /// `f(z) = value + Σ slope[k] z_k`; `η = |df|` (operator norm).
    pub fn linear(n: usize, value: [f64; 2], slope: Vec<[f64; 2]>) -> Self {
        let m = n - 2;
        let eta = operator_norm(&slope);
        Self::quadratic(m, value, slope, [vec![vec![0.0; m]; m], vec![vec![0.0; m]; m]], eta)
    }

    /// Harmonic quadratic graph of amplitude `t`: `t·(z₁² − z₂², 2z₁z₂)` for
    /// `n = 4`, and the affine `t·(z, 0)` for `n = 3`. `η` is its Lipschitz
    /// constant on `B^{n−2}_1`.
    pub fn harmonic(n: usize, t: f64) -> Result<Self> {
        match n {
            3 => Ok(Self::linear(3, [0.0; 2], vec![[t, 0.0]])),
            4 => {
                let h0 = vec![vec![2.0 * t, 0.0], vec![0.0, -2.0 * t]];
                let h1 = vec![vec![0.0, 2.0 * t], vec![2.0 * t, 0.0]];
                Ok(Self::quadratic(2, [0.0; 2], vec![[0.0; 2]; 2], [h0, h1], 2.0 * t.abs()))
            }
            _ => Err(Error::DimensionMismatch { expected: 4, found: n }),
        }
    }

    /// Value and derivative `df[a][k] = ∂_k f_a` at `z`.
    pub fn eval(&self, z: &[f64]) -> ([f64; 2], [[f64; MAX_DIM]; 2]) {
        let GraphShape::Quadratic { value, gradient, hessian } = &self.shape;
        let m = self.dim - 2;
        let mut f = *value;
        let mut df = [[0.0; MAX_DIM]; 2];
        for a in 0..2 {
            for k in 0..m {
                f[a] += gradient[k][a] * z[k];
                df[a][k] = gradient[k][a];
                for l in 0..m {
                    f[a] += 0.5 * hessian[a][k][l] * z[k] * z[l];
                    df[a][k] += hessian[a][k][l] * z[l];
                }
            }
        }
        (f, df)
    }

    /// Largest `|f(z) − f(z')|/h` over neighbouring lattice points of
    /// `B^{n−2}_1` with spacing `h`.
    pub fn discrete_lipschitz(&self, h: f64) -> f64 {
        let m = self.dim - 2;
        let k = (1.0 / h).floor() as i64;
        let mut lip: f64 = 0.0;
        let mut idx = vec![-k; m];
        loop {
            let z: Vec<f64> = idx.iter().map(|&c| c as f64 * h).collect();
            if z.iter().map(|v| v * v).sum::<f64>() <= 1.0 + 1e-12 {
                let (f, _) = self.eval(&z);
                for a in 0..m {
                    let mut w = z.clone();
                    w[a] += h;
                    if w.iter().map(|v| v * v).sum::<f64>() <= 1.0 + 1e-12 {
                        let (g, _) = self.eval(&w);
                        lip = lip.max((f[0] - g[0]).hypot(f[1] - g[1]) / h);
                    }
                }
            }
            let mut d = 0;
            loop {
                if d == m {
                    return lip;
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

    /// `∫_{B^{n−2}_1} |df|²` on the lattice points of spacing `h`.
    pub fn dirichlet(&self, h: f64) -> f64 {
        self.sum_over_ball(h, |_, df| (0..self.dim - 2).map(|k| df[0][k].powi(2) + df[1][k].powi(2)).sum())
    }

    fn sum_over_ball(&self, h: f64, f: impl Fn([f64; 2], [[f64; MAX_DIM]; 2]) -> f64) -> f64 {
        let m = self.dim - 2;
        let k = (1.0 / h).floor() as i64;
        let mut s = 0.0;
        let mut idx = vec![-k; m];
        loop {
            let z: Vec<f64> = idx.iter().map(|&c| c as f64 * h).collect();
            if z.iter().map(|v| v * v).sum::<f64>() <= 1.0 + 1e-9 {
                let (v, df) = self.eval(&z);
                s += f(v, df);
            }
            let mut d = 0;
            loop {
                if d == m {
                    return s * h.powi(m as i32);
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
}

fn operator_norm(slope: &[[f64; 2]]) -> f64 {
    // largest singular value of the 2 × m matrix
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for s in slope {
        a += s[0] * s[0];
        b += s[0] * s[1];
        c += s[1] * s[1];
    }
    let tr = a + c;
    let det = a * c - b * b;
    (0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt())).sqrt()
}

/// Affine-in-the-fibre map `x ↦ Y(x) ∈ ℝ²` with its differential.
trait PlaneMap: Sync {
    fn map(&self, x: &[f64]) -> ([f64; 2], [[f64; MAX_DIM]; 2]);
}

struct GraphMap<'a> {
    f: &'a GraphFunction,
    n: usize,
}

impl PlaneMap for GraphMap<'_> {
    fn map(&self, x: &[f64]) -> ([f64; 2], [[f64; MAX_DIM]; 2]) {
        let (f, df) = self.f.eval(&x[2..self.n]);
        let mut d = [[0.0; MAX_DIM]; 2];
        for a in 0..2 {
            d[a][a] = 1.0;
            for k in 2..self.n {
                d[a][k] = -df[a][k - 2];
            }
        }
        ([x[0] - f[0], x[1] - f[1]], d)
    }
}

struct FrameMap {
    point: Vec<f64>,
    e: [[f64; MAX_DIM]; 2],
}

impl PlaneMap for FrameMap {
    fn map(&self, x: &[f64]) -> ([f64; 2], [[f64; MAX_DIM]; 2]) {
        let mut y = [0.0; 2];
        for a in 0..2 {
            y[a] = (0..self.point.len()).map(|j| self.e[a][j] * (x[j] - self.point[j])).sum();
        }
        (y, self.e)
    }
}

/// `u₀(Y)` and the components of `α₀` at `Y` for the radial gauge.
fn planar(profile: &RadialProfile, y: [f64; 2]) -> (C64, [f64; 2]) {
    let r = y[0].hypot(y[1]);
    let u = profile.modulus_over_power(r) * C64::new(y[0], y[1]);
    let g = profile.gauge_over_r2(r);
    (u, [-g * y[1], g * y[0]])
}

fn pull_back(spec: &LatticeSpec, eps: f64, profile: &RadialProfile, q: &dyn PlaneMap) -> Result<FieldPair> {
    let g = spec.geometry();
    let n = g.dim;
    let h = g.h;
    let mut u = vec![C64::new(0.0, 0.0); g.n_sites];
    let mut alpha = vec![vec![0.0; g.n_sites]; n];
    use rayon::prelude::*;
    u.par_iter_mut().enumerate().for_each(|(i, v)| {
        let x = g.position(i);
        *v = planar(profile, q.map(&x[..n]).0).0;
    });
    for (j, aj) in alpha.iter_mut().enumerate() {
        aj.par_iter_mut().enumerate().for_each(|(i, v)| {
            if !g.has_link(i, j) {
                return;
            }
            let mut x = g.position(i);
            x[j] += 0.5 * h;
            let (y, d) = q.map(&x[..n]);
            let (_, a0) = planar(profile, y);
            *v = a0[0] * d[0][j] + a0[1] * d[1][j];
        });
    }
    FieldPair::new(spec.clone(), eps, u, alpha)
}

/// `(u_f, ∇_f)`: the degree-one planar solution composed with
/// `x ↦ (x₁, x₂) − f(x₃, …, x_n)`, the plane being the first two axes.
///
/// The gauge field is sampled at link midpoints.
pub fn pullback_pair(f: &GraphFunction, eps: f64, spec: &LatticeSpec) -> Result<FieldPair> {
    let n = spec.dim;
    if f.dim != n || n < 3 {
        return Err(Error::DimensionMismatch { expected: n, found: f.dim });
    }
    let g = spec.geometry();
    let measured = f.discrete_lipschitz(g.h);
    if measured > f.lipschitz_bound * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::LipschitzViolation { measured, bound: f.lipschitz_bound });
    }
    // every fibre over the lattice must keep its zero 5ε inside
    let margin = 5.0 * eps;
    for i in 0..g.n_sites {
        let c = g.coords(i);
        if c[0] != 0 || c[1] != 0 {
            continue;
        }
        let x = g.position(i);
        let (v, _) = f.eval(&x[2..n]);
        for a in 0..2 {
            let (lo, hi) = spec.bounds(a);
            if v[a] < lo + margin || v[a] > hi - margin {
                return Err(Error::GraphTooCloseToBoundary);
            }
        }
    }
    let profile = radial_profile_oracle(1, eps)?;
    pull_back(spec, eps, &profile, &GraphMap { f, n })
}

/// Straight vortex sheet through `point` perpendicular to the plane
/// `span{e_1, e_2}` of `frame`, sampled on the lattice.
pub fn plane_pair(frame: &PlaneFrame, point: &[f64], eps: f64, spec: &LatticeSpec) -> Result<FieldPair> {
    let n = spec.dim;
    if frame.dim() != n || point.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: frame.dim() });
    }
    let profile = radial_profile_oracle(1, eps)?;
    pull_back(spec, eps, &profile, &FrameMap { point: point.to_vec(), e: [frame.vector(0), frame.vector(1)] })
}

/// Lattice against oracle values of the five pullback identities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackAudit {
    /// Largest `|lattice − oracle|` of each identity over the sampled sites,
    /// relative to `sup e`.
    pub identity_mismatch: [f64; 5],
    /// `∫_{B²_1×B^{n−2}_1} e`.
    pub energy: f64,
    /// `2π|B^{n−2}_1|` on the lattice points of the axial ball.
    pub area_term: f64,
    /// `2π∫|df|²/2`.
    pub dirichlet_term: f64,
    /// `energy − area_term − dirichlet_term`.
    pub correction: f64,
    pub eta: f64,
    /// `(1/2π)∫ e` outside the tube `|y − f(z)| < 1/2`.
    pub tube_tail: f64,
    /// `(1/2π)∫_{|y|>1/2} e` of the planar profile.
    pub planar_tail: f64,
}

/// Builds the pullback and audits it on `B²_1 × B^{n−2}_1`.
pub fn pullback_energy_audit(f: &GraphFunction, eps: f64, spec: &LatticeSpec) -> Result<PullbackAudit> {
    let fp = pullback_pair(f, eps, spec)?;
    let n = spec.dim;
    let m = n - 2;
    let g = fp.geometry();
    let cyl = Cylinder::new(&vec![0.0; n], PlaneFrame::standard(n), 1.0, 1.0);
    let region = Region::Cylinder(cyl);
    region.check_inside(spec)?;
    let sites = region.sites(&g);
    let profile = radial_profile_oracle(1, eps)?;
    let map = GraphMap { f, n };
    let e2 = eps * eps;
    // [energy, tube tail, five lattice sums unused] and the mismatches
    let totals = par_sum_vec::<_, 2>(sites.len(), |s| {
        let i = sites[s];
        let x = g.position(i);
        let (y, _) = map.map(&x[..n]);
        let d = fp.stencil(&g, i).density(eps);
        [d, if y[0].hypot(y[1]) >= 0.5 { d } else { 0.0 }]
    });
    let vol = g.cell_volume();
    let mut mism = [0.0f64; 5];
    let mut sup_e: f64 = 0.0;
    for &i in &sites {
        let st = fp.stencil(&g, i);
        let x = g.position(i);
        let (y, _) = map.map(&x[..n]);
        let (_, df) = f.eval(&x[2..n]);
        let r = y[0].hypot(y[1]);
        let rho = profile.modulus_at(r);
        let q = profile.modulus_over_power(r) * (1.0 - profile.gauge_at(r));
        let grad0 = 2.0 * q * q;
        let om0 = (1.0 - rho * rho) / (2.0 * e2);
        let df2: f64 = (0..m).map(|k| df[0][k].powi(2) + df[1][k].powi(2)).sum();
        let avg = |fun: &dyn Fn(&crate::lattice::Jet) -> f64| st.average(fun);
        let l1 = avg(&|j| (2..n).map(|k| j.du[k].norm_sqr()).sum());
        let l2 = avg(&|j| j.du[0].norm_sqr() + j.du[1].norm_sqr());
        let l3 = avg(&|j| e2 * (2..n).map(|k| j.om[0][k].powi(2) + j.om[1][k].powi(2)).sum::<f64>());
        let l4 = avg(&|j| e2 * j.om[0][1].powi(2));
        let l5 = avg(&|j| e2 * (2..n).flat_map(|k| (k + 1..n).map(move |l| (k, l))).map(|(k, l)| j.om[k][l].powi(2)).sum::<f64>());
        let mut o5 = 0.0;
        for k in 0..m {
            for l in k + 1..m {
                o5 += e2 * om0 * om0 * (df[0][k] * df[1][l] - df[0][l] * df[1][k]).powi(2);
            }
        }
        let oracle = [0.5 * df2 * grad0, grad0, e2 * om0 * om0 * df2, e2 * om0 * om0, o5];
        let lattice = [l1, l2, l3, l4, l5];
        for t in 0..5 {
            mism[t] = mism[t].max((lattice[t] - oracle[t]).abs());
        }
        sup_e = sup_e.max(st.density(eps));
    }
    for v in mism.iter_mut() {
        *v /= sup_e.max(f64::MIN_POSITIVE);
    }
    let h = g.h;
    let ball = f.sum_over_ball(h, |_, _| 1.0);
    let area_term = TWO_PI * ball;
    let dirichlet_term = TWO_PI * 0.5 * f.dirichlet(h);
    let energy = totals[0] * vol;
    Ok(PullbackAudit {
        identity_mismatch: mism,
        energy,
        area_term,
        dirichlet_term,
        correction: energy - area_term - dirichlet_term,
        eta: f.lipschitz_bound,
        tube_tail: totals[1] * vol / TWO_PI,
        planar_tail: profile.energy_outside(0.5) / TWO_PI,
    })
}

/// `v₀ = (1/2π)∫|y|² e₁(u₀, ∇₀)` for the degree-one solution at `ε = 1`.
pub fn variance_constant() -> Result<f64> {
    static V0: OnceLock<f64> = OnceLock::new();
    if let Some(v) = V0.get() {
        return Ok(*v);
    }
    let v = radial_profile_oracle(1, 1.0)?.second_moment();
    Ok(*V0.get_or_init(|| v))
}

/// `v₀` computed on an oracle mesh of the given step.
pub fn variance_constant_with_step(step: f64) -> Result<f64> {
    Ok(radial_profile_with_step(1, 1.0, step)?.second_moment())
}

/// Second moment of one slice and the terms of its error envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceVariance {
    /// `(1/2π)∫_{B²_{R/2}×{z}} |y − c|² e`.
    pub variance: f64,
    /// `ε² v₀`.
    pub reference: f64,
    pub e1: f64,
    pub e2: f64,
    /// Envelope terms with unit constants:
    /// `ε²|log E2|²√E2`, `σ²E1`, `|h − c|²√E2`.
    pub envelope: [f64; 3],
}

/// Variance of the slice with integer offset `index` about `c`, for a
/// lattice-aligned cylinder; `h` is the slice barycenter approximation.
pub fn variance_of_slice(
    fp: &FieldPair,
    cyl: &Cylinder,
    index: &[i64],
    c: [f64; 2],
    h: [f64; 2],
    sigma: f64,
) -> Result<SliceVariance> {
    let rows = slice_profile(fp, cyl)?;
    let (pos, row) = rows.iter().enumerate().find(|(_, r)| r.index == index).ok_or(Error::BadSlice(usize::MAX))?;
    if row.degree.is_none_or(|d| d.abs() != 1) {
        return Err(Error::BadSlice(pos));
    }
    let g = fp.geometry();
    let n = g.dim;
    let sites = Region::Cylinder(cyl.clone()).sites(&g);
    let mut s = 0.0;
    for i in sites {
        let y = cyl.local(&g.position(i)[..n]);
        let key: Vec<i64> = (2..n).map(|a| (y[a] / g.h).round() as i64).collect();
        if key != index || y[0].hypot(y[1]) > 0.5 * cyl.radius * (1.0 + 1e-12) {
            continue;
        }
        s += ((y[0] - c[0]).powi(2) + (y[1] - c[1]).powi(2)) * fp.stencil(&g, i).density(fp.eps);
    }
    let variance = s * g.h * g.h / TWO_PI;
    let reference = fp.eps * fp.eps * variance_constant()?;
    let e2z = row.e2.max(0.0);
    let lg = if e2z > 0.0 { e2z.ln().powi(2) } else { 0.0 };
    let d2 = (h[0] - c[0]).powi(2) + (h[1] - c[1]).powi(2);
    Ok(SliceVariance {
        variance,
        reference,
        e1: row.e1,
        e2: row.e2,
        envelope: [fp.eps * fp.eps * lg * e2z.sqrt(), sigma * sigma * row.e1, d2 * e2z.sqrt()],
    })
}
