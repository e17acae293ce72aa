//! Numerical constants of the Gaffney inequality on thin cylinders and of
//! the Poincaré inequality on thin annuli.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::coulomb::region_link;
use crate::error::{Error, Result};
use crate::lattice::{Geometry, LatticeSpec};
use crate::util::conjugate_gradient;

/// Domain of a Gaffney estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GaffneyDomain {
    /// `B²_1 × B^{n−2}_r`.
    Cylinder { dim: usize, width: f64 },
    /// `[−s/2, s/2]²`.
    Square { side: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaffneyOptions {
    pub spacing: f64,
    pub max_iter: usize,
    /// Relative change of the Rayleigh quotient that stops the iteration.
    pub tol: f64,
    pub cg_rtol: f64,
    pub seed: u64,
}

impl Default for GaffneyOptions {
    fn default() -> Self {
        GaffneyOptions { spacing: 0.1, max_iter: 200, tol: 1e-8, cg_rtol: 1e-9, seed: 7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaffneyEstimate {
    pub domain: GaffneyDomain,
    pub spacing: f64,
    /// Smallest eigenvalue of `d*d + dd*` on Neumann one-forms.
    pub lambda_min: f64,
    /// `1/λ_min`, the best constant in `‖α‖² ≤ C∫(|dα|² + |d*α|²)`.
    pub constant: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Discrete one-forms on the links of a region; links leaving the region
/// are absent, which is the Neumann condition `α(ν) = 0`.
///
/// Sites, links and plaquettes carry trapezoidal weights: a factor 1/2 for
/// every axis along which the cell is cut by the boundary. Unknowns are
/// `β = √w α` so that the quotient operator is symmetric.
struct LinkComplex {
    g: Geometry,
    /// `(site, head, weight)` per unknown.
    links: Vec<(usize, usize, f64)>,
    mass: Vec<f64>,
    /// Link numbers `(x,j), (x+e_j,k), (x+e_k,j), (x,k)` and the weight.
    plaquettes: Vec<([usize; 4], f64)>,
}

impl LinkComplex {
    fn new(g: Geometry, active: Vec<bool>) -> Self {
        let n = g.dim;
        // per-site, per-axis trapezoid factor
        let factor: Vec<[f64; 4]> = (0..g.n_sites)
            .map(|x| {
                let mut c = [1.0; 4];
                for (k, ck) in c.iter_mut().enumerate().take(n) {
                    let inside = |d| g.shift(x, k, d).is_some_and(|y| active[y]);
                    if inside(1) != inside(-1) {
                        *ck = 0.5;
                    }
                }
                c
            })
            .collect();
        let mass = (0..g.n_sites).map(|x| if active[x] { factor[x][..n].iter().product() } else { 0.0 }).collect();
        let mut number = vec![vec![usize::MAX; g.n_sites]; n];
        let mut links = Vec::new();
        for x in 0..g.n_sites {
            for (j, row) in number.iter_mut().enumerate() {
                if let Some(q) = region_link(&g, &active, x, j) {
                    let w = (0..n).filter(|&k| k != j).map(|k| factor[x][k].min(factor[q][k])).product();
                    row[x] = links.len();
                    links.push((x, q, w));
                }
            }
        }
        let mut plaquettes = Vec::new();
        for x in 0..g.n_sites {
            for j in 0..n {
                for k in j + 1..n {
                    let (Some(p), Some(q)) = (region_link(&g, &active, x, j), region_link(&g, &active, x, k)) else {
                        continue;
                    };
                    let (a, b, c, d) = (number[j][x], number[k][p], number[j][q], number[k][x]);
                    if b == usize::MAX || c == usize::MAX {
                        continue;
                    }
                    let corners = [x, p, q, g.nb(p, k, 1)];
                    let w = (0..n)
                        .filter(|&l| l != j && l != k)
                        .map(|l| corners.iter().map(|&y| factor[y][l]).fold(1.0, f64::min))
                        .product();
                    plaquettes.push(([a, b, c, d], w));
                }
            }
        }
        LinkComplex { g, links, mass, plaquettes }
    }

    /// `(d*d + dd*)` in the β variables.
    fn apply(&self, beta: &[f64], out: &mut [f64]) {
        let h = self.g.h;
        let alpha: Vec<f64> = beta.iter().zip(&self.links).map(|(b, l)| b / l.2.sqrt()).collect();
        let mut div = vec![0.0; self.g.n_sites];
        for (l, &(x, q, w)) in self.links.iter().enumerate() {
            div[x] += w * alpha[l];
            div[q] -= w * alpha[l];
        }
        for (d, &m) in div.iter_mut().zip(&self.mass) {
            if m > 0.0 {
                *d /= h * m;
            }
        }
        for (l, &(x, q, w)) in self.links.iter().enumerate() {
            out[l] = w * (div[x] - div[q]) / h;
        }
        for &(p, w) in &self.plaquettes {
            let c = w * (alpha[p[0]] + alpha[p[1]] - alpha[p[2]] - alpha[p[3]]) / (h * h);
            out[p[0]] += c;
            out[p[1]] += c;
            out[p[2]] -= c;
            out[p[3]] -= c;
        }
        for (o, l) in out.iter_mut().zip(&self.links) {
            *o /= l.2.sqrt();
        }
    }
}

/// Smallest admissible half-width at least `l`.
fn half_width(l: f64, h: f64) -> f64 {
    (l / (0.5 * h) - 1e-9).ceil() * 0.5 * h
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn complex_for(domain: &GaffneyDomain, h: f64) -> Result<LinkComplex> {
    match *domain {
        GaffneyDomain::Cylinder { dim, width } => {
            if !(width > 0.0 && width <= 1.0) {
                return Err(Error::InvalidConfig(format!("Gaffney width {width} outside (0, 1]")));
            }
            if dim < 3 {
                return Err(Error::DimensionMismatch { expected: 3, found: dim });
            }
            let mut ext = vec![half_width(1.0 + h, h); 2];
            ext.extend(std::iter::repeat_n(half_width(width + h, h), dim - 2));
            let g = Geometry::new(&LatticeSpec::new(dim, &ext, h)?);
            let active = (0..g.n_sites)
                .map(|i| {
                    let x = g.position(i);
                    let z2: f64 = x[2..dim].iter().map(|v| v * v).sum();
                    x[0].hypot(x[1]) <= 1.0 + 1e-9 && z2.sqrt() <= width + 1e-9
                })
                .collect();
            Ok(LinkComplex::new(g, active))
        }
        GaffneyDomain::Square { side } => {
            let g = Geometry::new(&LatticeSpec::cube(2, half_width(side / 2.0, h), h)?);
            let active = vec![true; g.n_sites];
            Ok(LinkComplex::new(g, active))
        }
    }
}

/// Best constant of the discrete Gaffney inequality by inverse iteration
/// on the Hodge Laplacian of Neumann one-forms.
pub fn gaffney_constant(domain: &GaffneyDomain, opts: &GaffneyOptions) -> Result<GaffneyEstimate> {
    let cx = complex_for(domain, opts.spacing)?;
    let m = cx.links.len();
    if m == 0 {
        return Err(Error::SolverFailure("domain carries no links".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut lv = vec![0.0; m];
    let rayleigh = |v: &[f64], lv: &mut Vec<f64>| {
        cx.apply(v, lv);
        dot(v, lv) / dot(v, v)
    };
    let mut lambda = rayleigh(&v, &mut lv);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let sol = conjugate_gradient(|x, y| cx.apply(x, y), &v, Some(&v), opts.cg_rtol, 20 * m, None);
        if !sol.converged {
            return Err(Error::SolverFailure(format!("inner solve stalled at {:.2e}", sol.rel_residual)));
        }
        let norm = dot(&sol.x, &sol.x).sqrt();
        v = sol.x.iter().map(|x| x / norm).collect();
        let next = rayleigh(&v, &mut lv);
        let change = (next - lambda).abs() / next.abs();
        lambda = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(GaffneyEstimate {
        domain: *domain,
        spacing: opts.spacing,
        lambda_min: lambda,
        constant: 1.0 / lambda,
        iterations,
        converged,
    })
}

/// Gaffney constants over a schedule of cylinder widths.
pub fn gaffney_schedule(dim: usize, widths: &[f64], opts: &GaffneyOptions) -> Result<Vec<GaffneyEstimate>> {
    widths.iter().map(|&width| gaffney_constant(&GaffneyDomain::Cylinder { dim, width }, opts)).collect()
}

/// `(B²_a \ B²_c) × Ω` with `Ω = B^{n−2}_ℓ`; the mean is taken over
/// `(B²_a \ B²_b) × Ω'` with `Ω' = B^{n−2}_{ℓ'}`, `ℓ' ≤ ℓ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinAnnulus {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub half_length: f64,
    pub mean_half_length: f64,
}

impl ThinAnnulus {
    pub fn new(a: f64, b: f64, c: f64, half_length: f64) -> Self {
        ThinAnnulus { a, b, c, half_length, mean_half_length: half_length }
    }

    fn parts(&self, x: &[f64]) -> (bool, bool) {
        let r = x[0].hypot(x[1]);
        let z = x[2..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let tol = 1e-9;
        let inside = r >= self.c - tol && r <= self.a + tol && z <= self.half_length + tol;
        let mean = r >= self.b - tol && r <= self.a + tol && z <= self.mean_half_length + tol;
        (inside, mean)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareReport {
    /// `∫f²` over the annulus.
    pub lhs: f64,
    /// `∫|df|²` over the links of the annulus.
    pub gradient: f64,
    pub diam: f64,
    /// `lhs / (diam² · gradient)`; zero when both sides vanish.
    pub constant: f64,
    /// Mean of `f` over the mean-constraint set.
    pub mean: f64,
}

/// Evaluates both sides of the thin-annulus Poincaré inequality for a
/// site field `f`.
pub fn annulus_poincare_check(g: &Geometry, f: &[f64], dom: &ThinAnnulus) -> Result<PoincareReport> {
    if f.len() != g.n_sites {
        return Err(Error::ShapeMismatch(format!("field has {} entries, lattice {}", f.len(), g.n_sites)));
    }
    if g.dim < 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: g.dim });
    }
    if !(dom.a > dom.b && dom.b >= dom.c && dom.c >= 0.0 && dom.mean_half_length <= dom.half_length) {
        return Err(Error::InvalidConfig("thin annulus needs a > b ≥ c ≥ 0 and ℓ' ≤ ℓ".into()));
    }
    let n = g.dim;
    let mut active = vec![false; g.n_sites];
    let mut in_mean = vec![false; g.n_sites];
    for i in 0..g.n_sites {
        let (inside, mean) = dom.parts(&g.position(i)[..n]);
        active[i] = inside;
        in_mean[i] = mean;
    }
    let meanset = LinkComplex::new(*g, in_mean);
    let (mut sum, mut weight, mut scale) = (0.0, 0.0, 0.0);
    for (i, &m) in meanset.mass.iter().enumerate() {
        sum += m * f[i];
        scale += m * f[i].abs();
        weight += m;
    }
    if weight == 0.0 {
        return Err(Error::InvalidConfig("empty mean-constraint set".into()));
    }
    let mean = sum / weight;
    if mean.abs() > 1e-9 * (scale / weight) + 1e-14 {
        return Err(Error::MeanNotZero { mean });
    }
    let cx = LinkComplex::new(*g, active);
    let lhs: f64 = cx.mass.iter().zip(f).map(|(m, v)| m * v * v).sum();
    let gradient: f64 = cx.links.iter().map(|&(x, q, w)| w * ((f[q] - f[x]) / g.h).powi(2)).sum();
    let vol = g.cell_volume();
    let (lhs, gradient) = (lhs * vol, gradient * vol);
    let diam = 2.0 * dom.half_length;
    let constant = if gradient > 0.0 { lhs / (diam * diam * gradient) } else { 0.0 };
    Ok(PoincareReport { lhs, gradient, diam, constant, mean })
}

/// Samples `f`, subtracts its mean over the constraint set and checks the
/// inequality for each half-length of `Ω` in `half_lengths`.
pub fn poincare_dilation_sweep<F>(
    dim: usize,
    base: ThinAnnulus,
    half_lengths: &[f64],
    spacing: f64,
    f: F,
) -> Result<Vec<PoincareReport>>
where
    F: Fn(&[f64]) -> f64,
{
    let mut out = Vec::with_capacity(half_lengths.len());
    for &l in half_lengths {
        let ratio = base.mean_half_length / base.half_length;
        let dom = ThinAnnulus { half_length: l, mean_half_length: l * ratio, ..base };
        let mut ext = vec![half_width(dom.a + spacing, spacing); 2];
        ext.extend(std::iter::repeat_n(half_width(l + spacing, spacing), dim - 2));
        let g = Geometry::new(&LatticeSpec::new(dim, &ext, spacing)?);
        let mut values: Vec<f64> = (0..g.n_sites).map(|i| f(&g.position(i)[..dim])).collect();
        let in_mean = (0..g.n_sites).map(|i| dom.parts(&g.position(i)[..dim]).1).collect();
        let mass = LinkComplex::new(g, in_mean).mass;
        let weight: f64 = mass.iter().sum();
        let m = if weight > 0.0 { mass.iter().zip(&values).map(|(w, v)| w * v).sum::<f64>() / weight } else { 0.0 };
        values.iter_mut().for_each(|v| *v -= m);
        out.push(annulus_poincare_check(&g, &values, &dom)?);
    }
    Ok(out)
}
