//! Lattice geometry and gauge-covariant discrete calculus.
//!
//! The complex scalar `u` lives on sites and the real connection one-form
//! `α` on links: `α_j(x)` belongs to the edge from `x` to `x + h e_j` and
//! enters through the link phase `U_j(x) = exp(−i h α_j(x))`. Every
//! difference is built from link phases, so gauge covariance
//! `(u, α) ↦ (e^{iξ}u, α + dξ)` holds exactly on the lattice.
//!
//! # Site averaging
//!
//! An interior site `x` has `2ⁿ` corners, one per choice of forward or
//! backward neighbour along each axis. At a corner we take the forward
//! difference `D⁺_j u(x) = (U_j(x) u(x+e_j) − u(x))/h` or the backward one
//! `D⁻_j u(x) = (u(x) − conj(U_j(x−e_j)) u(x−e_j))/h`, and the plaquette
//! curvature of the quadrant spanned by the chosen directions. Each corner
//! thus carries a full jet `(u, ∇u, ω)`. Pointwise quantities (energy
//! density, Jacobian, excess integrands, stress tensor) are evaluated on
//! every corner with the continuum algebra and averaged arithmetically.
//! Algebraic identities between them therefore hold to rounding error.
//!
//! For the energy density this averaging reduces to
//!
//! ```text
//! e(x) = Σ_j ½(|D⁺_j u|² + |D⁻_j u|²) + ε² Σ_{j<k} ¼ Σ_{4 plaquettes} ω_jk² + (1 − |u|²)²/4ε²
//! ```
//!
//! Integrals run over interior sites with weight `hⁿ`; sites on a
//! non-periodic face carry no density.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excess::PlaneFrame;
use crate::util::{par_sum, par_sum_over, Cutoff};

pub type C64 = Complex64;

/// Largest supported dimension.
pub const MAX_DIM: usize = 4;

/// Index of the unordered pair `(j, k)`, `j < k`, in lexicographic order.
pub fn pair_index(j: usize, k: usize) -> usize {
    let (a, b) = if j < k { (j, k) } else { (k, j) };
    // pairs of {0,1,2,3}: 01 02 03 12 13 23
    match (a, b) {
        (0, 1) => 0,
        (0, 2) => 1,
        (0, 3) => 2,
        (1, 2) => 3,
        (1, 3) => 4,
        (2, 3) => 5,
        _ => panic!("invalid pair ({j}, {k})"),
    }
}

/// All pairs `(j, k)` with `j < k < n`.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for j in 0..n {
        for k in j + 1..n {
            out.push((j, k));
        }
    }
    out
}

/// Grid description: dimension, half-widths, spacing, origin and the
/// periodic axes.
///
/// A non-periodic axis of half-width `L` has `2L/h + 1` sites from
/// `origin − L` to `origin + L`. A periodic axis has `2L/h` sites; the
/// endpoint `origin + L` is identified with `origin − L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub spacing: f64,
    pub origin: Vec<f64>,
    #[serde(default)]
    pub periodic: Vec<bool>,
}

impl LatticeSpec {
    pub fn new(dim: usize, extents: &[f64], spacing: f64) -> Result<Self> {
        let spec = LatticeSpec {
            dim,
            extents: extents.to_vec(),
            spacing,
            origin: vec![0.0; dim],
            periodic: vec![false; dim],
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Cube `[−L, L]ⁿ` centred at the origin.
    pub fn cube(dim: usize, extent: f64, spacing: f64) -> Result<Self> {
        Self::new(dim, &vec![extent; dim], spacing)
    }

    pub fn with_origin(mut self, origin: &[f64]) -> Result<Self> {
        self.origin = origin.to_vec();
        self.validate()?;
        Ok(self)
    }

    pub fn with_periodic(mut self, axis: usize) -> Result<Self> {
        if axis >= self.dim {
            return Err(Error::AxisOutOfRange { axis, dim: self.dim });
        }
        self.periodic[axis] = true;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_DIM).contains(&self.dim) {
            return Err(Error::InvalidLattice(format!("dimension {} not in 2..=4", self.dim)));
        }
        if self.extents.len() != self.dim || self.origin.len() != self.dim || self.periodic.len() != self.dim {
            return Err(Error::InvalidLattice("per-axis vectors must have length n".into()));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidLattice("spacing must be positive".into()));
        }
        for (a, &l) in self.extents.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidLattice(format!("extent {a} must be positive")));
            }
            let cells = 2.0 * l / self.spacing;
            if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) || cells.round() < 2.0 {
                return Err(Error::InvalidLattice(format!(
                    "extent {l} on axis {a} is not a multiple of half the spacing {}",
                    self.spacing
                )));
            }
            if self.origin[a].is_nan() {
                return Err(Error::InvalidLattice("origin must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn cells(&self, axis: usize) -> usize {
        (2.0 * self.extents[axis] / self.spacing).round() as usize
    }

    pub fn count(&self, axis: usize) -> usize {
        if self.periodic[axis] {
            self.cells(axis)
        } else {
            self.cells(axis) + 1
        }
    }

    pub fn counts(&self) -> Vec<usize> {
        (0..self.dim).map(|a| self.count(a)).collect()
    }

    pub fn num_sites(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::new(self)
    }

    /// Smallest and largest coordinate along an axis.
    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        (self.origin[axis] - self.extents[axis], self.origin[axis] + self.extents[axis])
    }
}

/// Cached index arithmetic for a [`LatticeSpec`].
#[derive(Clone, Copy, Debug)]
pub struct Geometry {
    pub dim: usize,
    pub counts: [usize; MAX_DIM],
    pub strides: [usize; MAX_DIM],
    pub periodic: [bool; MAX_DIM],
    pub lo: [f64; MAX_DIM],
    pub h: f64,
    pub n_sites: usize,
}

impl Geometry {
    pub fn new(spec: &LatticeSpec) -> Self {
        let dim = spec.dim;
        let mut counts = [1; MAX_DIM];
        let mut periodic = [false; MAX_DIM];
        let mut lo = [0.0; MAX_DIM];
        for a in 0..dim {
            counts[a] = spec.count(a);
            periodic[a] = spec.periodic[a];
            lo[a] = spec.origin[a] - spec.extents[a];
        }
        let mut strides = [0; MAX_DIM];
        let mut s = 1;
        for a in (0..dim).rev() {
            strides[a] = s;
            s *= counts[a];
        }
        Geometry { dim, counts, strides, periodic, lo, h: spec.spacing, n_sites: s }
    }

    #[inline]
    pub fn coords(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        for a in 0..self.dim {
            c[a] = idx / self.strides[a];
            idx -= c[a] * self.strides[a];
        }
        c
    }

    #[inline]
    pub fn index(&self, c: &[usize]) -> usize {
        (0..self.dim).map(|a| c[a] * self.strides[a]).sum()
    }

    #[inline]
    pub fn position(&self, idx: usize) -> [f64; MAX_DIM] {
        let c = self.coords(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.lo[a] + c[a] as f64 * self.h;
        }
        x
    }

    /// Neighbour index along `axis` by `d ∈ {−1, +1}`, if it exists.
    #[inline]
    pub fn shift(&self, idx: usize, axis: usize, d: isize) -> Option<usize> {
        let c = (idx / self.strides[axis]) % self.counts[axis];
        self.shift_with(idx, c, axis, d)
    }

    #[inline]
    fn shift_with(&self, idx: usize, c: usize, axis: usize, d: isize) -> Option<usize> {
        let n = self.counts[axis];
        let s = self.strides[axis];
        if d > 0 {
            if c + 1 < n {
                Some(idx + s)
            } else if self.periodic[axis] {
                Some(idx + s - n * s)
            } else {
                None
            }
        } else if c > 0 {
            Some(idx - s)
        } else if self.periodic[axis] {
            Some(idx + (n - 1) * s)
        } else {
            None
        }
    }

    /// Neighbour that is known to exist (interior stencils).
    #[inline]
    pub fn nb(&self, idx: usize, axis: usize, d: isize) -> usize {
        self.shift(idx, axis, d).expect("neighbour outside lattice")
    }

    /// Whether the link from `idx` along `axis` exists.
    #[inline]
    pub fn has_link(&self, idx: usize, axis: usize) -> bool {
        self.shift(idx, axis, 1).is_some()
    }

    /// Distance in cells to the nearest non-periodic face.
    pub fn depth(&self, idx: usize) -> usize {
        let c = self.coords(idx);
        let mut d = usize::MAX;
        for a in 0..self.dim {
            if !self.periodic[a] {
                d = d.min(c[a]).min(self.counts[a] - 1 - c[a]);
            }
        }
        d
    }

    #[inline]
    pub fn is_interior(&self, idx: usize) -> bool {
        self.depth(idx) >= 1
    }

    pub fn interior_sites(&self) -> Vec<usize> {
        (0..self.n_sites).filter(|&i| self.is_interior(i)).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }
}

/// Real scalar gauge parameter ξ on sites; acts by
/// `(u, α) ↦ (e^{iξ}u, α + dξ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeTransform {
    pub xi: Vec<f64>,
}

impl GaugeTransform {
    pub fn identity(n_sites: usize) -> Self {
        GaugeTransform { xi: vec![0.0; n_sites] }
    }

    pub fn from_fn(spec: &LatticeSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let g = spec.geometry();
        GaugeTransform { xi: (0..g.n_sites).map(|i| f(&g.position(i)[..g.dim])).collect() }
    }
}

/// The fundamental state: `u` on sites, `α_j` on links, and ε.
///
/// `alpha[j][x]` is the connection on the link from site `x` along axis
/// `j`; entries for links leaving the lattice are stored as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldPair {
    pub spec: LatticeSpec,
    pub eps: f64,
    pub u: Vec<C64>,
    pub alpha: Vec<Vec<f64>>,
}

impl FieldPair {
    pub fn new(spec: LatticeSpec, eps: f64, u: Vec<C64>, alpha: Vec<Vec<f64>>) -> Result<Self> {
        spec.validate()?;
        let n = spec.num_sites();
        if u.len() != n {
            return Err(Error::ShapeMismatch(format!("u has {} entries, lattice has {n} sites", u.len())));
        }
        if alpha.len() != spec.dim || alpha.iter().any(|a| a.len() != n) {
            return Err(Error::ShapeMismatch("alpha must hold n arrays of site length".into()));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidLattice("eps must be positive".into()));
        }
        let fp = FieldPair { spec, eps, u, alpha };
        if !fp.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(fp)
    }

    /// `u ≡ 1`, `α ≡ 0`.
    pub fn vacuum(spec: &LatticeSpec, eps: f64) -> Self {
        let n = spec.num_sites();
        FieldPair { spec: spec.clone(), eps, u: vec![C64::new(1.0, 0.0); n], alpha: vec![vec![0.0; n]; spec.dim] }
    }

    /// Samples `u` at sites and `α_j` at link midpoints.
    pub fn from_fn(
        spec: &LatticeSpec,
        eps: f64,
        fu: impl Fn(&[f64]) -> C64 + Sync,
        falpha: impl Fn(usize, &[f64]) -> f64 + Sync,
    ) -> Self {
        let g = spec.geometry();
        let n = g.n_sites;
        let u: Vec<C64> = (0..n).into_par_iter().map(|i| fu(&g.position(i)[..g.dim])).collect();
        let alpha = (0..g.dim)
            .map(|j| {
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        if !g.has_link(i, j) {
                            return 0.0;
                        }
                        let mut x = g.position(i);
                        x[j] += 0.5 * g.h;
                        falpha(j, &x[..g.dim])
                    })
                    .collect()
            })
            .collect();
        FieldPair { spec: spec.clone(), eps, u, alpha }
    }

    pub fn geometry(&self) -> Geometry {
        self.spec.geometry()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            && self.alpha.iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    /// Link phase `exp(−i h α_j(x))`.
    #[inline]
    pub fn link(&self, axis: usize, idx: usize) -> C64 {
        let t = -self.spec.spacing * self.alpha[axis][idx];
        C64::new(t.cos(), t.sin())
    }

    /// Complex conjugate pair `(ū, −α)`.
    pub fn conjugate(&self) -> FieldPair {
        FieldPair {
            spec: self.spec.clone(),
            eps: self.eps,
            u: self.u.iter().map(|z| z.conj()).collect(),
            alpha: self.alpha.iter().map(|a| a.iter().map(|v| -v).collect()).collect(),
        }
    }

    pub fn modulus(&self) -> Vec<f64> {
        self.u.iter().map(|z| z.norm()).collect()
    }

    /// Plaquette curvature with base point `b` in the `(j, k)` plane, `j < k`.
    #[inline]
    pub fn plaquette(&self, g: &Geometry, b: usize, j: usize, k: usize) -> f64 {
        let bj = g.nb(b, j, 1);
        let bk = g.nb(b, k, 1);
        (self.alpha[j][b] + self.alpha[k][bj] - self.alpha[j][bk] - self.alpha[k][b]) / g.h
    }

    /// Corner data at an interior site.
    #[inline]
    pub fn stencil(&self, g: &Geometry, idx: usize) -> SiteStencil {
        let n = g.dim;
        let h = g.h;
        let u = self.u[idx];
        let mut dp = [C64::new(0.0, 0.0); MAX_DIM];
        let mut dm = [C64::new(0.0, 0.0); MAX_DIM];
        let mut back = [0usize; MAX_DIM];
        for j in 0..n {
            let xp = g.nb(idx, j, 1);
            let xm = g.nb(idx, j, -1);
            back[j] = xm;
            dp[j] = (self.link(j, idx) * self.u[xp] - u) / h;
            dm[j] = (u - self.link(j, xm).conj() * self.u[xm]) / h;
        }
        let mut plaq = [[[0.0; 4]; MAX_DIM]; MAX_DIM];
        for j in 0..n {
            for k in j + 1..n {
                // q = bit_j + 2 bit_k, bit = 1 for the forward quadrant
                let b00 = g.nb(back[j], k, -1);
                plaq[j][k][0] = self.plaquette(g, b00, j, k);
                plaq[j][k][1] = self.plaquette(g, back[k], j, k);
                plaq[j][k][2] = self.plaquette(g, back[j], j, k);
                plaq[j][k][3] = self.plaquette(g, idx, j, k);
            }
        }
        SiteStencil { dim: n, u, dp, dm, plaq }
    }
}

/// Covariant differences and quadrant curvatures around one site.
#[derive(Clone, Copy, Debug)]
pub struct SiteStencil {
    pub dim: usize,
    pub u: C64,
    pub dp: [C64; MAX_DIM],
    pub dm: [C64; MAX_DIM],
    /// `plaq[j][k][q]` for `j < k`; `q = bit_j + 2·bit_k` selects the
    /// quadrant, bit 1 meaning the forward direction.
    pub plaq: [[[f64; 4]; MAX_DIM]; MAX_DIM],
}

impl SiteStencil {
    pub fn num_corners(&self) -> usize {
        1 << self.dim
    }

    /// Jet at corner `mask` (bit `j` set = forward along axis `j`).
    #[inline]
    pub fn corner(&self, mask: usize) -> Jet {
        let n = self.dim;
        let mut du = [C64::new(0.0, 0.0); MAX_DIM];
        let mut om = [[0.0; MAX_DIM]; MAX_DIM];
        for j in 0..n {
            du[j] = if mask >> j & 1 == 1 { self.dp[j] } else { self.dm[j] };
        }
        for j in 0..n {
            for k in j + 1..n {
                let q = (mask >> j & 1) + 2 * (mask >> k & 1);
                om[j][k] = self.plaq[j][k][q];
                om[k][j] = -om[j][k];
            }
        }
        Jet { dim: n, u: self.u, du, om }
    }

    /// Average of `f` over all corners.
    #[inline]
    pub fn average(&self, mut f: impl FnMut(&Jet) -> f64) -> f64 {
        let m = self.num_corners();
        let mut s = 0.0;
        for c in 0..m {
            s += f(&self.corner(c));
        }
        s / m as f64
    }

    #[inline]
    pub fn grad_sq(&self) -> f64 {
        (0..self.dim).map(|j| 0.5 * (self.dp[j].norm_sqr() + self.dm[j].norm_sqr())).sum()
    }

    #[inline]
    pub fn curv_sq(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.dim {
            for k in j + 1..self.dim {
                s += 0.25 * self.plaq[j][k].iter().map(|w| w * w).sum::<f64>();
            }
        }
        s
    }

    #[inline]
    pub fn potential(&self, eps: f64) -> f64 {
        let w = 1.0 - self.u.norm_sqr();
        w * w / (4.0 * eps * eps)
    }

    /// Corner-averaged energy density.
    #[inline]
    pub fn density(&self, eps: f64) -> f64 {
        self.grad_sq() + eps * eps * self.curv_sq() + self.potential(eps)
    }

    /// Corner-averaged curvature component, `j ≠ k`.
    #[inline]
    pub fn curvature(&self, j: usize, k: usize) -> f64 {
        if j == k {
            return 0.0;
        }
        let (a, b, s) = if j < k { (j, k, 1.0) } else { (k, j, -1.0) };
        s * 0.25 * self.plaq[a][b].iter().sum::<f64>()
    }

    /// Corner-averaged Jacobian `J_jk = 2⟨i∇_j u, ∇_k u⟩ + (1 − |u|²) ω_jk`.
    #[inline]
    pub fn jacobian(&self, j: usize, k: usize) -> f64 {
        if j == k {
            return 0.0;
        }
        // independent corner bits: the average of the product factorises
        let dj = 0.5 * (self.dp[j] + self.dm[j]);
        let dk = 0.5 * (self.dp[k] + self.dm[k]);
        2.0 * (dj.conj() * dk).im + (1.0 - self.u.norm_sqr()) * self.curvature(j, k)
    }
}

/// Pointwise jet `(u, ∇u, ω)` at one corner.
#[derive(Clone, Copy, Debug)]
pub struct Jet {
    pub dim: usize,
    pub u: C64,
    pub du: [C64; MAX_DIM],
    pub om: [[f64; MAX_DIM]; MAX_DIM],
}

impl Jet {
    pub fn potential(&self, eps: f64) -> f64 {
        let w = 1.0 - self.u.norm_sqr();
        w * w / (4.0 * eps * eps)
    }

    pub fn grad_sq(&self) -> f64 {
        self.du[..self.dim].iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn curv_sq(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.dim {
            for k in j + 1..self.dim {
                s += self.om[j][k] * self.om[j][k];
            }
        }
        s
    }

    pub fn density(&self, eps: f64) -> f64 {
        self.grad_sq() + eps * eps * self.curv_sq() + self.potential(eps)
    }

    /// `ψ_jk = 2⟨i∇_j u, ∇_k u⟩` with `⟨a, b⟩ = Re(a b̄)`.
    pub fn psi(&self, j: usize, k: usize) -> f64 {
        2.0 * (self.du[j].conj() * self.du[k]).im
    }

    pub fn jacobian(&self, j: usize, k: usize) -> f64 {
        self.psi(j, k) + (1.0 - self.u.norm_sqr()) * self.om[j][k]
    }

    /// Jet expressed in the orthonormal frame whose rows are `rows`.
    pub fn rotated(&self, rows: &[[f64; MAX_DIM]]) -> Jet {
        let n = self.dim;
        let mut du = [C64::new(0.0, 0.0); MAX_DIM];
        let mut om = [[0.0; MAX_DIM]; MAX_DIM];
        for a in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for j in 0..n {
                s += self.du[j] * rows[a][j];
            }
            du[a] = s;
        }
        for a in 0..n {
            for b in a + 1..n {
                let mut s = 0.0;
                for j in 0..n {
                    for k in j + 1..n {
                        s += self.om[j][k] * (rows[a][j] * rows[b][k] - rows[a][k] * rows[b][j]);
                    }
                }
                om[a][b] = s;
                om[b][a] = -s;
            }
        }
        Jet { dim: n, u: self.u, du, om }
    }

    /// Stress-energy tensor `T = e·I − 2∇u*∇u − 2ε² ω*ω`.
    pub fn stress(&self, eps: f64) -> [[f64; MAX_DIM]; MAX_DIM] {
        let n = self.dim;
        let e = self.density(eps);
        let mut t = [[0.0; MAX_DIM]; MAX_DIM];
        for a in 0..n {
            for b in 0..n {
                let mut s = if a == b { e } else { 0.0 };
                s -= 2.0 * (self.du[a] * self.du[b].conj()).re;
                let mut w = 0.0;
                for k in 0..n {
                    w += self.om[a][k] * self.om[b][k];
                }
                s -= 2.0 * eps * eps * w;
                t[a][b] = s;
            }
        }
        t
    }
}

/// Names of pointwise diagnostic fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticKind {
    EnergyDensity,
    Jacobian { j: usize, k: usize },
    Curvature { j: usize, k: usize },
    Discrepancy,
    ModicaMarginCurvature,
    ModicaMarginGradient,
}

/// A real field on sites. Non-interior sites hold 0.
#[derive(Clone, Debug)]
pub struct DiagnosticField {
    pub name: DiagnosticKind,
    pub values: Vec<f64>,
    pub frame: Option<PlaneFrame>,
}

fn site_field(fp: &FieldPair, name: DiagnosticKind, f: impl Fn(&SiteStencil) -> f64 + Sync) -> DiagnosticField {
    let g = fp.geometry();
    let values = (0..g.n_sites)
        .into_par_iter()
        .map(|i| if g.is_interior(i) { f(&fp.stencil(&g, i)) } else { 0.0 })
        .collect();
    DiagnosticField { name, values, frame: None }
}

/// `D_j u(x) = (U_j(x) u(x + h e_j) − u(x))/h` on every existing link;
/// zero for links leaving the lattice.
pub fn covariant_derivative(fp: &FieldPair, axis: usize) -> Result<Vec<C64>> {
    let n = fp.dim();
    if axis >= n {
        return Err(Error::AxisOutOfRange { axis, dim: n });
    }
    let g = fp.geometry();
    let h = g.h;
    Ok((0..g.n_sites)
        .into_par_iter()
        .map(|i| match g.shift(i, axis, 1) {
            Some(xp) => (fp.link(axis, i) * fp.u[xp] - fp.u[i]) / h,
            None => C64::new(0.0, 0.0),
        })
        .collect())
}

/// Plaquette curvatures for every pair `j < k`.
#[derive(Clone, Debug)]
pub struct Curvature {
    pub dim: usize,
    /// `values[pair_index(j,k)][x]`; zero where the plaquette leaves the
    /// lattice. Slots of pairs beyond the dimension are empty.
    pub values: Vec<Vec<f64>>,
}

impl Curvature {
    /// `ω_jk` at base site `x`, antisymmetric in `(j, k)`.
    pub fn get(&self, j: usize, k: usize, x: usize) -> f64 {
        if j == k {
            0.0
        } else if j < k {
            self.values[pair_index(j, k)][x]
        } else {
            -self.values[pair_index(j, k)][x]
        }
    }
}

pub fn curvature(fp: &FieldPair) -> Curvature {
    let g = fp.geometry();
    let n = g.dim;
    let mut values = vec![Vec::new(); 6];
    for (j, k) in pairs(n) {
        values[pair_index(j, k)] = (0..g.n_sites)
            .into_par_iter()
            .map(|b| {
                let (Some(bj), Some(bk)) = (g.shift(b, j, 1), g.shift(b, k, 1)) else { return 0.0 };
                if g.shift(bj, k, 1).is_none() {
                    return 0.0;
                }
                (fp.alpha[j][b] + fp.alpha[k][bj] - fp.alpha[j][bk] - fp.alpha[k][b]) / g.h
            })
            .collect();
    }
    Curvature { dim: n, values }
}

pub fn energy_density(fp: &FieldPair) -> DiagnosticField {
    let eps = fp.eps;
    site_field(fp, DiagnosticKind::EnergyDensity, |s| s.density(eps))
}

/// Site-averaged Jacobian component `J_jk`.
pub fn jacobian_field(fp: &FieldPair, j: usize, k: usize) -> DiagnosticField {
    site_field(fp, DiagnosticKind::Jacobian { j, k }, |s| s.jacobian(j, k))
}

/// Site-averaged curvature component `ω_jk`.
pub fn curvature_field(fp: &FieldPair, j: usize, k: usize) -> DiagnosticField {
    site_field(fp, DiagnosticKind::Curvature { j, k }, |s| s.curvature(j, k))
}

/// Ball or cylinder region of integration.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    /// All interior sites.
    Full,
    Ball { center: Vec<f64>, radius: f64 },
    Cylinder(Cylinder),
}

/// `B²_R × B^{n−2}_L` in the coordinates of a frame: the disk factor spans
/// `e_1, e_2` and the axial factor spans `S = span{e_3..e_n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cylinder {
    pub center: Vec<f64>,
    pub frame: PlaneFrame,
    pub radius: f64,
    pub half_length: f64,
}

impl Cylinder {
    pub fn new(center: &[f64], frame: PlaneFrame, radius: f64, half_length: f64) -> Self {
        Cylinder { center: center.to_vec(), frame, radius, half_length }
    }

    /// Frame coordinates `(y, z)` of a point.
    pub fn local(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let n = self.center.len();
        let mut out = [0.0; MAX_DIM];
        for a in 0..n {
            let e = self.frame.vector(a);
            out[a] = (0..n).map(|j| e[j] * (x[j] - self.center[j])).sum();
        }
        out
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let y = self.local(x);
        let n = self.center.len();
        let r2 = y[0] * y[0] + y[1] * y[1];
        let z2: f64 = y[2..n].iter().map(|v| v * v).sum();
        let tol = 1e-9;
        r2.sqrt() <= self.radius * (1.0 + tol) + tol && z2.sqrt() <= self.half_length * (1.0 + tol) + tol
    }
}

impl Region {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        Region::Ball { center: center.to_vec(), radius }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Full => true,
            Region::Ball { center, radius } => {
                let r2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                r2.sqrt() <= radius * (1.0 + 1e-9) + 1e-12
            }
            Region::Cylinder(c) => c.contains(x),
        }
    }

    /// Length scale used for normalisation: ball radius or cylinder
    /// half-length.
    pub fn scale(&self) -> f64 {
        match self {
            Region::Full => 1.0,
            Region::Ball { radius, .. } => *radius,
            Region::Cylinder(c) => c.half_length,
        }
    }

    /// Per-axis half-width of an axis-aligned box enclosing the region.
    fn half_widths(&self, n: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Region::Full => None,
            Region::Ball { center, radius } => Some((center.clone(), vec![*radius; n])),
            Region::Cylinder(c) => {
                let mut w = vec![0.0; n];
                for (a, wa) in w.iter_mut().enumerate() {
                    let e1 = c.frame.vector(0)[a];
                    let e2 = c.frame.vector(1)[a];
                    let s: f64 = (2..n).map(|k| c.frame.vector(k)[a].powi(2)).sum();
                    *wa = c.radius * (e1 * e1 + e2 * e2).sqrt() + c.half_length * s.sqrt();
                }
                Some((c.center.clone(), w))
            }
        }
    }

    /// Checks that the region lies inside the lattice clipped inward by one
    /// cell along every non-periodic axis.
    pub fn check_inside(&self, spec: &LatticeSpec) -> Result<()> {
        let n = spec.dim;
        if let Some((c, w)) = self.half_widths(n) {
            if c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: c.len() });
            }
            let h = spec.spacing;
            for a in 0..n {
                if spec.periodic[a] {
                    continue;
                }
                let (lo, hi) = spec.bounds(a);
                let tol = 1e-9 * h;
                if c[a] - w[a] < lo + h - tol || c[a] + w[a] > hi - h + tol {
                    return Err(Error::RegionExceedsDomain);
                }
            }
        }
        Ok(())
    }

    /// Interior sites inside the region, in increasing index order.
    pub fn sites(&self, g: &Geometry) -> Vec<usize> {
        (0..g.n_sites)
            .into_par_iter()
            .filter(|&i| g.is_interior(i) && self.contains(&g.position(i)[..g.dim]))
            .collect()
    }
}

/// Sum of the energy density over the interior sites of a region, times `hⁿ`.
pub fn total_energy(fp: &FieldPair, region: &Region) -> Result<f64> {
    region.check_inside(&fp.spec)?;
    let g = fp.geometry();
    let sites = region.sites(&g);
    let eps = fp.eps;
    Ok(par_sum_over(&sites, |i| fp.stencil(&g, i).density(eps)) * g.cell_volume())
}

/// `(u, α) ↦ (e^{iξ}u, α + dξ)` with `dξ_j(x) = (ξ(x + e_j) − ξ(x))/h`.
pub fn gauge_apply(fp: &FieldPair, xi: &GaugeTransform) -> Result<FieldPair> {
    let g = fp.geometry();
    if xi.xi.len() != g.n_sites {
        return Err(Error::ShapeMismatch("gauge transform must be defined on all sites".into()));
    }
    let u = fp.u.par_iter().zip(&xi.xi).map(|(z, &t)| z * C64::new(t.cos(), t.sin())).collect();
    let alpha = (0..g.dim)
        .map(|j| {
            (0..g.n_sites)
                .into_par_iter()
                .map(|i| match g.shift(i, j, 1) {
                    Some(xp) => fp.alpha[j][i] + (xi.xi[xp] - xi.xi[i]) / g.h,
                    None => fp.alpha[j][i],
                })
                .collect()
        })
        .collect();
    Ok(FieldPair { spec: fp.spec.clone(), eps: fp.eps, u, alpha })
}

/// Site weights equal to 1 on interior sites and 0 elsewhere.
pub fn interior_weights(g: &Geometry) -> Vec<f64> {
    (0..g.n_sites).map(|i| if g.is_interior(i) { 1.0 } else { 0.0 }).collect()
}

/// `Σ_x w_x e(x) hⁿ`. Weights on non-interior sites must vanish.
pub fn weighted_energy(fp: &FieldPair, w: &[f64]) -> f64 {
    let g = fp.geometry();
    let eps = fp.eps;
    par_sum(g.n_sites, |i| if w[i] == 0.0 { 0.0 } else { w[i] * fp.stencil(&g, i).density(eps) }) * g.cell_volume()
}

/// Gradient of the weighted lattice energy with respect to every degree
/// of freedom.
///
/// `du[x] = ∂E/∂Re u(x) + i ∂E/∂Im u(x)` and `dalpha[j][x] = ∂E/∂α_j(x)`.
#[derive(Clone, Debug)]
pub struct EnergyGradient {
    pub energy: f64,
    pub du: Vec<C64>,
    pub dalpha: Vec<Vec<f64>>,
}

/// Energy and its exact gradient.
///
/// The weighted energy is a sum over links, plaquettes and sites:
/// a link carries `½(w_x + w_{x+e_j})`, a plaquette a quarter of the sum of
/// its corner weights. The gradient is assembled by gathering, one degree
/// of freedom at a time.
pub fn energy_gradient(fp: &FieldPair, w: &[f64]) -> EnergyGradient {
    let energy = weighted_energy(fp, w);
    let (du, dalpha) = weighted_gradient(fp, w);
    EnergyGradient { energy, du, dalpha }
}

/// The gradient part of [`energy_gradient`] alone.
pub fn weighted_gradient(fp: &FieldPair, w: &[f64]) -> (Vec<C64>, Vec<Vec<f64>>) {
    let g = fp.geometry();
    let n = g.dim;
    let h = g.h;
    let vol = g.cell_volume();
    let eps = fp.eps;
    let e2 = eps * eps;
    let links: Vec<Vec<C64>> = (0..n).map(|j| (0..g.n_sites).into_par_iter().map(|i| fp.link(j, i)).collect()).collect();
    let du: Vec<C64> = (0..g.n_sites)
        .into_par_iter()
        .map(|y| {
            let uy = fp.u[y];
            let mut acc = -w[y] * (1.0 - uy.norm_sqr()) * uy / e2;
            for j in 0..n {
                if let Some(yp) = g.shift(y, j, 1) {
                    let c = 0.5 * (w[y] + w[yp]);
                    if c != 0.0 {
                        acc += -2.0 * c * (links[j][y] * fp.u[yp] - uy) / (h * h);
                    }
                }
                if let Some(ym) = g.shift(y, j, -1) {
                    let c = 0.5 * (w[y] + w[ym]);
                    if c != 0.0 {
                        acc += 2.0 * c * (uy - links[j][ym].conj() * fp.u[ym]) / (h * h);
                    }
                }
            }
            acc * vol
        })
        .collect();
    let dalpha: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            (0..g.n_sites)
                .into_par_iter()
                .map(|y| {
                    let Some(yp) = g.shift(y, j, 1) else { return 0.0 };
                    let mut acc = 0.0;
                    let c = 0.5 * (w[y] + w[yp]);
                    if c != 0.0 {
                        let z = fp.u[y].conj() * links[j][y] * fp.u[yp];
                        acc += c * (-2.0 * h * z.im) / (h * h);
                    }
                    for k in 0..n {
                        if k == j {
                            continue;
                        }
                        let (a, b) = if j < k { (j, k) } else { (k, j) };
                        // base y: α_j(y) enters with + if j is the first index
                        let s0 = if j == a { 1.0 } else { -1.0 };
                        for (base, sign) in [(Some(y), s0), (g.shift(y, k, -1), -s0)] {
                            let Some(bs) = base else { continue };
                            let Some(ba) = g.shift(bs, a, 1) else { continue };
                            let Some(bb) = g.shift(bs, b, 1) else { continue };
                            let Some(bab) = g.shift(ba, b, 1) else { continue };
                            let cp = 0.25 * (w[bs] + w[ba] + w[bb] + w[bab]);
                            if cp == 0.0 {
                                continue;
                            }
                            let om = (fp.alpha[a][bs] + fp.alpha[b][ba] - fp.alpha[a][bb] - fp.alpha[b][bs]) / h;
                            acc += 2.0 * e2 * cp * om * sign / h;
                        }
                    }
                    acc * vol
                })
                .collect()
        })
        .collect();
    (du, dalpha)
}

/// Norms of the Euler–Lagrange residuals and the stress-tensor test.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Sup norm of `∇*∇u − (1 − |u|²)u/2ε²`.
    pub el_scalar_sup: f64,
    /// L² norm (with `hⁿ` weights) of the same residual.
    pub el_scalar_l2: f64,
    /// Sup norm of `ε² d*ω − ⟨∇u, iu⟩`.
    pub el_curvature_sup: f64,
    pub el_curvature_l2: f64,
    /// Largest normalised inner variation `|∫⟨T, DX⟩| / ∫e|DX|` over the
    /// test library.
    pub stress_energy_divergence: f64,
    pub sites_checked: usize,
}

/// Evaluates both Euler–Lagrange equations as the gradient of the lattice
/// energy divided by `2hⁿ`, on sites at least two cells from every
/// non-periodic face, and tests `∫⟨T, DX⟩ = 0` for compactly supported
/// vector fields `X`.
pub fn el_residuals(fp: &FieldPair) -> ResidualReport {
    let g = fp.geometry();
    let w = interior_weights(&g);
    let (du, dalpha) = weighted_gradient(fp, &w);
    let vol = g.cell_volume();
    let scale = 1.0 / (2.0 * vol);
    let deep: Vec<usize> = (0..g.n_sites).filter(|&i| g.depth(i) >= 2).collect();
    let mut rep = ResidualReport { sites_checked: deep.len(), ..Default::default() };
    let mut s2 = 0.0;
    let mut c2 = 0.0;
    for &i in &deep {
        let r = du[i].norm() * scale;
        rep.el_scalar_sup = rep.el_scalar_sup.max(r);
        s2 += r * r * vol;
        for j in 0..g.dim {
            let Some(ip) = g.shift(i, j, 1) else { continue };
            if g.depth(ip) < 2 {
                continue;
            }
            let r = dalpha[j][i].abs() * scale;
            rep.el_curvature_sup = rep.el_curvature_sup.max(r);
            c2 += r * r * vol;
        }
    }
    rep.el_scalar_l2 = s2.sqrt();
    rep.el_curvature_l2 = c2.sqrt();
    rep.stress_energy_divergence = stress_test(fp);
    rep
}

/// Largest normalised inner variation over a fixed library of vector
/// fields supported in a ball around the domain centre.
fn stress_test(fp: &FieldPair) -> f64 {
    let g = fp.geometry();
    let n = g.dim;
    let spec = &fp.spec;
    let mut reach = f64::INFINITY;
    for a in 0..n {
        if !spec.periodic[a] {
            reach = reach.min(spec.extents[a] - 2.0 * g.h);
        }
    }
    if !reach.is_finite() {
        reach = spec.extents.iter().cloned().fold(f64::INFINITY, f64::min);
    }
    if reach <= 2.0 * g.h {
        return 0.0;
    }
    let center = spec.origin.clone();
    let bump = Cutoff::new(0.3 * reach, 0.9 * reach);
    let sites: Vec<usize> = (0..g.n_sites).filter(|&i| g.is_interior(i)).collect();
    let eps = fp.eps;
    // fields X = φ e_a (a < n) and X = φ (x − c)
    let mut worst: f64 = 0.0;
    for field in 0..=n {
        let [num, den] = crate::util::par_sum_vec(sites.len(), |s| {
            let i = sites[s];
            let x = g.position(i);
            let jet = bump.radial(&x[..n], &center);
            if jet.value == 0.0 && jet.grad.iter().all(|v| *v == 0.0) {
                return [0.0, 0.0];
            }
            // DX[a][b] = ∂_b X_a
            let mut dx = [[0.0; MAX_DIM]; MAX_DIM];
            if field < n {
                dx[field][..n].copy_from_slice(&jet.grad[..n]);
            } else {
                for a in 0..n {
                    for b in 0..n {
                        dx[a][b] = jet.grad[b] * (x[a] - center[a]) + if a == b { jet.value } else { 0.0 };
                    }
                }
            }
            let st = fp.stencil(&g, i);
            let mut t = [[0.0; MAX_DIM]; MAX_DIM];
            let m = st.num_corners();
            for c in 0..m {
                let tc = st.corner(c).stress(eps);
                for a in 0..n {
                    for b in 0..n {
                        t[a][b] += tc[a][b] / m as f64;
                    }
                }
            }
            let mut num = 0.0;
            let mut dn = 0.0;
            for a in 0..n {
                for b in 0..n {
                    num += t[a][b] * dx[a][b];
                    dn += dx[a][b] * dx[a][b];
                }
            }
            [num, st.density(eps) * dn.sqrt()]
        });
        if den > 0.0 {
            worst = worst.max(num.abs() / den);
        }
    }
    worst
}

/// Discrepancy `ξ = ε|F| − (1 − |u|²)/2ε` and the two Modica margins
/// `(1 − |u|²)/2ε − ε|F|` and `(1 − |u|²)/ε − |∇u|`.
#[derive(Clone, Debug)]
pub struct DiscrepancyReport {
    pub discrepancy: DiagnosticField,
    pub margin_curvature: DiagnosticField,
    pub margin_gradient: DiagnosticField,
    /// Interior sites where either margin is negative.
    pub violations: Vec<usize>,
}

/// `|F|` and `|∇u|` are the square roots of the corner-averaged squares.
pub fn discrepancy_fields(fp: &FieldPair) -> DiscrepancyReport {
    let eps = fp.eps;
    let g = fp.geometry();
    let data: Vec<(f64, f64, f64)> = (0..g.n_sites)
        .into_par_iter()
        .map(|i| {
            if !g.is_interior(i) {
                return (0.0, 0.0, 0.0);
            }
            let s = fp.stencil(&g, i);
            let f = s.curv_sq().sqrt();
            let du = s.grad_sq().sqrt();
            let w = 1.0 - s.u.norm_sqr();
            let xi = eps * f - w / (2.0 * eps);
            (xi, -xi, w / eps - du)
        })
        .collect();
    let violations = (0..g.n_sites).filter(|&i| g.is_interior(i) && (data[i].1 < 0.0 || data[i].2 < 0.0)).collect();
    let pick = |k: usize, name| DiagnosticField {
        name,
        values: data
            .iter()
            .map(|d| match k {
                0 => d.0,
                1 => d.1,
                _ => d.2,
            })
            .collect(),
        frame: None,
    };
    DiscrepancyReport {
        discrepancy: pick(0, DiagnosticKind::Discrepancy),
        margin_curvature: pick(1, DiagnosticKind::ModicaMarginCurvature),
        margin_gradient: pick(2, DiagnosticKind::ModicaMarginGradient),
        violations,
    }
}
