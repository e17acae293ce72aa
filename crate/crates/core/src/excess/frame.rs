use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{pair_index, pairs, MAX_DIM};

/// Oriented orthonormal frame `e_1..e_n`; the reference plane is
/// `S = span{e_3..e_n}` and the normal plane is `span{e_1, e_2}`.
///
/// The orientation is the sign of `det(e_1..e_n)`. Swapping `e_1` and
/// `e_2` flips it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneFrame {
    basis: Vec<Vec<f64>>,
}

impl PlaneFrame {
    /// Validates orthonormality to 1e-12.
    pub fn new(basis: Vec<Vec<f64>>) -> Result<Self> {
        let n = basis.len();
        if !(2..=MAX_DIM).contains(&n) || basis.iter().any(|v| v.len() != n) {
            return Err(Error::InvalidFrame("basis must be n vectors of length n".into()));
        }
        for a in 0..n {
            for b in 0..n {
                let g: f64 = (0..n).map(|j| basis[a][j] * basis[b][j]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                if (g - target).abs() > 1e-12 {
                    return Err(Error::InvalidFrame(format!("Gram entry ({a},{b}) = {g}")));
                }
            }
        }
        Ok(PlaneFrame { basis })
    }

    /// Gram–Schmidt orthonormalisation of the given vectors, in order.
    pub fn orthonormalize(vectors: &[Vec<f64>]) -> Result<Self> {
        let n = vectors.len();
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
        for v in vectors {
            let mut w = v.clone();
            for _ in 0..2 {
                for e in &out {
                    let d: f64 = (0..n).map(|j| w[j] * e[j]).sum();
                    for j in 0..n {
                        w[j] -= d * e[j];
                    }
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-14 {
                return Err(Error::InvalidFrame("degenerate vectors".into()));
            }
            w.iter_mut().for_each(|x| *x /= norm);
            out.push(w);
        }
        PlaneFrame::new(out)
    }

    /// Standard basis; `S` is spanned by the last `n − 2` axes.
    pub fn standard(n: usize) -> Self {
        let basis = (0..n).map(|a| (0..n).map(|j| if a == j { 1.0 } else { 0.0 }).collect()).collect();
        PlaneFrame { basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// `e_{a+1}` padded to [`MAX_DIM`] entries.
    pub fn vector(&self, a: usize) -> [f64; MAX_DIM] {
        let mut v = [0.0; MAX_DIM];
        v[..self.dim()].copy_from_slice(&self.basis[a]);
        v
    }

    pub fn rows(&self) -> [[f64; MAX_DIM]; MAX_DIM] {
        let mut r = [[0.0; MAX_DIM]; MAX_DIM];
        for a in 0..self.dim() {
            r[a] = self.vector(a);
        }
        r
    }

    pub fn determinant(&self) -> f64 {
        det(&self.basis)
    }

    pub fn orientation(&self) -> i32 {
        if self.determinant() >= 0.0 {
            1
        } else {
            -1
        }
    }

    /// Same plane with `e_1` and `e_2` swapped.
    pub fn flipped(&self) -> Self {
        let mut b = self.basis.clone();
        b.swap(0, 1);
        PlaneFrame { basis: b }
    }

    /// Components `B_jk = e1_j e2_k − e1_k e2_j` of `e_1 ∧ e_2`, indexed by
    /// [`pair_index`].
    pub fn normal_bivector(&self) -> [f64; 6] {
        let n = self.dim();
        let mut b = [0.0; 6];
        let (e1, e2) = (&self.basis[0], &self.basis[1]);
        for (j, k) in pairs(n) {
            b[pair_index(j, k)] = e1[j] * e2[k] - e1[k] * e2[j];
        }
        b
    }

    /// Orthogonal projector onto `S` as an `n × n` matrix.
    pub fn plane_projector(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut p = vec![vec![0.0; n]; n];
        for e in &self.basis[2..] {
            for a in 0..n {
                for b in 0..n {
                    p[a][b] += e[a] * e[b];
                }
            }
        }
        p
    }

    /// Hilbert–Schmidt distance between the plane projectors.
    pub fn tilt_distance(&self, other: &PlaneFrame) -> f64 {
        let p = self.plane_projector();
        let q = other.plane_projector();
        let n = self.dim();
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += (p[a][b] - q[a][b]).powi(2);
            }
        }
        s.sqrt()
    }

    /// Frame whose plane is the graph of the linear map `L: S → S^⊥`,
    /// `e_k ↦ e_k + L[0][k−3] e_1 + L[1][k−3] e_2`, orthonormalised.
    ///
    /// `params` holds `L` row-major: `2·(n − 2)` entries.
    pub fn tilted(&self, params: &[f64]) -> Result<Self> {
        let n = self.dim();
        let m = n - 2;
        if params.len() != 2 * m {
            return Err(Error::InvalidFrame(format!("expected {} tilt parameters", 2 * m)));
        }
        let mut tang: Vec<Vec<f64>> = Vec::with_capacity(m);
        for k in 0..m {
            let mut v = self.basis[k + 2].clone();
            for j in 0..n {
                v[j] += params[k] * self.basis[0][j] + params[m + k] * self.basis[1][j];
            }
            tang.push(v);
        }
        // normals first from e_1, e_2 projected off the new plane
        let s = PlaneFrame::orthonormalize_partial(&tang)?;
        let mut normals = Vec::with_capacity(2);
        for a in 0..2 {
            let mut w = self.basis[a].clone();
            for e in s.iter().chain(normals.iter()) {
                let d: f64 = (0..n).map(|j| w[j] * e[j]).sum();
                for j in 0..n {
                    w[j] -= d * e[j];
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            w.iter_mut().for_each(|x| *x /= norm);
            normals.push(w);
        }
        let mut all = normals;
        all.extend(s);
        // one re-orthonormalisation pass for rounding
        PlaneFrame::orthonormalize(&all)
    }

    fn orthonormalize_partial(vs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = vs.first().map(|v| v.len()).unwrap_or(0);
        let mut out: Vec<Vec<f64>> = Vec::new();
        for v in vs {
            let mut w = v.clone();
            for _ in 0..2 {
                for e in &out {
                    let d: f64 = (0..n).map(|j| w[j] * e[j]).sum();
                    for j in 0..n {
                        w[j] -= d * e[j];
                    }
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-14 {
                return Err(Error::InvalidFrame("degenerate tangent vectors".into()));
            }
            w.iter_mut().for_each(|x| *x /= norm);
            out.push(w);
        }
        Ok(out)
    }

    /// Rotation in the `(e_1, e_k)` plane by `theta`, `k ≥ 2`: tilts the
    /// plane `S` by that angle.
    pub fn rotated(&self, k: usize, theta: f64) -> Self {
        let mut b = self.basis.clone();
        let (c, s) = (theta.cos(), theta.sin());
        let n = self.dim();
        for j in 0..n {
            let e1 = self.basis[0][j];
            let ek = self.basis[k][j];
            b[0][j] = c * e1 - s * ek;
            b[k][j] = s * e1 + c * ek;
        }
        PlaneFrame { basis: b }
    }

    /// For a frame made of signed lattice axes, `(axis, sign)` of each vector.
    pub fn lattice_axes(&self) -> Option<Vec<(usize, f64)>> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n);
        for v in &self.basis {
            let mut found = None;
            for (j, &x) in v.iter().enumerate() {
                if (x.abs() - 1.0).abs() < 1e-12 {
                    found = Some((j, x.signum()));
                } else if x.abs() > 1e-12 {
                    return None;
                }
            }
            out.push(found?);
        }
        let _ = n;
        Some(out)
    }
}

fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap()).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}
