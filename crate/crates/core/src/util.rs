//! Numerical helpers shared across modules: deterministic parallel
//! reductions, a conjugate-gradient solver, smooth cutoffs and cubic
//! interpolation.

use rayon::prelude::*;

const CHUNK: usize = 2048;

/// Sum of `f(i)` for `i in 0..n` with a fixed reduction order.
///
/// Partial sums are formed over fixed-size chunks and added sequentially,
/// so the result does not depend on the number of worker threads.
pub fn par_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).map(&f).sum::<f64>()
        })
        .collect();
    partial.iter().sum()
}

/// Deterministic parallel sum over an index list.
pub fn par_sum_over<F>(items: &[usize], f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    par_sum(items.len(), |i| f(items[i]))
}

/// Deterministic parallel sum of fixed-size vectors.
pub fn par_sum_vec<F, const K: usize>(n: usize, f: F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K] + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<[f64; K]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut acc = [0.0; K];
            for i in lo..hi {
                let v = f(i);
                for k in 0..K {
                    acc[k] += v[k];
                }
            }
            acc
        })
        .collect();
    let mut out = [0.0; K];
    for p in &partial {
        for k in 0..K {
            out[k] += p[k];
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    par_sum(a.len(), |i| a[i] * b[i])
}

/// Outcome of a conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final ‖b − Ax‖ / ‖b‖.
    pub rel_residual: f64,
    pub converged: bool,
}

/// Conjugate gradients for a symmetric positive (semi)definite operator.
///
/// `project`, when given, is applied to the right-hand side and to every
/// residual; use it to remove a known nullspace (e.g. constants for a
/// Neumann Laplacian).
pub fn conjugate_gradient<A>(
    apply: A,
    b: &[f64],
    x0: Option<&[f64]>,
    rtol: f64,
    max_iter: usize,
    project: Option<&(dyn Fn(&mut [f64]) + Sync)>,
) -> CgOutcome
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut rhs = b.to_vec();
    if let Some(p) = project {
        p(&mut rhs);
    }
    let bnorm = dot(&rhs, &rhs).sqrt();
    let mut x = match x0 {
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    if bnorm == 0.0 {
        return CgOutcome { x: vec![0.0; n], iterations: 0, rel_residual: 0.0, converged: true };
    }
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if let Some(p) = project {
        p(&mut r);
    }
    let mut p_dir = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; n];
    let mut it = 0;
    while it < max_iter && rr.sqrt() > rtol * bnorm {
        apply(&p_dir, &mut ap);
        let pap = dot(&p_dir, &ap);
        if pap <= 0.0 {
            break;
        }
        let a = rr / pap;
        x.par_iter_mut().zip(&p_dir).for_each(|(x, p)| *x += a * p);
        r.par_iter_mut().zip(&ap).for_each(|(r, q)| *r -= a * q);
        if let Some(p) = project {
            p(&mut r);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        p_dir.par_iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
        it += 1;
    }
    // true residual
    apply(&x, &mut ax);
    let mut res: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if let Some(p) = project {
        p(&mut res);
    }
    let rel = dot(&res, &res).sqrt() / bnorm;
    CgOutcome { x, iterations: it, rel_residual: rel, converged: rel <= rtol * 10.0 }
}

/// C² cutoff profile: 1 on `[0, inner]`, 0 on `[outer, ∞)`, quintic
/// smoothstep in between.
///
/// With `t = (s − inner)/(outer − inner)` the middle piece is
/// `1 − (10t³ − 15t⁴ + 6t⁵)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    pub const fn new(inner: f64, outer: f64) -> Self {
        Cutoff { inner, outer }
    }

    /// The fixed slice cutoff χ: 1 on the half radius, 0 past three quarters.
    pub const fn slice(radius: f64) -> Self {
        Cutoff { inner: 0.5 * radius, outer: 0.75 * radius }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s).0
    }

    /// Value, first and second derivative in `s`.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        if s <= self.inner {
            return (1.0, 0.0, 0.0);
        }
        if s >= self.outer {
            return (0.0, 0.0, 0.0);
        }
        let w = self.outer - self.inner;
        let t = (s - self.inner) / w;
        let t2 = t * t;
        let v = 1.0 - t2 * t * (10.0 - 15.0 * t + 6.0 * t2);
        let d = -30.0 * t2 * (1.0 - t) * (1.0 - t) / w;
        let dd = -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / (w * w);
        (v, d, dd)
    }

    /// Radial bump φ(x) = χ(|x − c|): value, gradient, Hessian.
    pub fn radial(&self, x: &[f64], c: &[f64]) -> RadialJet {
        let m = x.len();
        let mut y = [0.0; 4];
        let mut r2 = 0.0;
        for a in 0..m {
            y[a] = x[a] - c[a];
            r2 += y[a] * y[a];
        }
        let r = r2.sqrt();
        let (v, d, dd) = self.eval(r);
        let mut grad = [0.0; 4];
        let mut hess = [[0.0; 4]; 4];
        if r > 0.0 {
            let rr = r;
            for a in 0..m {
                grad[a] = d * y[a] / rr;
                for b in 0..m {
                    let nn = y[a] * y[b] / (rr * rr);
                    let id = if a == b { 1.0 } else { 0.0 };
                    hess[a][b] = dd * nn + d / rr * (id - nn);
                }
            }
        }
        RadialJet { value: v, grad, hess }
    }
}

/// Value, gradient and Hessian of a scalar test function at a point.
#[derive(Clone, Copy, Debug)]
pub struct RadialJet {
    pub value: f64,
    pub grad: [f64; 4],
    pub hess: [[f64; 4]; 4],
}

/// Cubic spline on a strictly increasing mesh.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    /// Spline with prescribed end slopes (clamped).
    pub fn clamped(x: Vec<f64>, y: Vec<f64>, d0: f64, d1: f64) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        // tridiagonal system for second derivatives
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut r = vec![0.0; n];
        let h0 = x[1] - x[0];
        b[0] = h0 / 3.0;
        c[0] = h0 / 6.0;
        r[0] = (y[1] - y[0]) / h0 - d0;
        for i in 1..n - 1 {
            let hl = x[i] - x[i - 1];
            let hr = x[i + 1] - x[i];
            a[i] = hl / 6.0;
            b[i] = (hl + hr) / 3.0;
            c[i] = hr / 6.0;
            r[i] = (y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl;
        }
        let hn = x[n - 1] - x[n - 2];
        a[n - 1] = hn / 6.0;
        b[n - 1] = hn / 3.0;
        r[n - 1] = d1 - (y[n - 1] - y[n - 2]) / hn;
        let m = solve_tridiagonal(&a, &b, &c, &r);
        CubicSpline { x, y, m }
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.x.len();
        if t <= self.x[0] {
            return 0;
        }
        if t >= self.x[n - 1] {
            return n - 2;
        }
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        }
    }

    /// Value and first derivative; constant extrapolation of the end values.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.x.len();
        if t >= self.x[n - 1] {
            return (self.y[n - 1], 0.0);
        }
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let v = a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0;
        let d = (self.y[i + 1] - self.y[i]) / h
            + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0;
        (v, d)
    }
}

/// Thomas algorithm; `a` is the sub-diagonal (a[0] unused), `c` the
/// super-diagonal (c[n−1] unused).
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = r[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = if i < n - 1 { c[i] / den } else { 0.0 };
        dp[i] = (r[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Catmull–Rom weights for a fractional offset `t ∈ [0, 1)` relative to
/// the second of four consecutive samples.
pub fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Wrap an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a % two_pi;
    if w > std::f64::consts::PI {
        w -= two_pi;
    } else if w <= -std::f64::consts::PI {
        w += two_pi;
    }
    w
}

/// Modified Bessel function `K₀(x)` for `x > 0` (polynomial approximations,
/// relative error below 2e-7).
pub fn bessel_k0(x: f64) -> f64 {
    if x <= 2.0 {
        let t = (x / 3.75).powi(2);
        let i0 = 1.0
            + t * (3.5156229 + t * (3.0899424 + t * (1.2067492 + t * (0.2659732 + t * (0.0360768 + t * 0.0045813)))));
        let y = x * x / 4.0;
        -(x / 2.0).ln() * i0
            + (-0.57721566
                + y * (0.42278420
                    + y * (0.23069756 + y * (0.03488590 + y * (0.00262698 + y * (0.00010750 + y * 0.0000074))))))
    } else {
        let y = 2.0 / x;
        let p = 1.25331414
            + y * (-0.07832358
                + y * (0.02189568 + y * (-0.01062446 + y * (0.00587872 + y * (-0.00251540 + y * 0.00053208)))));
        p * (-x).exp() / x.sqrt()
    }
}
