//! Radial degree-N solution of the planar vortex equations.
//!
//! With `u = f(r) e^{iNθ}` and `α = N a(r) dθ` the vortex equations at
//! ε = 1 reduce to
//!
//! ```text
//! f' = N f (1 − a)/r,    a' = r (1 − f²)/(2N),    f(0) = a(0) = 0,  f, a → 1.
//! ```
//!
//! Near the origin `f ≈ c r^N (1 − r²/8)`, `a ≈ r²/4N`; far away
//! `1 − f ≈ A K₀(r)` and `1 − a ≈ A r K₁(r)/N`. The two unknowns `(c, A)`
//! are found by shooting from both ends with RK4 and matching at an
//! intermediate radius, which keeps both integrations stable. At ε ≠ 1 the
//! profile is rescaled, `r ↦ r/ε`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::util::CubicSpline;

/// Default mesh step in units of ε.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Outer radius of the table in units of ε.
pub const OUTER_RADIUS: f64 = 30.0;
const MATCH_RADIUS: f64 = 3.0;
const START_RADIUS: f64 = 1e-3;

/// Tabulated radial profile.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub degree: u32,
    pub eps: f64,
    /// Radii in length units, starting at 0.
    pub r: Vec<f64>,
    /// `|u|(r)`.
    pub modulus: Vec<f64>,
    /// `1 − |u|(r)`, free of cancellation in the tail.
    pub deficit: Vec<f64>,
    /// Gauge profile `a(r)`, `α = N a dθ`.
    pub gauge: Vec<f64>,
    /// Energy density `e_ε(r)`.
    pub density: Vec<f64>,
    /// Leading coefficient `c` of `|u| ≈ c (r/ε)^N`.
    pub core_slope: f64,
    /// Asymptotic amplitude `A` of `1 − |u| ≈ A K₀(r/ε)`.
    pub tail_amplitude: f64,
    /// Fitted rate `K` in `1 − |u| ∝ e^{−K r}`; close to `1/ε`.
    pub decay_rate: f64,
    /// Largest residual of the first-order system on the mesh.
    pub ode_residual: f64,
    modulus_spline: CubicSpline,
    gauge_spline: CubicSpline,
}

type State = [f64; 2];

fn rhs(n: f64, r: f64, y: State) -> State {
    [n * y[0] * (1.0 - y[1]) / r, r * (1.0 - y[0] * y[0]) / (2.0 * n)]
}

/// Same system in the deficits `g = 1 − f`, `b = 1 − a`.
fn rhs_deficit(n: f64, r: f64, y: State) -> State {
    [-n * (1.0 - y[0]) * y[1] / r, -r * y[0] * (2.0 - y[0]) / (2.0 * n)]
}

fn rk4(
    rhs: fn(f64, f64, State) -> State,
    n: f64,
    r0: f64,
    y0: State,
    step: f64,
    steps: usize,
    mut keep: impl FnMut(f64, State),
) -> State {
    let mut y = y0;
    let mut r = r0;
    keep(r, y);
    for _ in 0..steps {
        // finer sub-steps where the 1/r coefficient varies quickly
        let m = if r.abs() < 0.1 { 32 } else { 1 };
        let hs = step / m as f64;
        for s in 0..m {
            let rs = r + s as f64 * hs;
            let k1 = rhs(n, rs, y);
            let k2 = rhs(n, rs + 0.5 * hs, [y[0] + 0.5 * hs * k1[0], y[1] + 0.5 * hs * k1[1]]);
            let k3 = rhs(n, rs + 0.5 * hs, [y[0] + 0.5 * hs * k2[0], y[1] + 0.5 * hs * k2[1]]);
            let k4 = rhs(n, rs + hs, [y[0] + hs * k3[0], y[1] + hs * k3[1]]);
            y[0] += hs / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            y[1] += hs / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        }
        r += step;
        keep(r, y);
    }
    y
}

/// `K₁(z)/K₀(z)` from the large-argument expansion; accurate to ~1e-12 for
/// `z ≥ 20`.
fn bessel_k_ratio(z: f64) -> f64 {
    let series = |nu: f64| {
        let mu = 4.0 * nu * nu;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..12 {
            let kf = k as f64;
            term *= (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * z);
            sum += term;
        }
        sum
    };
    series(1.0) / series(0.0)
}

struct Shot {
    inner: State,
    outer: State,
}

fn shoot(n: u32, c: f64, amp: f64, step: f64) -> Shot {
    let nf = n as f64;
    let r0 = START_RADIUS;
    let f0 = c * r0.powi(n as i32) * (1.0 - r0 * r0 / 8.0);
    let a0 = r0 * r0 / (4.0 * nf);
    let steps_in = ((MATCH_RADIUS - r0) / step).round() as usize;
    let h_in = (MATCH_RADIUS - r0) / steps_in as f64;
    let inner = rk4(rhs, nf, r0, [f0, a0], h_in, steps_in, |_, _| {});
    let big = OUTER_RADIUS;
    // amp carries the factor K₀(R)
    let g = amp;
    let b = amp * big * bessel_k_ratio(big) / nf;
    let steps_out = ((big - MATCH_RADIUS) / step).round() as usize;
    let h_out = (big - MATCH_RADIUS) / steps_out as f64;
    let outer = rk4(rhs_deficit, nf, big, [g, b], -h_out, steps_out, |_, _| {});
    Shot { inner, outer }
}

fn mismatch(n: u32, p: [f64; 2], step: f64) -> [f64; 2] {
    // p = (ln c, ln A_R) keeps both unknowns positive
    let s = shoot(n, p[0].exp(), p[1].exp(), step);
    [s.inner[0] - (1.0 - s.outer[0]), s.inner[1] - (1.0 - s.outer[1])]
}

fn solve_2x2(j: [[f64; 2]; 2], r: [f64; 2]) -> [f64; 2] {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    [(r[0] * j[1][1] - r[1] * j[0][1]) / det, (j[0][0] * r[1] - j[1][0] * r[0]) / det]
}

/// Solves the radial problem for degree `n` at the given ε and mesh step
/// (in units of ε).
pub fn radial_profile_with_step(n: u32, eps: f64, step: f64) -> Result<RadialProfile> {
    if n == 0 {
        return Err(Error::InvalidConfig("degree must be at least 1".into()));
    }
    let nf = n as f64;
    // initial guesses from the degree-one values
    let mut p = [(0.6_f64 / nf).ln(), (1.7 * (PI / (2.0 * OUTER_RADIUS)).sqrt() * (-OUTER_RADIUS).exp() * nf).ln()];
    let mut converged = false;
    let mut res = f64::INFINITY;
    for _ in 0..100 {
        let m = mismatch(n, p, step);
        res = m[0].abs().max(m[1].abs());
        if res < 1e-13 {
            converged = true;
            break;
        }
        let d = 1e-7;
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut q = p;
            q[k] += d;
            let mq = mismatch(n, q, step);
            let mut q2 = p;
            q2[k] -= d;
            let mq2 = mismatch(n, q2, step);
            for i in 0..2 {
                jac[i][k] = (mq[i] - mq2[i]) / (2.0 * d);
            }
        }
        let dp = solve_2x2(jac, m);
        let mut t = 1.0;
        // damped update keeping the shot finite
        let mut accepted = false;
        for _ in 0..40 {
            let q = [p[0] - t * dp[0], p[1] - t * dp[1]];
            let mq = mismatch(n, q, step);
            let rq = mq[0].abs().max(mq[1].abs());
            if rq.is_finite() && rq < res {
                p = q;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations: 100, residual: res });
    }
    let c = p[0].exp();
    let amp_r = p[1].exp();
    // assemble the table on r ∈ [0, R]
    let r0 = START_RADIUS;
    let mut rs = vec![0.0];
    let mut fs = vec![0.0];
    let mut as_ = vec![0.0];
    // deficits 1 − f and 1 − a, kept without cancellation in the tail
    let mut gs = vec![1.0];
    let mut bs = vec![1.0];
    let steps_in = ((MATCH_RADIUS - r0) / step).round() as usize;
    let h_in = (MATCH_RADIUS - r0) / steps_in as f64;
    let f0 = c * r0.powi(n as i32) * (1.0 - r0 * r0 / 8.0);
    rk4(rhs, nf, r0, [f0, r0 * r0 / (4.0 * nf)], h_in, steps_in, |r, y| {
        rs.push(r);
        fs.push(y[0]);
        as_.push(y[1]);
        gs.push(1.0 - y[0]);
        bs.push(1.0 - y[1]);
    });
    let steps_out = ((OUTER_RADIUS - MATCH_RADIUS) / step).round() as usize;
    let h_out = (OUTER_RADIUS - MATCH_RADIUS) / steps_out as f64;
    let mut outer: Vec<(f64, State)> = Vec::with_capacity(steps_out + 1);
    let b = amp_r * OUTER_RADIUS * bessel_k_ratio(OUTER_RADIUS) / nf;
    rk4(rhs_deficit, nf, OUTER_RADIUS, [amp_r, b], -h_out, steps_out, |r, y| outer.push((r, y)));
    outer.reverse();
    // the first outer node coincides with the matching radius
    for (r, y) in outer.into_iter().skip(1) {
        rs.push(r);
        fs.push(1.0 - y[0]);
        as_.push(1.0 - y[1]);
        gs.push(y[0]);
        bs.push(y[1]);
    }
    // residual of the first-order system with fourth-order differences
    let mut ode_res: f64 = 0.0;
    for i in 2..rs.len() - 2 {
        let hl = rs[i] - rs[i - 1];
        let hr = rs[i + 1] - rs[i];
        if (hl - hr).abs() > 1e-9 * hl || (rs[i - 1] - rs[i - 2] - hl).abs() > 1e-9 * hl || (rs[i + 2] - rs[i + 1] - hr).abs() > 1e-9 * hr {
            continue;
        }
        let d = |v: &[f64]| (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * hl);
        let rr = rhs_deficit(nf, rs[i], [gs[i], bs[i]]);
        let loc = (d(&gs) - rr[0]).abs().max((d(&bs) - rr[1]).abs());
        ode_res = ode_res.max(loc);
    }
    // decay-rate fit of log(1 − f) on r ∈ [8, 16]
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..rs.len() {
        if rs[i] >= 8.0 && rs[i] <= 16.0 {
            let y = gs[i].ln();
            sx += rs[i];
            sy += y;
            sxx += rs[i] * rs[i];
            sxy += rs[i] * y;
            cnt += 1.0;
        }
    }
    let slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    let density: Vec<f64> = (0..rs.len())
        .map(|i| {
            let fp = if rs[i] == 0.0 {
                if n == 1 {
                    c
                } else {
                    0.0
                }
            } else {
                -rhs_deficit(nf, rs[i], [gs[i], bs[i]])[0]
            };
            let w = gs[i] * (2.0 - gs[i]);
            (2.0 * fp * fp + 0.5 * w * w) / (eps * eps)
        })
        .collect();
    let rphys: Vec<f64> = rs.iter().map(|r| r * eps).collect();
    let d0 = if n == 1 { c / eps } else { 0.0 };
    let modulus_spline = CubicSpline::clamped(rphys.clone(), fs.clone(), d0, 0.0);
    let gauge_spline = CubicSpline::clamped(rphys.clone(), as_.clone(), 0.0, 0.0);
    let k0_r = (PI / (2.0 * OUTER_RADIUS)).sqrt() * (-OUTER_RADIUS).exp();
    Ok(RadialProfile {
        degree: n,
        eps,
        r: rphys,
        modulus: fs,
        deficit: gs,
        gauge: as_,
        density,
        core_slope: c,
        tail_amplitude: amp_r / k0_r,
        decay_rate: -slope / eps,
        ode_residual: ode_res,
        modulus_spline,
        gauge_spline,
    })
}

/// Radial profile on the default mesh.
pub fn radial_profile_oracle(n: u32, eps: f64) -> Result<RadialProfile> {
    radial_profile_with_step(n, eps, DEFAULT_STEP)
}

/// Composite Simpson rule for `∫ g(r) dr` over the table, splitting at the
/// matching radius where the mesh step changes.
fn simpson(r: &[f64], g: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut start = 0;
    while start + 1 < r.len() {
        // run of (nearly) uniform spacing
        let h = r[start + 1] - r[start];
        let mut end = start + 1;
        while end + 1 < r.len() && ((r[end + 1] - r[end]) - h).abs() < 1e-6 * h {
            end += 1;
        }
        let m = end - start;
        let (even_end, tail) = if m % 2 == 0 { (end, false) } else { (end - 1, true) };
        let mut s = 0.0;
        let mut i = start;
        while i + 2 <= even_end {
            s += (g[i] + 4.0 * g[i + 1] + g[i + 2]) * h / 3.0;
            i += 2;
        }
        if tail && m < 3 {
            s += 0.5 * h * (g[end - 1] + g[end]);
        } else if tail {
            // last interval by a cubic through four points
            let i = end;
            s += h * (9.0 * g[i] + 19.0 * g[i - 1] - 5.0 * g[i - 2] + g[i - 3]) / 24.0;
        }
        total += s;
        start = end;
    }
    total
}

impl RadialProfile {
    /// `|u|` at radius `r` (length units), cubic interpolation.
    pub fn modulus_at(&self, r: f64) -> f64 {
        if r >= *self.r.last().unwrap() {
            return 1.0;
        }
        self.modulus_spline.eval(r).0
    }

    pub fn gauge_at(&self, r: f64) -> f64 {
        if r >= *self.r.last().unwrap() {
            return 1.0;
        }
        self.gauge_spline.eval(r).0
    }

    /// `|u|(r)/rᴺ`, regular at the origin.
    pub fn modulus_over_power(&self, r: f64) -> f64 {
        let s = r / self.eps;
        let n = self.degree as i32;
        if s < 2.0 * START_RADIUS {
            return self.core_slope * (1.0 - s * s / 8.0) / self.eps.powi(n);
        }
        self.modulus_at(r) / r.powi(n)
    }

    /// `a(r)/r²`, regular at the origin.
    pub fn gauge_over_r2(&self, r: f64) -> f64 {
        let s = r / self.eps;
        if s < 2.0 * START_RADIUS {
            return 1.0 / (4.0 * self.degree as f64 * self.eps * self.eps);
        }
        self.gauge_at(r) / (r * r)
    }

    /// `∫_{ℝ²} e_ε`.
    pub fn energy(&self) -> f64 {
        let g: Vec<f64> = self.r.iter().zip(&self.density).map(|(r, e)| r * e).collect();
        2.0 * PI * simpson(&self.r, &g)
    }

    /// `(1/2π) ∫ |y|² e_ε dy`; equals `ε² v₀`.
    pub fn second_moment(&self) -> f64 {
        let g: Vec<f64> = self.r.iter().zip(&self.density).map(|(r, e)| r * r * r * e).collect();
        simpson(&self.r, &g)
    }

    /// `∫_{|y| > ρ} e_ε dy`.
    pub fn energy_outside(&self, rho: f64) -> f64 {
        let idx: Vec<usize> = (0..self.r.len()).filter(|&i| self.r[i] >= rho).collect();
        if idx.len() < 4 {
            return 0.0;
        }
        let r: Vec<f64> = idx.iter().map(|&i| self.r[i]).collect();
        let g: Vec<f64> = idx.iter().map(|&i| self.r[i] * self.density[i]).collect();
        2.0 * PI * simpson(&r, &g)
    }

    /// Writes `r, modulus, gauge_profile, density` rows with a leading
    /// comment line.
    pub fn write_csv(&self, path: &Path, header_comment: &str) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        writeln!(file, "# {header_comment}")?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["r", "modulus", "gauge_profile", "density"])?;
        for i in 0..self.r.len() {
            w.write_record([
                self.r[i].to_string(),
                self.modulus[i].to_string(),
                self.gauge[i].to_string(),
                self.density[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`RadialProfile::write_csv`].
    pub fn read_csv(path: &Path, degree: u32, eps: f64) -> Result<RadialProfile> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
        let (mut r, mut m, mut a, mut d) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::InvalidConfig(format!("bad oracle row {:?}", rec)))
            };
            r.push(parse(0)?);
            m.push(parse(1)?);
            a.push(parse(2)?);
            d.push(parse(3)?);
        }
        if r.len() < 8 {
            return Err(Error::InvalidConfig("oracle table too short".into()));
        }
        let n = degree as i32;
        let core = m[1] / (r[1] / eps).powi(n);
        let d0 = if degree == 1 { core / eps } else { 0.0 };
        Ok(RadialProfile {
            degree,
            eps,
            modulus_spline: CubicSpline::clamped(r.clone(), m.clone(), d0, 0.0),
            gauge_spline: CubicSpline::clamped(r.clone(), a.clone(), 0.0, 0.0),
            r,
            deficit: m.iter().map(|x| 1.0 - x).collect(),
            modulus: m,
            gauge: a,
            density: d,
            core_slope: core,
            tail_amplitude: f64::NAN,
            decay_rate: f64::NAN,
            ode_residual: f64::NAN,
        })
    }
}
