//! Dyadic tilt-excess decay: best planes on shrinking balls.

use serde::{Deserialize, Serialize};

use super::frame::PlaneFrame;
use super::moments::{minimize_over_planes, PlaneSearch};
use crate::error::{Error, Result};
use crate::lattice::{FieldPair, Region};

/// The ε-floor `max{C ε²/r², e^{−K r/ε}}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorModel {
    pub c: f64,
    pub k: f64,
}

impl FloorModel {
    pub fn value(&self, eps: f64, r: f64) -> f64 {
        (self.c * eps * eps / (r * r)).max((-self.k * r / eps).exp())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayConfig {
    pub initial_radius: f64,
    pub rho: f64,
    /// Levels after the initial ball.
    pub levels: usize,
    /// Smallest admissible radius in units of ε.
    pub min_radius_eps: f64,
    /// `C` in the decay alternative `E1(k+1) ≤ Cρ²E1(k)`.
    pub decay_constant: f64,
    pub floor: FloorModel,
    pub search: PlaneSearch,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            initial_radius: 1.0,
            rho: 0.5,
            levels: 3,
            min_radius_eps: 1.0,
            decay_constant: 2.0,
            floor: FloorModel { c: 0.0, k: 1.0 },
            search: PlaneSearch::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alternative {
    /// First level, no ratio yet.
    Start,
    /// `E1(k) ≤ Cρ²E1(k−1)`.
    Decay,
    /// `E1(k)` at or below the ε-floor.
    Floor,
    Neither,
}

impl Alternative {
    pub fn as_str(&self) -> &'static str {
        match self {
            Alternative::Start => "start",
            Alternative::Decay => "decay",
            Alternative::Floor => "floor",
            Alternative::Neither => "neither",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub level: usize,
    pub radius: f64,
    pub e: f64,
    pub e1: f64,
    pub e2: f64,
    /// `‖P_{S_k} − P_{S_{k−1}}‖`; zero on the first level.
    pub tilt: f64,
    /// `E1(k)/E1(k−1)`; NaN on the first level.
    pub ratio: f64,
    pub floor: f64,
    pub alternative: Alternative,
    pub frame: PlaneFrame,
    pub budget_exhausted: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayTable {
    pub center: Vec<f64>,
    pub eps: f64,
    pub rows: Vec<DecayRow>,
}

/// Runs the dyadic iteration from `initial`, each level's frame seeding the
/// next search.
pub fn decay_experiment(fp: &FieldPair, center: &[f64], initial: &PlaneFrame, cfg: &DecayConfig) -> Result<DecayTable> {
    let g = fp.geometry();
    let n = g.dim;
    if center.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: center.len() });
    }
    if !(cfg.rho > 0.0 && cfg.rho < 1.0) || !(cfg.initial_radius > 0.0) {
        return Err(Error::InvalidConfig("decay needs 0 < ρ < 1 and a positive radius".into()));
    }
    let last = cfg.initial_radius * cfg.rho.powi(cfg.levels as i32);
    let min = cfg.min_radius_eps * fp.eps;
    if last < min * (1.0 - 1e-12) {
        return Err(Error::RadiusBelowEpsilonScale { radius: last, min });
    }
    let nearest = (0..g.n_sites)
        .min_by(|&a, &b| {
            let d = |i: usize| g.position(i)[..n].iter().zip(center).map(|(x, c)| (x - c).powi(2)).sum::<f64>();
            d(a).total_cmp(&d(b))
        })
        .ok_or(Error::RegionExceedsDomain)?;
    let modulus = fp.u[nearest].norm();
    if modulus > 0.75 {
        return Err(Error::CenterOutsideVorticity { modulus });
    }
    let mut rows: Vec<DecayRow> = Vec::with_capacity(cfg.levels + 1);
    let mut frame = initial.clone();
    for level in 0..=cfg.levels {
        let radius = cfg.initial_radius * cfg.rho.powi(level as i32);
        let region = Region::ball(center, radius);
        let res = minimize_over_planes(fp, &region, &frame, &cfg.search)?;
        let floor = cfg.floor.value(fp.eps, radius);
        let e1 = res.report.e1;
        let (tilt, ratio) = match rows.last() {
            Some(prev) => (res.frame.tilt_distance(&prev.frame), e1 / prev.e1),
            None => (0.0, f64::NAN),
        };
        let alternative = if e1 <= floor {
            Alternative::Floor
        } else if level == 0 {
            Alternative::Start
        } else if ratio <= cfg.decay_constant * cfg.rho * cfg.rho {
            Alternative::Decay
        } else {
            Alternative::Neither
        };
        rows.push(DecayRow {
            level,
            radius,
            e: res.report.e,
            e1,
            e2: res.report.e2,
            tilt,
            ratio,
            floor,
            alternative,
            frame: res.frame.clone(),
            budget_exhausted: res.budget_exhausted,
        });
        frame = res.frame;
    }
    Ok(DecayTable { center: center.to_vec(), eps: fp.eps, rows })
}

/// Fits `C` in the floor model as the largest `E1(r)·r²/ε²` of a
/// calibration table; `K` is kept from `k`.
pub fn calibrate_floor(table: &DecayTable, k: f64) -> FloorModel {
    let eps = table.eps;
    let c = table.rows.iter().map(|r| r.e1 * r.radius * r.radius / (eps * eps)).fold(0.0, f64::max);
    FloorModel { c, k }
}
