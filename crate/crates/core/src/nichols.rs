//! Nichols coordinates (phase in degrees, magnitude in dB) and crossings of
//! the rays `phase = -180 - 360k`, `mag > 0 dB`.
//!
//! Detection always runs on the continuous phase. The single-sheet chart only
//! differs in how points and rays are reported.

use std::sync::Arc;

use num_complex::Complex64;

use crate::contour::Segment;
use crate::response::{
    bisect, cusp_sign, Chart, Crossing, CrossingKind, CuspAt, LoopContext, MappedCurve, ResponseError,
};

/// Default magnitude tolerance around 0 dB.
pub const DEFAULT_TOL_DB: f64 = 1e-9;
const ON_RAY_DEG: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NicholsMode {
    Single,
    Multiple,
}

impl NicholsMode {
    pub fn chart(&self) -> Chart {
        match self {
            NicholsMode::Single => Chart::NicholsSingle,
            NicholsMode::Multiple => Chart::NicholsMulti,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NicholsPoint {
    pub t: f64,
    pub omega: Option<f64>,
    pub s: Complex64,
    /// Wrapped into [-360, 0) in single mode, continuous otherwise.
    pub phase_deg: f64,
    pub continuous_phase_deg: f64,
    pub mag_db: f64,
    pub segment: Segment,
    pub param: f64,
}

#[derive(Debug, Clone)]
pub struct NicholsCurve {
    pub points: Vec<NicholsPoint>,
    pub mode: NicholsMode,
    ctx: Arc<LoopContext>,
}

/// Wraps a phase into the single-sheet range [-360, 0).
pub fn wrap_single(phase_deg: f64) -> f64 {
    let w = phase_deg.rem_euclid(360.0) - 360.0;
    if w >= 0.0 {
        -360.0
    } else {
        w
    }
}

/// Nichols coordinates of a single complex value, principal phase.
pub fn nichols_point(value: Complex64) -> (f64, f64) {
    (wrap_single(value.arg().to_degrees()), 20.0 * value.norm().log10())
}

pub fn to_nichols(curve: &MappedCurve, mode: NicholsMode) -> NicholsCurve {
    let points = curve
        .points
        .iter()
        .map(|p| NicholsPoint {
            t: p.t,
            omega: p.omega,
            s: p.s,
            phase_deg: match mode {
                NicholsMode::Single => wrap_single(p.phase_deg),
                NicholsMode::Multiple => p.phase_deg,
            },
            continuous_phase_deg: p.phase_deg,
            mag_db: p.mag_db,
            segment: p.segment,
            param: p.param,
        })
        .collect();
    NicholsCurve {
        points,
        mode,
        ctx: curve.ctx.clone(),
    }
}

/// The critical ray nearest to `phase`.
fn nearest_ray(phase: f64) -> f64 {
    -180.0 - 360.0 * ((-180.0 - phase) / 360.0).round()
}

fn on_ray(p: &NicholsPoint) -> Option<f64> {
    let v = nearest_ray(p.continuous_phase_deg);
    ((p.continuous_phase_deg - v).abs() <= ON_RAY_DEG).then_some(v)
}

/// Rays strictly between two phases.
fn rays_between(a: f64, b: f64) -> Vec<f64> {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let k_min = ((-180.0 - hi) / 360.0).ceil() as i64;
    let k_max = ((-180.0 - lo) / 360.0).floor() as i64;
    (k_min..=k_max)
        .map(|k| -180.0 - 360.0 * k as f64)
        .filter(|v| *v > lo && *v < hi)
        .collect()
}

fn report_ray(mode: NicholsMode, v: f64) -> f64 {
    match mode {
        NicholsMode::Single => wrap_single(v),
        NicholsMode::Multiple => v,
    }
}

fn check_mag(mag_db: f64, tol_db: f64, t: f64) -> Result<bool, ResponseError> {
    if mag_db.abs() <= tol_db {
        return Err(ResponseError::CriticalPointHit { t });
    }
    Ok(mag_db > tol_db)
}

/// Signed crossings of the critical rays. `+1` when phase decreases through
/// the ray.
pub fn detect_nichols_crossings(curve: &NicholsCurve, tol_db: f64) -> Result<Vec<Crossing>, ResponseError> {
    let pts = &curve.points;
    let mut out = Vec::new();
    for i in 0..pts.len().saturating_sub(1) {
        out.extend(interval_crossings(curve, i, tol_db)?);
    }
    for (run, sign, kind) in on_ray_runs(curve, tol_db)? {
        let p = &pts[run];
        out.push(crossing_at(curve, p, p.mag_db, on_ray(p).unwrap(), sign, kind));
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(out)
}

fn crossing_at(
    curve: &NicholsCurve,
    p: &NicholsPoint,
    mag_db: f64,
    ray: f64,
    sign: i8,
    kind: CrossingKind,
) -> Crossing {
    Crossing {
        t: p.t,
        omega: p.omega,
        s: p.s,
        location: mag_db,
        ray_deg: Some(report_ray(curve.mode, ray)),
        sign,
        kind,
        chart: curve.mode.chart(),
    }
}

fn interval_crossings(curve: &NicholsCurve, i: usize, tol_db: f64) -> Result<Vec<Crossing>, ResponseError> {
    let (a, b) = (&curve.points[i], &curve.points[i + 1]);
    let mut out = Vec::new();
    if a.segment != b.segment || !a.continuous_phase_deg.is_finite() || !b.continuous_phase_deg.is_finite() {
        return Ok(out);
    }
    let ctx = &curve.ctx;
    for v in rays_between(a.continuous_phase_deg, b.continuous_phase_deg) {
        if (a.continuous_phase_deg - v).abs() <= ON_RAY_DEG || (b.continuous_phase_deg - v).abs() <= ON_RAY_DEG {
            continue;
        }
        let p = bisect(&ctx.cfg, a.segment, a.param, b.param, |q| {
            ctx.at(a.segment, q).1.phase_deg - v
        });
        let (s, e) = ctx.at(a.segment, p);
        let t = 0.5 * (a.t + b.t);
        if !check_mag(e.mag_db, tol_db, t)? {
            continue;
        }
        out.push(Crossing {
            t,
            omega: (a.segment == Segment::Axis).then_some(p),
            s,
            location: e.mag_db,
            ray_deg: Some(report_ray(curve.mode, v)),
            sign: if b.continuous_phase_deg < a.continuous_phase_deg {
                1
            } else {
                -1
            },
            kind: CrossingKind::Regular,
            chart: curve.mode.chart(),
        });
    }
    Ok(out)
}

/// Runs of samples sitting exactly on a ray above 0 dB, resolved to one
/// event each: `(representative index, sign, kind)`.
fn on_ray_runs(curve: &NicholsCurve, tol_db: f64) -> Result<Vec<(usize, i8, CrossingKind)>, ResponseError> {
    let pts = &curve.points;
    let n = pts.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let Some(v) = on_ray(&pts[i]) else {
            i += 1;
            continue;
        };
        let start = i;
        while i < n && on_ray(&pts[i]) == Some(v) {
            i += 1;
        }
        let mut above = false;
        for p in &pts[start..i] {
            if check_mag(p.mag_db, tol_db, p.t)? {
                above = true;
            }
        }
        if !above {
            continue;
        }
        let endpoint = (start..i).find(|k| endpoint_kind_n(&pts[*k]) != CrossingKind::Regular);
        if let Some(k) = endpoint {
            let kind = endpoint_kind_n(&pts[k]);
            let at = if kind == CrossingKind::CuspZero {
                CuspAt::Zero
            } else {
                CuspAt::Infinity
            };
            let sign = cusp_sign(&curve.ctx.tf, at);
            if sign == 0 {
                return Err(ResponseError::FlatCusp { at });
            }
            out.push((k, sign, kind));
            continue;
        }
        let off = |p: &NicholsPoint| on_ray(p) != Some(v);
        let before = (1..=n).map(|k| &pts[(start + n - k) % n]).find(|p| off(p));
        let after = (0..n).map(|k| &pts[(i + k) % n]).find(|p| off(p));
        if let (Some(b), Some(a)) = (before, after) {
            let (db, da) = (b.continuous_phase_deg - v, a.continuous_phase_deg - v);
            if (db > 0.0) != (da > 0.0) {
                out.push((
                    (start + i - 1) / 2,
                    if da < 0.0 { 1 } else { -1 },
                    CrossingKind::Regular,
                ));
            }
        }
    }
    Ok(out)
}

fn endpoint_kind_n(p: &NicholsPoint) -> CrossingKind {
    match p.segment {
        Segment::Axis if p.param == 0.0 => CrossingKind::CuspZero,
        Segment::Arc if p.param == 0.0 => CrossingKind::CuspInfinity,
        _ => CrossingKind::Regular,
    }
}

/// Crossing count from the upper half of the contour only (`Im s >= 0`):
/// crossings strictly inside count twice, events on the real axis once.
pub fn half_chart_crossing_sum(curve: &NicholsCurve, tol_db: f64) -> Result<i64, ResponseError> {
    let pts = &curve.points;
    let lo = pts.iter().position(|p| p.s.im >= 0.0).unwrap_or(pts.len());
    let hi = pts.iter().rposition(|p| p.s.im >= 0.0).unwrap_or(0);
    let mut sum = 0i64;
    for i in lo..hi {
        sum += 2 * interval_crossings(curve, i, tol_db)?
            .iter()
            .map(|c| c.sign as i64)
            .sum::<i64>();
    }
    for (k, sign, _) in on_ray_runs(curve, tol_db)? {
        if k < lo || k > hi {
            continue;
        }
        sum += if pts[k].s.im == 0.0 {
            sign as i64
        } else {
            2 * sign as i64
        };
    }
    Ok(sum)
}

/// First sample within `(tol_deg, tol_db)` of a critical point, or the first
/// ray crossing whose magnitude falls within `tol_db` of 0 dB.
pub fn critical_point_check(curve: &NicholsCurve, tol_deg: f64, tol_db: f64) -> Option<f64> {
    let mut hits = Vec::new();
    for p in &curve.points {
        let v = nearest_ray(p.continuous_phase_deg);
        if (p.continuous_phase_deg - v).abs() <= tol_deg && p.mag_db.abs() <= tol_db {
            hits.push(p.t);
            break;
        }
    }
    for i in 0..curve.points.len().saturating_sub(1) {
        if let Err(ResponseError::CriticalPointHit { t }) = interval_crossings(curve, i, tol_db) {
            hits.push(t);
            break;
        }
    }
    hits.into_iter().min_by(f64::total_cmp)
}
