//! Mapping the contour through `L(s)`, ray crossings and winding.
//!
//! Phase is accumulated per root of every factor. For a root `r` in the
//! closed left half plane, `arg(s - r)` is continuous on the contour because
//! `Re(s - r) >= 0` there. For a root in the open right half plane the contour
//! passes to the left of it and then around it, so its angle is taken as
//! `atan2 - 360` once the traversal is past the root's height (or on the arc).
//! Each factor is then pinned so that its phase at the real-axis anchor equals
//! the principal value there.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::contour::{mid_param, min_width, point_at, ContourConfig, NyquistContour, Segment};
use crate::poly::RealPolynomial;
use crate::tf::FactoredTF;

pub const DEFAULT_CRITICAL_TOL: f64 = 1e-8;
const CUSP_NOISE: f64 = 1e-12;
const BISECT_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResponseError {
    #[error("contour passes through a pole at s = {s}")]
    PoleProximity { s: Complex64 },
    #[error("the curve passes through the critical point near t = {t}")]
    CriticalPointHit { t: f64 },
    #[error("crossing direction at {at:?} is undetermined (flat cusp)")]
    FlatCusp { at: CuspAt },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CuspAt {
    Zero,
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    Regular,
    CuspZero,
    CuspInfinity,
}

impl CrossingKind {
    pub fn name(&self) -> &'static str {
        match self {
            CrossingKind::Regular => "regular",
            CrossingKind::CuspZero => "cusp_zero",
            CrossingKind::CuspInfinity => "cusp_infinity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Complex,
    NicholsSingle,
    NicholsMulti,
}

impl Chart {
    pub fn name(&self) -> &'static str {
        match self {
            Chart::Complex => "complex",
            Chart::NicholsSingle => "nichols_single",
            Chart::NicholsMulti => "nichols_multi",
        }
    }
}

/// One signed intersection of the curve with a critical ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub omega: Option<f64>,
    pub s: Complex64,
    /// Real-axis value for the complex chart, dB for Nichols charts.
    pub location: f64,
    /// Phase of the ray crossed, Nichols charts only.
    pub ray_deg: Option<f64>,
    pub sign: i8,
    pub kind: CrossingKind,
    pub chart: Chart,
}

/// Sum of crossing signs.
pub fn crossing_sum(crossings: &[Crossing]) -> i64 {
    crossings.iter().map(|c| c.sign as i64).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappedPoint {
    pub t: f64,
    pub omega: Option<f64>,
    pub s: Complex64,
    pub value: Complex64,
    pub mag_db: f64,
    /// Continuous phase in degrees.
    pub phase_deg: f64,
    pub segment: Segment,
    /// Segment parameter of the underlying contour sample.
    pub param: f64,
}

#[derive(Debug, Clone)]
pub struct MappedCurve {
    pub points: Vec<MappedPoint>,
    pub(crate) ctx: Arc<LoopContext>,
}

impl MappedCurve {
    pub fn tf(&self) -> &FactoredTF {
        &self.ctx.tf
    }

    pub fn config(&self) -> &ContourConfig {
        &self.ctx.cfg
    }
}

/// What detection needs to evaluate the loop between samples.
#[derive(Debug)]
pub(crate) struct LoopContext {
    pub tf: FactoredTF,
    pub cfg: ContourConfig,
    pub eval: LoopEvaluator,
}

impl LoopContext {
    pub fn at(&self, segment: Segment, param: f64) -> (Complex64, PointEval) {
        let s = point_at(&self.cfg, segment, param);
        let e = self.eval.eval(s, segment).unwrap_or_else(|_| PointEval::blowup());
        (s, e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PointEval {
    pub value: Complex64,
    pub mag_db: f64,
    pub phase_deg: f64,
    pub root_phases: Vec<f64>,
}

impl PointEval {
    fn blowup() -> Self {
        Self {
            value: Complex64::new(f64::INFINITY, 0.0),
            mag_db: f64::INFINITY,
            phase_deg: f64::NAN,
            root_phases: Vec::new(),
        }
    }
}

#[derive(Debug)]
struct RootTerm {
    r: Complex64,
    rhp: bool,
}

#[derive(Debug)]
struct FactorTerm {
    poly: RealPolynomial,
    numerator: bool,
    lead_phase: f64,
    offset: f64,
    roots: Vec<RootTerm>,
}

#[derive(Debug)]
pub(crate) struct LoopEvaluator {
    gain: f64,
    gain_db: f64,
    gain_phase: f64,
    gain_zero: bool,
    factors: Vec<FactorTerm>,
}

fn root_phase(root: &RootTerm, s: Complex64, segment: Segment) -> f64 {
    let d = s - root.r;
    let a = d.im.atan2(d.re).to_degrees();
    if root.rhp {
        let past = matches!(segment, Segment::Arc) || s.im >= root.r.im;
        if past {
            return a - 360.0;
        }
    }
    a
}

impl LoopEvaluator {
    pub fn new(tf: &FactoredTF, cfg: &ContourConfig) -> Self {
        let origin_pole = tf.integrator_order > 0 || tf.imag_axis_poles().contains(&0.0);
        let (anchor, anchor_seg) = if origin_pole {
            (Complex64::new(cfg.indent_radius, 0.0), Segment::Indent { center: 0.0 })
        } else {
            (Complex64::new(0.0, 0.0), Segment::Axis)
        };
        let integrator = RealPolynomial::new(vec![0.0, 1.0]);
        let polys = tf
            .zero_factors
            .iter()
            .map(|f| (f.clone(), true))
            .chain(tf.pole_factors.iter().map(|f| (f.clone(), false)))
            .chain((0..tf.integrator_order).map(|_| (integrator.clone(), false)));
        let factors = polys
            .map(|(poly, numerator)| {
                let roots: Vec<RootTerm> = poly
                    .small_roots()
                    .into_iter()
                    .map(|r| RootTerm { r, rhp: r.re > 0.0 })
                    .collect();
                let lead_phase = if poly.leading() > 0.0 { 0.0 } else { 180.0 };
                let raw: f64 = lead_phase + roots.iter().map(|r| root_phase(r, anchor, anchor_seg)).sum::<f64>();
                let v = poly.eval(anchor);
                let principal = if v.norm() == 0.0 {
                    raw
                } else {
                    v.im.atan2(v.re).to_degrees()
                };
                let offset = 360.0 * ((principal - raw) / 360.0).round();
                FactorTerm {
                    poly,
                    numerator,
                    lead_phase,
                    offset,
                    roots,
                }
            })
            .collect();
        Self {
            gain: tf.gain,
            gain_db: 20.0 * tf.gain.abs().log10(),
            gain_phase: if tf.gain < 0.0 { 180.0 } else { 0.0 },
            gain_zero: tf.gain == 0.0,
            factors,
        }
    }

    /// Evaluates the loop at `s`. Fails (returning `s`) on a pole.
    pub fn eval(&self, s: Complex64, segment: Segment) -> Result<PointEval, Complex64> {
        let mut mag_db = self.gain_db;
        let mut phase = self.gain_phase;
        let mut value = Complex64::new(self.gain, 0.0);
        let mut root_phases = Vec::new();
        let mut zero = self.gain_zero;
        for f in &self.factors {
            let v = f.poly.eval(s);
            let m = v.norm();
            if !f.numerator && m < 1e-300 {
                return Err(s);
            }
            if m == 0.0 {
                zero = true;
            }
            let mut p = f.lead_phase + f.offset;
            for r in &f.roots {
                let a = root_phase(r, s, segment);
                root_phases.push(a);
                p += a;
            }
            let db = 20.0 * m.log10();
            if f.numerator {
                mag_db += db;
                phase += p;
                value *= v;
            } else {
                mag_db -= db;
                phase -= p;
                value /= v;
            }
        }
        if zero {
            value = Complex64::new(0.0, 0.0);
        }
        Ok(PointEval {
            value,
            mag_db,
            phase_deg: phase,
            root_phases,
        })
    }
}

pub(crate) fn context(tf: &FactoredTF, cfg: &ContourConfig) -> Arc<LoopContext> {
    Arc::new(LoopContext {
        tf: tf.clone(),
        cfg: *cfg,
        eval: LoopEvaluator::new(tf, cfg),
    })
}

pub fn map_response(tf: &FactoredTF, contour: &NyquistContour) -> Result<MappedCurve, ResponseError> {
    let ctx = context(tf, &contour.config);
    let points = contour
        .samples
        .iter()
        .map(|smp| {
            let e = ctx
                .eval
                .eval(smp.s, smp.segment)
                .map_err(|s| ResponseError::PoleProximity { s })?;
            Ok(MappedPoint {
                t: smp.t,
                omega: smp.omega(),
                s: smp.s,
                value: e.value,
                mag_db: e.mag_db,
                phase_deg: e.phase_deg,
                segment: smp.segment,
                param: smp.param,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MappedCurve { points, ctx })
}

/// Smallest nonzero pole/zero magnitude, capped at 1.
pub(crate) fn frequency_scale(tf: &FactoredTF) -> f64 {
    tf.pole_roots()
        .iter()
        .chain(tf.zero_roots().iter())
        .map(|r| r.norm())
        .filter(|m| *m > 0.0)
        .fold(1.0, f64::min)
}

/// `L` at infinity for a biproper function, `None` otherwise.
pub(crate) fn value_at_infinity(tf: &FactoredTF) -> Option<f64> {
    if tf.relative_degree() != 0 {
        return None;
    }
    let z: f64 = tf.zero_factors.iter().map(|f| f.leading()).product();
    let p: f64 = tf.pole_factors.iter().map(|f| f.leading()).product();
    Some(tf.gain * z / p)
}

/// Direction of an on-ray event at `omega = 0` or at infinity.
///
/// `+1` means the curve moves upward through the ray, `-1` downward, `0`
/// when the end point is off the ray or the curve is flat there.
pub fn cusp_sign(tf: &FactoredTF, at: CuspAt) -> i8 {
    let h = 1e-3 * frequency_scale(tf);
    let (l0, eval): (f64, Box<dyn Fn(f64) -> Complex64>) = match at {
        CuspAt::Zero => {
            if tf.integrator_order > 0 || tf.imag_axis_poles().contains(&0.0) {
                return 0;
            }
            let v = tf.eval(Complex64::new(0.0, 0.0));
            (v.re, Box::new(move |w| tf.eval(Complex64::new(0.0, w))))
        }
        CuspAt::Infinity => match value_at_infinity(tf) {
            Some(v) => (v, Box::new(move |nu| tf.eval(Complex64::new(0.0, 1.0 / nu)))),
            None => return 0,
        },
    };
    if l0.is_nan() || l0 > -1.0 {
        return 0;
    }
    let mut x = h;
    for _ in 0..64 {
        let v = -eval(x);
        let psi = v.im.atan2(v.re);
        if psi.abs() > CUSP_NOISE {
            let s = psi.signum() as i8;
            return match at {
                CuspAt::Zero => -s,
                CuspAt::Infinity => s,
            };
        }
        x *= 0.5;
    }
    0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    pub tol: f64,
    /// Resolve on-ray end points with [`cusp_sign`]. Turning this off drops
    /// those events entirely; it exists so tests can show they matter.
    pub cusp_rule: bool,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_CRITICAL_TOL,
            cusp_rule: true,
        }
    }
}

pub(crate) fn critical_band(x: f64, tol: f64) -> f64 {
    tol * (1.0 + x.abs())
}

/// Which end point (if any) a sample is.
pub(crate) fn endpoint_kind(p: &MappedPoint) -> CrossingKind {
    match p.segment {
        Segment::Axis if p.param == 0.0 => CrossingKind::CuspZero,
        Segment::Arc if p.param == 0.0 => CrossingKind::CuspInfinity,
        _ => CrossingKind::Regular,
    }
}

/// Bisects `f` between `a` and `b` (where `f` has opposite signs) along a
/// segment, returning the parameter of the sign change.
pub(crate) fn bisect<F: Fn(f64) -> f64>(cfg: &ContourConfig, segment: Segment, mut a: f64, mut b: f64, f: F) -> f64 {
    let fa = f(a);
    for _ in 0..BISECT_ITERS {
        if min_width(cfg, segment, a, b) {
            break;
        }
        let m = mid_param(segment, a, b);
        if m == a || m == b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    mid_param(segment, a, b)
}

/// Maximal runs `start..end` of samples whose value lies exactly on the real
/// axis.
fn exact_runs(pts: &[MappedPoint]) -> Vec<(usize, usize)> {
    let exact = |p: &MappedPoint| p.value.im == 0.0 && p.value.is_finite();
    let mut out = Vec::new();
    let mut i = 0;
    while i < pts.len() {
        if !exact(&pts[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < pts.len() && exact(&pts[i]) {
            i += 1;
        }
        out.push((start, i));
    }
    out
}

/// Sign of a passage through an exact run judged from its nonzero
/// neighbours on the closed curve; `None` for a touch.
fn neighbour_sign(pts: &[MappedPoint], start: usize, end: usize) -> Option<i8> {
    let n = pts.len();
    let nonzero = |p: &&MappedPoint| p.value.im != 0.0;
    let before = (1..=n).map(|k| &pts[(start + n - k) % n]).find(nonzero)?;
    let after = (0..n).map(|k| &pts[(end + k) % n]).find(nonzero)?;
    let (b, a) = (before.value.im > 0.0, after.value.im > 0.0);
    (b != a).then_some(if a { 1 } else { -1 })
}

/// Every passage of the curve through the real axis away from the `omega = 0`
/// and arc mid points, wherever on the axis it happens. `location` is `Re L`.
pub fn axis_intersections(curve: &MappedCurve) -> Vec<Crossing> {
    let pts = &curve.points;
    let ctx = &curve.ctx;
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.segment != b.segment || !a.value.is_finite() || !b.value.is_finite() {
            continue;
        }
        let (ya, yb) = (a.value.im, b.value.im);
        if ya == 0.0 || yb == 0.0 || (ya > 0.0) == (yb > 0.0) {
            continue;
        }
        let p = bisect(&ctx.cfg, a.segment, a.param, b.param, |q| {
            ctx.at(a.segment, q).1.value.im
        });
        let (s, e) = ctx.at(a.segment, p);
        out.push(Crossing {
            t: 0.5 * (a.t + b.t),
            omega: (a.segment == Segment::Axis).then_some(p),
            s,
            location: e.value.re,
            ray_deg: None,
            sign: if yb > ya { 1 } else { -1 },
            kind: CrossingKind::Regular,
            chart: Chart::Complex,
        });
    }
    for (start, end) in exact_runs(pts) {
        let run = &pts[start..end];
        if run.iter().any(|p| endpoint_kind(p) != CrossingKind::Regular) {
            continue;
        }
        if let Some(sign) = neighbour_sign(pts, start, end) {
            let p = &run[run.len() / 2];
            out.push(Crossing {
                t: p.t,
                omega: p.omega,
                s: p.s,
                location: p.value.re,
                ray_deg: None,
                sign,
                kind: CrossingKind::Regular,
                chart: Chart::Complex,
            });
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    out
}

/// Signed crossings of the ray `(-inf, -1)` in the complex plane.
pub fn detect_ray_crossings(curve: &MappedCurve, tol: f64) -> Result<Vec<Crossing>, ResponseError> {
    detect_ray_crossings_with(
        curve,
        DetectOptions {
            tol,
            ..DetectOptions::default()
        },
    )
}

pub fn detect_ray_crossings_with(curve: &MappedCurve, opts: DetectOptions) -> Result<Vec<Crossing>, ResponseError> {
    let pts = &curve.points;
    let on_ray = |x: f64, t: f64| -> Result<bool, ResponseError> {
        if (x + 1.0).abs() <= critical_band(x, opts.tol) {
            return Err(ResponseError::CriticalPointHit { t });
        }
        Ok(x < -1.0)
    };
    let mut out = Vec::new();
    for x in axis_intersections(curve) {
        if on_ray(x.location, x.t)? {
            out.push(x);
        }
    }
    // Touches of the real axis are not crossings but can still hit -1.
    for (start, end) in exact_runs(pts) {
        let run = &pts[start..end];
        let mut hits_ray = false;
        for p in run {
            hits_ray |= on_ray(p.value.re, p.t)?;
        }
        let Some(p) = run.iter().find(|p| endpoint_kind(p) != CrossingKind::Regular) else {
            continue;
        };
        if !hits_ray || !opts.cusp_rule {
            continue;
        }
        let kind = endpoint_kind(p);
        let at = if kind == CrossingKind::CuspZero {
            CuspAt::Zero
        } else {
            CuspAt::Infinity
        };
        let sign = cusp_sign(&curve.ctx.tf, at);
        if sign == 0 {
            return Err(ResponseError::FlatCusp { at });
        }
        out.push(Crossing {
            t: p.t,
            omega: p.omega,
            s: p.s,
            location: p.value.re,
            ray_deg: None,
            sign,
            kind,
            chart: Chart::Complex,
        });
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(out)
}

/// Clockwise encirclements of `-1`: the continuous change of `arg(1 + L)`
/// over the closed traversal, in turns, negated.
pub fn winding_number(curve: &MappedCurve, tol: f64) -> Result<i64, ResponseError> {
    let mut total = 0.0;
    let mut prev: Option<Complex64> = None;
    for p in &curve.points {
        if !p.value.is_finite() {
            continue;
        }
        let x = p.value + 1.0;
        if x.norm() <= critical_band(p.value.norm(), tol) {
            return Err(ResponseError::CriticalPointHit { t: p.t });
        }
        if let Some(q) = prev {
            total += (x / q).arg();
        }
        prev = Some(x);
    }
    Ok(-(total / std::f64::consts::TAU).round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{build_contour, refine};
    use crate::tf::parse_tf;

    fn curve(text: &str) -> MappedCurve {
        let tf = parse_tf(text).unwrap();
        let cfg = ContourConfig::for_tf(&tf);
        let c = build_contour(&tf, &cfg).unwrap();
        let c = refine(&c, &tf, &cfg).unwrap();
        map_response(&tf, &c).unwrap()
    }

    fn at_omega_zero(c: &MappedCurve) -> &MappedPoint {
        c.points.iter().find(|p| p.omega == Some(0.0)).unwrap()
    }

    #[test]
    fn stable_plant_at_dc() {
        let c = curve("5/((s/1+1)(s/2+1)(s/3+1))");
        let p = at_omega_zero(&c);
        assert!((p.value - Complex64::new(5.0, 0.0)).norm() < 1e-12);
        assert_eq!(p.phase_deg, 0.0);
        assert!((p.mag_db - 20.0 * 5f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn unstable_poles_give_minus_360_at_dc() {
        let c = curve("5*(s/3+1)(s/5+1)/((s/2-1)(s/4-1))");
        let p = at_omega_zero(&c);
        assert!((p.value - Complex64::new(5.0, 0.0)).norm() < 1e-12);
        assert!((p.phase_deg + 360.0).abs() < 1e-9);
    }

    #[test]
    fn strictly_proper_is_tiny_on_the_arc() {
        let c = curve("5/((s/1+1)(s/2+1)(s/3+1))");
        assert!(c
            .points
            .iter()
            .filter(|p| p.segment == Segment::Arc)
            .all(|p| p.mag_db < -80.0));
    }

    #[test]
    fn mapped_invariants() {
        for text in [
            "15/((s/1+1)(s/2+1)(s/3+1))",
            "5*(s/3+1)(s/5+1)/((s/2-1)(s/4-1))",
            "5/(s(s/0.5+1)(s/2+1))",
            "-1*(s^2+s+1)/(s^2-s+1)",
        ] {
            let c = curve(text);
            for w in c.points.windows(2) {
                if w[0].segment == w[1].segment && w[0].value.norm() > 0.0 && w[1].value.norm() > 0.0 {
                    assert!((w[1].phase_deg - w[0].phase_deg).abs() <= 90.0, "{text}");
                }
            }
            for p in &c.points {
                let direct = c.tf().eval(p.s);
                assert!(
                    (direct - p.value).norm() <= 1e-9 * direct.norm().max(1e-300),
                    "{text} at {}",
                    p.s
                );
                assert!((p.mag_db - 20.0 * p.value.norm().log10()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn crossings_for_k15() {
        let c = curve("15/((s/1+1)(s/2+1)(s/3+1))");
        let xs = detect_ray_crossings(&c, DEFAULT_CRITICAL_TOL).unwrap();
        assert_eq!(xs.len(), 2);
        for x in &xs {
            assert_eq!(x.sign, 1);
            assert!((x.omega.unwrap().abs() - 11f64.sqrt()).abs() < 1e-9);
            assert!((x.location + 1.5).abs() < 1e-9);
        }
        assert_eq!(winding_number(&c, DEFAULT_CRITICAL_TOL).unwrap(), 2);
    }

    #[test]
    fn dc_cusp_counts_once() {
        let c = curve("1.5*(s/0.5-1)/((s/2+1)(s/3+1))");
        let xs = detect_ray_crossings(&c, DEFAULT_CRITICAL_TOL).unwrap();
        assert_eq!(xs.len(), 1);
        assert_eq!(xs[0].kind, CrossingKind::CuspZero);
        assert_eq!(xs[0].sign, 1);
        let opts = DetectOptions {
            cusp_rule: false,
            ..DetectOptions::default()
        };
        assert_eq!(crossing_sum(&detect_ray_crossings_with(&c, opts).unwrap()), 0);
    }

    #[test]
    fn cusp_sign_examples() {
        let tf = parse_tf("1.5*(s/0.5-1)/((s/2+1)(s/3+1))").unwrap();
        assert_eq!(cusp_sign(&tf, CuspAt::Zero), 1);
        let tf = parse_tf("5/((s/1+1)(s/2+1)(s/3+1))").unwrap();
        assert_eq!(cusp_sign(&tf, CuspAt::Zero), 0);
        assert_eq!(cusp_sign(&tf, CuspAt::Infinity), 0);
        // L -> -2 - 4j/w from below, then up through the arc.
        let tf = parse_tf("-2*(s+1)/(s+3)").unwrap();
        assert_eq!(cusp_sign(&tf, CuspAt::Infinity), 1);
        let tf = parse_tf("-2*(s+3)/(s+1)").unwrap();
        assert_eq!(cusp_sign(&tf, CuspAt::Infinity), -1);
    }

    #[test]
    fn zero_function_has_no_crossings() {
        let c = curve("0");
        assert!(detect_ray_crossings(&c, DEFAULT_CRITICAL_TOL).unwrap().is_empty());
        assert_eq!(winding_number(&c, DEFAULT_CRITICAL_TOL).unwrap(), 0);
    }

    #[test]
    fn critical_point_is_reported() {
        let c = curve("-1");
        assert!(matches!(
            detect_ray_crossings(&c, DEFAULT_CRITICAL_TOL),
            Err(ResponseError::CriticalPointHit { .. })
        ));
    }
}
