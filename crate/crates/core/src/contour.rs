//! The standard Nyquist contour as an ordered list of samples.
//!
//! Traversal is clockwise around the right half plane: up the imaginary axis
//! from `-jR` to `+jR`, bulging right around every imaginary-axis pole on a
//! semicircle of radius `indent_radius`, then back along the arc of radius
//! `big_radius` through `+R` to `-jR`. The first and last samples coincide.
//!
//! Segment junctions are stored twice (once per segment) so that every
//! non-degenerate interval between consecutive samples lies inside a single
//! segment and can be bisected in that segment's own parameter.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use thiserror::Error;

use crate::response::{LoopEvaluator, PointEval};
use crate::tf::FactoredTF;

/// Hard cap on the number of samples produced by [`refine`].
pub const MAX_SAMPLES: usize = 1 << 20;

const INDENT_STEPS: usize = 36;
const ARC_STEPS: usize = 36;
const INDENT_FILL: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContourError {
    #[error("invalid contour configuration: {0}")]
    InvalidConfig(String),
    #[error("indent radius {indent} is too large: {reason}")]
    IndentTooLarge { indent: f64, reason: String },
    #[error("arc radius {radius} must exceed {required} (10x the largest pole/zero magnitude)")]
    RadiusTooSmall { radius: f64, required: f64 },
    #[error("refinement exceeded the budget of {limit} samples")]
    RefinementBudgetExceeded { limit: usize },
    #[error("contour sample at s = {s} lies on a pole")]
    PoleProximity { s: Complex64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourConfig {
    /// Radius R of the closing arc, rad/s.
    pub big_radius: f64,
    /// Radius of the semicircular detours around imaginary-axis poles, rad/s.
    pub indent_radius: f64,
    pub min_samples_per_decade: usize,
    pub max_refine_angle_deg: f64,
}

impl ContourConfig {
    /// Defaults scaled to the pole/zero pattern of `tf`:
    /// `R = 1e4 * max(1, |p|, |z|)` and `eps = 1e-4 * min(1, spacing)` where
    /// spacing is the smallest gap between distinct imaginary-axis poles.
    pub fn for_tf(tf: &FactoredTF) -> Self {
        let largest = tf
            .pole_roots()
            .iter()
            .chain(tf.zero_roots().iter())
            .map(|r| r.norm())
            .fold(1.0, f64::max);
        let axis = tf.imag_axis_poles();
        let spacing = axis.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        Self {
            big_radius: 1e4 * largest,
            indent_radius: 1e-4 * spacing.min(1.0),
            min_samples_per_decade: 64,
            max_refine_angle_deg: 5.0,
        }
    }

    pub fn validate(&self) -> Result<(), ContourError> {
        let bad = |m: &str| Err(ContourError::InvalidConfig(m.to_string()));
        if !(self.indent_radius > 0.0 && self.indent_radius < self.big_radius) {
            return bad("need 0 < indent_radius < big_radius");
        }
        if !self.big_radius.is_finite() {
            return bad("big_radius must be finite");
        }
        if !(self.max_refine_angle_deg > 0.0 && self.max_refine_angle_deg <= 45.0) {
            return bad("max_refine_angle_deg must lie in (0, 45]");
        }
        if self.min_samples_per_decade == 0 {
            return bad("min_samples_per_decade must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Axis,
    /// Semicircular detour around the pole at `j * center`.
    Indent {
        center: f64,
    },
    Arc,
}

impl Segment {
    pub fn name(&self) -> &'static str {
        match self {
            Segment::Axis => "axis",
            Segment::Indent { .. } => "indent",
            Segment::Arc => "arc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSample {
    pub s: Complex64,
    pub t: f64,
    pub segment: Segment,
    /// Position inside the segment: frequency for the axis, angle in radians
    /// for indents and the arc.
    pub param: f64,
}

impl ContourSample {
    /// Frequency along the imaginary axis, `None` on indents and the arc.
    pub fn omega(&self) -> Option<f64> {
        match self.segment {
            Segment::Axis => Some(self.param),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NyquistContour {
    pub samples: Vec<ContourSample>,
    pub detoured_poles: Vec<Complex64>,
    pub config: ContourConfig,
}

impl NyquistContour {
    pub fn point_at(&self, segment: Segment, param: f64) -> Complex64 {
        point_at(&self.config, segment, param)
    }
}

pub(crate) fn point_at(cfg: &ContourConfig, segment: Segment, param: f64) -> Complex64 {
    match segment {
        Segment::Axis => Complex64::new(0.0, param),
        Segment::Indent { center } => {
            let eps = cfg.indent_radius;
            if param == FRAC_PI_2 {
                Complex64::new(0.0, center + eps)
            } else if param == -FRAC_PI_2 {
                Complex64::new(0.0, center - eps)
            } else {
                Complex64::new(eps * param.cos(), center + eps * param.sin())
            }
        }
        Segment::Arc => {
            let r = cfg.big_radius;
            if param == FRAC_PI_2 {
                Complex64::new(0.0, r)
            } else if param == -FRAC_PI_2 {
                Complex64::new(0.0, -r)
            } else {
                Complex64::new(r * param.cos(), r * param.sin())
            }
        }
    }
}

/// Midpoint parameter between two samples of the same segment. Axis samples
/// of equal sign use the geometric mean to respect log spacing.
pub(crate) fn mid_param(segment: Segment, a: f64, b: f64) -> f64 {
    match segment {
        Segment::Axis if a != 0.0 && b != 0.0 && a.signum() == b.signum() => a.signum() * (a * b).sqrt(),
        _ => 0.5 * (a + b),
    }
}

/// Parameter width below which an interval is no longer split.
pub(crate) fn min_width(cfg: &ContourConfig, segment: Segment, a: f64, b: f64) -> bool {
    let w = (b - a).abs();
    match segment {
        Segment::Axis => w <= 1e-12 * a.abs().max(b.abs()).max(cfg.indent_radius),
        _ => w <= 1e-12,
    }
}

/// Samples on the positive side of an axis run `[lo, hi]`, endpoints included.
fn axis_run(lo: f64, hi: f64, grid: &[f64], fill_lo: bool, fill_hi: bool, eps: f64) -> Vec<f64> {
    let mut pts = vec![lo];
    if fill_lo {
        pts.extend((1..=INDENT_FILL).map(|k| lo + eps * k as f64).filter(|w| *w < hi));
    }
    pts.extend(grid.iter().copied().filter(|w| *w > lo && *w < hi));
    if fill_hi {
        pts.extend((1..=INDENT_FILL).rev().map(|k| hi - eps * k as f64).filter(|w| *w > lo));
    }
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

pub fn build_contour(tf: &FactoredTF, cfg: &ContourConfig) -> Result<NyquistContour, ContourError> {
    cfg.validate()?;
    let eps = cfg.indent_radius;
    let big_r = cfg.big_radius;
    let centers = tf.imag_axis_poles();

    for w in centers.windows(2) {
        if eps >= 0.5 * (w[1] - w[0]) {
            return Err(ContourError::IndentTooLarge {
                indent: eps,
                reason: format!("poles at {}j and {}j are closer than 2x the indent", w[0], w[1]),
            });
        }
    }
    let roots: Vec<Complex64> = tf.pole_roots().into_iter().chain(tf.zero_roots()).collect();
    let largest = roots.iter().map(|r| r.norm()).fold(1.0, f64::max);
    if big_r <= 10.0 * largest {
        return Err(ContourError::RadiusTooSmall {
            radius: big_r,
            required: 10.0 * largest,
        });
    }
    // Any other root inside a detour would change what the contour encloses.
    for r in &roots {
        if r.re == 0.0 && centers.contains(&r.im) {
            continue;
        }
        for c in &centers {
            if (r - Complex64::new(0.0, *c)).norm() < 2.0 * eps {
                return Err(ContourError::IndentTooLarge {
                    indent: eps,
                    reason: format!("root {r} lies within the detour around {c}j"),
                });
            }
        }
    }

    let smallest = roots.iter().map(|r| r.norm()).filter(|m| *m > 0.0).fold(1.0, f64::min);
    let origin_pole = centers.contains(&0.0);
    let omega_min = if origin_pole { eps } else { 1e-4 * smallest };
    let per_decade = cfg.min_samples_per_decade as f64;
    let decades = (big_r / omega_min).log10();
    let n_grid = (decades * per_decade).ceil() as usize;
    let grid: Vec<f64> = (0..=n_grid)
        .map(|k| omega_min * 10f64.powf(k as f64 / per_decade))
        .collect();

    // Upper half of the axis portion, starting on the real axis.
    let mut upper: Vec<(Segment, f64)> = Vec::new();
    let mut lo;
    if origin_pole {
        let step = FRAC_PI_2 / (INDENT_STEPS / 2) as f64;
        for k in 0..=INDENT_STEPS / 2 {
            let a = if k == INDENT_STEPS / 2 {
                FRAC_PI_2
            } else {
                step * k as f64
            };
            upper.push((Segment::Indent { center: 0.0 }, a));
        }
        lo = eps;
    } else {
        lo = 0.0;
    }
    let mut fill_lo = origin_pole;
    for &b in centers.iter().filter(|c| **c > 0.0) {
        for w in axis_run(lo, b - eps, &grid, fill_lo, true, eps) {
            upper.push((Segment::Axis, w));
        }
        let step = 2.0 * FRAC_PI_2 / INDENT_STEPS as f64;
        for k in 0..=INDENT_STEPS {
            let a = match k {
                0 => -FRAC_PI_2,
                k if k == INDENT_STEPS => FRAC_PI_2,
                k => -FRAC_PI_2 + step * k as f64,
            };
            upper.push((Segment::Indent { center: b }, a));
        }
        lo = b + eps;
        fill_lo = true;
    }
    for w in axis_run(lo, big_r, &grid, fill_lo, false, eps) {
        upper.push((Segment::Axis, w));
    }

    let mirror = |(seg, p): (Segment, f64)| -> (Segment, f64) {
        match seg {
            Segment::Axis => (Segment::Axis, -p),
            Segment::Indent { center } => (Segment::Indent { center: -center }, -p),
            Segment::Arc => (Segment::Arc, -p),
        }
    };

    let mut path: Vec<(Segment, f64)> = upper.iter().skip(1).rev().map(|x| mirror(*x)).collect();
    path.extend(upper.iter().copied());
    let step = FRAC_PI_2 / (ARC_STEPS / 2) as f64;
    let arc_upper: Vec<f64> = (0..=ARC_STEPS / 2)
        .map(|k| match k {
            0 => FRAC_PI_2,
            k if k == ARC_STEPS / 2 => 0.0,
            k => FRAC_PI_2 - step * k as f64,
        })
        .collect();
    path.extend(arc_upper.iter().map(|a| (Segment::Arc, *a)));
    path.extend(arc_upper.iter().rev().skip(1).map(|a| (Segment::Arc, -a)));

    let n = path.len();
    let samples = path
        .into_iter()
        .enumerate()
        .map(|(i, (segment, param))| ContourSample {
            s: point_at(cfg, segment, param),
            t: i as f64 / (n - 1) as f64,
            segment,
            param,
        })
        .collect();

    Ok(NyquistContour {
        samples,
        detoured_poles: centers.iter().map(|c| Complex64::new(0.0, *c)).collect(),
        config: *cfg,
    })
}

fn wrap_deg(d: f64) -> f64 {
    let w = (d + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

fn needs_split(a: &PointEval, b: &PointEval, bound: f64) -> bool {
    if (b.phase_deg - a.phase_deg).abs() > bound {
        return true;
    }
    if a.root_phases
        .iter()
        .zip(&b.root_phases)
        .any(|(x, y)| (y - x).abs() > bound)
    {
        return true;
    }
    let (ca, cb) = (a.value + 1.0, b.value + 1.0);
    if ca.is_finite() && cb.is_finite() && ca.norm() > 0.0 && cb.norm() > 0.0 {
        return wrap_deg((cb / ca).arg().to_degrees()).abs() > bound;
    }
    false
}

/// Inserts midpoints until, between consecutive samples, the loop phase, the
/// phase of every individual pole/zero term and the angle of `1 + L` each
/// move by at most `max_refine_angle_deg`. Intervals that shrink to rounding
/// width are left alone (the curve has a genuine jump there, e.g. through a
/// zero on the imaginary axis).
pub fn refine(contour: &NyquistContour, tf: &FactoredTF, cfg: &ContourConfig) -> Result<NyquistContour, ContourError> {
    cfg.validate()?;
    let eval = LoopEvaluator::new(tf, cfg);
    let bound = cfg.max_refine_angle_deg;
    let mut pts: Vec<(ContourSample, PointEval)> = contour
        .samples
        .iter()
        .map(|smp| eval.eval(smp.s, smp.segment).map(|e| (*smp, e)))
        .collect::<Result<_, _>>()
        .map_err(|s| ContourError::PoleProximity { s })?;

    loop {
        let mut out: Vec<(ContourSample, PointEval)> = Vec::with_capacity(pts.len() * 2);
        let mut inserted = 0usize;
        for i in 0..pts.len() {
            out.push(pts[i].clone());
            if i + 1 == pts.len() {
                break;
            }
            let (sa, ea) = &pts[i];
            let (sb, eb) = &pts[i + 1];
            if sa.segment != sb.segment || min_width(cfg, sa.segment, sa.param, sb.param) {
                continue;
            }
            if needs_split(ea, eb, bound) {
                let param = mid_param(sa.segment, sa.param, sb.param);
                let s = point_at(cfg, sa.segment, param);
                let e = eval
                    .eval(s, sa.segment)
                    .map_err(|s| ContourError::PoleProximity { s })?;
                let smp = ContourSample {
                    s,
                    t: 0.5 * (sa.t + sb.t),
                    segment: sa.segment,
                    param,
                };
                out.push((smp, e));
                inserted += 1;
            }
        }
        if out.len() > MAX_SAMPLES {
            return Err(ContourError::RefinementBudgetExceeded { limit: MAX_SAMPLES });
        }
        pts = out;
        if inserted == 0 {
            break;
        }
    }

    let n = pts.len();
    let samples = pts
        .into_iter()
        .enumerate()
        .map(|(i, (mut smp, _))| {
            smp.t = i as f64 / (n - 1) as f64;
            smp
        })
        .collect();
    Ok(NyquistContour {
        samples,
        detoured_poles: contour.detoured_poles.clone(),
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf::parse_tf;

    fn build(text: &str) -> (FactoredTF, ContourConfig, NyquistContour) {
        let tf = parse_tf(text).unwrap();
        let cfg = ContourConfig::for_tf(&tf);
        let c = build_contour(&tf, &cfg).unwrap();
        (tf, cfg, c)
    }

    fn count_segments(c: &NyquistContour) -> (usize, usize, usize) {
        let mut runs = (0, 0, 0);
        let mut prev: Option<Segment> = None;
        for smp in &c.samples {
            if prev != Some(smp.segment) {
                match smp.segment {
                    Segment::Axis => runs.0 += 1,
                    Segment::Indent { .. } => runs.1 += 1,
                    Segment::Arc => runs.2 += 1,
                }
            }
            prev = Some(smp.segment);
        }
        runs
    }

    fn assert_invariants(c: &NyquistContour, tf: &FactoredTF) {
        let cfg = &c.config;
        let first = c.samples.first().unwrap().s;
        let last = c.samples.last().unwrap().s;
        assert!((first - last).norm() <= 1e-9 * cfg.big_radius);
        assert!(c.samples.windows(2).all(|w| w[1].t > w[0].t));
        for smp in &c.samples {
            for p in tf.pole_roots() {
                assert!((smp.s - p).norm() >= cfg.indent_radius * (1.0 - 1e-9));
            }
            let conj = smp.s.conj();
            let found = c
                .samples
                .iter()
                .any(|o| (o.s - conj).norm() <= 1e-12 * conj.norm().max(1.0));
            assert!(found, "no conjugate for {}", smp.s);
        }
    }

    #[test]
    fn stable_plant_has_one_axis_run_and_one_arc() {
        let (tf, _, c) = build("5/((s/1+1)(s/2+1)(s/3+1))");
        assert!(c.detoured_poles.is_empty());
        assert_eq!(count_segments(&c), (1, 0, 1));
        assert_invariants(&c, &tf);
        // omega = 0 is sampled exactly.
        assert!(c.samples.iter().any(|s| s.segment == Segment::Axis && s.param == 0.0));
    }

    #[test]
    fn integrator_gets_an_origin_indent() {
        let (tf, cfg, c) = build("1/(s(s/0.5+1)(s/2+1))");
        assert_eq!(c.detoured_poles, vec![Complex64::new(0.0, 0.0)]);
        assert_eq!(count_segments(&c), (2, 1, 1));
        assert_invariants(&c, &tf);
        let mid = c
            .samples
            .iter()
            .find(|s| matches!(s.segment, Segment::Indent { .. }) && s.param == 0.0)
            .unwrap();
        assert_eq!(mid.s, Complex64::new(cfg.indent_radius, 0.0));
    }

    #[test]
    fn imaginary_pair_gets_symmetric_indents() {
        let (tf, _, c) = build("1/((s^2/4+1)(s+1))");
        assert_eq!(
            c.detoured_poles,
            vec![Complex64::new(0.0, -2.0), Complex64::new(0.0, 2.0)]
        );
        assert_eq!(count_segments(&c), (3, 2, 1));
        assert_invariants(&c, &tf);
        let lower = c
            .samples
            .iter()
            .filter(|s| s.segment == Segment::Indent { center: -2.0 })
            .count();
        let upper = c
            .samples
            .iter()
            .filter(|s| s.segment == Segment::Indent { center: 2.0 })
            .count();
        assert_eq!(lower, upper);
    }

    #[test]
    fn config_errors() {
        let tf = parse_tf("1/((s^2+1)(s^2+1.0001))").unwrap();
        let mut cfg = ContourConfig::for_tf(&tf);
        cfg.indent_radius = 0.01;
        assert!(matches!(
            build_contour(&tf, &cfg),
            Err(ContourError::IndentTooLarge { .. })
        ));
        let tf = parse_tf("1/(s+100)").unwrap();
        let mut cfg = ContourConfig::for_tf(&tf);
        cfg.big_radius = 500.0;
        assert!(matches!(
            build_contour(&tf, &cfg),
            Err(ContourError::RadiusTooSmall { .. })
        ));
        cfg.big_radius = 1e6;
        cfg.max_refine_angle_deg = 60.0;
        assert!(matches!(build_contour(&tf, &cfg), Err(ContourError::InvalidConfig(_))));
    }

    #[test]
    fn refine_leaves_constant_alone() {
        let tf = FactoredTF::constant(2.0);
        let cfg = ContourConfig::for_tf(&tf);
        let c = build_contour(&tf, &cfg).unwrap();
        let r = refine(&c, &tf, &cfg).unwrap();
        assert_eq!(r.samples.len(), c.samples.len());
    }

    #[test]
    fn refine_densifies_near_phase_crossover() {
        let (tf, cfg, c) = build("15/((s/1+1)(s/2+1)(s/3+1))");
        let r = refine(&c, &tf, &cfg).unwrap();
        let count = |c: &NyquistContour| {
            c.samples
                .iter()
                .filter(|s| s.segment == Segment::Axis && (3.0..=3.6).contains(&s.param))
                .count()
        };
        assert!(count(&r) > count(&c), "{} vs {}", count(&r), count(&c));
        assert_invariants(&r, &tf);
    }

    #[test]
    fn refine_bounds_phase_steps_at_origin_indent() {
        let (tf, cfg, c) = build("1/(s(s/0.5+1)(s/2+1))");
        let r = refine(&c, &tf, &cfg).unwrap();
        let eval = LoopEvaluator::new(&tf, &cfg);
        let evals: Vec<_> = r.samples.iter().map(|s| eval.eval(s.s, s.segment).unwrap()).collect();
        for (w, e) in r.samples.windows(2).zip(evals.windows(2)) {
            if w[0].segment == w[1].segment {
                assert!((e[1].phase_deg - e[0].phase_deg).abs() <= cfg.max_refine_angle_deg + 1e-9);
            }
        }
    }
}
