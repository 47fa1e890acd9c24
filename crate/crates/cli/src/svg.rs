//! Static SVG charts. Output depends only on the inputs: fixed tick ladder,
//! fixed number formatting, no timestamps.

use std::fmt::Write as _;

use crossings::nichols::wrap_single;
use crossings::{Crossing, MappedCurve, Segment};

use crate::Kind;

const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f5fa8", "#c0392b", "#27864a", "#8e44ad", "#d68910", "#2c3e50"];

pub struct Series {
    pub label: String,
    pub curve: MappedCurve,
    pub crossings: Vec<Crossing>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * (self.width - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        self.height - MARGIN_B - (y - self.y0) / (self.y1 - self.y0) * (self.height - MARGIN_T - MARGIN_B)
    }

    fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        let (wx, wy) = (self.x1 - self.x0, self.y1 - self.y0);
        (
            x.clamp(self.x0 - 10.0 * wx, self.x1 + 10.0 * wx),
            y.clamp(self.y0 - 10.0 * wy, self.y1 + 10.0 * wy),
        )
    }
}

/// Tick positions on a 1-2-5 ladder covering `[lo, hi]` with roughly
/// `target` intervals.
pub fn ticks(lo: f64, hi: f64, target: usize) -> (f64, Vec<f64>) {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (step, (first..=last).map(|k| k as f64 * step).collect())
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10()).ceil() as usize
    };
    let s = format!("{:.*}", decimals, v);
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axis_points(curve: &MappedCurve) -> impl Iterator<Item = &crossings::response::MappedPoint> {
    curve.points.iter().filter(|p| p.segment == Segment::Axis)
}

fn nyquist_frame(series: &[Series], width: f64, height: f64) -> Frame {
    let mut v: f64 = 2.0;
    for s in series {
        for x in crossings::axis_intersections(&s.curve) {
            if x.omega.is_some() && x.location.is_finite() {
                v = v.max(x.location.abs());
            }
        }
        if let Some(p) = s.curve.points.iter().find(|p| p.omega == Some(0.0)) {
            if p.value.is_finite() {
                v = v.max(p.value.norm());
            }
        }
    }
    let v = (1.25 * v).min(1e6);
    let aspect = (height - MARGIN_T - MARGIN_B) / (width - MARGIN_L - MARGIN_R);
    Frame {
        x0: -v,
        x1: v,
        y0: -v * aspect,
        y1: v * aspect,
        width,
        height,
    }
}

fn phase_of(kind: Kind, phase: f64) -> f64 {
    if kind == Kind::NicholsSingle {
        wrap_single(phase)
    } else {
        phase
    }
}

fn nichols_frame(kind: Kind, series: &[Series], width: f64, height: f64) -> Frame {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    let (mut p0, mut p1) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for c in &s.crossings {
            lo = lo.min(c.location - 10.0);
            hi = hi.max(c.location + 10.0);
        }
        for p in axis_points(&s.curve) {
            if p.phase_deg.is_finite() && p.mag_db.is_finite() && p.mag_db.abs() <= 200.0 {
                p0 = p0.min(p.phase_deg);
                p1 = p1.max(p.phase_deg);
            }
        }
    }
    let (x0, x1) = match kind {
        Kind::NicholsSingle => (-360.0, 0.0),
        _ if p0.is_finite() => {
            let a = (90.0 * (p0 / 90.0).floor()).min(-180.0);
            let b = (90.0 * (p1 / 90.0).ceil()).max(a + 180.0);
            (a, b)
        }
        _ => (-360.0, 0.0),
    };
    Frame {
        x0,
        x1,
        y0: lo.max(-200.0),
        y1: hi.min(200.0),
        width,
        height,
    }
}

/// Critical rays `-180 - 360k` inside the span of continuous phase.
fn nichols_rays(kind: Kind, series: &[Series]) -> Vec<f64> {
    if kind == Kind::NicholsSingle {
        return vec![-180.0];
    }
    let (mut p0, mut p1) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for p in &s.curve.points {
            if p.phase_deg.is_finite() {
                p0 = p0.min(p.phase_deg);
                p1 = p1.max(p.phase_deg);
            }
        }
    }
    if !p0.is_finite() {
        return vec![-180.0];
    }
    let k_min = ((-180.0 - p1) / 360.0).ceil() as i64;
    let k_max = ((-180.0 - p0) / 360.0).floor() as i64;
    let rays: Vec<f64> = (k_min..=k_max).rev().map(|k| -180.0 - 360.0 * k as f64).collect();
    if rays.is_empty() {
        vec![-180.0]
    } else {
        rays
    }
}

pub fn render(kind: Kind, title: &str, series: &[Series], width: u32, height: u32) -> String {
    let (w, h) = (width as f64, height as f64);
    let frame = match kind {
        Kind::Nyquist => nyquist_frame(series, w, h),
        _ => nichols_frame(kind, series, w, h),
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let (l, r, t, b) = (MARGIN_L, w - MARGIN_R, MARGIN_T, h - MARGIN_B);
    let _ = writeln!(
        out,
        r#"<defs><clipPath id="plot"><rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}"/></clipPath></defs>"#,
        r - l,
        b - t
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        w / 2.0,
        escape(title)
    );

    // Grid and tick labels.
    let (xs, xt) = ticks(frame.x0, frame.x1, 8);
    let (ys, yt) = ticks(frame.y0, frame.y1, 6);
    let _ = writeln!(out, r##"<g class="grid" stroke="#e3e3e3" stroke-width="1">"##);
    for x in &xt {
        let px = frame.px(*x);
        let _ = writeln!(out, r#"<line x1="{px:.2}" y1="{t:.2}" x2="{px:.2}" y2="{b:.2}"/>"#);
    }
    for y in &yt {
        let py = frame.py(*y);
        let _ = writeln!(out, r#"<line x1="{l:.2}" y1="{py:.2}" x2="{r:.2}" y2="{py:.2}"/>"#);
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r##"<g class="ticks" fill="#333">"##);
    for x in &xt {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            frame.px(*x),
            b + 16.0,
            tick_label(*x, xs)
        );
    }
    for y in &yt {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            l - 6.0,
            frame.py(*y) + 4.0,
            tick_label(*y, ys)
        );
    }
    let _ = writeln!(out, "</g>");
    let (xl, yl) = match kind {
        Kind::Nyquist => ("Re L(s)", "Im L(s)"),
        _ => ("phase (deg)", "magnitude (dB)"),
    };
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xl}</text>"#,
        (l + r) / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{yl}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0
    );
    let _ = writeln!(
        out,
        r##"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#555"/>"##,
        r - l,
        b - t
    );

    let _ = writeln!(out, r#"<g clip-path="url(#plot)">"#);
    // Critical rays and points.
    match kind {
        Kind::Nyquist => {
            let (x, y) = (frame.px(-1.0), frame.py(0.0));
            let _ = writeln!(
                out,
                r##"<line class="ray" x1="{:.2}" y1="{y:.2}" x2="{x:.2}" y2="{y:.2}" stroke="#e67e22" stroke-width="3" opacity="0.6"/>"##,
                frame.px(frame.x0)
            );
            let _ = writeln!(
                out,
                r##"<circle class="critical" cx="{x:.2}" cy="{y:.2}" r="4" fill="none" stroke="#000" stroke-width="1.5"/>"##
            );
        }
        _ => {
            for v in nichols_rays(kind, series) {
                let (x, y) = (frame.px(v), frame.py(0.0));
                let _ = writeln!(
                    out,
                    r##"<line class="ray" data-phase="{v}" x1="{x:.2}" y1="{y:.2}" x2="{x:.2}" y2="{:.2}" stroke="#e67e22" stroke-width="3" opacity="0.6"/>"##,
                    frame.py(frame.y1)
                );
                let _ = writeln!(
                    out,
                    r##"<circle class="critical" cx="{x:.2}" cy="{y:.2}" r="4" fill="none" stroke="#000" stroke-width="1.5"/>"##
                );
            }
        }
    }

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        let mut prev_x: Option<f64> = None;
        for p in &s.curve.points {
            let (x, y) = match kind {
                Kind::Nyquist => (p.value.re, p.value.im),
                _ => (phase_of(kind, p.phase_deg), p.mag_db),
            };
            let seam = kind == Kind::NicholsSingle && prev_x.is_some_and(|q| (x - q).abs() > 180.0);
            if !x.is_finite() || !y.is_finite() || seam {
                runs.push(Vec::new());
            }
            prev_x = x.is_finite().then_some(x);
            if x.is_finite() && y.is_finite() {
                let (x, y) = frame.clamp(x, y);
                runs.last_mut().unwrap().push((frame.px(x), frame.py(y)));
            }
        }
        for run in runs.iter().filter(|r| r.len() > 1) {
            let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                out,
                r#"<polyline class="curve" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
    }

    for s in series {
        for c in &s.crossings {
            let (x, y) = match kind {
                Kind::Nyquist => (c.location, 0.0),
                _ => (c.ray_deg.unwrap_or(-180.0), c.location),
            };
            let (x, y) = frame.clamp(x, y);
            let (px, py) = (frame.px(x), frame.py(y));
            let sign = if c.sign > 0 { "+" } else { "\u{2212}" };
            let _ = writeln!(
                out,
                r##"<g class="crossing" data-sign="{}"><circle cx="{px:.2}" cy="{py:.2}" r="5" fill="#fff" stroke="#000"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{sign}</text></g>"##,
                c.sign,
                py - 8.0
            );
        }
    }
    let _ = writeln!(out, "</g>");

    if series.len() > 1 {
        for (i, s) in series.iter().enumerate() {
            let y = t + 14.0 + 14.0 * i as f64;
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                r - 120.0,
                y - 4.0,
                r - 100.0,
                y - 4.0,
                COLORS[i % COLORS.len()],
                r - 95.0,
                y,
                escape(&s.label)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
