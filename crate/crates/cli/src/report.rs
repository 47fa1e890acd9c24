//! Serializable documents for `analyze`, `sweep` and `verify`.
//!
//! Floats are rounded to 12 significant digits before serialization so that
//! output is stable across platforms and runs.

use std::fmt::Write as _;

use crossings::verdict::{FuzzReport, MethodCounts, StabilityReport, Verdict};
use crossings::Crossing;
use num_complex::Complex64;
use serde::Serialize;

pub const SCHEMA_VERSION: &str = "1";

pub fn r12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

#[derive(Serialize)]
pub struct ComplexDoc {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexDoc {
    fn from(z: Complex64) -> Self {
        Self {
            re: r12(z.re),
            im: r12(z.im),
        }
    }
}

#[derive(Serialize)]
pub struct ConfigDoc {
    pub big_radius: f64,
    pub indent_radius: f64,
    pub min_samples_per_decade: usize,
    pub max_refine_angle_deg: f64,
    pub critical_tol: f64,
    pub critical_tol_db: f64,
    pub cancel_tol: f64,
}

#[derive(Serialize)]
pub struct OpenLoopDoc {
    pub poles: Vec<ComplexDoc>,
    pub zeros: Vec<ComplexDoc>,
    pub imag_axis_poles: Vec<f64>,
    pub n_p: usize,
}

#[derive(Serialize)]
pub struct CrossingDoc {
    pub t: f64,
    pub omega: Option<f64>,
    pub location: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ray_deg: Option<f64>,
    pub sign: i8,
    pub kind: &'static str,
}

impl From<&Crossing> for CrossingDoc {
    fn from(c: &Crossing) -> Self {
        Self {
            t: r12(c.t),
            omega: c.omega.map(r12),
            location: r12(c.location),
            ray_deg: c.ray_deg.map(r12),
            sign: c.sign,
            kind: c.kind.name(),
        }
    }
}

#[derive(Serialize)]
pub struct CrossingsDoc {
    pub nyquist: Vec<CrossingDoc>,
    pub nichols_single: Vec<CrossingDoc>,
    pub nichols_multi: Vec<CrossingDoc>,
}

#[derive(Serialize)]
pub struct MethodsDoc {
    pub nyquist: Option<i64>,
    pub nichols_single: Option<i64>,
    pub nichols_multi: Option<i64>,
    pub winding: Option<i64>,
}

impl From<MethodCounts> for MethodsDoc {
    fn from(m: MethodCounts) -> Self {
        Self {
            nyquist: m.nyquist,
            nichols_single: m.nichols_single,
            nichols_multi: m.nichols_multi,
            winding: m.winding,
        }
    }
}

#[derive(Serialize)]
pub struct VerdictDoc {
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_loop_rhp: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl From<&Verdict> for VerdictDoc {
    fn from(v: &Verdict) -> Self {
        match v {
            Verdict::Stable => Self {
                status: "stable",
                closed_loop_rhp: Some(0),
                reason: None,
            },
            Verdict::Unstable(n) => Self {
                status: "unstable",
                closed_loop_rhp: Some(*n),
                reason: None,
            },
            Verdict::Marginal(r) => Self {
                status: "marginal",
                closed_loop_rhp: None,
                reason: Some(r.clone()),
            },
        }
    }
}

#[derive(Serialize)]
pub struct OracleDoc {
    pub closed_loop_rhp: Option<usize>,
    pub routh_rhp: Option<usize>,
    pub agrees: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Serialize)]
pub struct ReportDocument {
    pub schema_version: &'static str,
    pub tf_text: String,
    pub tf_canonical: String,
    pub config: ConfigDoc,
    pub open_loop: OpenLoopDoc,
    pub crossings: CrossingsDoc,
    pub n_by_method: MethodsDoc,
    pub n_z: Option<i64>,
    pub verdict: VerdictDoc,
    pub oracle: OracleDoc,
    pub warnings: Vec<String>,
}

fn crossing_docs(xs: &[Crossing]) -> Vec<CrossingDoc> {
    xs.iter().map(CrossingDoc::from).collect()
}

impl ReportDocument {
    pub fn new(tf_text: &str, r: &StabilityReport) -> Self {
        let (closed_loop_rhp, routh_rhp, note) = match &r.oracle.counts {
            Ok(c) => (Some(c.closed_loop_rhp), Some(c.routh_rhp), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
        Self {
            schema_version: SCHEMA_VERSION,
            tf_text: tf_text.to_string(),
            tf_canonical: r.tf.to_string(),
            config: ConfigDoc {
                big_radius: r12(r.config.big_radius),
                indent_radius: r12(r.config.indent_radius),
                min_samples_per_decade: r.config.min_samples_per_decade,
                max_refine_angle_deg: r12(r.config.max_refine_angle_deg),
                critical_tol: r12(r.tolerances.critical),
                critical_tol_db: r12(r.tolerances.critical_db),
                cancel_tol: r12(r.tolerances.cancel),
            },
            open_loop: OpenLoopDoc {
                poles: r.open_loop_poles.iter().map(|z| (*z).into()).collect(),
                zeros: r.open_loop_zeros.iter().map(|z| (*z).into()).collect(),
                imag_axis_poles: r.imag_axis_poles.iter().map(|b| r12(*b)).collect(),
                n_p: r.n_p,
            },
            crossings: CrossingsDoc {
                nyquist: crossing_docs(&r.crossings.nyquist),
                nichols_single: crossing_docs(&r.crossings.nichols_single),
                nichols_multi: crossing_docs(&r.crossings.nichols_multi),
            },
            n_by_method: r.n_by_method.into(),
            n_z: r.n_z,
            verdict: (&r.verdict).into(),
            oracle: OracleDoc {
                closed_loop_rhp,
                routh_rhp,
                agrees: r.oracle.agrees,
                note,
            },
            warnings: r.warnings.clone(),
        }
    }
}

fn opt(v: Option<i64>) -> String {
    v.map_or_else(|| "-".to_string(), |n| n.to_string())
}

pub fn verdict_text(v: &Verdict) -> String {
    match v {
        Verdict::Stable => "stable".to_string(),
        Verdict::Unstable(n) => format!("unstable ({n} closed-loop RHP poles)"),
        Verdict::Marginal(r) => format!("marginal ({r})"),
    }
}

pub fn report_text(tf_text: &str, r: &StabilityReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "loop function   {}", r.tf);
    if tf_text.trim() != r.tf.to_string() {
        let _ = writeln!(out, "input           {tf_text}");
    }
    let _ = writeln!(out, "verdict         {}", verdict_text(&r.verdict));
    let _ = writeln!(out, "N_p             {}", r.n_p);
    let m = &r.n_by_method;
    let _ = writeln!(
        out,
        "N               nyquist {}  nichols-single {}  nichols-multi {}  winding {}",
        opt(m.nyquist),
        opt(m.nichols_single),
        opt(m.nichols_multi),
        opt(m.winding)
    );
    let _ = writeln!(out, "N_z             {}", opt(r.n_z));
    match &r.oracle.counts {
        Ok(c) => {
            let _ = writeln!(
                out,
                "oracle          roots {}  routh {}  {}",
                c.closed_loop_rhp,
                c.routh_rhp,
                if r.oracle.agrees { "agrees" } else { "DISAGREES" }
            );
        }
        Err(e) => {
            let _ = writeln!(out, "oracle          {e}");
        }
    }
    if !r.crossings.nyquist.is_empty() {
        let _ = writeln!(out, "crossings");
        for c in &r.crossings.nyquist {
            let w = c.omega.map_or_else(|| "-".to_string(), |w| format!("{:.6}", w));
            let _ = writeln!(
                out,
                "  {:+}  at {:.6}  omega {}  {}",
                c.sign,
                c.location,
                w,
                c.kind.name()
            );
        }
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

#[derive(Serialize)]
pub struct SweepRow {
    pub gain: f64,
    pub verdict: Option<VerdictDoc>,
    pub n_p: Option<usize>,
    pub n: Option<i64>,
    pub n_z: Option<i64>,
    pub oracle_agrees: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Serialize)]
pub struct SweepDocument {
    pub schema_version: &'static str,
    pub tf_text: String,
    pub rows: Vec<SweepRow>,
}

#[derive(Serialize)]
pub struct DisagreementDoc {
    pub original: String,
    pub shrunk: String,
    pub reason: String,
}

#[derive(Serialize)]
pub struct VerifyDocument {
    pub schema_version: &'static str,
    pub seed: u64,
    pub count: usize,
    pub max_order: usize,
    pub agreements: usize,
    pub skipped: usize,
    pub disagreements: Vec<DisagreementDoc>,
}

impl VerifyDocument {
    pub fn new(seed: u64, count: usize, max_order: usize, r: &FuzzReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            count,
            max_order,
            agreements: r.agreements,
            skipped: r.skipped,
            disagreements: r
                .disagreements
                .iter()
                .map(|d| DisagreementDoc {
                    original: d.original.to_string(),
                    shrunk: d.shrunk.to_string(),
                    reason: d.reason.clone(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(r12(1.0 / 3.0), 0.333333333333);
        assert_eq!(r12(-2.5), -2.5);
        assert_eq!(r12(0.0), 0.0);
        assert_eq!(r12(123456789.1234567), 123456789.123);
    }
}
