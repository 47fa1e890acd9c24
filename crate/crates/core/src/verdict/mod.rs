//! Closed-loop stability verdicts: `N_z = N + N_p`, with every crossing
//! method cross-checked and an independent closed-loop root count.

mod fuzz;

pub use fuzz::{fuzz_instance, fuzz_verify, random_plant, shrink, verify_instances, Disagreement, FuzzReport};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::contour::{build_contour, refine, ContourConfig, ContourError};
use crate::nichols::{detect_nichols_crossings, to_nichols, NicholsMode, DEFAULT_TOL_DB};
use crate::poly::{is_marginal, routh_rhp_count, PolyError, MARGINAL_BAND};
use crate::response::{
    crossing_sum, detect_ray_crossings, map_response, value_at_infinity, winding_number, Crossing, ResponseError,
    DEFAULT_CRITICAL_TOL,
};
use crate::tf::{cancel_check, expand, FactoredTF};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerdictError {
    #[error("pole {pole} is too close to the imaginary axis to decide whether it is enclosed")]
    MarginalPole { pole: Complex64 },
    #[error("crossing methods disagree: {counts:?}")]
    MethodDisagreement { counts: MethodCounts },
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error(transparent)]
    Response(ResponseError),
    #[error("gain must be finite and nonzero, got {0}")]
    InvalidGain(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("closed-loop ground truth is indeterminate: {0}")]
    Indeterminate(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative band around -1 (complex plane) treated as a hit.
    pub critical: f64,
    /// Band around 0 dB on the Nichols rays.
    pub critical_db: f64,
    /// Relative distance under which a pole and a zero count as cancelling.
    pub cancel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            critical: DEFAULT_CRITICAL_TOL,
            critical_db: DEFAULT_TOL_DB,
            cancel: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Stable,
    Unstable(usize),
    Marginal(String),
}

impl Verdict {
    pub fn is_marginal(&self) -> bool {
        matches!(self, Verdict::Marginal(_))
    }
}

/// Crossing sum per method; `None` where the method stopped on a hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MethodCounts {
    pub nyquist: Option<i64>,
    pub nichols_single: Option<i64>,
    pub nichols_multi: Option<i64>,
    pub winding: Option<i64>,
}

impl MethodCounts {
    pub fn all(&self) -> [Option<i64>; 4] {
        [self.nyquist, self.nichols_single, self.nichols_multi, self.winding]
    }

    /// The common value when every method completed and they agree.
    pub fn agreed(&self) -> Option<i64> {
        let v = self.all();
        let first = v[0]?;
        v.iter().all(|x| *x == Some(first)).then_some(first)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrossingSets {
    pub nyquist: Vec<Crossing>,
    pub nichols_single: Vec<Crossing>,
    pub nichols_multi: Vec<Crossing>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCounts {
    pub closed_loop_rhp: usize,
    pub routh_rhp: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSummary {
    pub counts: Result<OracleCounts, OracleError>,
    /// Oracle count equals `n_z`; false when either side is undecided.
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub tf: FactoredTF,
    pub config: ContourConfig,
    pub tolerances: Tolerances,
    pub open_loop_poles: Vec<Complex64>,
    pub open_loop_zeros: Vec<Complex64>,
    pub imag_axis_poles: Vec<f64>,
    pub n_p: usize,
    pub n_by_method: MethodCounts,
    pub n_z: Option<i64>,
    pub verdict: Verdict,
    pub crossings: CrossingSets,
    pub oracle: OracleSummary,
    pub warnings: Vec<String>,
}

/// Open-loop poles strictly inside the right half plane. Poles exactly on the
/// imaginary axis are detoured and not counted.
pub fn count_open_loop_rhp_poles(tf: &FactoredTF) -> Result<usize, VerdictError> {
    let mut n = 0;
    for p in tf.pole_roots() {
        if p.re == 0.0 {
            continue;
        }
        if p.re.abs() <= MARGINAL_BAND * p.norm().max(1.0) {
            return Err(VerdictError::MarginalPole { pole: p });
        }
        if p.re > 0.0 {
            n += 1;
        }
    }
    Ok(n)
}

/// Closed-loop right-half-plane root count from `num + den`, by root finding
/// and by Routh's array.
pub fn oracle_assess(tf: &FactoredTF) -> Result<OracleCounts, OracleError> {
    let r = expand(tf);
    let q = r.num.add(&r.den).trimmed(1e-14);
    if q.is_zero() {
        return Err(OracleError::Indeterminate("1 + L vanishes identically".into()));
    }
    if q.degree() == 0 {
        return Ok(OracleCounts {
            closed_loop_rhp: 0,
            routh_rhp: 0,
        });
    }
    let roots = q
        .roots()
        .map_err(|e| OracleError::Indeterminate(format!("root finder: {e}")))?;
    if let Some(r) = roots.roots.iter().find(|r| is_marginal(**r)) {
        return Err(OracleError::Indeterminate(format!(
            "closed-loop root {r} on the imaginary axis"
        )));
    }
    let routh = routh_rhp_count(&q).map_err(|e| match e {
        PolyError::Indeterminate => OracleError::Indeterminate("Routh array hit an imaginary-axis root".into()),
        e => OracleError::Indeterminate(format!("Routh array: {e}")),
    })?;
    let closed_loop_rhp = roots.count_rhp();
    if closed_loop_rhp != routh {
        return Err(OracleError::Indeterminate(format!(
            "root count {closed_loop_rhp} and Routh count {routh} differ"
        )));
    }
    Ok(OracleCounts {
        closed_loop_rhp,
        routh_rhp: routh,
    })
}

fn fmt_pole(b: f64) -> String {
    if b == 0.0 {
        "s = 0".to_string()
    } else {
        format!("s = {b}j")
    }
}

pub fn assess(tf: &FactoredTF, cfg: &ContourConfig, tol: &Tolerances) -> Result<StabilityReport, VerdictError> {
    let mut warnings = Vec::new();
    let mut marginal: Vec<String> = Vec::new();

    for (z, p) in cancel_check(tf, tol.cancel) {
        warnings.push(format!("near pole-zero cancellation: zero {z} and pole {p}"));
        marginal.push("near pole-zero cancellation".into());
    }
    let n_p = match count_open_loop_rhp_poles(tf) {
        Ok(n) => n,
        Err(VerdictError::MarginalPole { pole }) => {
            warnings.push(format!("pole {pole} lies inside the imaginary-axis band"));
            marginal.push("open-loop pole on the edge of the imaginary axis".into());
            tf.pole_roots().iter().filter(|p| p.re > 0.0).count()
        }
        Err(e) => return Err(e),
    };
    let imag_axis_poles = tf.imag_axis_poles();
    for b in &imag_axis_poles {
        warnings.push(format!("imaginary-axis pole at {} detoured", fmt_pole(*b)));
    }
    if !tf.is_proper() {
        warnings.push("improper loop function".into());
    }
    if let Some(l_inf) = value_at_infinity(tf) {
        if (l_inf + 1.0).abs() <= tol.critical * (1.0 + l_inf.abs()) {
            marginal.push("L(s) tends to -1 at infinity".into());
        }
    }

    let mut counts = MethodCounts::default();
    let mut crossings = CrossingSets::default();
    let pipeline = build_contour(tf, cfg).and_then(|c| refine(&c, tf, cfg));
    match pipeline {
        Err(e) if !marginal.is_empty() => warnings.push(format!("contour: {e}")),
        Err(e) => return Err(e.into()),
        Ok(contour) => {
            let curve = map_response(tf, &contour).map_err(VerdictError::Response)?;
            let mut note = |r: Result<Vec<Crossing>, ResponseError>,
                            slot: &mut Option<i64>,
                            list: &mut Vec<Crossing>|
             -> Result<(), VerdictError> {
                match r {
                    Ok(xs) => {
                        *slot = Some(crossing_sum(&xs));
                        *list = xs;
                        Ok(())
                    }
                    Err(e) => hit(e, &mut marginal),
                }
            };
            note(
                detect_ray_crossings(&curve, tol.critical),
                &mut counts.nyquist,
                &mut crossings.nyquist,
            )?;
            let single = to_nichols(&curve, NicholsMode::Single);
            note(
                detect_nichols_crossings(&single, tol.critical_db),
                &mut counts.nichols_single,
                &mut crossings.nichols_single,
            )?;
            let multi = to_nichols(&curve, NicholsMode::Multiple);
            note(
                detect_nichols_crossings(&multi, tol.critical_db),
                &mut counts.nichols_multi,
                &mut crossings.nichols_multi,
            )?;
            match winding_number(&curve, tol.critical) {
                Ok(n) => counts.winding = Some(n),
                Err(e) => hit(e, &mut marginal)?,
            }
        }
    }

    let oracle_counts = oracle_assess(tf);
    marginal.dedup();
    let (verdict, n_z) = if !marginal.is_empty() {
        (Verdict::Marginal(marginal.join("; ")), None)
    } else {
        let n = counts.agreed().ok_or(VerdictError::MethodDisagreement { counts })?;
        let n_z = n + n_p as i64;
        if n_z < 0 {
            return Err(VerdictError::MethodDisagreement { counts });
        }
        let v = if n_z == 0 {
            Verdict::Stable
        } else {
            Verdict::Unstable(n_z as usize)
        };
        (v, Some(n_z))
    };
    let agrees = match (&oracle_counts, n_z) {
        (Ok(c), Some(n)) => c.closed_loop_rhp as i64 == n && c.routh_rhp as i64 == n,
        _ => false,
    };
    if let (Err(e), Some(_)) = (&oracle_counts, n_z) {
        warnings.push(format!("oracle: {e}"));
    }

    Ok(StabilityReport {
        tf: tf.clone(),
        config: *cfg,
        tolerances: *tol,
        open_loop_poles: tf.pole_roots(),
        open_loop_zeros: tf.zero_roots(),
        imag_axis_poles,
        n_p,
        n_by_method: counts,
        n_z,
        verdict,
        crossings,
        oracle: OracleSummary {
            counts: oracle_counts,
            agrees,
        },
        warnings,
    })
}

fn hit(e: ResponseError, marginal: &mut Vec<String>) -> Result<(), VerdictError> {
    match e {
        ResponseError::CriticalPointHit { .. } => {
            marginal.push("the curve passes through the critical point".into());
            Ok(())
        }
        ResponseError::FlatCusp { .. } => {
            marginal.push("crossing direction at an end point is undetermined".into());
            Ok(())
        }
        e => Err(VerdictError::Response(e)),
    }
}

/// Assesses `tf` with its gain replaced by each entry of `gains`. Results
/// come back in input order.
pub fn gain_sweep(
    tf: &FactoredTF,
    gains: &[f64],
    cfg: &ContourConfig,
    tol: &Tolerances,
) -> Vec<(f64, Result<StabilityReport, VerdictError>)> {
    gains
        .par_iter()
        .map(|&k| {
            if !k.is_finite() || k == 0.0 {
                return (k, Err(VerdictError::InvalidGain(k)));
            }
            (k, assess(&tf.with_gain(k), cfg, tol))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf::parse_tf;

    fn run(text: &str, k: f64) -> StabilityReport {
        let tf = parse_tf(text).unwrap().with_gain(k);
        let cfg = ContourConfig::for_tf(&tf);
        assess(&tf, &cfg, &Tolerances::default()).unwrap()
    }

    const THREE_LAGS: &str = "1/((s/1+1)(s/2+1)(s/3+1))";
    const UNSTABLE_LEAD: &str = "(s/3+1)(s/5+1)/((s/2-1)(s/4-1))";
    const NMP_ZERO: &str = "(s/0.5-1)/((s/2+1)(s/3+1))";
    const NMP_UNSTABLE: &str = "(s/0.5-1)/((s/2-1)(s/3-1))";
    const TYPE_ONE: &str = "1/(s(s/0.5+1)(s/2+1))";
    const TYPE_ONE_NMP: &str = "(s/2-1)/(s(s/1+1))";

    #[test]
    fn open_loop_rhp_counts() {
        for (text, n) in [(THREE_LAGS, 0), (UNSTABLE_LEAD, 2), (TYPE_ONE, 0)] {
            assert_eq!(count_open_loop_rhp_poles(&parse_tf(text).unwrap()).unwrap(), n);
        }
        let tf = parse_tf("1/(s+1e-12)").unwrap();
        assert!(matches!(
            count_open_loop_rhp_poles(&tf),
            Err(VerdictError::MarginalPole { .. })
        ));
    }

    #[test]
    fn oracle_examples() {
        let o = oracle_assess(&parse_tf(THREE_LAGS).unwrap().with_gain(15.0)).unwrap();
        assert_eq!(o.closed_loop_rhp, 2);
        let o = oracle_assess(&parse_tf(UNSTABLE_LEAD).unwrap().with_gain(1.0)).unwrap();
        assert_eq!(o.closed_loop_rhp, 2);
        let o = oracle_assess(&FactoredTF::constant(0.0)).unwrap();
        assert_eq!(
            o,
            OracleCounts {
                closed_loop_rhp: 0,
                routh_rhp: 0
            }
        );
        assert!(oracle_assess(&parse_tf(THREE_LAGS).unwrap().with_gain(10.0)).is_err());
    }

    #[test]
    fn assess_examples() {
        let r = run(NMP_ZERO, 0.5);
        assert_eq!((r.n_p, r.n_z, &r.verdict), (0, Some(0), &Verdict::Stable));
        let r = run(NMP_UNSTABLE, 0.5);
        assert_eq!(
            (r.n_p, r.n_by_method.agreed(), r.verdict),
            (2, Some(-2), Verdict::Stable)
        );
        let r = run(TYPE_ONE_NMP, -5.0);
        assert_eq!(
            (r.n_p, r.n_by_method.agreed(), r.verdict),
            (0, Some(2), Verdict::Unstable(2))
        );
        assert!(r.oracle.agrees);
        assert!(r.warnings.iter().any(|w| w.contains("s = 0")));
    }

    #[test]
    fn zero_loop_is_stable() {
        let r = run("0", 0.0);
        assert_eq!(r.verdict, Verdict::Stable);
        assert_eq!(r.n_by_method.agreed(), Some(0));
    }

    #[test]
    fn cancellation_is_marginal() {
        let r = run("(s-1)/((s-1)(s+2))", 1.0);
        assert!(r.verdict.is_marginal());
        assert!(r.warnings.iter().any(|w| w.contains("cancellation")));
    }

    #[test]
    fn sweeps_keep_order() {
        let tf = parse_tf(THREE_LAGS).unwrap();
        let cfg = ContourConfig::for_tf(&tf);
        let out = gain_sweep(&tf, &[5.0, 15.0], &cfg, &Tolerances::default());
        let v: Vec<_> = out.iter().map(|(_, r)| r.as_ref().unwrap().verdict.clone()).collect();
        assert_eq!(v, vec![Verdict::Stable, Verdict::Unstable(2)]);
        let tf = parse_tf(NMP_UNSTABLE).unwrap();
        let out = gain_sweep(&tf, &[0.5, 1.5], &cfg, &Tolerances::default());
        let v: Vec<_> = out.iter().map(|(_, r)| r.as_ref().unwrap().verdict.clone()).collect();
        assert_eq!(v, vec![Verdict::Stable, Verdict::Unstable(1)]);
        assert!(gain_sweep(&tf, &[], &cfg, &Tolerances::default()).is_empty());
        assert!(gain_sweep(&tf, &[0.0], &cfg, &Tolerances::default())[0].1.is_err());
    }

    #[test]
    fn gain_sign_flip() {
        let tf = parse_tf(TYPE_ONE_NMP).unwrap();
        let cfg = ContourConfig::for_tf(&tf);
        let out = gain_sweep(&tf, &[-1.0, -5.0, 1.0, 5.0], &cfg, &Tolerances::default());
        let v: Vec<_> = out.iter().map(|(_, r)| r.as_ref().unwrap().clone()).collect();
        assert_eq!(v[0].verdict, Verdict::Stable);
        assert_eq!(v[1].verdict, Verdict::Unstable(2));
        for r in &v[2..] {
            let o = r.oracle.counts.as_ref().unwrap();
            assert_eq!(r.n_z, Some(o.closed_loop_rhp as i64));
        }
    }
}
