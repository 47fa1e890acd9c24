//! Loop transfer functions in factored form.
//!
//! A [`FactoredTF`] is `gain * prod(zero_factors) / (s^m * prod(pole_factors))`
//! with every factor a real polynomial of degree 1 or 2. This is the shape the
//! text format describes; see [`parse_tf`] for the grammar and the
//! [`Display`](std::fmt::Display) impl for the canonical printer.

mod parse;

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::poly::RealPolynomial;

pub use parse::parse_tf;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TfError {
    #[error("parse error at byte {position}: expected {}, found {found}", expected.join(" | "))]
    Parse {
        position: usize,
        expected: Vec<&'static str>,
        found: String,
    },
    #[error("factor at byte {position} has degree {degree}; factors are limited to degree 2")]
    Degree { position: usize, degree: usize },
    #[error("invalid factor {0:?}: factors must have degree 1 or 2")]
    InvalidFactor(RealPolynomial),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactoredTF {
    pub gain: f64,
    /// Number of poles at the origin.
    pub integrator_order: u32,
    pub zero_factors: Vec<RealPolynomial>,
    pub pole_factors: Vec<RealPolynomial>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationalTF {
    pub num: RealPolynomial,
    pub den: RealPolynomial,
}

impl RationalTF {
    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval(s) / self.den.eval(s)
    }
}

impl FactoredTF {
    pub fn new(
        gain: f64,
        integrator_order: u32,
        zero_factors: Vec<RealPolynomial>,
        pole_factors: Vec<RealPolynomial>,
    ) -> Result<Self, TfError> {
        for f in zero_factors.iter().chain(&pole_factors) {
            if !(1..=2).contains(&f.degree()) {
                return Err(TfError::InvalidFactor(f.clone()));
            }
        }
        Ok(Self {
            gain,
            integrator_order,
            zero_factors,
            pole_factors,
        })
    }

    pub fn constant(gain: f64) -> Self {
        Self {
            gain,
            integrator_order: 0,
            zero_factors: Vec::new(),
            pole_factors: Vec::new(),
        }
    }

    pub fn with_gain(&self, gain: f64) -> Self {
        Self { gain, ..self.clone() }
    }

    pub fn is_zero_function(&self) -> bool {
        self.gain == 0.0
    }

    pub fn zero_degree(&self) -> usize {
        self.zero_factors.iter().map(|f| f.degree()).sum()
    }

    pub fn pole_degree(&self) -> usize {
        self.pole_factors.iter().map(|f| f.degree()).sum::<usize>() + self.integrator_order as usize
    }

    /// Pole degree minus zero degree; negative for improper functions.
    pub fn relative_degree(&self) -> isize {
        self.pole_degree() as isize - self.zero_degree() as isize
    }

    pub fn is_proper(&self) -> bool {
        self.relative_degree() >= 0
    }

    pub fn zero_roots(&self) -> Vec<Complex64> {
        self.zero_factors.iter().flat_map(|f| f.small_roots()).collect()
    }

    /// Pole locations, integrators included.
    pub fn pole_roots(&self) -> Vec<Complex64> {
        let mut roots = vec![Complex64::new(0.0, 0.0); self.integrator_order as usize];
        roots.extend(self.pole_factors.iter().flat_map(|f| f.small_roots()));
        roots
    }

    /// Distinct imaginary parts of the poles lying exactly on the imaginary
    /// axis, ascending. These are the poles the Nyquist contour detours.
    pub fn imag_axis_poles(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        let mut ims: Vec<f64> = self
            .pole_roots()
            .into_iter()
            .filter(|r| r.re == 0.0)
            .map(|r| r.im)
            .collect();
        ims.sort_by(f64::total_cmp);
        for b in ims {
            match out.last() {
                Some(&prev) if (b - prev).abs() <= 1e-12 * prev.abs().max(1.0) => {}
                _ => out.push(b),
            }
        }
        // Conjugate pairs must mirror exactly.
        let n = out.len();
        for i in 0..n / 2 {
            let m = 0.5 * (out[n - 1 - i] - out[i]);
            out[i] = -m;
            out[n - 1 - i] = m;
        }
        if n % 2 == 1 {
            out[n / 2] = 0.0;
        }
        out
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        let num = self
            .zero_factors
            .iter()
            .fold(Complex64::new(self.gain, 0.0), |acc, f| acc * f.eval(s));
        let den = self
            .pole_factors
            .iter()
            .fold(s.powu(self.integrator_order), |acc, f| acc * f.eval(s));
        num / den
    }

    /// Rescales every factor so its leading coefficient is positive and its
    /// constant term is +-1 (or, with no constant term, so it is monic), with
    /// the scale moved into the gain. Factors of `s` are split out: in the
    /// numerator as `s` zero factors, in the denominator as integrators.
    pub fn normalized(&self) -> Self {
        let mut gain = self.gain;
        let mut integrator_order = self.integrator_order;
        let mut zeros = Vec::new();
        let mut poles = Vec::new();
        for f in &self.zero_factors {
            let (k, origin, rest) = normalize_factor(f);
            gain *= k;
            zeros.extend(std::iter::repeat_n(RealPolynomial::new(vec![0.0, 1.0]), origin));
            zeros.extend(rest);
        }
        for f in &self.pole_factors {
            let (k, origin, rest) = normalize_factor(f);
            gain /= k;
            integrator_order += origin as u32;
            poles.extend(rest);
        }
        zeros.sort_by(cmp_factor);
        poles.sort_by(cmp_factor);
        Self {
            gain,
            integrator_order,
            zero_factors: zeros,
            pole_factors: poles,
        }
    }

    /// Equality of the normalized forms, coefficients compared within
    /// `rel_tol` relative error.
    pub fn structurally_eq(&self, other: &Self, rel_tol: f64) -> bool {
        let a = self.normalized();
        let b = other.normalized();
        let close = |x: f64, y: f64| (x - y).abs() <= rel_tol * x.abs().max(y.abs()).max(1e-300);
        let same_list = |p: &[RealPolynomial], q: &[RealPolynomial]| {
            p.len() == q.len()
                && p.iter().zip(q).all(|(f, g)| {
                    f.degree() == g.degree() && f.coeffs().iter().zip(g.coeffs()).all(|(x, y)| close(*x, *y))
                })
        };
        (close(a.gain, b.gain) || a.gain == b.gain)
            && a.integrator_order == b.integrator_order
            && same_list(&a.zero_factors, &b.zero_factors)
            && same_list(&a.pole_factors, &b.pole_factors)
    }
}

/// Degree first, then slowest root first (largest high-order coefficient).
fn cmp_factor(a: &RealPolynomial, b: &RealPolynomial) -> Ordering {
    a.degree().cmp(&b.degree()).then_with(|| {
        a.coeffs()
            .iter()
            .rev()
            .zip(b.coeffs().iter().rev())
            .map(|(x, y)| y.total_cmp(x))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Returns `(scale, origin_roots, normalized_factor)` with
/// `f = scale * s^origin_roots * normalized_factor`.
fn normalize_factor(f: &RealPolynomial) -> (f64, usize, Option<RealPolynomial>) {
    let c = f.coeffs();
    let origin = c.iter().take_while(|x| **x == 0.0).count();
    let rest = &c[origin..];
    if rest.len() == 1 {
        return (rest[0], origin, None);
    }
    let lead = *rest.last().unwrap();
    let k = lead.signum() * rest[0].abs();
    let scaled: Vec<f64> = rest.iter().map(|x| x / k).collect();
    (k, origin, Some(RealPolynomial::new(scaled)))
}

/// `num = gain * prod(zeros)`, `den = s^m * prod(poles)`.
pub fn expand(tf: &FactoredTF) -> RationalTF {
    let num = tf
        .zero_factors
        .iter()
        .fold(RealPolynomial::constant(tf.gain), |acc, f| acc.mul(f));
    let den = tf
        .pole_factors
        .iter()
        .fold(RealPolynomial::monomial(tf.integrator_order as usize), |acc, f| {
            acc.mul(f)
        });
    RationalTF { num, den }
}

/// Series connection `p * g`; gains multiply, factor lists concatenate and no
/// cancellation is attempted.
pub fn compose(p: &FactoredTF, g: &FactoredTF) -> FactoredTF {
    FactoredTF {
        gain: p.gain * g.gain,
        integrator_order: p.integrator_order + g.integrator_order,
        zero_factors: p.zero_factors.iter().chain(&g.zero_factors).cloned().collect(),
        pole_factors: p.pole_factors.iter().chain(&g.pole_factors).cloned().collect(),
    }
}

/// Zero/pole pairs whose locations coincide within `tol * max(1, |pole|)`.
pub fn cancel_check(tf: &FactoredTF, tol: f64) -> Vec<(Complex64, Complex64)> {
    let poles = tf.pole_roots();
    let mut pairs = Vec::new();
    for z in tf.zero_roots() {
        for p in &poles {
            if (z - p).norm() <= tol * p.norm().max(1.0) {
                pairs.push((z, *p));
            }
        }
    }
    pairs
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn fmt_factor(f: &RealPolynomial) -> String {
    let c = f.coeffs();
    if c == [0.0, 1.0] {
        return "s".to_string();
    }
    let mut out = String::new();
    let has_const = c[0] != 0.0;
    for k in (1..c.len()).rev() {
        let ck = c[k];
        if ck == 0.0 {
            continue;
        }
        let sign = if ck < 0.0 {
            "-"
        } else if out.is_empty() {
            ""
        } else {
            "+"
        };
        let pow = if k == 1 { "s".to_string() } else { format!("s^{k}") };
        let monic = ck.abs() == 1.0 && !has_const && k == c.len() - 1;
        if monic {
            out.push_str(&format!("{sign}{pow}"));
        } else {
            out.push_str(&format!("{sign}{pow}/{}", fmt_num(1.0 / ck.abs())));
        }
    }
    if has_const {
        let sign = if c[0] < 0.0 { "-" } else { "+" };
        out.push_str(&format!("{sign}{}", fmt_num(c[0].abs())));
    }
    out
}

fn fmt_product(integrators: u32, factors: &[RealPolynomial]) -> (usize, String) {
    let mut items = Vec::new();
    match integrators {
        0 => {}
        1 => items.push("s".to_string()),
        m => items.push(format!("s^{m}")),
    }
    for f in factors {
        items.push(format!("({})", fmt_factor(f)));
    }
    (items.len(), items.concat())
}

/// Canonical printer: normalized gain, numerator factors, then `/` and the
/// denominator, e.g. `-5*(s/2-1)/(s(s/1+1))`. `parse_tf` reads it back.
impl fmt::Display for FactoredTF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.normalized();
        let origin_zeros = n.zero_factors.iter().filter(|z| z.coeffs() == [0.0, 1.0]).count() as u32;
        let other_zeros: Vec<RealPolynomial> = n
            .zero_factors
            .iter()
            .filter(|z| z.coeffs() != [0.0, 1.0])
            .cloned()
            .collect();
        write!(f, "{}", fmt_num(n.gain))?;
        let (count, num) = fmt_product(origin_zeros, &other_zeros);
        if count > 0 {
            write!(f, "*{num}")?;
        }
        let (count, den) = fmt_product(n.integrator_order, &n.pole_factors);
        match count {
            0 => Ok(()),
            1 => write!(f, "/{den}"),
            _ => write!(f, "/({den})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> RealPolynomial {
        RealPolynomial::new(c.to_vec())
    }

    fn three_lags() -> FactoredTF {
        parse_tf("5/((s/1+1)(s/2+1)(s/3+1))").unwrap()
    }

    #[test]
    fn expand_three_lags() {
        let r = expand(&three_lags());
        assert_eq!(r.num.coeffs(), &[5.0]);
        let want = [1.0, 11.0 / 6.0, 1.0, 1.0 / 6.0];
        for (a, b) in r.den.coeffs().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn expand_unity_and_integrator() {
        let r = expand(&FactoredTF::constant(1.0));
        assert_eq!(r.num.coeffs(), &[1.0]);
        assert_eq!(r.den.coeffs(), &[1.0]);
        let type_one = parse_tf("1/(s(s/0.5+1)(s/2+1))").unwrap();
        assert_eq!(expand(&type_one).den.coeffs(), &[0.0, 1.0, 2.5, 1.0]);
    }

    #[test]
    fn compose_identity_and_product() {
        let tf = three_lags();
        assert_eq!(compose(&tf, &FactoredTF::constant(1.0)), tf);
        let a = FactoredTF::new(2.0, 0, vec![], vec![p(&[1.0, 1.0])]).unwrap();
        let b = FactoredTF::new(3.0, 0, vec![p(&[4.0, 1.0])], vec![]).unwrap();
        let c = compose(&a, &b);
        assert_eq!(c.gain, 6.0);
        assert_eq!(c.zero_factors, vec![p(&[4.0, 1.0])]);
        assert_eq!(c.pole_factors, vec![p(&[1.0, 1.0])]);
    }

    #[test]
    fn compose_split_plant_matches_parse() {
        let plant = parse_tf("5/(s+1)").unwrap();
        let rest = parse_tf("1/((s/2+1)(s/3+1))").unwrap();
        assert!(compose(&plant, &rest).structurally_eq(&three_lags(), 1e-12));
    }

    #[test]
    fn cancel_check_cases() {
        assert!(cancel_check(&three_lags(), 1e-6).is_empty());
        let tf = parse_tf("(s-1)/((s-1)(s+2))").unwrap();
        let pairs = cancel_check(&tf, 1e-6);
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].0 - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let tf = parse_tf("(s-1.0000000001)/(s-1)").unwrap();
        assert_eq!(cancel_check(&tf, 1e-6).len(), 1);
    }

    #[test]
    fn invalid_factor_rejected() {
        assert!(FactoredTF::new(1.0, 0, vec![p(&[1.0])], vec![]).is_err());
        assert!(FactoredTF::new(1.0, 0, vec![], vec![p(&[1.0, 0.0, 0.0, 1.0])]).is_err());
    }

    #[test]
    fn printer_matches_factored_notation() {
        assert_eq!(three_lags().to_string(), "5/((s/1+1)(s/2+1)(s/3+1))");
        let type_one_nmp = parse_tf("-5*(s/2-1)/(s*(s/1+1))").unwrap();
        assert_eq!(type_one_nmp.to_string(), "-5*(s/2-1)/(s(s/1+1))");
        assert_eq!(FactoredTF::constant(1.0).to_string(), "1");
        let quad = parse_tf("1/(s^2+0.5*s+4)").unwrap();
        assert_eq!(quad.to_string(), "0.25/(s^2/4+s/8+1)");
    }

    #[test]
    fn normalization_moves_scale_into_gain() {
        let tf = parse_tf("(2s+4)/(3s)").unwrap();
        let n = tf.normalized();
        assert_eq!(n.integrator_order, 1);
        assert!((n.gain - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(n.zero_factors, vec![p(&[1.0, 0.5])]);
    }

    #[test]
    fn imag_axis_poles_detected() {
        let tf = parse_tf("1/(s(s^2+4))").unwrap();
        assert_eq!(tf.imag_axis_poles(), vec![-2.0, 0.0, 2.0]);
        assert!(three_lags().imag_axis_poles().is_empty());
    }

    #[test]
    fn relative_degree_counts_integrators() {
        let tf = parse_tf("-5*(s/2-1)/(s*(s/1+1))").unwrap();
        assert_eq!(tf.relative_degree(), 1);
        assert!(parse_tf("(s+1)(s+2)/(s+3)").unwrap().relative_degree() < 0);
    }
}
