//! Real-coefficient polynomials: evaluation, simultaneous root finding and
//! Routh-Hurwitz right-half-plane counting.
//!
//! Coefficients are stored in ascending degree order, `coeffs[k]` multiplies
//! `s^k`. This module is also the engine behind the closed-loop oracle, so it
//! deliberately shares nothing with the frequency-response code.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// A root whose real part satisfies `|re| <= MARGINAL_BAND * max(1, |root|)`
/// is considered to sit on the imaginary axis.
pub const MARGINAL_BAND: f64 = 1e-9;

pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("the zero polynomial has no well-defined roots")]
    ZeroPolynomial,
    #[error("polynomial must have degree >= 1, got a constant")]
    Constant,
    #[error("root finder did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Routh array is indeterminate: a root lies on the imaginary axis")]
    Indeterminate,
}

#[derive(Clone, PartialEq)]
pub struct RealPolynomial {
    coeffs: Vec<f64>,
}

impl RealPolynomial {
    /// Builds a polynomial from ascending coefficients, trimming zero
    /// leading coefficients. An empty slice gives the zero polynomial.
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut coeffs = coeffs.into();
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// `s^n`
    pub fn monomial(n: usize) -> Self {
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        Self { coeffs: c }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        poly_eval(self, s)
    }

    /// Evaluates `sum |c_k| |s|^k`, the natural rounding scale of `eval(s)`.
    pub fn eval_scale(&self, s: Complex64) -> f64 {
        let r = s.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.abs())
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::constant(0.0);
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect::<Vec<_>>(),
        )
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect::<Vec<_>>())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let out: Vec<f64> = (0..n)
            .map(|k| self.coeffs.get(k).unwrap_or(&0.0) + other.coeffs.get(k).unwrap_or(&0.0))
            .collect();
        Self::new(out)
    }

    /// Drops leading coefficients that are negligible relative to the largest
    /// one. Used after `num + den` where leading terms may cancel.
    pub fn trimmed(&self, rel_tol: f64) -> Self {
        let cut = rel_tol * self.max_abs_coeff();
        let mut c = self.coeffs.clone();
        while c.len() > 1 && c.last().unwrap().abs() <= cut {
            c.pop();
        }
        Self::new(c)
    }

    pub fn roots(&self) -> Result<RootSet, PolyError> {
        poly_roots(self, DEFAULT_ROOT_TOL, DEFAULT_MAX_ITER)
    }

    /// Closed-form roots for degree <= 2, used for factored transfer functions.
    pub fn small_roots(&self) -> Vec<Complex64> {
        match self.coeffs.as_slice() {
            [_] => vec![],
            [c0, c1] => vec![Complex64::new(-c0 / c1, 0.0)],
            [c, b, a] => {
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    let re = -b / (2.0 * a);
                    let im = (-disc).sqrt() / (2.0 * a).abs();
                    vec![Complex64::new(re, -im), Complex64::new(re, im)]
                } else {
                    // Stable form avoiding cancellation.
                    let q = -0.5 * (b + b.signum() * disc.sqrt());
                    if q == 0.0 {
                        vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]
                    } else {
                        let mut r = [q / a, c / q];
                        r.sort_by(|x, y| x.total_cmp(y));
                        vec![Complex64::new(r[0], 0.0), Complex64::new(r[1], 0.0)]
                    }
                }
            }
            _ => self.roots().map(|r| r.roots).unwrap_or_default(),
        }
    }
}

impl fmt::Debug for RealPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RealPolynomial{:?}", self.coeffs)
    }
}

/// Horner evaluation of `sum coeffs[k] * s^k`.
pub fn poly_eval(p: &RealPolynomial, s: Complex64) -> Complex64 {
    p.coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    /// max |p(root)|
    pub residual: f64,
}

impl RootSet {
    pub fn count_rhp(&self) -> usize {
        self.roots.iter().filter(|r| r.re > 0.0).count()
    }

    /// True when some root lies inside the imaginary-axis marginal band.
    pub fn has_marginal(&self) -> bool {
        self.roots.iter().any(|r| is_marginal(*r))
    }
}

pub fn is_marginal(r: Complex64) -> bool {
    r.re.abs() <= MARGINAL_BAND * r.norm().max(1.0)
}

/// Aberth-Ehrlich simultaneous iteration.
///
/// Initial guesses lie on a circle of radius `1 + max|c_k| / |lead|`, offset
/// by a fixed angle so that no guess is real. A root counts as converged when
/// `|p(z)|` is within a small multiple of the evaluation rounding scale or its
/// correction is below `tol * (1 + |z|)`.
pub fn poly_roots(p: &RealPolynomial, tol: f64, max_iter: usize) -> Result<RootSet, PolyError> {
    if p.is_zero() {
        return Err(PolyError::ZeroPolynomial);
    }
    let n = p.degree();
    if n == 0 {
        return Err(PolyError::Constant);
    }
    let lead = p.leading();
    let monic = p.scale(1.0 / lead);
    let dp = monic.derivative();
    let radius = 1.0 + p.max_abs_coeff() / lead.abs();
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, 2.0 * PI * k as f64 / n as f64 + 0.4))
        .collect();
    let mut done = vec![false; n];

    let mut iter = 0;
    while iter < max_iter && done.iter().any(|d| !d) {
        iter += 1;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let zi = z[i];
            let pv = monic.eval(zi);
            if pv.norm() <= 8.0 * f64::EPSILON * monic.eval_scale(zi) {
                done[i] = true;
                continue;
            }
            let ratio = pv / dp.eval(zi);
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = zi - z[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let denom = Complex64::new(1.0, 0.0) - ratio * repulsion;
            let step = if denom.is_finite() && denom.norm() > 0.0 {
                ratio / denom
            } else {
                ratio
            };
            if !step.is_finite() {
                // Perturb off a critical point of p.
                z[i] = zi + Complex64::new(1e-8, 1e-8) * (1.0 + zi.norm());
                continue;
            }
            z[i] = zi - step;
            if step.norm() <= tol * (1.0 + z[i].norm()) {
                done[i] = true;
            }
        }
    }

    if done.iter().any(|d| !d) {
        let residual = z
            .iter()
            .map(|zi| monic.eval(*zi).norm() / monic.eval_scale(*zi).max(1.0))
            .fold(0.0, f64::max);
        // Multiple roots converge linearly; accept a solution whose backward
        // error is already at rounding level.
        if residual > 1e3 * tol {
            return Err(PolyError::NoConvergence {
                iterations: iter,
                residual,
            });
        }
    }

    let roots = pair_conjugates(z);
    let residual = roots.iter().map(|r| p.eval(*r).norm()).fold(0.0, f64::max);
    Ok(RootSet { roots, residual })
}

/// Enforces exact conjugate symmetry: each root is matched with the closest
/// remaining root to its conjugate and the pair is averaged; a root matched
/// with itself is made real.
fn pair_conjugates(mut z: Vec<Complex64>) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(z.len());
    while let Some(a) = z.pop() {
        let target = a.conj();
        let self_dist = (a - target).norm();
        let best = z
            .iter()
            .enumerate()
            .map(|(j, b)| (j, (b - target).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1));
        match best {
            Some((j, d)) if d < self_dist => {
                let b = z.swap_remove(j);
                let re = 0.5 * (a.re + b.re);
                let im = 0.5 * (a.im.abs() + b.im.abs());
                out.push(Complex64::new(re, im));
                out.push(Complex64::new(re, -im));
            }
            _ => out.push(Complex64::new(a.re, 0.0)),
        }
    }
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    out
}

/// Counts roots with strictly positive real part via the Routh array.
///
/// A zero leading entry in a row that is otherwise nonzero is replaced by a
/// small positive epsilon. An all-zero row is replaced by the derivative of
/// the auxiliary polynomial formed from the row above; if that auxiliary
/// polynomial has imaginary-axis roots the count is [`PolyError::Indeterminate`].
pub fn routh_rhp_count(p: &RealPolynomial) -> Result<usize, PolyError> {
    if p.is_zero() {
        return Err(PolyError::ZeroPolynomial);
    }
    let n = p.degree();
    if n == 0 {
        return Err(PolyError::Constant);
    }
    let plus = routh_pass(p, 1.0)?;
    let minus = routh_pass(p, -1.0)?;
    if plus != minus {
        return Err(PolyError::Indeterminate);
    }
    Ok(plus)
}

fn routh_pass(p: &RealPolynomial, eps_sign: f64) -> Result<usize, PolyError> {
    let n = p.degree();
    // Highest power first.
    let c: Vec<f64> = p.coeffs().iter().rev().copied().collect();
    let width = n / 2 + 1;
    let seed_row = |start: usize| -> Vec<f64> {
        let mut r: Vec<f64> = c.iter().skip(start).step_by(2).copied().collect();
        r.resize(width + 1, 0.0);
        r
    };
    let max_abs = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let coeff_scale = p.max_abs_coeff();
    let mut rows: Vec<Vec<f64>> = vec![seed_row(0), seed_row(1)];
    // Magnitude of the data each row was computed from, for zero tests.
    let mut scales: Vec<f64> = vec![coeff_scale, coeff_scale];
    let mut aux_degrees: Vec<usize> = Vec::new();

    for i in 1..=n {
        let is_zero = |v: f64, scale: f64| v.abs() <= 1e-10 * scale;
        if max_abs(&rows[i]) <= 1e-10 * scales[i] {
            // All-zero row: replace with the derivative of the auxiliary
            // polynomial built from the row above (power n - i + 1).
            let aux_power = n - i + 1;
            if aux_power == 1 {
                // Auxiliary polynomial c*s: a root at the origin.
                return Err(PolyError::Indeterminate);
            }
            aux_degrees.push(aux_power);
            let above = rows[i - 1].clone();
            for (j, slot) in rows[i].iter_mut().enumerate() {
                let power = aux_power as isize - 2 * j as isize;
                *slot = if power >= 1 { above[j] * power as f64 } else { 0.0 };
            }
            scales[i] = max_abs(&rows[i]);
        }
        if is_zero(rows[i][0], scales[i]) {
            rows[i][0] = eps_sign * 1e-9 * scales[i].max(coeff_scale);
        }
        if i == n {
            break;
        }
        let (above, cur) = (&rows[i - 1], &rows[i]);
        let mut next = vec![0.0; width + 1];
        for j in 0..width {
            next[j] = (cur[0] * above[j + 1] - above[0] * cur[j + 1]) / cur[0];
        }
        let scale = max_abs(above).max(max_abs(cur) * max_abs(above) / cur[0].abs());
        rows.push(next);
        scales.push(scale);
    }

    let first: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let sign_changes = |col: &[f64]| col.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    for m in aux_degrees {
        // Rows for powers m..0 describe the auxiliary polynomial, whose roots
        // are symmetric about the origin; whatever is not a left/right pair
        // sits on the imaginary axis.
        let rhp_pairs = sign_changes(&first[n - m..]);
        if m > 2 * rhp_pairs {
            return Err(PolyError::Indeterminate);
        }
    }
    Ok(sign_changes(&first))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn expand_real_roots(roots: &[f64]) -> RealPolynomial {
        roots.iter().fold(RealPolynomial::one(), |acc, r| {
            acc.mul(&RealPolynomial::new(vec![-r, 1.0]))
        })
    }

    #[test]
    fn eval_constant_and_quadratic() {
        assert_eq!(poly_eval(&RealPolynomial::constant(1.0), c(3.0, -7.0)), c(1.0, 0.0));
        let p = RealPolynomial::new(vec![-1.0, 0.0, 1.0]);
        assert_eq!(poly_eval(&p, c(0.0, 1.0)), c(-2.0, 0.0));
    }

    #[test]
    fn new_trims_leading_zeros() {
        assert_eq!(RealPolynomial::new(vec![1.0, 2.0, 0.0, 0.0]).degree(), 1);
        assert!(RealPolynomial::new(Vec::<f64>::new()).is_zero());
    }

    #[test]
    fn roots_of_s2_minus_1() {
        let r = poly_roots(&RealPolynomial::new(vec![-1.0, 0.0, 1.0]), 1e-12, 200).unwrap();
        assert_eq!(r.roots.len(), 2);
        assert!((r.roots[0] - c(-1.0, 0.0)).norm() < 1e-12);
        assert!((r.roots[1] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn roots_of_constructed_cubic() {
        let p = expand_real_roots(&[-1.0, -2.0, -3.0]);
        let r = p.roots().unwrap();
        for (got, want) in r.roots.iter().zip([-3.0, -2.0, -1.0]) {
            assert!((got - c(want, 0.0)).norm() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn closed_loop_cubic_has_two_rhp_roots() {
        let p = RealPolynomial::new(vec![96.0, 11.0, 6.0, 1.0]);
        let r = p.roots().unwrap();
        assert_eq!(r.count_rhp(), 2);
        assert_eq!(routh_rhp_count(&p).unwrap(), 2);
        for root in &r.roots {
            assert!(poly_eval(&p, *root).norm() < 1e-9 * p.max_abs_coeff());
        }
    }

    #[test]
    fn zero_polynomial_is_rejected() {
        assert_eq!(
            poly_roots(&RealPolynomial::constant(0.0), 1e-12, 200),
            Err(PolyError::ZeroPolynomial)
        );
        assert_eq!(
            poly_roots(&RealPolynomial::constant(3.0), 1e-12, 200),
            Err(PolyError::Constant)
        );
    }

    #[test]
    fn repeated_roots_converge() {
        let p = expand_real_roots(&[-1.0, -1.0, -1.0, 2.0]);
        let r = p.roots().unwrap();
        assert_eq!(r.roots.len(), 4);
        assert_eq!(r.count_rhp(), 1);
    }

    #[test]
    fn routh_simple_cases() {
        assert_eq!(routh_rhp_count(&RealPolynomial::new(vec![1.0, 1.0, 1.0])).unwrap(), 0);
        assert_eq!(routh_rhp_count(&RealPolynomial::new(vec![-2.0, 1.0, 1.0])).unwrap(), 1);
        // s^2 - 1: zero row handled through the auxiliary polynomial.
        assert_eq!(routh_rhp_count(&RealPolynomial::new(vec![-1.0, 0.0, 1.0])).unwrap(), 1);
    }

    #[test]
    fn routh_epsilon_row() {
        // s^4 + s^3 + 2s^2 + 2s + 3: zero first-column entry, two RHP roots.
        let p = RealPolynomial::new(vec![3.0, 2.0, 2.0, 1.0, 1.0]);
        assert_eq!(routh_rhp_count(&p).unwrap(), 2);
        assert_eq!(p.roots().unwrap().count_rhp(), 2);
    }

    #[test]
    fn routh_flags_imaginary_axis_roots() {
        // (s+1)(s^2+1)
        let p = RealPolynomial::new(vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(routh_rhp_count(&p), Err(PolyError::Indeterminate));
        // (s+6)(s^2+11): the marginal closed loop of the first fixture at K=10.
        let p = RealPolynomial::new(vec![66.0, 11.0, 6.0, 1.0]);
        assert_eq!(routh_rhp_count(&p), Err(PolyError::Indeterminate));
        // s^2 + 4
        assert_eq!(
            routh_rhp_count(&RealPolynomial::new(vec![4.0, 0.0, 1.0])),
            Err(PolyError::Indeterminate)
        );
    }

    #[test]
    fn small_roots_quadratic_forms() {
        let r = RealPolynomial::new(vec![4.0, 0.0, 1.0]).small_roots();
        assert_eq!(r, vec![c(0.0, -2.0), c(0.0, 2.0)]);
        let r = RealPolynomial::new(vec![2.0, -3.0, 1.0]).small_roots();
        assert_eq!(r, vec![c(1.0, 0.0), c(2.0, 0.0)]);
        let r = RealPolynomial::new(vec![1.0, 0.5]).small_roots();
        assert_eq!(r, vec![c(-2.0, 0.0)]);
    }
}
