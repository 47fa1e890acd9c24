//! Seeded differential testing of [`assess`] against [`oracle_assess`].

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{assess, oracle_assess, Tolerances, Verdict};
use crate::contour::ContourConfig;
use crate::poly::RealPolynomial;
use crate::tf::{expand, FactoredTF};

#[derive(Debug, Clone, PartialEq)]
pub struct Disagreement {
    pub original: FactoredTF,
    pub shrunk: FactoredTF,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FuzzReport {
    pub agreements: usize,
    pub skipped: usize,
    pub disagreements: Vec<Disagreement>,
}

enum Outcome {
    Agree,
    Skip,
    Disagree(String),
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn random_factors<R: Rng>(rng: &mut R, degree: usize) -> Vec<RealPolynomial> {
    let mut out = Vec::new();
    let mut d = 0;
    while d < degree {
        if degree - d >= 2 && rng.gen_bool(0.25) {
            let wn = log_uniform(rng, 0.1, 10.0);
            let zeta = rng.gen_range(0.05..0.9) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            out.push(RealPolynomial::new(vec![1.0, 2.0 * zeta / wn, 1.0 / (wn * wn)]));
            d += 2;
        } else {
            let a = log_uniform(rng, 0.1, 10.0);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            out.push(RealPolynomial::new(vec![sign, 1.0 / a]));
            d += 1;
        }
    }
    out
}

/// A random proper loop function of total pole order between 1 and
/// `max_order`.
pub fn random_plant<R: Rng>(rng: &mut R, max_order: usize) -> FactoredTF {
    let max_order = max_order.max(1);
    let integrators = rng.gen_range(0..=1usize);
    let pole_deg = rng.gen_range((1 - integrators.min(1))..=(max_order - integrators));
    let order = pole_deg + integrators;
    let zero_deg = rng.gen_range(0..=order);
    let gain = log_uniform(rng, 0.1, 100.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    FactoredTF {
        gain,
        integrator_order: integrators as u32,
        zero_factors: random_factors(rng, zero_deg),
        pole_factors: random_factors(rng, pole_deg),
    }
}

fn check(tf: &FactoredTF) -> Outcome {
    let cfg = ContourConfig::for_tf(tf);
    let oracle = match oracle_assess(tf) {
        Ok(o) => o,
        Err(_) => return Outcome::Skip,
    };
    let r = expand(tf);
    let q = r.num.add(&r.den).trimmed(1e-14);
    if q.degree() > 0 {
        match q.roots() {
            Ok(rs) if rs.roots.iter().all(|z| z.norm() < 0.1 * cfg.big_radius) => {}
            _ => return Outcome::Skip,
        }
    }
    match assess(tf, &cfg, &Tolerances::default()) {
        Err(e) => Outcome::Disagree(e.to_string()),
        Ok(rep) => match rep.verdict {
            Verdict::Marginal(_) => Outcome::Skip,
            _ => {
                let n_z = rep.n_z.unwrap_or(-1);
                if n_z == oracle.closed_loop_rhp as i64 && n_z == oracle.routh_rhp as i64 {
                    Outcome::Agree
                } else {
                    Outcome::Disagree(format!(
                        "n_z = {n_z}, oracle roots = {}, Routh = {}",
                        oracle.closed_loop_rhp, oracle.routh_rhp
                    ))
                }
            }
        },
    }
}

/// Greedily drops factors while the instance keeps disagreeing.
pub fn shrink(tf: &FactoredTF) -> FactoredTF {
    let fails = |t: &FactoredTF| matches!(check(t), Outcome::Disagree(_));
    let mut cur = tf.clone();
    'outer: loop {
        let mut candidates = Vec::new();
        for i in 0..cur.zero_factors.len() {
            let mut c = cur.clone();
            c.zero_factors.remove(i);
            candidates.push(c);
        }
        for i in 0..cur.pole_factors.len() {
            let mut c = cur.clone();
            c.pole_factors.remove(i);
            candidates.push(c);
        }
        if cur.integrator_order > 0 {
            let mut c = cur.clone();
            c.integrator_order -= 1;
            candidates.push(c);
        }
        for c in candidates {
            if fails(&c) {
                cur = c;
                continue 'outer;
            }
        }
        return cur;
    }
}

pub fn verify_instances(instances: &[FactoredTF]) -> FuzzReport {
    let outcomes: Vec<Outcome> = instances.par_iter().map(check).collect();
    let mut report = FuzzReport::default();
    for (tf, o) in instances.iter().zip(outcomes) {
        match o {
            Outcome::Agree => report.agreements += 1,
            Outcome::Skip => report.skipped += 1,
            Outcome::Disagree(reason) => report.disagreements.push(Disagreement {
                original: tf.clone(),
                shrunk: shrink(tf),
                reason,
            }),
        }
    }
    report
}

/// The `i`-th random instance of a seeded run.
pub fn fuzz_instance(seed: u64, index: u64, max_order: usize) -> FactoredTF {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    random_plant(&mut rng, max_order)
}

pub fn fuzz_verify(seed: u64, count: usize, max_order: usize) -> FuzzReport {
    let instances: Vec<FactoredTF> = (0..count as u64).map(|i| fuzz_instance(seed, i, max_order)).collect();
    verify_instances(&instances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf::parse_tf;

    #[test]
    fn generator_is_deterministic_and_proper() {
        for i in 0..200 {
            let a = fuzz_instance(7, i, 6);
            assert_eq!(a, fuzz_instance(7, i, 6));
            assert!(a.is_proper());
            assert!((1..=6).contains(&a.pole_degree()));
        }
        assert_ne!(fuzz_instance(7, 0, 6), fuzz_instance(8, 0, 6));
    }

    #[test]
    fn fixture_instance_agrees() {
        let tf = parse_tf("5/((s/1+1)(s/2+1)(s/3+1))").unwrap();
        let r = verify_instances(&[tf]);
        assert_eq!((r.agreements, r.skipped, r.disagreements.len()), (1, 0, 0));
    }

    #[test]
    fn marginal_instances_are_skipped() {
        let tf = parse_tf("10/((s/1+1)(s/2+1)(s/3+1))").unwrap();
        let r = verify_instances(&[tf]);
        assert_eq!((r.agreements, r.skipped), (0, 1));
    }

    #[test]
    fn small_run_agrees() {
        let r = fuzz_verify(3, 50, 4);
        assert!(r.disagreements.is_empty(), "{:?}", r.disagreements);
        assert!(r.agreements > 0);
    }
}
