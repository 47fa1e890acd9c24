//! Closed-loop stability from open-loop frequency response, by counting
//! signed crossings on the Nyquist diagram and on Nichols charts.
//!
//! ```
//! use crossings::{analyze, Verdict};
//!
//! let report = analyze("15/((s/1+1)(s/2+1)(s/3+1))").unwrap();
//! assert_eq!(report.verdict, Verdict::Unstable(2));
//! ```

pub mod contour;
pub mod nichols;
pub mod poly;
pub mod response;
pub mod tf;
pub mod verdict;

pub use contour::{build_contour, refine, ContourConfig, NyquistContour, Segment};
pub use nichols::{detect_nichols_crossings, to_nichols, NicholsCurve, NicholsMode};
pub use poly::{poly_eval, poly_roots, routh_rhp_count, RealPolynomial};
pub use response::{
    axis_intersections, crossing_sum, cusp_sign, detect_ray_crossings, map_response, winding_number, Chart, Crossing,
    CrossingKind, CuspAt, MappedCurve,
};
pub use tf::{parse_tf, FactoredTF};
pub use verdict::{assess, gain_sweep, oracle_assess, StabilityReport, Tolerances, Verdict};

/// Parses `text` and assesses it with default contour settings.
pub fn analyze(text: &str) -> Result<StabilityReport, Box<dyn std::error::Error + Send + Sync>> {
    let tf = parse_tf(text)?;
    let cfg = ContourConfig::for_tf(&tf);
    Ok(assess(&tf, &cfg, &Tolerances::default())?)
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/transfer-functions.md")]
    mod transfer_functions {}
    #[doc = include_str!("../../../book/src/contour.md")]
    mod contour {}
    #[doc = include_str!("../../../book/src/nyquist.md")]
    mod nyquist {}
    #[doc = include_str!("../../../book/src/nichols.md")]
    mod nichols {}
    #[doc = include_str!("../../../book/src/verdict.md")]
    mod verdict {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
