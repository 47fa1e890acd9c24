//! Curve dumps as CSV.

use std::io::Write;

use crossings::nichols::wrap_single;
use crossings::MappedCurve;

use crate::report::r12;
use crate::Kind;

fn num(x: f64) -> String {
    let x = r12(x);
    if x.is_finite() {
        x.to_string()
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Writes `segment,t,omega,re,im,mag_db,phase_deg`, one row per sample.
pub fn write_csv<W: Write>(out: W, curve: &MappedCurve, kind: Kind) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["segment", "t", "omega", "re", "im", "mag_db", "phase_deg"])?;
    for p in &curve.points {
        let phase = match kind {
            Kind::NicholsSingle => wrap_single(p.phase_deg),
            _ => p.phase_deg,
        };
        w.write_record([
            p.segment.name().to_string(),
            num(p.t),
            p.omega.map(num).unwrap_or_default(),
            num(p.value.re),
            num(p.value.im),
            num(p.mag_db),
            num(phase),
        ])?;
    }
    w.flush()?;
    Ok(())
}
