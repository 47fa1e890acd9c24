mod export;
mod report;
mod svg;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crossings::nichols::DEFAULT_TOL_DB;
use crossings::tf::expand;
use crossings::verdict::{fuzz_verify, VerdictError};
use crossings::{
    assess, build_contour, detect_nichols_crossings, detect_ray_crossings, gain_sweep, map_response, parse_tf, refine,
    to_nichols, ContourConfig, FactoredTF, MappedCurve, NicholsMode, Tolerances,
};

use report::{r12, ComplexDoc, ReportDocument, SweepDocument, SweepRow, VerdictDoc, VerifyDocument, SCHEMA_VERSION};

#[derive(Parser)]
#[command(
    name = "crossings",
    version,
    about = "Closed-loop stability from open-loop crossings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a transfer function and print its canonical form.
    Parse {
        #[arg(long, allow_hyphen_values = true)]
        tf: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run the full stability analysis.
    Analyze {
        #[command(flatten)]
        args: TfArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Write the mapped contour as CSV.
    Curve {
        #[command(flatten)]
        args: TfArgs,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a Nyquist or Nichols chart as SVG.
    Plot {
        #[command(flatten)]
        args: TfArgs,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 640)]
        width: u32,
        #[arg(long, default_value_t = 480)]
        height: u32,
        /// Overlay one curve per gain.
        #[arg(long, allow_hyphen_values = true)]
        gains: Option<String>,
    },
    /// Assess the loop at several gains.
    Sweep {
        #[command(flatten)]
        args: TfArgs,
        /// "a,b,c" or "lo:hi:n" (n log-spaced points).
        #[arg(long, allow_hyphen_values = true)]
        gains: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Differential test against the closed-loop root oracle.
    Verify {
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        max_order: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Args)]
struct TfArgs {
    /// Loop transfer function, e.g. "5/((s/1+1)(s/2+1)(s/3+1))".
    #[arg(long, allow_hyphen_values = true)]
    tf: String,
    /// Replaces the gain of the parsed expression.
    #[arg(long, allow_negative_numbers = true)]
    gain: Option<f64>,
    /// Closing arc radius.
    #[arg(long)]
    radius: Option<f64>,
    /// Detour radius around imaginary-axis poles.
    #[arg(long)]
    indent: Option<f64>,
    /// Minimum samples per decade on the imaginary axis.
    #[arg(long)]
    samples: Option<usize>,
    /// Refinement bound on phase change between samples, degrees.
    #[arg(long)]
    refine_deg: Option<f64>,
    /// Relative band around the critical point.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Nyquist,
    NicholsSingle,
    NicholsMulti,
}

enum Failure {
    Io(String),
    Usage(String),
    Numeric(String),
    Undecided,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Undecided => 4,
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<VerdictError> for Failure {
    fn from(e: VerdictError) -> Self {
        match e {
            VerdictError::InvalidGain(_)
            | VerdictError::Contour(crossings::contour::ContourError::InvalidConfig(_)) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

struct Setup {
    tf: FactoredTF,
    cfg: ContourConfig,
    tol: Tolerances,
}

impl TfArgs {
    fn setup(&self) -> Result<Setup, Failure> {
        let mut tf = parse_tf(&self.tf).map_err(|e| Failure::Usage(e.to_string()))?;
        if let Some(k) = self.gain {
            if !k.is_finite() || k == 0.0 {
                return Err(Failure::Usage(format!("gain must be finite and nonzero, got {k}")));
            }
            tf = tf.with_gain(k);
        }
        let cfg = self.config_for(&tf)?;
        let mut tol = Tolerances::default();
        if let Some(t) = self.tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(Failure::Usage(format!("--tol must lie in (0, 1), got {t}")));
            }
            tol.critical = t;
        }
        Ok(Setup { tf, cfg, tol })
    }

    fn config_for(&self, tf: &FactoredTF) -> Result<ContourConfig, Failure> {
        let mut cfg = ContourConfig::for_tf(tf);
        if let Some(r) = self.radius {
            cfg.big_radius = r;
        }
        if let Some(e) = self.indent {
            cfg.indent_radius = e;
        }
        if let Some(n) = self.samples {
            cfg.min_samples_per_decade = n;
        }
        if let Some(d) = self.refine_deg {
            cfg.max_refine_angle_deg = d;
        }
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn parse_gains(text: &str) -> Result<Vec<f64>, Failure> {
    let bad = |m: String| Failure::Usage(format!("--gains: {m}"));
    let text = text.trim();
    if text.is_empty() {
        return Err(bad("no gains given".into()));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("not a number: {s:?}")));
    let gains = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(bad("range form is lo:hi:n".into()));
        };
        let (lo, hi) = (num(lo)?, num(hi)?);
        let n: usize = n.trim().parse().map_err(|_| bad(format!("bad count {n:?}")))?;
        if n == 0 || lo * hi <= 0.0 {
            return Err(bad("range needs n >= 1 and bounds of the same sign".into()));
        }
        if n == 1 {
            vec![lo]
        } else {
            let (a, b) = (lo.abs().ln(), hi.abs().ln());
            (0..n)
                .map(|i| lo.signum() * (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if let Some(k) = gains.iter().find(|k| !k.is_finite() || **k == 0.0) {
        return Err(bad(format!("gain must be finite and nonzero, got {k}")));
    }
    Ok(gains)
}

fn mapped_curve(tf: &FactoredTF, cfg: &ContourConfig) -> Result<MappedCurve, Failure> {
    let numeric = |e: String| Failure::Numeric(e);
    let c = build_contour(tf, cfg).map_err(|e| numeric(e.to_string()))?;
    let c = refine(&c, tf, cfg).map_err(|e| numeric(e.to_string()))?;
    map_response(tf, &c).map_err(|e| numeric(e.to_string()))
}

fn emit<T: Serialize>(doc: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, doc).map_err(|e| Failure::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct ParseDocument {
    schema_version: &'static str,
    tf_text: String,
    tf_canonical: String,
    gain: f64,
    integrator_order: u32,
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    poles: Vec<ComplexDoc>,
    zeros: Vec<ComplexDoc>,
}

fn cmd_parse(text: &str, format: Format) -> Result<(), Failure> {
    let tf = parse_tf(text).map_err(|e| Failure::Usage(e.to_string()))?;
    let r = expand(&tf);
    let doc = ParseDocument {
        schema_version: SCHEMA_VERSION,
        tf_text: text.to_string(),
        tf_canonical: tf.to_string(),
        gain: r12(tf.gain),
        integrator_order: tf.integrator_order,
        numerator: r.num.coeffs().iter().map(|c| r12(*c)).collect(),
        denominator: r.den.coeffs().iter().map(|c| r12(*c)).collect(),
        poles: tf.pole_roots().into_iter().map(Into::into).collect(),
        zeros: tf.zero_roots().into_iter().map(Into::into).collect(),
    };
    match format {
        Format::Json => emit(&doc),
        Format::Text => {
            let mut out = io::stdout().lock();
            writeln!(out, "canonical    {}", doc.tf_canonical)?;
            writeln!(out, "gain         {}", doc.gain)?;
            writeln!(out, "integrators  {}", doc.integrator_order)?;
            writeln!(out, "numerator    {:?}  (ascending powers)", doc.numerator)?;
            writeln!(out, "denominator  {:?}  (ascending powers)", doc.denominator)?;
            Ok(())
        }
    }
}

fn cmd_analyze(args: &TfArgs, format: Format) -> Result<(), Failure> {
    let Setup { tf, cfg, tol } = args.setup()?;
    let r = assess(&tf, &cfg, &tol)?;
    match format {
        Format::Json => emit(&ReportDocument::new(&args.tf, &r))?,
        Format::Text => write!(io::stdout().lock(), "{}", report::report_text(&args.tf, &r))?,
    }
    if r.verdict.is_marginal() {
        eprintln!("verdict is marginal: {}", report::verdict_text(&r.verdict));
        return Err(Failure::Undecided);
    }
    if let Err(e) = &r.oracle.counts {
        eprintln!("{e}");
        return Err(Failure::Undecided);
    }
    Ok(())
}

fn cmd_curve(args: &TfArgs, kind: Kind, out: &PathBuf) -> Result<(), Failure> {
    let Setup { tf, cfg, .. } = args.setup()?;
    let curve = mapped_curve(&tf, &cfg)?;
    let file = BufWriter::new(File::create(out)?);
    export::write_csv(file, &curve, kind).map_err(|e| Failure::Io(e.to_string()))
}

fn plot_series(
    tf: &FactoredTF,
    cfg: &ContourConfig,
    tol: &Tolerances,
    kind: Kind,
    label: String,
) -> Result<svg::Series, Failure> {
    let curve = mapped_curve(tf, cfg)?;
    let found = match kind {
        Kind::Nyquist => detect_ray_crossings(&curve, tol.critical),
        Kind::NicholsSingle => detect_nichols_crossings(&to_nichols(&curve, NicholsMode::Single), DEFAULT_TOL_DB),
        Kind::NicholsMulti => detect_nichols_crossings(&to_nichols(&curve, NicholsMode::Multiple), DEFAULT_TOL_DB),
    };
    let crossings = found.unwrap_or_else(|e| {
        eprintln!("{label}: crossings not marked: {e}");
        Vec::new()
    });
    Ok(svg::Series {
        label,
        curve,
        crossings,
    })
}

fn cmd_plot(
    args: &TfArgs,
    kind: Kind,
    out: &PathBuf,
    width: u32,
    height: u32,
    gains: Option<&str>,
) -> Result<(), Failure> {
    if width < 200 || height < 150 {
        return Err(Failure::Usage(
            "--width must be at least 200 and --height at least 150".into(),
        ));
    }
    let Setup { tf, cfg, tol } = args.setup()?;
    let series = match gains {
        None => vec![plot_series(&tf, &cfg, &tol, kind, format!("K = {}", r12(tf.gain)))?],
        Some(g) => parse_gains(g)?
            .into_iter()
            .map(|k| {
                let t = tf.with_gain(k);
                let cfg = args.config_for(&t)?;
                plot_series(&t, &cfg, &tol, kind, format!("K = {}", r12(k)))
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    let title = match kind {
        Kind::Nyquist => "Nyquist diagram",
        Kind::NicholsSingle => "Nichols chart (single sheet)",
        Kind::NicholsMulti => "Nichols chart (multiple sheets)",
    };
    let title = match gains {
        None => format!("{title}: {tf}"),
        Some(_) => format!("{title}: {}", args.tf),
    };
    let doc = svg::render(kind, &title, &series, width, height);
    std::fs::write(out, doc)?;
    Ok(())
}

fn cmd_sweep(args: &TfArgs, gains: &str, format: Format) -> Result<(), Failure> {
    let gains = parse_gains(gains)?;
    let Setup { tf, cfg, tol } = args.setup()?;
    let results = gain_sweep(&tf, &gains, &cfg, &tol);
    let rows: Vec<SweepRow> = results
        .iter()
        .map(|(k, r)| match r {
            Ok(r) => SweepRow {
                gain: r12(*k),
                verdict: Some(VerdictDoc::from(&r.verdict)),
                n_p: Some(r.n_p),
                n: r.n_by_method.agreed(),
                n_z: r.n_z,
                oracle_agrees: Some(r.oracle.agrees),
                error: None,
            },
            Err(e) => SweepRow {
                gain: r12(*k),
                verdict: None,
                n_p: None,
                n: None,
                n_z: None,
                oracle_agrees: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    match format {
        Format::Json => emit(&SweepDocument {
            schema_version: SCHEMA_VERSION,
            tf_text: args.tf.clone(),
            rows,
        })?,
        Format::Text => {
            let mut out = io::stdout().lock();
            writeln!(
                out,
                "{:>14}  {:>4}  {:>4}  {:>4}  {:<6}  verdict",
                "gain", "N_p", "N", "N_z", "oracle"
            )?;
            for ((_, res), row) in results.iter().zip(&rows) {
                let opt = |v: Option<i64>| v.map_or_else(|| "-".to_string(), |n| n.to_string());
                let verdict = match res {
                    Ok(r) => report::verdict_text(&r.verdict),
                    Err(e) => format!("error: {e}"),
                };
                let oracle = match row.oracle_agrees {
                    Some(true) => "agrees",
                    Some(false) => "differs",
                    None => "-",
                };
                writeln!(
                    out,
                    "{:>14}  {:>4}  {:>4}  {:>4}  {:<6}  {}",
                    row.gain,
                    opt(row.n_p.map(|n| n as i64)),
                    opt(row.n),
                    opt(row.n_z),
                    oracle,
                    verdict
                )?;
            }
        }
    }
    if results.iter().any(|(_, r)| r.is_err()) {
        return Err(Failure::Numeric("analysis failed for at least one gain".into()));
    }
    Ok(())
}

fn cmd_verify(count: usize, seed: u64, max_order: usize, format: Format) -> Result<bool, Failure> {
    if count == 0 || max_order == 0 {
        return Err(Failure::Usage("--count and --max-order must be at least 1".into()));
    }
    let r = fuzz_verify(seed, count, max_order);
    let doc = VerifyDocument::new(seed, count, max_order, &r);
    match format {
        Format::Json => emit(&doc)?,
        Format::Text => {
            let mut out = io::stdout().lock();
            writeln!(out, "seed {seed}  count {count}  max order {max_order}")?;
            writeln!(
                out,
                "agreements {}  skipped {}  disagreements {}",
                doc.agreements,
                doc.skipped,
                doc.disagreements.len()
            )?;
            for d in &doc.disagreements {
                writeln!(out, "  {}\n    shrunk to {}\n    {}", d.original, d.shrunk, d.reason)?;
            }
        }
    }
    Ok(doc.disagreements.is_empty())
}

fn configure_threads() {
    if let Ok(v) = std::env::var("CROSSINGS_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("ignoring CROSSINGS_THREADS={v:?}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Command::Parse { tf, format } => cmd_parse(tf, *format),
        Command::Analyze { args, format } => cmd_analyze(args, *format),
        Command::Curve { args, kind, out } => cmd_curve(args, *kind, out),
        Command::Plot {
            args,
            kind,
            out,
            width,
            height,
            gains,
        } => cmd_plot(args, *kind, out, *width, *height, gains.as_deref()),
        Command::Sweep { args, gains, format } => cmd_sweep(args, gains, *format),
        Command::Verify {
            count,
            seed,
            max_order,
            format,
        } => match cmd_verify(*count, *seed, *max_order, *format) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Io(m) | Failure::Usage(m) | Failure::Numeric(m) => eprintln!("error: {m}"),
                Failure::Undecided => {}
            }
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_lists() {
        assert_eq!(parse_gains("1,5").ok(), Some(vec![1.0, 5.0]));
        assert_eq!(parse_gains("-1, -5").ok(), Some(vec![-1.0, -5.0]));
        let g = parse_gains("1:100:3").ok().unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12 && (g[2] - 100.0).abs() < 1e-9);
        assert!(parse_gains("").is_err());
        assert!(parse_gains("1:-1:3").is_err());
        assert!(parse_gains("0,1").is_err());
        assert!(parse_gains("a").is_err());
    }
}
