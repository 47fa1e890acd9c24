use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const THREE_LAGS_K5: &str = "5/((s/1+1)(s/2+1)(s/3+1))";
const UNSTABLE_LEAD: &str = "(s/3+1)(s/5+1)/((s/2-1)(s/4-1))";

fn crossings(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossings"))
        .args(args)
        .output()
        .expect("spawn crossings")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(
        r.headers().unwrap(),
        vec!["segment", "t", "omega", "re", "im", "mag_db", "phase_deg"]
    );
    r.records().map(Result::unwrap).collect()
}

fn num(s: &str) -> f64 {
    match s {
        "inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => s.parse().unwrap(),
    }
}

#[test]
fn analyze_reports_verdicts_with_exit_zero() {
    let out = crossings(&["analyze", "--tf", THREE_LAGS_K5]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["verdict"]["status"], "stable");
    assert_eq!(doc["n_by_method"]["nyquist"], 0);
    assert_eq!(doc["schema_version"], "1");

    let out = crossings(&["analyze", "--tf", THREE_LAGS_K5, "--gain", "15"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["verdict"]["status"], "unstable");
    assert_eq!(doc["verdict"]["closed_loop_rhp"], 2);
    assert_eq!(doc["crossings"]["nyquist"].as_array().unwrap().len(), 2);
    assert_eq!(doc["oracle"]["agrees"], true);
}

#[test]
fn negative_gain_flag() {
    let out = crossings(&[
        "analyze",
        "--tf",
        "(s/2-1)/(s(s/1+1))",
        "--gain",
        "-5",
        "--format",
        "text",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("unstable (2 closed-loop RHP poles)"), "{text}");
}

#[test]
fn exit_codes() {
    assert_eq!(crossings(&["analyze", "--tf", "((("]).status.code(), Some(2));
    assert_eq!(
        crossings(&["analyze", "--tf", "1/(s+1)", "--indent", "-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(crossings(&["analyze"]).status.code(), Some(2));
    assert_eq!(
        crossings(&["sweep", "--tf", UNSTABLE_LEAD, "--gains", ""])
            .status
            .code(),
        Some(2)
    );
    let out = crossings(&["analyze", "--tf", "10/((s/1+1)(s/2+1)(s/3+1))"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(json(&out)["verdict"]["status"], "marginal");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.svg");
    let args = [
        "plot",
        "--tf",
        UNSTABLE_LEAD,
        "--kind",
        "nyquist",
        "--gains",
        "",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(crossings(&args).status.code(), Some(2));
    assert!(!out.exists());
    // Refinement budget exhausted is a numeric failure.
    let args = [
        "analyze",
        "--tf",
        THREE_LAGS_K5,
        "--refine-deg",
        "0.0001",
        "--samples",
        "100000",
    ];
    assert_eq!(crossings(&args).status.code(), Some(3));
}

#[test]
fn sweep_lists_each_gain() {
    let out = crossings(&["sweep", "--tf", UNSTABLE_LEAD, "--gains", "1,5", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows[0]["verdict"]["status"], "unstable");
    assert_eq!(rows[0]["verdict"]["closed_loop_rhp"], 2);
    assert_eq!(rows[1]["verdict"]["status"], "stable");
    assert_eq!(rows[1]["n"], -2);

    let out = crossings(&["sweep", "--tf", UNSTABLE_LEAD, "--gains", "1:5:5", "--format", "json"]);
    let gains: Vec<f64> = json(&out)["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["gain"].as_f64().unwrap())
        .collect();
    assert_eq!(gains.len(), 5);
    assert!((gains[2] - 5f64.sqrt()).abs() < 1e-9);
}

#[test]
fn verify_small_run() {
    let out = crossings(&[
        "verify",
        "--count",
        "40",
        "--seed",
        "42",
        "--max-order",
        "6",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["disagreements"].as_array().unwrap().len(), 0);
    let total = doc["agreements"].as_u64().unwrap() + doc["skipped"].as_u64().unwrap();
    assert_eq!(total, 40);
}

#[test]
fn parse_prints_canonical_form() {
    let out = crossings(&["parse", "--tf", "-1(s/2-1)/(s(s/1+1))", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["gain"], -1.0);
    assert_eq!(doc["integrator_order"], 1);
    assert_eq!(doc["denominator"], serde_json::json!([0.0, 1.0, 1.0]));
}

#[test]
fn nyquist_csv_contract() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("n.csv");
    let out = crossings(&[
        "curve",
        "--tf",
        THREE_LAGS_K5,
        "--kind",
        "nyquist",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows = rows(&path);
    let at_zero: Vec<_> = rows.iter().filter(|r| &r[2] == "0").collect();
    assert!(!at_zero.is_empty());
    for r in at_zero {
        assert_eq!((num(&r[3]), num(&r[4])), (5.0, 0.0));
    }
    for r in &rows {
        assert_eq!(r[2].is_empty(), &r[0] != "axis");
        let (re, im, db) = (num(&r[3]), num(&r[4]), num(&r[5]));
        // Values are printed with 12 significant digits.
        assert!(
            (10.0 * (re * re + im * im).log10() - db).abs() <= 1e-9 * db.abs().max(1.0),
            "{r:?}"
        );
    }
}

#[test]
fn nichols_single_csv_is_wrapped() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, wrapped) in [("nichols-single", true), ("nichols-multi", false)] {
        let path = dir.path().join(format!("{kind}.csv"));
        let out = crossings(&[
            "curve",
            "--tf",
            UNSTABLE_LEAD,
            "--gain",
            "5",
            "--kind",
            kind,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let phases: Vec<f64> = rows(&path).iter().map(|r| num(&r[6])).collect();
        let in_range = phases.iter().all(|p| (-360.0..0.0).contains(p));
        assert_eq!(in_range, wrapped, "{kind}");
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Renders `args` and compares with the stored file. `UPDATE_GOLDEN=1`
/// rewrites the stored copy.
fn golden(name: &str, args: &[&str]) -> String {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(name);
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", path.to_str().unwrap()]);
    let out = crossings(&full);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let got = std::fs::read_to_string(&path).unwrap();
    let stored = fixture(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(stored.parent().unwrap()).unwrap();
        std::fs::write(&stored, &got).unwrap();
    }
    let want = std::fs::read_to_string(&stored).expect("golden file missing; run with UPDATE_GOLDEN=1");
    assert!(got == want, "{name} differs from the golden copy");
    got
}

#[test]
fn nyquist_plot_marks_two_crossings() {
    let svg = golden(
        "three_lags_k15_nyquist.svg",
        &["plot", "--tf", THREE_LAGS_K5, "--gain", "15", "--kind", "nyquist"],
    );
    assert_eq!(svg.matches(r#"class="crossing""#).count(), 2);
    assert_eq!(svg.matches(r#"data-sign="1""#).count(), 2);
    assert_eq!(svg.matches(r#"class="ray""#).count(), 1);
    assert_eq!(svg.matches(r#"class="critical""#).count(), 1);
}

#[test]
fn nichols_multi_plot_draws_spanned_rays() {
    let svg = golden(
        "unstable_lead_k5_nichols_multi.svg",
        &["plot", "--tf", UNSTABLE_LEAD, "--gain", "5", "--kind", "nichols-multi"],
    );
    let rays: Vec<&str> = svg
        .match_indices(r#"class="ray" data-phase=""#)
        .map(|(i, m)| {
            let rest = &svg[i + m.len()..];
            &rest[..rest.find('"').unwrap()]
        })
        .collect();
    assert_eq!(rays, ["-540", "-180"]);
    assert_eq!(svg.matches(r#"data-sign="-1""#).count(), 2);
}

#[test]
fn nichols_single_and_overlay_plots() {
    let svg = golden(
        "nmp_zero_k1.5_nichols_single.svg",
        &[
            "plot",
            "--tf",
            "(s/0.5-1)/((s/2+1)(s/3+1))",
            "--gain",
            "1.5",
            "--kind",
            "nichols-single",
        ],
    );
    assert_eq!(svg.matches(r#"class="crossing""#).count(), 1);
    let svg = golden(
        "type_one_overlay_nyquist.svg",
        &[
            "plot",
            "--tf",
            "1/(s(s/0.5+1)(s/2+1))",
            "--gains",
            "1,5",
            "--kind",
            "nyquist",
        ],
    );
    assert_eq!(svg.matches(r#"class="crossing""#).count(), 2);
    assert!(svg.contains("K = 5"));
}
