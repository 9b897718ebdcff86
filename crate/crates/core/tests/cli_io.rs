//! Scenario ingestion, config handling, report emission and sweeps.

use std::io::Write as _;
use std::path::PathBuf;

use drssd::cli_io::*;
use drssd::report::relative_gap;

fn write_file(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(text.as_bytes()).unwrap();
    path
}

fn small_config(epsilon: f64) -> String {
    format!(
        r#"{{
  "schema_version": 1,
  "instance": {{
    "objective": {{ "kind": "linear", "c": [-1.0, -1.2] }},
    "decision_set": {{ "kind": "simplex" }},
    "benchmark": [0.5, 0.5],
    "support": {{ "kind": "box", "lo": [0.0, 0.0], "hi": [2.0, 2.0] }}
  }},
  "ball": {{
    "samples": [[1.0, 0.5], [0.2, 1.5], [0.8, 0.9], [1.6, 0.1], [0.4, 0.4], [1.9, 1.0]],
    "epsilon": {epsilon}
  }},
  "lower": {{ "n_xi": 25, "n_eta": 25 }},
  "upper": {{ "k": 4 }}
}}"#
    )
}

fn synthetic_returns(rows: usize, cols: usize) -> String {
    (0..rows)
        .map(|r| (0..cols).map(|c| format!("{:.3}", ((r * 7 + c * 13) % 29) as f64 - 10.0)).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn returns_file_shape_is_observations_by_assets() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "r.csv", &synthetic_returns(22, 8));
    let m = load_returns_csv(&path, false, Units::Percent).unwrap();
    assert_eq!(m.len(), 22);
    assert!(m.iter().all(|r| r.len() == 8));
}

#[test]
fn header_and_fraction_units_are_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "r.csv", "a,b\n0.05,-0.1\n0.2,0.0\n");
    let m = load_returns_csv(&path, true, Units::Fraction).unwrap();
    assert_eq!(m, vec![vec![5.0, -10.0], vec![20.0, 0.0]]);
}

#[test]
fn empty_file_has_no_data_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "r.csv", "");
    let err = load_returns_csv(&path, false, Units::Percent).unwrap_err();
    assert_eq!(err, CsvError::NoDataRows);
    assert_eq!(err.to_string(), "no data rows");
}

#[test]
fn short_row_is_reported_with_its_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = synthetic_returns(4, 8);
    text.push_str("\n1,2,3,4,5,6,7\n");
    let path = write_file(&dir, "r.csv", &text);
    let err = load_returns_csv(&path, false, Units::Percent).unwrap_err();
    assert_eq!(err, CsvError::Ragged { row: 5, expected: 8, found: 7 });
    assert!(err.to_string().contains("row 5"));
}

#[test]
fn non_numeric_cell_is_located() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "r.csv", "1,2\n3,x\n");
    let err = load_returns_csv(&path, false, Units::Percent).unwrap_err();
    assert_eq!(err, CsvError::NonNumeric { row: 2, column: 2, value: "x".into() });
}

#[test]
fn config_rejects_invalid_values() {
    let bad_eps = small_config(0.1).replace("\"epsilon\": 0.1", "\"epsilon\": -1");
    assert!(matches!(RunConfig::from_json(&bad_eps), Err(CliError::Config(_))));
    let bad_k = small_config(0.1).replace("\"k\": 4", "\"k\": 0");
    assert!(matches!(RunConfig::from_json(&bad_k), Err(CliError::Config(_))));
    let bad_version = small_config(0.1).replace("\"schema_version\": 1", "\"schema_version\": 9");
    assert!(matches!(RunConfig::from_json(&bad_version), Err(CliError::Config(_))));
}

#[test]
fn missing_config_exits_with_code_two_and_names_the_path() {
    let mut opts = RunOptions::new(Command::Lower);
    opts.config = Some(PathBuf::from("/definitely/not/here.json"));
    let err = run(&opts).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("/definitely/not/here.json"));
}

#[test]
fn missing_returns_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config(0.1).replace(
        r#""samples": [[1.0, 0.5], [0.2, 1.5], [0.8, 0.9], [1.6, 0.1], [0.4, 0.4], [1.9, 1.0]]"#,
        r#""returns_csv": "absent.csv""#,
    );
    let path = write_file(&dir, "c.json", &text);
    let mut opts = RunOptions::new(Command::Lower);
    opts.config = Some(path);
    let err = run(&opts).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("absent.csv"));
}

#[test]
fn report_round_trips_bit_for_bit_and_gap_matches_formula() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "c.json", &small_config(0.05));
    let mut opts = RunOptions::new(Command::Both);
    opts.config = Some(path);
    opts.out = Some(dir.path().join("out"));
    run(&opts).unwrap();
    let text = std::fs::read_to_string(dir.path().join("out/report.json")).unwrap();
    let report: RunReport = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string_pretty(&report).unwrap();
    assert_eq!(text, again);
    let lower = report.lower.as_ref().unwrap().value;
    let upper = report.upper.as_ref().unwrap().value;
    assert_eq!(report.gap.unwrap().to_bits(), ((upper - lower) / lower).abs().to_bits());
    assert_eq!(report.gap.unwrap().to_bits(), relative_gap(lower, upper).to_bits());
    assert!(lower <= upper + INVERSION_TOL);
    assert!(!report.flags.iter().any(|f| f == "bound inversion"));
}

#[test]
fn same_config_gives_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "c.json", &small_config(0.05));
    let mut tables = Vec::new();
    for name in ["a", "b"] {
        let mut opts = RunOptions::new(Command::Both);
        opts.config = Some(path.clone());
        opts.seed = Some(3);
        opts.out = Some(dir.path().join(name));
        run(&opts).unwrap();
        tables.push(std::fs::read(dir.path().join(name).join("results.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
    let text = String::from_utf8(tables[0].clone()).unwrap();
    assert!(text.starts_with("epsilon,n_xi,n_eta,k,lower,upper,gap,error\n"));
    assert!(!text.contains('\r'));
}

#[test]
fn empty_sweep_gives_header_only_table() {
    let config = RunConfig::from_json(&small_config(0.05)).unwrap();
    let inst = config.instance(std::path::Path::new(".")).unwrap();
    let rows = emit_sweep(&config, &inst, &Sweep::Epsilons(vec![]));
    assert!(rows.is_empty());
    assert_eq!(table_csv(&rows), "epsilon,n_xi,n_eta,k,lower,upper,gap,error\n");
}

#[test]
fn epsilon_sweep_lower_column_is_nondecreasing() {
    let config = RunConfig::from_json(&small_config(0.0)).unwrap();
    let inst = config.instance(std::path::Path::new(".")).unwrap();
    let eps = vec![0.0, 1e-3, 1e-2, 0.05, 0.1, 0.3];
    let rows = emit_sweep(&config, &inst, &Sweep::Epsilons(eps.clone()));
    assert_eq!(rows.iter().map(|r| r.epsilon).collect::<Vec<_>>(), eps);
    for w in rows.windows(2) {
        let (a, b) = (w[0].lower.unwrap(), w[1].lower.unwrap());
        assert!(b >= a - 1e-7, "lower decreased: {a} -> {b}");
    }
}

#[test]
fn interval_sweep_shares_lower_bound_and_keeps_upper_above_it() {
    let config = RunConfig::from_json(&small_config(0.02)).unwrap();
    let inst = config.instance(std::path::Path::new(".")).unwrap();
    let rows = emit_sweep(&config, &inst, &Sweep::Intervals(vec![1, 2, 4, 8]));
    assert_eq!(rows.iter().map(|r| r.k).collect::<Vec<_>>(), vec![1, 2, 4, 8]);
    let lower = rows[0].lower.unwrap();
    for r in &rows {
        assert_eq!(r.lower, Some(lower));
        assert!(r.error.is_none(), "{:?}", r.error);
        assert!(r.upper.unwrap() >= lower - 1e-6);
    }
}

#[test]
fn sweep_records_point_failures_in_the_row() {
    let config = RunConfig::from_json(&small_config(0.0)).unwrap();
    let inst = config.instance(std::path::Path::new(".")).unwrap();
    let rows = emit_sweep(&config, &inst, &Sweep::Epsilons(vec![0.01, -1.0, 0.02]));
    assert_eq!(rows.len(), 3);
    assert!(rows[1].error.is_some());
    assert!(rows[0].error.is_none() && rows[2].error.is_none());
}

#[test]
fn verify_reports_full_agreement() {
    let s = verify_duality(7, 30).unwrap();
    assert_eq!(s.agreements, s.trials);
    assert!(s.max_diff <= VERIFY_TOL);
}

#[test]
fn bundled_example_config_parses() {
    let config = RunConfig::from_json(EXAMPLE1_CONFIG).unwrap();
    let inst = config.instance(std::path::Path::new(".")).unwrap();
    assert_eq!(inst.ball.len(), 10);
    assert_eq!(inst.benchmark, vec![1.0, 0.0]);
    assert_eq!(config.ball.epsilon, 1e-5);
    assert_eq!((config.lower.n_xi, config.lower.n_eta, config.upper.k), (300, 300, 12));
}

#[test]
fn nested_interval_sweep_upper_column_is_nonincreasing() {
    let config = RunConfig::from_json(&small_config(0.02)).unwrap();
    let inst = config.instance(std::path::Path::new(".")).unwrap();
    let rows = emit_sweep(&config, &inst, &Sweep::Intervals(vec![1, 2, 4, 8, 16]));
    let upper: Vec<f64> = rows.iter().map(|r| r.upper.unwrap()).collect();
    for w in upper.windows(2) {
        assert!(w[1] <= w[0] + 1e-8, "upper increased: {upper:?}");
    }
}
