use std::process::{Command, Output};

fn credit_var(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_credit-var"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn quantile_reports_approximation_and_oracle() {
    let text = stdout(&credit_var(&[
        "quantile", "--alpha", "1", "--beta", "1", "--u", "0.995",
    ]));
    let exact = column(&text, "exact")[0];
    let approx = column(&text, "approx")[0];
    assert!((exact - 5.29832).abs() < 1e-5);
    assert!(approx < exact && (exact - approx) / exact < 1e-3);

    let doubled = stdout(&credit_var(&[
        "quantile", "--alpha", "1", "--beta", "2", "--u", "0.995",
    ]));
    assert!((column(&doubled, "exact")[0] * 2.0 - exact).abs() < 1e-8);
    assert!((column(&doubled, "approx")[0] * 2.0 - approx).abs() < 1e-8);
}

#[test]
fn quantile_json_output() {
    let text = stdout(&credit_var(&[
        "quantile", "--alpha", "10", "--u", "0.95", "--format", "json",
    ]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["rel_err_pct"].as_f64().unwrap().abs() < 0.005);
    assert_eq!(v["warn"], false);
}

#[test]
fn error_grid_report_shape() {
    let text = stdout(&credit_var(&["report-table1"]));
    assert_eq!(text.lines().count(), 29);
    let errs = column(&text, "rel_err_pct");
    assert!(errs.iter().all(|e| e.abs() < 1.0 && *e <= 0.05));
    let row = text
        .lines()
        .find(|l| l.starts_with("0.9990000000,5.000000000"))
        .unwrap();
    let err: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
    assert!((err + 0.88).abs() < 0.15, "{err}");
}

#[test]
fn reference_comparison_report_lists_published_values() {
    let text = stdout(&credit_var(&["report-table2"]));
    assert!(text.contains("17013.22") && text.contains("15475.54") && text.contains("16985.01"));
    let d = column(&text, "diff_abs");
    assert!(d[1] < d[2] && d[2] < d[0]);
}

#[test]
fn truncated_compare_reproduces_effective_levels() {
    let text = stdout(&credit_var(&[
        "compare",
        "trunc",
        "--n-list",
        "500",
        "--mu-list",
        "500",
        "--L-list",
        "6000,8000",
        "--kappa",
        "0.995",
    ]));
    let k = column(&text, "kappa_eff");
    assert!((k[0] - 0.991).abs() <= 1e-3 && (k[1] - 0.994).abs() <= 1e-3, "{k:?}");
}

#[test]
fn exponential_compare_decreases_in_portfolio_size() {
    let text = stdout(&credit_var(&[
        "compare",
        "exp",
        "--n-list",
        "100..2000:50",
        "--mu-list",
        "500",
    ]));
    let rel = column(&text, "diff_rel");
    assert_eq!(rel.len(), 39);
    assert!(rel.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn tight_exposure_is_rejected() {
    let out = credit_var(&[
        "compare",
        "trunc",
        "--n-list",
        "500",
        "--mu-list",
        "500",
        "--L-list",
        "4000",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("greater than 9"));
}

#[test]
fn unknown_flag_is_rejected() {
    let out = credit_var(&["report-table1", "--colour", "red"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    std::fs::write(&cfg, "# sweep\nn-list=100,200\nmu-list=500\nkappa=0.99\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let text = stdout(&credit_var(&["compare", "exp", "--config", cfg]));
    assert_eq!(column(&text, "kappa"), [0.99, 0.99]);
    let text = stdout(&credit_var(&["compare", "exp", "--config", cfg, "--kappa", "0.995"]));
    assert_eq!(column(&text, "kappa"), [0.995, 0.995]);

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "no-such-flag=1\n").unwrap();
    let out = credit_var(&["compare", "exp", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kappa_curve_empty_product() {
    let text = stdout(&credit_var(&["kappa-curve", "--c-list", "12", "--n-list", "0,500"]));
    let k = column(&text, "kappa_prime");
    assert_eq!(k[0], 0.995);
    assert!((k[1] - 0.9920).abs() < 1e-4);
}

#[test]
fn calibrate_writes_model_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let diag = dir.path().join("diag.csv");
    let out = credit_var(&[
        "calibrate",
        "--alpha-list",
        "1..100:3",
        "--u-count",
        "12",
        "--out-model",
        model.to_str().unwrap(),
        "--diagnostics",
        diag.to_str().unwrap(),
    ]);
    stdout(&out);
    let d = std::fs::read_to_string(&diag).unwrap();
    assert!(d.starts_with("# p_min=0.05"));
    assert!(d.contains("p_max=1.5"));
    assert_eq!(d.lines().nth(1), Some("u,alpha,p_star,boundary_flag"));

    let text = stdout(&credit_var(&["report-table1", "--model", model.to_str().unwrap()]));
    let errs = column(&text, "rel_err_pct");
    assert!(errs.iter().take(5).all(|e| e.abs() < 1.0));
}

#[test]
fn calibrate_needs_eight_levels() {
    let dir = tempfile::tempdir().unwrap();
    let out = credit_var(&[
        "calibrate",
        "--u-count",
        "1",
        "--out-model",
        dir.path().join("m.json").to_str().unwrap(),
        "--diagnostics",
        dir.path().join("d.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mc_validate_is_repeatable_and_dumps_samples() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("losses.txt");
    let args = [
        "mc-validate",
        "--n",
        "20",
        "--lambda",
        "0.1",
        "--kappa",
        "0.99",
        "--paths",
        "20000",
        "--seed",
        "3",
    ];
    let first = credit_var(&args);
    let mut with_dump = args.to_vec();
    with_dump.extend(["--dump", dump.to_str().unwrap(), "--threads", "3"]);
    let second = credit_var(&with_dump);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(first.status.code(), second.status.code());
    assert_eq!(std::fs::read_to_string(&dump).unwrap().lines().count(), 20000);
}

#[test]
fn mc_validate_truncated_gap_is_reported() {
    let out = credit_var(&[
        "mc-validate",
        "--severity",
        "trunc",
        "--n",
        "50",
        "--mu",
        "1",
        "--L",
        "10",
        "--paths",
        "50000",
        "--tol",
        "1",
    ]);
    let text = stdout(&out);
    let gap = column(&text, "rel_gap")[0];
    assert!(gap.is_finite());
    assert!(text.contains("PASS"));
}

#[test]
fn mc_validate_fails_on_impossible_tolerance() {
    let out = credit_var(&[
        "mc-validate",
        "--n",
        "5",
        "--lambda",
        "1",
        "--paths",
        "2000",
        "--tol",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
