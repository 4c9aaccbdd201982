use std::process::{Command, Output};

fn advbloom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_advbloom"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SMALL_RUNS: &[&[&str]] = &[
    &["fpr-estimate", "--m", "256", "--k", "3", "--n", "20", "--trials", "2000", "--seed", "5"],
    &["privacy-audit", "--mode", "mangat,warner", "--p", "0.75", "--trials", "500", "--seed", "5"],
    &["bp-attack", "--m", "8", "--k", "3", "--n", "20", "--t", "4,16", "--trials", "300", "--seed", "5"],
    &["ab-game", "--m", "64", "--k", "3", "--n", "16", "--adversary", "random,public-hash", "--trials", "300"],
    &["filic-distinguish", "--m", "128", "--k", "3", "--n", "16", "--adversary", "key-reading,ab-random", "--trials", "200"],
    &["saturation-scan", "--m", "4,8", "--n", "20", "--k", "3", "--trials", "100"],
    &["error-analysis", "--mode", "none,mangat", "--m", "1024", "--k", "3", "--s", "50", "--u", "512", "--trials", "20"],
];

#[test]
fn reruns_are_byte_identical() {
    for args in SMALL_RUNS {
        let a = advbloom(args);
        let b = advbloom(args);
        assert!(a.status.success(), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn every_numeric_cell_is_finite() {
    for args in SMALL_RUNS {
        let mut json: Vec<&str> = args.to_vec();
        json.extend(["--format", "json"]);
        let out = stdout(&advbloom(&json));
        for line in out.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            for (col, cell) in v.as_object().unwrap() {
                if let Some(f) = cell.as_f64() {
                    assert!(f.is_finite(), "{col} in {args:?}");
                }
            }
            assert_eq!(v["status"], "ok");
        }
    }
}

#[test]
fn seeds_change_results() {
    let a = advbloom(&["fpr-estimate", "--m", "64", "--k", "3", "--n", "20", "--trials", "2000", "--seed", "1"]);
    let b = advbloom(&["fpr-estimate", "--m", "64", "--k", "3", "--n", "20", "--trials", "2000", "--seed", "2"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn grid_emits_one_row_per_point() {
    let o = advbloom(&["saturation-scan", "--m", "4,8,16", "--n", "5,10", "--k", "3", "--trials", "10"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1 + 6);
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let ms: Vec<String> = rdr.records().map(|r| r.unwrap()[1].to_string()).collect();
    assert_eq!(ms, ["4", "4", "8", "8", "16", "16"]);
}

#[test]
fn saturation_scan_is_non_increasing_in_m() {
    let o = advbloom(&["saturation-scan", "--m", "4,8,16", "--n", "20", "--k", "3", "--trials", "10"]);
    let out = stdout(&o);
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let col = rdr.headers().unwrap().iter().position(|h| h == "p_s_exact").unwrap();
    let ps: Vec<f64> = rdr.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert!(ps.windows(2).all(|w| w[0] >= w[1]), "{ps:?}");
}

#[test]
fn mangat_grid_reports_log_budgets() {
    let o = advbloom(&["privacy-audit", "--mode", "mangat", "--p", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", "--trials", "10"]);
    let out = stdout(&o);
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let h = rdr.headers().unwrap().clone();
    let at = |name: &str| h.iter().position(|c| c == name).unwrap();
    let mut rows = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        let p: f64 = r[at("p")].parse().unwrap();
        let eps_prime: f64 = r[at("epsilon_prime")].parse().unwrap();
        let eps: f64 = r[at("epsilon")].parse().unwrap();
        assert_eq!(eps_prime, (1.0 - p).ln());
        assert_eq!(eps, (1.0 / (1.0 - p)).ln());
        rows += 1;
    }
    assert_eq!(rows, 9);
}

#[test]
fn empty_grid_is_not_an_error() {
    let o = advbloom(&["saturation-scan", "--m", "", "--n", "5", "--k", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
    let o = advbloom(&["saturation-scan", "--m", "", "--n", "5", "--k", "3", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn config_errors_exit_one() {
    let cases: &[&[&str]] = &[
        &["saturation-scan", "--n", "5", "--k", "3"],
        &["saturation-scan", "--m", "x", "--n", "5", "--k", "3"],
        &["saturation-scan", "--m", "4", "--n", "5", "--k", "3", "--unknown", "1"],
        &["saturation-scan", "--m", "4", "--n", "5", "--k", "3", "--trials", "0"],
        &["privacy-audit", "--mode", "laplace", "--p", "0.5"],
        &["no-such-experiment"],
        &["config", "/nonexistent/file.json"],
        &[],
    ];
    for args in cases {
        let o = advbloom(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(advbloom(&["--help"]).status.code(), Some(0));
}

#[test]
fn failing_points_are_flagged_and_the_run_continues() {
    let o = advbloom(&["privacy-audit", "--mode", "warner", "--p", "0.2,0.75", "--trials", "100"]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let h = rdr.headers().unwrap().clone();
    let status = h.iter().position(|c| c == "status").unwrap();
    let statuses: Vec<String> = rdr.records().map(|r| r.unwrap()[status].to_string()).collect();
    assert_eq!(statuses, ["failed", "ok"]);
}

#[test]
fn json_config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out_path = dir.path().join("out.csv");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"experiment": "bp-attack", "trials": 300, "seed": 7, "output": "{}",
                "parameters": {{"m": 8, "k": 3, "n": 20, "t": [4, 16], "delta": 0.5}}}}"#,
            out_path.display()
        ),
    )
    .unwrap();
    let o = advbloom(&["config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let from_file = std::fs::read(&out_path).unwrap();
    let flags = advbloom(&["bp-attack", "--m", "8", "--k", "3", "--n", "20", "--t", "4,16", "--delta", "0.5", "--trials", "300", "--seed", "7"]);
    assert_eq!(from_file, flags.stdout);

    std::fs::write(&cfg, r#"{"experiment": "bp-attack", "parameters": {"m": 8, "zzz": 1}}"#).unwrap();
    assert_eq!(advbloom(&["config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn timing_column_is_opt_in() {
    let base = ["saturation-scan", "--m", "4", "--n", "5", "--k", "3", "--trials", "10"];
    let plain = stdout(&advbloom(&base));
    assert!(!plain.lines().next().unwrap().contains("elapsed_ms"));
    let mut timed = base.to_vec();
    timed.push("--timing");
    assert!(stdout(&advbloom(&timed)).lines().next().unwrap().ends_with("elapsed_ms"));
}
