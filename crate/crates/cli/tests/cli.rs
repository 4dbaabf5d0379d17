use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dshrink::sim::{bootstrap_eval, synthesize_units, BootstrapConfig};
use dshrink::{Method, UreOptions};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn dshrink(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dshrink")).current_dir(dir).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn summary<'a>(result: &'a Value, method: &str) -> &'a Value {
    result["methods"].as_array().unwrap().iter().find(|m| m["method"] == method).unwrap()
}

#[test]
fn estimate_matches_golden_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("k3_strata.csv");
    let out = dshrink(dir.path(), &["estimate", "-i", input.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let golden = std::fs::read_to_string(fixture("k3_estimate.csv")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden);
}

#[test]
fn fixed_rows_equal_the_posterior_mean() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("k3_strata.csv");
    let out = dshrink(
        dir.path(),
        &["estimate", "-i", input.to_str().unwrap(), "--method", "fixed", "--gamma2", "0.5", "--eta2", "2"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let strata = [(1.2, 0.8, 0.9, 0.1), (-0.4, 1.5, 0.3, 0.2), (2.1, 0.6, 1.4, 0.05)];
    let (g, e) = (0.5, 2.0);
    for (line, (u, su, b, sb)) in text.lines().skip(1).zip(strata) {
        let est: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        let want = e * (u * (g + sb) + su * b) / (g * (e + su) + e * (su + sb) + su * sb);
        assert!((est - want).abs() < 1e-9 * want.abs().max(1.0), "{line} vs {want}");
    }
}

#[test]
fn sidecar_is_written_next_to_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("k3_strata.csv");
    let out = dshrink(dir.path(), &["estimate", "-i", input.to_str().unwrap(), "-o", "est.csv", "--method", "mle"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let side = json(&dir.path().join("est.json"));
    assert_eq!(side["K"], 3);
    assert_eq!(side["strata"][1], "central");
    assert_eq!(side["fits"][0]["method"], "mle");
    assert!(side["fits"][0]["eta2"].as_f64().unwrap() >= 0.0);
}

#[test]
fn single_stratum_mm1_is_flagged_as_truncated() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "one.csv", "stratum,tau_u,var_u,tau_b,var_b\nonly,0.1,1,0.4,0.2\n");
    let out = dshrink(dir.path(), &["estimate", "-i", &input, "--method", "mm1", "-o", "one_est.csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let fit = &json(&dir.path().join("one_est.json"))["fits"][0];
    assert_eq!(fit["eta2"], 0.0);
    assert_eq!(fit["truncated"], true);
    assert!(fit["interval_eta2"].as_f64().unwrap() > 0.0);
}

#[test]
fn malformed_input_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("missing.csv", "stratum,tau_u,var_u,tau_b\na,1,1,1\n", "missing header column 'var_b'"),
        ("empty.csv", "", "file is empty"),
        ("bad.csv", "stratum,tau_u,var_u,tau_b,var_b\na,1,1,1,1\nb,1,x,1,1\n", "line 3: column 'var_u'"),
        ("neg.csv", "stratum,tau_u,var_u,tau_b,var_b\na,1,1,1,-1\n", "line 2: column 'var_b'"),
        ("header.csv", "stratum,tau_u,var_u,tau_b,var_b\n", "no data rows"),
    ];
    for (name, body, needle) in cases {
        let input = write(dir.path(), name, body);
        let out = dshrink(dir.path(), &["estimate", "-i", &input]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(stderr(&out).contains(needle), "{name}: {}", stderr(&out));
    }
    assert_eq!(dshrink(dir.path(), &["estimate"]).status.code(), Some(2));
    assert_eq!(dshrink(dir.path(), &["simulate", "--alpha", "2"]).status.code(), Some(2));
    assert_eq!(dshrink(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn estimator_failure_exits_with_code_3_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "same.csv", "stratum,tau_u,var_u,tau_b,var_b\na,1,1,1,0.1\nb,2,1,2,0.1\nc,3,1,3,0.1\n");
    let out = dshrink(dir.path(), &["estimate", "-i", &input, "--method", "raw-u", "--method", "delta1", "-o", "x.csv"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("delta1"));
    assert!(!dir.path().join("x.csv").exists());
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn emitted_data_round_trips_through_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dshrink(dir.path(), &["simulate", "--K", "12", "--reps", "20", "--seed", "9", "--emit-data", "data.csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let data = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert_eq!(data.lines().count(), 13);
    assert!(data.starts_with("stratum,tau_u,var_u,tau_b,var_b\ns0,"));
    let est = dshrink(dir.path(), &["estimate", "-i", "data.csv", "--method", "raw-u"]);
    assert!(est.status.success(), "{}", stderr(&est));
    let text = String::from_utf8(est.stdout).unwrap();
    for (row, data_row) in text.lines().skip(1).zip(data.lines().skip(1)) {
        let tau_u = data_row.split(',').nth(1).unwrap();
        assert_eq!(row.split(',').nth(2).unwrap(), tau_u);
    }
}

#[test]
fn simulate_table_reports_raw_u_at_exactly_100() {
    let dir = tempfile::tempdir().unwrap();
    let out = dshrink(
        dir.path(),
        &["simulate", "--K", "8", "--reps", "50", "--method", "raw-u", "--method", "mm1", "--alpha", "0.1"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "K,metric,raw-u,mm1");
    assert!(lines.next().unwrap().starts_with("8,loss_pct,100,"));
    let metrics: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(metrics, ["loss_pct", "coverage_pct", "min_coverage_pct", "length_pct"]);
}

#[test]
fn quadrupling_replications_halves_the_standard_error() {
    let dir = tempfile::tempdir().unwrap();
    let se = |reps: &str, name: &str| {
        let out = dshrink(
            dir.path(),
            &["simulate", "--K", "10", "--reps", reps, "--seed", "11", "--method", "mm1", "-o", name],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        let side = json(&dir.path().join(name).with_extension("json"));
        summary(&side["scenarios"][0]["result"], "mm1")["loss_ratio_pct_se"].as_f64().unwrap()
    };
    let ratio = se("500", "small.csv") / se("2000", "large.csv");
    assert!((ratio / 2.0 - 1.0).abs() < 0.2, "SE ratio {ratio}");
}

#[test]
fn coverage_keeps_only_methods_with_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let out = dshrink(
        dir.path(),
        &["coverage", "--K", "6", "--reps", "40", "--method", "raw-b", "--method", "ure", "--method", "raw-u"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "K,metric,ure,raw-u");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn config_file_and_dump_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "seed = 42\nreps = 30\nK = [5, 7]\nalpha = 0.1\n");
    let dump = dshrink(dir.path(), &["--config", &cfg, "simulate", "--reps", "60", "--config-dump"]);
    assert!(dump.status.success(), "{}", stderr(&dump));
    let text = String::from_utf8(dump.stdout).unwrap();
    assert!(text.contains("seed = 42") && text.contains("reps = 60"), "{text}");
    let dumped = write(dir.path(), "dumped.toml", &text);
    let again = dshrink(dir.path(), &["--config", &dumped, "simulate", "--config-dump"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);

    let bad = write(dir.path(), "bad.toml", "seeds = 1\n");
    assert_eq!(dshrink(dir.path(), &["--config", &bad, "simulate"]).status.code(), Some(2));
}

#[test]
fn version_and_help_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let v = dshrink(dir.path(), &["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8(v.stdout).unwrap().starts_with("dshrink "));
    assert_eq!(dshrink(dir.path(), &["estimate", "--help"]).status.code(), Some(0));
}

#[test]
fn bootstrap_agrees_with_an_independent_library_run() {
    let dir = tempfile::tempdir().unwrap();
    let rows = synthesize_units(&[1.0, 0.0, -1.0, 0.5], &[0.5, -0.5, 0.0, 1.0], 60, 300, 1.0, 21);
    let mut body = String::from("stratum,source,arm,outcome\n");
    for u in &rows {
        body.push_str(&format!("{},{},{},{}\n", u.stratum, u.source, u.arm, u.outcome));
    }
    let input = write(dir.path(), "units.csv", &body);
    let out = dshrink(
        dir.path(),
        &["bootstrap", "-i", &input, "--n-boot", "300", "--rct-subsample", "200", "--seed", "1", "--method", "mm1", "-o", "b.csv"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let side = json(&dir.path().join("b.json"));
    assert_eq!(side["rct_subsample"], 200);
    let cli = summary(&side["result"], "mm1");

    let cfg = BootstrapConfig {
        n_boot: 300,
        rct_subsample: 200,
        seed: 2,
        methods: vec![Method::Mm1],
        alpha: None,
        floor_frac: 0.01,
        ure: UreOptions::default(),
        variance_floor: None,
        resample_obs: true,
    };
    let direct = bootstrap_eval(&rows, &cfg).unwrap();
    let lib = direct.method(Method::Mm1).unwrap();
    let (a, sa) = (cli["loss_ratio_pct"].as_f64().unwrap(), cli["loss_ratio_pct_se"].as_f64().unwrap());
    let gap = (a - lib.loss_ratio_pct).abs();
    assert!(gap < 3.0 * (sa * sa + lib.loss_ratio_pct_se.powi(2)).sqrt(), "{a} vs {}", lib.loss_ratio_pct);
}
