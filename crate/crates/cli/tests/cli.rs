use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn feedopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feedopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn noiseless_fixture_recovers_recorded_gain() {
    let out = tempfile::tempdir().unwrap();
    let u = fixture("noiseless_u.csv");
    let y = fixture("noiseless_y.csv");
    for method in ["min-norm", "exact", "constant-noise"] {
        let mut args = vec!["estimate", "--u", s(&u), "--y", s(&y), "--nu", "2", "--method", method];
        let w = fixture("noiseless_w.csv");
        if method == "exact" {
            args.extend(["--w", s(&w)]);
        }
        args.extend(["--out", s(out.path())]);
        let res = feedopt(&args);
        assert!(
            res.status.success(),
            "{method}: {}",
            String::from_utf8_lossy(&res.stderr)
        );
        let est = read_json(&out.path().join("estimate.json"));
        let g = read_json(&fixture("G.json"));
        let got = est["G_hat"][0][0].as_f64().unwrap();
        let want = g["G"][0][0].as_f64().unwrap();
        assert!((got - want).abs() <= 1e-8, "{method}: {got} vs {want}");
        assert!(est["residuals"]["constraint"].as_f64().unwrap() <= 1e-8);
    }
}

#[test]
fn min_norm_on_constant_noise_reports_residuals() {
    let out = tempfile::tempdir().unwrap();
    let res = feedopt(&[
        "estimate",
        "--u",
        s(&fixture("constant_u.csv")),
        "--y",
        s(&fixture("constant_y.csv")),
        "--w",
        s(&fixture("constant_w.csv")),
        "--nu",
        "2",
        "--method",
        "min-norm",
        "--out",
        s(out.path()),
    ]);
    assert!(res.status.success());
    let est = read_json(&out.path().join("estimate.json"));
    assert_eq!(est["method"], "min-norm-unknown-noise");
    assert!(est["residuals"]["noise_block"].as_f64().unwrap() > 1e-6);

    // the constant-noise method removes the bias on the same data
    let res = feedopt(&[
        "estimate",
        "--u",
        s(&fixture("constant_u.csv")),
        "--y",
        s(&fixture("constant_y.csv")),
        "--nu",
        "2",
        "--method",
        "constant-noise",
        "--out",
        s(out.path()),
    ]);
    assert!(res.status.success());
    let est = read_json(&out.path().join("estimate.json"));
    let want = read_json(&fixture("G.json"))["G"][0][0].as_f64().unwrap();
    assert!((est["G_hat"][0][0].as_f64().unwrap() - want).abs() <= 1e-8);
}

#[test]
fn malformed_csv_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("u.csv");
    fs::write(&bad, "t,z1\n0,1.0\n1,oops\n").unwrap();
    let res = feedopt(&[
        "estimate",
        "--u",
        s(&bad),
        "--y",
        s(&bad),
        "--nu",
        "1",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn insufficient_excitation_exits_with_infeasibility_code() {
    let dir = tempfile::tempdir().unwrap();
    let u = dir.path().join("u.csv");
    let mut text = String::from("t,z1\n");
    for k in 0..30 {
        text.push_str(&format!("{k},1\n"));
    }
    fs::write(&u, &text).unwrap();
    let res = feedopt(&[
        "estimate",
        "--u",
        s(&u),
        "--y",
        s(&u),
        "--nu",
        "2",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("rank"));
}

#[test]
fn schema_violations_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"experiment": "tracking", "tracking": {"kappa": 2}}"#).unwrap();
    let res = feedopt(&["tracking", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("kappa"));

    fs::write(&cfg, r#"{"experiment": "rideshare"}"#).unwrap();
    let res = feedopt(&["tracking", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn infeasible_step_size_exits_with_infeasibility_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("eta.json");
    fs::write(&cfg, r#"{"tracking": {"eta": 5.0}}"#).unwrap();
    let res = feedopt(&["tracking", "--config", s(&cfg), "--trials", "2", "--out", s(dir.path())]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("η"));
}

#[test]
fn experiments_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = a.path().join("mc.json");
    fs::write(&cfg, r#"{"montecarlo": {"sizes": [1, 3]}, "trials": 5, "seed": 11}"#).unwrap();
    let cases: [(&str, &[&str], &[&str]); 3] = [
        ("montecarlo-g", &["--config", s(&cfg)], &["montecarlo_g.csv"]),
        (
            "tracking",
            &["--trials", "3", "--seed", "4"],
            &["tracking.csv", "tracking_terms.csv", "tracking_constants.json"],
        ),
        (
            "rideshare",
            &["--trials", "2"],
            &["rideshare.csv", "rideshare_summary.json"],
        ),
    ];
    for (cmd, extra, files) in cases {
        for dir in [a.path(), b.path()] {
            let mut args = vec![cmd];
            args.extend_from_slice(extra);
            args.extend(["--out", s(dir)]);
            let res = feedopt(&args);
            assert!(res.status.success(), "{cmd}: {}", String::from_utf8_lossy(&res.stderr));
        }
        for f in files {
            let left = fs::read(a.path().join(f)).unwrap();
            assert!(!left.is_empty());
            assert_eq!(left, fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }
    let mc = fs::read_to_string(a.path().join("montecarlo_g.csv")).unwrap();
    assert!(mc.starts_with("n,trials,skipped,mean_error,mean_prediction_error\n1,5,0,"));
    let tr = fs::read_to_string(a.path().join("tracking.csv")).unwrap();
    assert!(tr.starts_with("k,empirical_error,bound,beta1,beta2\n0,"));
    let rs = fs::read_to_string(a.path().join("rideshare.csv")).unwrap();
    assert!(rs.starts_with("slot,policy,accepted,profit,mean_price,utilization\n0,adaptive,"));
}

#[test]
fn simulate_writes_trajectory_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    let system = fixture("system.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"experiment": "simulate", "simulate": {{"system": "{}", "horizon": 25, "input": [1.0],
                "disturbance": {{"kind": "iid-bounded", "center": [0.0], "half_width": [0.1], "seed": 2}}}}}}"#,
            s(&system)
        ),
    )
    .unwrap();
    let res = feedopt(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let x = fs::read_to_string(dir.path().join("x.csv")).unwrap();
    assert_eq!(x.lines().count(), 1 + 26);
    assert!(x.starts_with("t,z1,z2\n"));
    let y = fs::read_to_string(dir.path().join("y.csv")).unwrap();
    assert_eq!(y.lines().count(), 1 + 25);
}

#[test]
fn rideshare_accepts_graph_and_demand_files() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.json");
    fs::write(
        &graph,
        r#"{"a": [[0, 0.1], [0.1, 0]], "c": [[0, 0.5], [0.5, 0]], "p_max": [[0, 1], [1, 0]], "theta": [[0, 1], [1, 0]]}"#,
    )
    .unwrap();
    let demand = dir.path().join("demand.csv");
    let mut text = String::from("slot,origin,dest,delta\n");
    for k in 0..10 {
        text.push_str(&format!("{k},0,1,0.3\n{k},1,0,0.1\n"));
    }
    fs::write(&demand, text).unwrap();
    let res = feedopt(&[
        "rideshare",
        "--graph",
        s(&graph),
        "--demand",
        s(&demand),
        "--trials",
        "3",
        "--out",
        s(dir.path()),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = read_json(&dir.path().join("rideshare_summary.json"));
    assert_eq!(summary["seeds"], 3);
    assert_eq!(summary["prices_feasible"], true);
}
