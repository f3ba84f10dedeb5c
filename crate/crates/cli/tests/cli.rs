use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-term"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn json_number(text: &str, key: &str) -> f64 {
    let v: serde_json::Value = serde_json::from_str(text).unwrap();
    v[key].as_f64().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn price_on_a_flat_curve_is_the_discount_curve() {
    let dir = tempfile::tempdir().unwrap();
    let curve = write(dir.path(), "flat.csv", "T,f\n0,0.02\n10,0.02\n");
    let o = run(&["price", "--curve", &curve]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("T,price_lower,price_robust,price_upper"));
    let r = rows(&text);
    assert_eq!(r.len(), 11);
    assert_eq!(r[0][1..], [1.0, 1.0, 1.0]);
    for row in &r {
        assert!((row[2] - (-0.02 * row[0]).exp()).abs() <= 1e-12);
        assert!(row[1] <= row[3]);
    }
    // 17 significant digits.
    let first = text.lines().nth(2).unwrap().split(',').nth(2).unwrap();
    assert_eq!(first.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
}

#[test]
fn degenerate_band_collapses_price_bounds_and_gap() {
    let o = run(&["price", "--band", "0.01,0.01"]);
    for row in rows(&stdout(&o)) {
        assert_eq!(row[1], row[3]);
    }
    let g = run(&["gap", "--band", "0.01,0.01", "--paths", "2000", "--steps", "32"]);
    assert!(g.status.success());
    let text = stdout(&g);
    assert_eq!(json_number(&text, "gap"), 0.0);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["flag"], false);
}

#[test]
fn gap_is_flagged_and_grows_with_the_band() {
    let narrow = run(&["gap", "--paths", "4000", "--steps", "64", "--seed", "5"]);
    let wide = run(&["gap", "--band", "0.005,0.03", "--paths", "4000", "--steps", "64", "--seed", "5"]);
    assert!(narrow.status.success() && wide.status.success());
    let (n, w) = (stdout(&narrow), stdout(&wide));
    let v: serde_json::Value = serde_json::from_str(&n).unwrap();
    assert_eq!(v["flag"], true);
    assert!((json_number(&n, "gap") - json_number(&n, "closed_form_gap")).abs() <= 3.0 * json_number(&n, "se"));
    assert!(json_number(&w, "gap") > json_number(&n, "gap"));
}

#[test]
fn verify_passes_and_the_unshifted_fixture_fails() {
    let ok = run(&["verify"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let text = stdout(&ok);
    assert_eq!(text.lines().next(), Some("scenario,t,mean,se,ref,pass"));
    assert_eq!(text.lines().count(), 1 + 5 * 5);
    for line in text.lines().filter(|l| l.contains(",0.0000000000000000e0,")) {
        assert!(line.ends_with("true"));
    }

    let bad = run(&["verify", "--unshifted"]);
    assert_eq!(bad.status.code(), Some(3));
    let text = stdout(&bad);
    for sigma in ["const(0.005)", "const(0.02)"] {
        assert!(text.lines().any(|l| l.starts_with(sigma) && l.ends_with("false")), "{sigma}");
    }
}

#[test]
fn calibrate_reports_a_tight_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let curve = write(dir.path(), "c.json", r#"{"knots": [[0, 0.015], [1, 0.025], [2, 0.035], [5, 0.03], [10, 0.028]]}"#);
    let out = dir.path().join("report.csv");
    let o = run(&["calibrate", "--curve", &curve, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().next(), Some("T,P_model,P_curve,abs_error"));
    assert!(rows(&text).iter().all(|r| r[3] <= 1e-10));
}

#[test]
fn gheat_square_gives_the_upper_variance() {
    let o = run(&["gheat", "--phi", "square"]);
    assert!(o.status.success());
    let u = rows(&stdout(&o))
        .into_iter()
        .filter(|r| r[0] == 1.0 && r[1].abs() < 1e-12)
        .map(|r| r[2])
        .next()
        .unwrap();
    assert!((u - 4e-4).abs() <= 0.01 * 4e-4, "{u}");
}

#[test]
fn simulate_is_deterministic() {
    let a = run(&["simulate", "--seed", "11", "--steps", "16"]);
    let b = run(&["simulate", "--seed", "11", "--steps", "16"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().next(), Some("t,sigma,B,qv,lambda,r,D"));
    let many = run(&["simulate", "--paths", "3", "--steps", "8"]);
    let text = stdout(&many);
    assert_eq!(text.lines().next(), Some("path,t,sigma,B,qv,lambda,r,D"));
    assert_eq!(text.lines().count(), 1 + 3 * 9);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"band": {"lo": 0.01, "hi": 0.01}, "maturities": [0, 2, 4]}"#,
    );
    let from_file = rows(&stdout(&run(&["price", "--config", &cfg])));
    assert_eq!(from_file.len(), 3);
    assert!(from_file.iter().all(|r| r[1] == r[3]));
    let overridden = rows(&stdout(&run(&["price", "--config", &cfg, "--band", "0.005,0.02"])));
    assert!(overridden[1][1] < overridden[1][3]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write(dir.path(), "typo.json", r#"{"alpah": 1.0}"#);
    assert_eq!(run(&["price", "--config", &typo]).status.code(), Some(1));
    assert_eq!(run(&["calibrate"]).status.code(), Some(1));
    assert_eq!(run(&["price", "--band", "0.3,0.1"]).status.code(), Some(1));
    let dup = write(dir.path(), "dup.csv", "T,f\n0,0.01\n5,0.02\n5,0.03\n");
    let o = run(&["calibrate", "--curve", &dup]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("duplicate maturity"));
    let blowup = write(dir.path(), "blowup.json", r#"{"mu": -1e5, "maturities": [10]}"#);
    assert_eq!(run(&["price", "--config", &blowup]).status.code(), Some(2));
}
