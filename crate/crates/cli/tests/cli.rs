use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bvylab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bvylab"))
        .args(args)
        .current_dir(dir)
        .env_remove("WORKERS")
        .output()
        .unwrap()
}

fn golden() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/golden-1d.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    std::fs::write(dir.join(name), serde_json::to_string(v).unwrap()).unwrap();
    name.to_string()
}

#[test]
fn passing_run_exits_zero_and_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "g.json", &golden());
    let out = bvylab(tmp.path(), &["run", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("verdict: Pass"));
    assert!(!stdout.contains("[FAIL]"));
    let dir = tmp.path().join("out/golden-1d");
    for f in ["report.json", "curve.csv", "curve.svg", "timing.log"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "pass");
    assert!(report["config"].get("output_dir").is_none());
    for a in report["assertions"].as_array().unwrap() {
        let (lhs, rhs, margin) = (
            a["lhs"].as_f64().unwrap(),
            a["rhs"].as_f64().unwrap(),
            a["margin"].as_f64().unwrap(),
        );
        // the default JSON float parser may be one ulp off
        assert!((margin - (rhs - lhs)).abs() <= 1e-12 * (lhs.abs() + rhs.abs()));
        assert_eq!(a["holds"].as_bool().unwrap(), lhs <= rhs);
    }
}

#[test]
fn failed_assertion_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = golden();
    v["checks"]["tolerance"] = 1e-9.into();
    v["bvy"]["n_pairs"] = 20_000.into();
    let cfg = write(tmp.path(), "tight.json", &v);
    let out = bvylab(tmp.path(), &["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL]"));
    // the report is still written
    assert!(tmp.path().join("out/golden-1d/report.json").is_file());
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let mut unknown = golden();
    unknown["bvy"]["n_pairz"] = 10.into();
    let mut no_seed = golden();
    no_seed.as_object_mut().unwrap().remove("seed");
    let mut wrong_space = golden();
    wrong_space["space"]["window"] = serde_json::json!({ "min": [0.0, 0.0], "max": [1.0, 1.0] });
    let mut weighted_asymptotic = golden();
    weighted_asymptotic["scenario"] = "verify-asymptotic".into();
    weighted_asymptotic["space"] = serde_json::json!({
        "kind": "WeightedEuclidean",
        "window": { "min": [0.0], "max": [1.0] },
        "params": { "weight": "sine", "amplitude": 0.5, "frequency": 1.0 }
    });
    let mut negative_p = golden();
    negative_p["bvy"]["p"] = (-1.0).into();
    for (i, v) in [
        unknown,
        no_seed,
        wrong_space,
        weighted_asymptotic,
        negative_p,
    ]
    .iter()
    .enumerate()
    {
        let cfg = write(tmp.path(), &format!("bad{i}.json"), v);
        let out = bvylab(tmp.path(), &["run", &cfg]);
        assert_eq!(
            out.status.code(),
            Some(2),
            "case {i}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
        assert!(
            String::from_utf8_lossy(&out.stderr).starts_with("error:"),
            "case {i}"
        );
    }
    let out = bvylab(tmp.path(), &["run", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn catalogue_lists_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bvylab(tmp.path(), &["catalogue"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["scenarios"].as_array().unwrap().len(), 6);
    assert!(v["spaces"].as_array().unwrap().len() >= 5);
    assert!(!v["functions"].as_array().unwrap().is_empty());
}

#[test]
fn plot_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "g.json", &golden());
    assert_eq!(bvylab(tmp.path(), &["run", &cfg]).status.code(), Some(0));
    let out = bvylab(
        tmp.path(),
        &["plot", "out/golden-1d/curve.csv", "again.svg"],
    );
    assert_eq!(out.status.code(), Some(0));
    let again = std::fs::read(tmp.path().join("again.svg")).unwrap();
    assert_eq!(
        again,
        std::fs::read(tmp.path().join("out/golden-1d/curve.svg")).unwrap()
    );

    std::fs::write(tmp.path().join("empty.csv"), "").unwrap();
    let out = bvylab(tmp.path(), &["plot", "empty.csv", "x.svg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("x.svg").exists());
}
