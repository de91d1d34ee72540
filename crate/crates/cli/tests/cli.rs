use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_haps-planner"))
}

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

#[test]
fn solve_default_writes_json_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solution.json");
    let o = run(bin().args(["solve", "--seed", "0", "--format", "json"]).arg("--config").arg(bundled("reference.toml")).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for key in ["u_haps", "n_uav", "kappa_opt"] {
        assert!(v["summary"].get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["users"].as_array().unwrap().len(), 20);
}

#[test]
fn solve_csv_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plan.csv");
    let o = run(bin().args(["solve", "--format", "csv"]).arg("--config").arg(bundled("reference.toml")).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0));
    let users = std::fs::read_to_string(&out).unwrap();
    assert!(users.starts_with("user,x_m,y_m,radius_m,zone,server"));
    assert_eq!(users.lines().count(), 21);
    assert!(dir.path().join("plan_summary.csv").exists());
    assert!(dir.path().join("plan_trace.csv").exists());
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.toml");
    let o = run(bin().arg("solve").arg("--config").arg(&missing).arg("--out").arg(dir.path().join("x.json")));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere.toml"));
}

#[test]
fn bad_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "eta1 = 40.0\n").unwrap();
    let o = run(bin().arg("validate").arg("--config").arg(&cfg));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eta2"));

    std::fs::write(&cfg, "fc_ghz = 2.0\n").unwrap();
    let o = run(bin().arg("validate").arg("--config").arg(&cfg));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fc_ghz"));
}

#[test]
fn impossible_rate_exits_with_outage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hard.toml");
    std::fs::write(&cfg, "r0_bps = 1e12\n[optimizer]\nq_max = 4\n").unwrap();
    let out = dir.path().join("s.json");
    let o = run(bin().arg("solve").arg("--config").arg(&cfg).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["summary"]["outage_count"], 20);
}

#[test]
fn baseline_table_has_four_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("high.toml");
    std::fs::write(&cfg, "r0_bps = 5e7\nM = 10000000\n").unwrap();
    let o = run(bin().arg("baseline").arg("--config").arg(&cfg));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("regime,kappa,coverage_pct,u_haps,n_uav,outage,lambda_upp_db"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let names: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(names, ["uav-only", "haps-only", "equal-split", "optimized"]);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[1][4], "0");
}

#[test]
fn sweep_writes_sorted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.toml");
    std::fs::write(&spec, "variable = \"M\"\ngrid = [1e5, 3.5e5]\nregime = \"haps-only\"\nreplications = 2\n[scenario]\nr0_bps = 1.6e7\n").unwrap();
    let out = dir.path().join("sweep.csv");
    let o = run(bin().arg("sweep").arg("--spec").arg(&spec).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let keys: Vec<(String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    assert_eq!(keys.len(), 4);
    assert_eq!(keys[0], ("100000.0".to_string(), "0".to_string()));
    assert_eq!(keys[3], ("350000.0".to_string(), "1".to_string()));
}

#[test]
fn bundled_configs_validate() {
    let o = run(bin().arg("validate").arg("--config").arg(bundled("reference.toml")));
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("20 users"));
}

#[test]
fn bundled_default_matches_library_defaults() {
    let cfg = haps_planner::ScenarioConfig::from_path(&bundled("reference.toml")).unwrap();
    assert_eq!(cfg, haps_planner::ScenarioConfig::default());
    let text = std::fs::read_to_string(bundled("sweep_ris.toml")).unwrap();
    haps_planner::SweepSpec::from_toml_str(&text).unwrap().validate().unwrap();
}
