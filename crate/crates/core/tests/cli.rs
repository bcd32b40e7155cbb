use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn servopark(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_servopark"))
        .args(args)
        .env_remove("SERVOPARK_SEED")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_case1_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = servopark(&["run", "--case", "case1", "--out", out, "--plot"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = fs::read_to_string(dir.path().join("case1_traj.csv")).unwrap();
    assert!(traj.starts_with(
        "t,x,y,theta,z0,z1,z2,v,omega,u0,u1,u0_branch,u1_branch,in_gamma,est_angle_err,est_trans_err,visible_count\n"
    ));
    let s = json(&dir.path().join("case1_summary.json"));
    for key in [
        "converged", "t_converge", "final_pos_err", "final_ang_err", "path_length", "max_abs_v",
        "max_abs_omega", "peak_z0z1", "final_z0z1", "samples",
    ] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    assert_eq!(s["converged"], true);
    assert!(dir.path().join("case1_z0z1.csv").exists());
}

#[test]
fn run_estimated_with_noise_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec![
            "run".to_string(), "--case".into(), "case3".into(), "--perception".into(), "estimated".into(),
            "--noise-px".into(), "0.5".into(), "--seed".into(), "7".into(), "--t-max".into(), "20".into(),
            "--out".into(), d.to_str().unwrap().into(),
        ]
    };
    for d in [a.path(), b.path()] {
        let args = args(d);
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = servopark(&args);
        assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["case3_traj.csv", "case3_summary.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn env_seed_is_default_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, env: Option<&str>, extra: &[&str]| {
        let d = dir.path().join(sub);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_servopark"));
        cmd.args(["run", "--case", "case1", "--perception", "estimated", "--noise-px", "1", "--t-max", "2", "--out"])
            .arg(&d)
            .args(extra)
            .env_remove("SERVOPARK_SEED");
        if let Some(v) = env {
            cmd.env("SERVOPARK_SEED", v);
        }
        cmd.output().unwrap();
        fs::read(d.join("case1_traj.csv")).unwrap()
    };
    let by_env = run("env", Some("5"), &[]);
    let by_flag = run("flag", None, &["--seed", "5"]);
    let other = run("other", None, &["--seed", "6"]);
    assert_eq!(by_env, by_flag);
    assert_ne!(by_env, other);
}

#[test]
fn missing_config_exits_one() {
    let o = servopark(&["run", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
}

#[test]
fn config_file_with_unknown_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.json");
    fs::write(&p, r#"{"name": "s", "kappa0": 0.2}"#).unwrap();
    let o = servopark(&["run", "--config", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_run_and_not_converged_code() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("short.json");
    fs::write(
        &p,
        r#"{"name": "short", "initial_pose": {"x": -2.0, "y": 1.0, "theta": 0.3}, "t_max": 3.0}"#,
    )
    .unwrap();
    let o = servopark(&["run", "--config", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&dir.path().join("short_summary.json"))["converged"], false);
}

#[test]
fn starvation_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("blind.json");
    fs::write(
        &p,
        r#"{"name": "blind", "initial_pose": {"x": 0.0, "y": 0.0, "theta": 3.14159}, "perception_mode": "estimated"}"#,
    )
    .unwrap();
    let o = servopark(&["run", "--config", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn cases_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = servopark(&["cases", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let all = json(&dir.path().join("cases_summary.json"));
    let all = all.as_array().unwrap();
    assert_eq!(all.len(), 8);
    for c in all {
        assert_eq!(c["status"], "converged", "{c}");
        let name = c["name"].as_str().unwrap();
        assert!(dir.path().join(format!("{name}_traj.csv")).exists());
    }
}

#[test]
fn estimate_identity_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("id.csv");
    fs::write(&p, "x_cur,y_cur,x_ref,y_ref,X_star\n0.1,0.2,0.1,0.2,3\n-0.3,0.25,-0.3,0.25,4\n0.2,-0.1,0.2,-0.1,3.5\n").unwrap();
    let o = servopark(&["estimate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["theta"].as_f64().unwrap().abs() < 1e-12);
    assert!(v["t_x"].as_f64().unwrap().abs() < 1e-12);
    assert!(v["t_y"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn gen_pairs_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pairs.csv");
    let o = servopark(&[
        "gen-pairs", "--theta", "-0.35", "--tx", "0.8", "--ty", "-1.2", "--count", "9", "--seed", "4", "--out",
        p.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = servopark(&["estimate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["theta"].as_f64().unwrap() + 0.35).abs() < 1e-9);
    assert!((v["t_x"].as_f64().unwrap() - 0.8).abs() < 1e-9);
    assert!((v["t_y"].as_f64().unwrap() + 1.2).abs() < 1e-9);
    assert_eq!(v["pairs"], 9);
}

#[test]
fn malformed_pairs_exit_one_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    fs::write(&p, "x_cur,y_cur,x_ref,y_ref,X_star\n0.1,0.2,0.1,0.2,3\n0.1,0.2,oops,0.2,3\n").unwrap();
    let o = servopark(&["estimate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}
