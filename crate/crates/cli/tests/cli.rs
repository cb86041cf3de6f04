use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SWEEP: &str = r#"{
  "model": "local-haar",
  "d": 2,
  "partition": {"N_A": 2, "m": 2},
  "sweep": {"N": [6, 8], "t": [1, 2, 6]},
  "k": [1, 2],
  "xi": [1, 2],
  "n_realizations": 3,
  "seed": 5
}"#;

fn mspe(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mspe"));
    cmd.args(args).env_remove("MSPE_SEED");
    if let Some(s) = env_seed {
        cmd.env("MSPE_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn distance_runs_are_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.json", SWEEP);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let o = mspe(
        &["--threads", "1", "distance", &cfg, "--output", a.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = mspe(
        &["--threads", "3", "distance", &cfg, "--output", b.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("model,N,d,N_A,m,loss_layout,basis,t,k,xi,realizations,delta_mean,delta_stderr")
    );
    // 2 sizes x 3 times x 2 orders x 2 norms
    assert_eq!(lines.count(), 24);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 5);
    assert_eq!(meta["config"]["model"], "local-haar");
    assert!(meta["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert!(meta["version"].is_string());
}

#[test]
fn rows_stay_on_the_sweep_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SWEEP);
    let out = dir.path().join("o.csv");
    assert!(mspe(&["distance", &cfg, "--output", out.to_str().unwrap()], None)
        .status
        .success());
    for line in fs::read_to_string(&out).unwrap().lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let delta: f64 = f[11].parse().unwrap();
        assert!((0.0..10.0).contains(&delta), "{line}");
        assert!(["6", "8"].contains(&f[1]) && ["1", "2", "6"].contains(&f[7]));
    }
}

#[test]
fn seed_flag_beats_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SWEEP);
    let path = |n: &str| dir.path().join(n);
    let run = |name: &str, flag: Option<&str>, env: Option<&str>| {
        let out = path(name);
        let mut args = vec!["distance", cfg.as_str(), "--output", out.to_str().unwrap()];
        if let Some(f) = flag {
            args.extend(["--seed", f]);
        }
        let o = mspe(&args, env);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(out).unwrap()
    };
    let env_only = run("env.csv", None, Some("77"));
    let flag_only = run("flag.csv", Some("77"), None);
    let both = run("both.csv", Some("5"), Some("77"));
    let config_seed = run("cfg.csv", None, None);
    assert_eq!(env_only, flag_only);
    assert_eq!(both, config_seed);
    assert_ne!(env_only, config_seed);
}

#[test]
fn validation_errors_are_config_errors_with_lines() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.json", SWEEP);
    let o = mspe(&["validate", &ok], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let bad_m = write(dir.path(), "m.json", &SWEEP.replace("\"m\": 2", "\"m\": 5"));
    let o = mspe(&["validate", &bad_m], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4: partition.m:"));
    assert!(stderr(&o).contains("lost sites exceed bath"));

    let qutrit = write(
        dir.path(),
        "d.json",
        &SWEEP
            .replace("local-haar", "dual-unitary")
            .replace("\"d\": 2", "\"d\": 3"),
    );
    let o = mspe(&["validate", &qutrit], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3: d:"));

    let broken = write(
        dir.path(),
        "b.json",
        "{\n  \"model\": \"local-haar\",\n  \"partition\": {\"N_A\": 2, \"m\": 2,}\n}",
    );
    let o = mspe(&["validate", &broken], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"));

    let o = mspe(&["validate", &ok, "--for", "entropy"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_violation_is_a_resource_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "big.json", &SWEEP.replace("\"k\": [1, 2]", "\"k\": [2, 7]"));
    let out = dir.path().join("never.csv");
    let o = mspe(&["distance", &cfg, "--output", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("k = 7"));
    assert!(fs::read_dir(dir.path()).unwrap().count() == 1, "nothing but the config");
}

#[test]
fn zero_custom_reference_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let zero =
        serde_json::json!([{"k": 1, "site_dim": 4, "matrix": {"rows": 4, "cols": 4, "data": vec![[0.0, 0.0]; 16]}}]);
    let reference = write(dir.path(), "zero.json", &zero.to_string());
    let cfg = SWEEP.replace("\"k\": [1, 2]", "\"k\": [1]").replace(
        "\"seed\": 5",
        &format!("\"seed\": 5,\n  \"reference_ensemble\": {{\"custom-file\": {reference:?}}}"),
    );
    let cfg = write(dir.path(), "c.json", &cfg);
    let out = dir.path().join("o.csv");
    let o = mspe(&["distance", &cfg, "--output", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn entropy_and_spectrum_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
  "model": "dual-unitary",
  "N": 8,
  "partition": {"N_A": 2, "m": 2, "reference": true},
  "sweep": {"t": [2, 8]},
  "k": [2, 3],
  "n_realizations": 2,
  "seed": 3
}"#;
    let cfg = write(dir.path(), "e.json", cfg);
    let ent = dir.path().join("e.csv");
    let o = mspe(&["entropy", &cfg, "--output", ent.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&ent).unwrap();
    assert!(text.starts_with("model,N,d,N_A,m,t,k,I_mean,I_stderr\ndual-unitary,8,2,2,2,2,2,"));
    assert_eq!(text.lines().count(), 5);
    for line in text.lines().skip(1) {
        let i: f64 = line.split(',').nth(7).unwrap().parse().unwrap();
        assert!(i.abs() <= 2f64.ln() + 1e-9);
    }

    let spec = dir.path().join("s.csv");
    let o = mspe(
        &[
            "spectrum",
            &cfg,
            "--output",
            spec.to_str().unwrap(),
            "--set",
            "histogram_bins=16",
        ],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&spec).unwrap();
    assert!(text.starts_with("model,N,d,N_A,m,t,bin_left,bin_right,count\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 16);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["summary"].as_array().unwrap().len(), 2);
    assert_eq!(meta["config"]["histogram_bins"], 16);
}

#[test]
fn alpha_tables() {
    let o = mspe(
        &["alpha", "--limit", "large-t", "--d", "2", "--m", "2", "--k", "2"],
        None,
    );
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let text = v.to_string();
    assert_eq!(v["coefficients"]["2"], 0.25, "{text}");
    assert_eq!(v["coefficients"]["1+1"], 1.0);
    assert_eq!(v["context"]["limit"], "large-t");
    let o = mspe(&["alpha", "--limit", "finite-t", "--k", "3"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = mspe(&["alpha", "--limit", "finite-t", "--t", "6", "--k", "3"], None);
    assert!(o.status.success());
}
