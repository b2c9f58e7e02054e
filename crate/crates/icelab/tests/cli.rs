use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn icelab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icelab")).args(args).current_dir(dir).env_remove("ICELAB_THREADS").output().unwrap()
}

const CHAIN: &str = r#"{"chain": {
  "model": "heights",
  "params": {"a": 1.0, "b": 1.0, "c": 3.0},
  "domain": {"n": 4},
  "chain": {"seed": 5, "sweeps": 400, "burn_in": 50},
  "observables": ["h(0,0)", "h2(0,0)", "ss(0,0;2,0)"],
  "snapshot": "state.json"
}}"#;

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, CHAIN.replace(r#""seed": 5, "#, "")).unwrap();
    let out = icelab(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("seed"), "{err}");
    assert!(err.contains("line"), "{err}");
}

#[test]
fn unknown_fields_and_bad_observables_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, CHAIN.replace(r#""burn_in": 50"#, r#""burn_in": 50, "temperature": 1"#)).unwrap();
    let out = icelab(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("temperature"));

    fs::write(&cfg, CHAIN.replace("h2(0,0)", "edge(3)")).unwrap();
    let out = icelab(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("edge(3)"));

    fs::write(&cfg, CHAIN.replace("h(0,0)", "h(9,9)")).unwrap();
    let out = icelab(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runs_are_byte_identical_and_snapshots_validate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, CHAIN).unwrap();
    let run = |name: &str, extra: &[&str]| {
        let mut args = vec!["run", cfg.to_str().unwrap(), "--out", name];
        args.extend_from_slice(extra);
        let out = icelab(&args, dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(dir.path().join(name)).unwrap()
    };
    let a = run("a.csv", &[]);
    let b = run("b.csv", &["--threads", "1"]);
    assert_eq!(a, b);
    let text = String::from_utf8(a.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "experiment,N,a,b,c,c_b_or_qb,J,U,seed,sweeps,observable,estimate,stderr,tau_int"
    );
    assert_eq!(lines.count(), 3);
    let c = run("c.csv", &["--seed-override", "6"]);
    assert_ne!(a, c);
    assert!(String::from_utf8(c).unwrap().contains(",6,400,"));

    let out = icelab(&["snapshot", "state.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("faces: 25"));

    let snap = fs::read_to_string(dir.path().join("state.json")).unwrap();
    fs::write(dir.path().join("broken.json"), snap.replacen("\"odd\": 1", "\"odd\": 3", 1)).unwrap();
    let out = icelab(&["snapshot", "broken.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn experiments_write_csv_to_configured_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("arrow.json");
    fs::write(
        &cfg,
        r#"{"arrow_bias": {"c": 3.0, "n": 6, "chain": {"seed": 1, "sweeps": 300, "burn_in": 30}, "output": "arrow.csv"}}"#,
    )
    .unwrap();
    let out = icelab(&["run", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("arrow.csv")).unwrap();
    for name in ["P(A(e))", "P(A(f))", "arrow_bias", "arrow_pair_covariance"] {
        assert!(csv.contains(name), "{name} missing from\n{csv}");
    }
}

#[test]
fn oracle_suites_pass_and_unknown_suites_fail() {
    let dir = tempfile::tempdir().unwrap();
    for suite in ["structural", "fk_ising", "coupling"] {
        let out = icelab(&["oracle", suite, "--quiet"], dir.path());
        assert!(out.status.success(), "{suite}: {}", String::from_utf8_lossy(&out.stdout));
        assert!(String::from_utf8_lossy(&out.stdout).contains(", 0 failed"));
    }
    let out = icelab(&["oracle", "nonsense"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
