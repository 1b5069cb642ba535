use std::fs;
use std::path::Path;
use std::process::Command;

fn polymerlab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_polymerlab"));
    c.env_remove("POLYMERLAB_THREADS");
    c
}

fn run_ok(args: &[&str], out: &Path) -> String {
    let status = polymerlab().args(args).arg("--output").arg(out).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    fs::read_to_string(out.join("results.csv")).unwrap()
}

const CONVERGE: &[&str] = &[
    "run", "converge", "--alpha", "1.5", "--d", "1", "--N-grid", "64,256", "--a", "0.2", "--beta-hat", "1", "--replicas",
    "200", "--seed", "7",
];

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_ok(CONVERGE, &dir.path().join("a"));
    let b = run_ok(CONVERGE, &dir.path().join("b"));
    assert_eq!(a, b);
    // two statistics, two sizes, one component without ψ
    assert_eq!(a.lines().count(), 1 + 4);
    assert!(a.starts_with("experiment_id,side,N_or_a,statistic,value,se,seed,config_hash\n"));

    let mut other = CONVERGE.to_vec();
    *other.last_mut().unwrap() = "8";
    let c = run_ok(&other, &dir.path().join("c"));
    assert_ne!(a, c);
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run", "replica-moment", "--N", "32", "--a", "0.1", "--b", "4", "--replicas", "500", "--seed", "3"];
    let one = run_ok(&[&args[..], &["--threads", "1"]].concat(), &dir.path().join("one"));
    let out = dir.path().join("four");
    let status = polymerlab()
        .args(args)
        .env("POLYMERLAB_THREADS", "4")
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success());
    assert_eq!(one, fs::read_to_string(out.join("results.csv")).unwrap());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["threads"], 4);
}

#[test]
fn supercritical_alpha_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = polymerlab()
        .args(["run", "converge", "--alpha", "2.1", "--d", "2", "--N-grid", "64", "--a", "0.2"])
        .arg("--output")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("law.alpha") && err.contains("α_c"), "{err}");
    assert!(!dir.path().join("results.csv").exists());

    let ok = polymerlab()
        .args(["check", "converge", "--alpha", "1.9", "--d", "2", "--N-grid", "64", "--a", "0.2"])
        .output()
        .unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        r#"
experiment = "simulate-discrete"
replicas = 4
seed = 11

[law]
family = "pareto"
alpha = 0.7

[geometry]
N = 64
d = 1

[disorder]
beta_hat = 0.5
a = 0.1
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let csv = run_ok(&["run", "--config", cfg.to_str().unwrap(), "--replicas", "2"], &out);
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("experiment_id,N,d,alpha,a,b,beta_hat,functional,value,normalization,seed"));
    assert!(rows[1].contains(",64,1,0.7,0.1,inf,0.5,one,"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["replicas"], 2);
    assert_eq!(manifest["seed"], 11);
    let hash = manifest["config_hash"].as_str().unwrap();
    assert!(rows[1].ends_with(hash));
}

#[test]
fn bad_inputs_exit_2() {
    let out = polymerlab().args(["run", "converge", "--a", "0.2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("geometry.N"));
    let out = polymerlab().args(["run", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = polymerlab().args(["run", "--alpha", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resource_guard_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = polymerlab()
        .args(["run", "simulate-discrete", "--alpha", "1.2", "--d", "3", "--N", "1024", "--replicas", "1"])
        .arg("--output")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
