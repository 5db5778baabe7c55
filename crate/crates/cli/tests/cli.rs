use std::path::Path;
use std::process::{Command, Output};

fn hetcomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetcomp")).args(args).output().unwrap()
}

fn run_to(dir: &Path, name: &str, extra: &[&str]) -> Vec<u8> {
    let out = dir.join(name);
    let mut args = vec!["--scenario", "throughput-vs-delay-adaptive", "--trials", "200", "--fading-per-geometry", "2"];
    args.extend_from_slice(&["--output", out.to_str().unwrap()]);
    args.extend_from_slice(extra);
    let o = hetcomp(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read(out).unwrap()
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_to(dir.path(), "a.csv", &["--workers", "1"]);
    let b = run_to(dir.path(), "b.csv", &["--workers", "4"]);
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().starts_with("sweep_value,metric,value,stderr,flags\n"));
    assert!(dir.path().join("a.csv.manifest.json").exists());
}

#[test]
fn json_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_to(dir.path(), "r.json", &["--format", "json"]);
    let text = String::from_utf8(text).unwrap();
    assert!(text.trim_start().starts_with('{') && text.contains("\"rows\""));
}

#[test]
fn stdout_when_no_output_given() {
    let o = hetcomp(&["--scenario", "time-fraction-sweep", "--trials", "100"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("70,eta,")));
}

#[test]
fn dumped_config_runs_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let o = hetcomp(&["--scenario", "ccdf-vs-bounds", "--trials", "500", "--dump-config"]);
    assert!(o.status.success());
    let cfg = dir.path().join("spec.toml");
    std::fs::write(&cfg, &o.stdout).unwrap();

    let again = hetcomp(&["--config", cfg.to_str().unwrap(), "--dump-config"]);
    assert_eq!(again.stdout, o.stdout);

    let from_file = hetcomp(&["--config", cfg.to_str().unwrap()]);
    let from_flags = hetcomp(&["--scenario", "ccdf-vs-bounds", "--trials", "500"]);
    assert!(from_file.status.success());
    assert_eq!(from_file.stdout, from_flags.stdout);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hetcomp(&["--config", "/nonexistent/spec.toml"]).status.code(), Some(1));
    assert_eq!(hetcomp(&[]).status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "scenario = \"nope\"\n").unwrap();
    assert_eq!(hetcomp(&["--config", bad.to_str().unwrap()]).status.code(), Some(1));

    // coordination set as large as the serving array: ZF is infeasible
    let o = hetcomp(&["--scenario", "time-fraction-sweep", "--dump-config"]);
    let text = String::from_utf8(o.stdout).unwrap().replace("coord_set_size = 1", "coord_set_size = 8");
    let zf = dir.path().join("zf.toml");
    std::fs::write(&zf, text).unwrap();
    let o = hetcomp(&["--config", zf.to_str().unwrap(), "--check"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn check_succeeds_on_presets() {
    for sc in ["time-fraction-sweep", "throughput-vs-delay-nonadaptive", "throughput-vs-delay-adaptive", "ccdf-vs-bounds"] {
        assert_eq!(hetcomp(&["--scenario", sc, "--check"]).status.code(), Some(0), "{sc}");
    }
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let o = hetcomp(&["--scenario", "time-fraction-sweep", "--trials", "10", "--output", "/nonexistent/dir/out.csv"]);
    assert_eq!(o.status.code(), Some(2));
}
