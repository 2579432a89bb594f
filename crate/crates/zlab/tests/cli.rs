use std::fs;
use std::process::{Command, Output};

fn zlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn uniform_flow_run_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let first = zlab(&["run", "uniform_flow", "--out", a.to_str().unwrap()]);
    assert_eq!(first.status.code(), Some(0), "{}", stdout(&first));
    assert!(stdout(&first).contains("a01_drift"));
    let second = zlab(&["--threads", "1", "run", "uniform_flow", "--out", b.to_str().unwrap()]);
    assert_eq!(second.status.code(), Some(0));
    for file in ["trace.csv", "diagnostics.json", "config.toml", "trace.svg"] {
        assert!(a.join(file).is_file(), "missing {file}");
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file} differs");
    }
}

#[test]
fn zero_dt_exits_one_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ok");
    assert_eq!(zlab(&["run", "uniform_flow", "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let text = fs::read_to_string(out.join("config.toml")).unwrap();
    let bad: String = text
        .lines()
        .map(|l| if l.starts_with("dt =") { "dt = 0.0".to_string() } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    let path = dir.path().join("bad.toml");
    fs::write(&path, bad).unwrap();
    let o = zlab(&["run", path.to_str().unwrap(), "--out", dir.path().join("bad").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("time.dt"));
}

#[test]
fn unknown_preset_exits_one() {
    let o = zlab(&["run", "no_such_preset"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn kernel_bench_without_sizes_prints_empty_table() {
    let o = zlab(&["kernel-bench"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn kernel_bench_single_source_counts() {
    let o = zlab(&["kernel-bench", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with("true"));
}

#[test]
fn verify_group_passes() {
    let o = zlab(&["verify", "group"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("star_group/associativity"));
}

#[test]
fn verify_unknown_suite_exits_one() {
    assert_eq!(zlab(&["verify", "nope"]).status.code(), Some(1));
}

#[test]
fn star_check_low_order_passes() {
    let o = zlab(&["star-check", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
