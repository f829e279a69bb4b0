use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bapi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bapi"))
        .args(args)
        .env_remove("BAPI_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{
    "backend": {"synthetic": {"dim": 1, "t_max": 6, "seed": 3, "noise_sd": 0.01}},
    "methods": ["random", "ei_tmax", "bapi"],
    "budget": 30.0,
    "seeds": [0, 1],
    "tuning": {"fit_restarts": 1, "fit_max_iter": 15, "constraint_samples": 64}
}"#;

fn sorted_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

#[test]
fn run_writes_one_trace_per_method_and_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let o = bapi(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    assert_eq!(
        sorted_files(&out.join("traces")),
        [
            "bapi_seed0.csv",
            "bapi_seed1.csv",
            "ei_tmax_seed0.csv",
            "ei_tmax_seed1.csv",
            "random_seed0.csv",
            "random_seed1.csv"
        ]
    );
    assert!(out.join("aggregate.csv").is_file());
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 7);
    assert!(runs.lines().skip(1).all(|l| l.contains(",ok,")), "{runs}");
}

#[test]
fn repeated_runs_produce_identical_traces() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = bapi(&["run", "--config", &cfg, "--out", dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in sorted_files(&a.join("traces")) {
        let x = fs::read(a.join("traces").join(&name)).unwrap();
        let y = fs::read(b.join("traces").join(&name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
    assert_eq!(fs::read(a.join("aggregate.csv")).unwrap(), fs::read(b.join("aggregate.csv")).unwrap());
}

#[test]
fn parallel_run_matches_serial() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"backend": {"synthetic": {"dim": 2, "t_max": 5}}, "methods": ["random", "ei_per_cost"],
            "budget": 25.0, "seeds": [4, 5, 6]}"#,
    );
    let a = tmp.path().join("serial");
    let b = tmp.path().join("parallel");
    assert!(bapi(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(bapi(&["run", "--config", &cfg, "--out", b.to_str().unwrap(), "--parallel", "3"]).status.success());
    for name in sorted_files(&a.join("traces")) {
        assert_eq!(fs::read(a.join("traces").join(&name)).unwrap(), fs::read(b.join("traces").join(&name)).unwrap());
    }
}

#[test]
fn aggregate_and_plot_subcommands() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"backend": {"synthetic": {"dim": 1, "t_max": 4}}, "method": "random", "budget": 15.0, "seeds": [0, 1]}"#,
    );
    let out = tmp.path().join("out");
    assert!(bapi(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());

    let agg = tmp.path().join("again.csv");
    let traces = out.join("traces");
    let o = bapi(&["aggregate", traces.to_str().unwrap(), "--budget", "15", "--out", agg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&agg).unwrap(), fs::read(out.join("aggregate.csv")).unwrap());

    let svg = tmp.path().join("plot.svg");
    let o = bapi(&["plot", agg.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn out_dir_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"backend": {"synthetic": {"dim": 1, "t_max": 4}}, "method": "random", "budget": 10.0, "seeds": [0]}"#,
    );
    let out = tmp.path().join("env_out");
    let o = Command::new(env!("CARGO_BIN_EXE_bapi"))
        .args(["run", "--config", &cfg])
        .env("BAPI_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("traces/random_seed0.csv").is_file());
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    let cfg = write_config(tmp.path(), r#"{"backend": {"synthetic": {}}, "method": "random", "budget": -1, "seeds": [0]}"#);
    assert_eq!(bapi(&["run", "--config", &cfg, "--out", out]).status.code(), Some(1));

    let cfg = write_config(tmp.path(), r#"{"backend": {"synthetic": {}}, "method": "sgd", "budget": 5, "seeds": [0]}"#);
    assert_eq!(bapi(&["run", "--config", &cfg, "--out", out]).status.code(), Some(1));

    // No output directory anywhere.
    let cfg = write_config(tmp.path(), r#"{"backend": {"synthetic": {}}, "method": "random", "budget": 5, "seeds": [0]}"#);
    assert_eq!(bapi(&["run", "--config", &cfg]).status.code(), Some(1));

    assert_eq!(bapi(&["run", "--config", "/nonexistent/run.json", "--out", out]).status.code(), Some(1));
    assert_eq!(bapi(&["run"]).status.code(), Some(1));
}

#[test]
fn malformed_trace_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let traces = tmp.path().join("traces");
    fs::create_dir(&traces).unwrap();
    fs::write(traces.join("random_seed0.csv"), "this,is\nnot,a trace\n").unwrap();
    let out = tmp.path().join("agg.csv");
    let o = bapi(&["aggregate", traces.to_str().unwrap(), "--budget", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_and_version_exit_cleanly() {
    let o = bapi(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("run"));
    assert_eq!(bapi(&["--version"]).status.code(), Some(0));
}
