use std::fs;
use std::path::Path;

use morse_gauge::cli::{run_from, EXIT_DEPTH, EXIT_OTHER, EXIT_PASS, EXIT_VIOLATED};
use serde_json::Value;

fn run(args: &[&str], out: &Path) -> i32 {
    let mut v = vec!["morse-gauge"];
    v.extend_from_slice(args);
    v.extend_from_slice(&["--out", out.to_str().unwrap()]);
    run_from(v)
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn step2_theorem_passes_five_trials() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run-theorem", "--fn", "step2", "--eps", "0.1", "--trials", "5"], dir.path()), EXIT_PASS);
    let r = report(dir.path());
    assert_eq!(r["exit_code"], 0);
    assert_eq!(r["runs"][0]["reports"].as_array().unwrap().len(), 5);
    assert_eq!(r["runs"][0]["status"], "pass");
    let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("function,eps,trial,status"));
}

#[test]
fn constant_theorem_has_zero_deviation() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run-theorem", "--fn", "constant", "--eps", "0.001"], dir.path()), EXIT_PASS);
    let r = report(dir.path());
    let rep = &r["runs"][0]["reports"][0];
    assert_eq!(rep["l1_deviation"], 0.0);
    assert_eq!(rep["local_error_sum"], 0.0);
}

#[test]
fn inflated_gauge_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "run-theorem",
        "--fn",
        "step2",
        "--eps",
        "0.1",
        "--trials",
        "5",
        "--family",
        "ball",
        "--sabotage",
        "inflate-delta",
    ];
    assert_eq!(run(&args, dir.path()), EXIT_VIOLATED);
    assert_eq!(report(dir.path())["runs"][0]["status"], "bound_violated");
    let dir = tempfile::tempdir().unwrap();
    let args = ["run-theorem", "--fn", "linear1", "--eps", "0.1", "--sabotage", "inflate-delta"];
    assert_eq!(run(&args, dir.path()), EXIT_VIOLATED);
}

#[test]
fn same_seed_gives_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["run-theorem", "--fn", "checker2d", "--eps", "0.1", "--eps", "0.05", "--trials", "3", "--seed", "9"];
    assert_eq!(run(&args, a.path()), EXIT_PASS);
    assert_eq!(run(&args, b.path()), EXIT_PASS);
    for file in ["summary.csv", "report.json"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

#[test]
fn shallow_depth_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run-theorem", "--fn", "spike1", "--eps", "0.1", "--max-depth", "8"];
    assert_eq!(run(&args, dir.path()), EXIT_DEPTH);
    assert_eq!(report(dir.path())["runs"][0]["status"], "depth_exceeded");
}

#[test]
fn bad_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run-theorem", "--fn", "nope", "--eps", "0.1"], dir.path()), EXIT_OTHER);
    assert_eq!(run(&["run-theorem", "--fn", "step2", "--eps", "-1"], dir.path()), EXIT_OTHER);
    assert_eq!(run(&["run-theorem", "--fn", "step2"], dir.path()), EXIT_OTHER);
    assert_eq!(run(&["run-theorem", "--fn", "step2", "--eps", "0.1", "--lambda", "0.5"], dir.path()), EXIT_OTHER);
    assert_eq!(run(&["run-theorem", "--fn", "linear1", "--dim", "2", "--eps", "0.1"], dir.path()), EXIT_OTHER);
}

#[test]
fn corollary_runs() {
    for f in ["constant", "step2", "spike1"] {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run(&["run-corollary", "--fn", f, "--eps", "0.1"], dir.path()), EXIT_PASS, "{f}");
        let r = report(dir.path());
        assert!(r["runs"][0]["report"]["riemann_sum_error"].as_f64().unwrap() < 0.1);
    }
}

#[test]
fn lusin_runs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run-lusin", "--fn", "step2", "--eps", "0.1", "--pairs", "500"], dir.path()), EXIT_PASS);
    let k = &report(dir.path())["runs"][0]["compact_set"];
    assert_eq!(k["pieces"].as_array().unwrap().len(), 2);
    assert!(k["separation"].as_f64().unwrap() > 0.0);
    let dir = tempfile::tempdir().unwrap();
    // a continuous entry is one piece, so K is all of Ω
    assert_eq!(run(&["run-lusin", "--fn", "lipschitz2d", "--eps", "0.1"], dir.path()), EXIT_PASS);
}

#[test]
fn lebesgue_map_writes_one_row_per_probe() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["lebesgue-map", "--fn", "checker2d", "--eps", "0.1", "--grid", "8"], dir.path()), EXIT_PASS);
    let csv = fs::read_to_string(dir.path().join("lebesgue_map.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 64);
    assert!(csv.starts_with("x0,x1,radius"));
    assert_eq!(report(dir.path())["certified"], 64);
}

#[test]
fn density_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let density = dir.path().join("density.csv");
    fs::write(&density, "level,value\n1,0.5\n1,1.5\n").unwrap();
    let args = ["run-theorem", "--fn", "linear1", "--eps", "0.1", "--density", density.to_str().unwrap()];
    assert_eq!(run(&args, dir.path()), EXIT_PASS);
    let exact = report(dir.path())["runs"][0]["reports"][0]["exact"][0].as_f64().unwrap();
    // 0.5·∫_0^½ x + 1.5·∫_½^1 x
    assert!((exact - (0.5 * 0.125 + 1.5 * 0.375)).abs() < 1e-15);
}

#[test]
fn families_are_written_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run-theorem", "--fn", "step2", "--eps", "0.1", "--trials", "2", "--families"];
    assert_eq!(run(&args, dir.path()), EXIT_PASS);
    assert!(dir.path().join("families/eps0_trial1.csv").exists());
}
