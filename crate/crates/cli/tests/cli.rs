use std::path::Path;
use std::process::{Command, Output};

fn gumdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gumdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}, stderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{
  "environment": {"name": "illustrative", "task": "entropy"},
  "H": 15,
  "policies": [{"type": "mcts", "iterations": 60}, {"type": "solver", "fw_iterations": 50}, {"type": "random"}],
  "n_runs": 3,
  "master_seed": 5
}"#,
    )
    .unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn env_build_round_trips_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g.json");
    let file = file.to_str().unwrap();
    stdout(&gumdp(&["env", "build", "illustrative", "--task", "adversarial", "--out", file]));
    let g = gumdp::TabularGumdp::load(file).unwrap();
    assert_eq!(g.objective.task_name(), "adversarial");
    assert_eq!(stdout(&gumdp(&["env", "validate", file])).trim(), "ok");

    let mut broken = g.clone();
    broken.p0[0] += 0.5;
    broken.save(file).unwrap();
    let out = gumdp(&["env", "validate", file]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("p0"));
}

#[test]
fn experiment_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        stdout(&gumdp(&["experiment", &config, "--out", path.to_str().unwrap()]));
    }
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("env,task,policy,run,seed,f_value\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 3);

    let reseeded = stdout(&gumdp(&["--seed", "6", "experiment", &config]));
    assert_ne!(reseeded, text);
}

#[test]
fn experiment_summary_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let summary = dir.path().join("summary.csv");
    stdout(&gumdp(&["experiment", &config, "--summary", summary.to_str().unwrap()]));
    let text = std::fs::read_to_string(summary).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "env,task,policy,mean,ci_lo,ci_hi");
    assert_eq!(lines.len(), 4);
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"environment\": {\"name\": \"lake\"},\n  \"H\": 4\n}").unwrap();
    let out = gumdp(&["experiment", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn verify_exit_status() {
    let out = stdout(&gumdp(&["verify", "bijection"]));
    assert!(out.contains("suite bijection: PASS"));
    assert_eq!(gumdp(&["verify", "nonsense"]).status.code(), Some(2));
}

#[test]
fn planning_commands_emit_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g.json");
    let file = file.to_str().unwrap();
    stdout(&gumdp(&["env", "build", "theorem1", "--out", file]));

    let plan = stdout(&gumdp(&["--seed", "1", "plan", file, "-H", "6", "--history", "1,0,0", "--iterations", "300"]));
    assert!(plan.starts_with("t,action,n_a,q_a\n"));
    assert_eq!(plan.lines().count(), 3);
    let visits: u64 = plan.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(visits, 300);

    let episode = stdout(&gumdp(&["episode", file, "-H", "4", "--iterations", "50"]));
    assert!(episode.starts_with("t,action,n_a,q_a\n"));

    let eval = stdout(&gumdp(&["evaluate", file, "-H", "4", "--episodes", "7"]));
    assert!(eval.starts_with("episode,seed,f_value\n"));
    assert_eq!(eval.lines().count(), 8);

    let policy = dir.path().join("pi.json");
    let trace = stdout(&gumdp(&["solve-infinite", file, "--iterations", "20", "--policy-out", policy.to_str().unwrap()]));
    assert!(trace.starts_with("k,f_value\n"));
    assert_eq!(trace.lines().count(), 22);
    let eval = stdout(&gumdp(&["evaluate", file, "-H", "4", "--episodes", "3", "--policy-file", policy.to_str().unwrap()]));
    assert_eq!(eval.lines().count(), 4);
}

#[test]
fn exact_on_subset_sum() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.json");
    let file = file.to_str().unwrap();
    stdout(&gumdp(&["env", "build", "subset-sum", "--numbers", "3,5,2", "--k", "7", "--out", file]));
    let out = stdout(&gumdp(&["exact", file, "-H", "3"]));
    let value: f64 = out.lines().nth(1).unwrap().parse().unwrap();
    assert!(value.abs() < 1e-9);

    let out = stdout(&gumdp(&["exact", file, "-H", "3", "--history", "0"]));
    assert!(out.starts_with("action,q_a,optimal\n"));
}

#[test]
fn plot_data_is_ascending() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = stdout(&gumdp(&["plot-data", &config, "--sweep", "H", "--values", "12,4,8"]));
    assert!(out.starts_with("sweep_value,policy,mean,ci_lo,ci_hi\n"));
    let keys: Vec<u64> = out.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(keys, [4, 4, 4, 8, 8, 8, 12, 12, 12]);
}
