use std::path::Path;
use std::process::{Command, Output};

fn linmed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linmed"))
        .args(args)
        .env_remove("LINMED_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const RUN_CONFIG: &str = r#"
horizon = 300
trials = 3
master_seed = 42
delay = 2
checkpoints = 10

[instance]
name = "end-of-optimism"
epsilon = 0.1

[[policies]]
name = "LinMED-90"

[[policies]]
name = "OFUL"
"#;

const OPE_CONFIG: &str = r#"
horizon = 200
trials = 4
master_seed = 3

[instance]
name = "ope"

[[policies]]
name = "LinMED-50"
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn verify_passes() {
    let o = linmed(&["verify", "--seed", "3"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn design_check_reports_certificates() {
    let o = linmed(&["design-check", "--d", "3", "--k", "20", "--seeds", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("max tau/(d ln d)="));

    let dir = tempfile::tempdir().unwrap();
    let csv = write_config(dir.path(), "arms.csv", "x,y\n1,0\n0,2\n3,4\n");
    let o = linmed(&["design-check", "--csv", &csv, "--normalize"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("K=3"));

    let o = linmed(&["design-check", "--d", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_regret_and_is_thread_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", RUN_CONFIG);
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("out{threads}"));
        let o = linmed(&["run", "--config", &cfg, "--threads", threads, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("LinMED-90 final mean regret"));
        outputs.push(std::fs::read(out.join("regret.csv")).unwrap());
        assert!(out.join("config.toml").exists());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(text.starts_with("policy,t,mean_regret,stderr,trials"));
    assert!(text.lines().any(|l| l.starts_with("OFUL,300,")));
}

#[test]
fn seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", RUN_CONFIG);
    let read = |seed: &str| {
        let out = dir.path().join(format!("s{seed}"));
        let o = linmed(&["run", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(out.join("regret.csv")).unwrap()
    };
    assert_ne!(read("1"), read("2"));
}

#[test]
fn ope_writes_summary_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ope.toml", OPE_CONFIG);
    let out = dir.path().join("ope");
    let o = linmed(&["ope", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("LinMED-50 mean"));
    let summary = std::fs::read_to_string(out.join("ope_summary.csv")).unwrap();
    assert!(summary.lines().count() >= 2);
    let logs: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("ope_0"))
        .collect();
    assert!(!logs.is_empty());
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let o = linmed(&["run", "--config", "/nonexistent/config.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("linmed: "));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "horizon = 10\n[instance]\nname = \"large-gap\"\n[[policies]]\nname = \"UCB-9000\"\n",
    );
    let o = linmed(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("UCB-9000"));

    let cfg = write_config(dir.path(), "typo.toml", "horizon = 10\nhorizn = 3\n");
    let o = linmed(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}
