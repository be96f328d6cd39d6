use std::path::Path;
use std::process::{Command, Output};

fn fbsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbsense"))
        .args(args)
        .output()
        .expect("run fbsense")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn validate_accepts_empty_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.toml", "");
    let out = fbsense(&["validate", "--config", &cfg]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        "ok: 51 sweep points x 4 schemes"
    );
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.toml",
        "network.r_ps = -150\nsweep.step = 0\n",
    );
    let out = fbsense(&["validate", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("network.r_ps") && err.contains("sweep.step"),
        "{err}"
    );

    let broken = write(dir.path(), "broken.toml", "network.M_p = \n");
    let out = fbsense(&["sweep", "--config", &broken, "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn infeasible_everywhere_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hot.toml", "sweep.values = [0.3, 0.5]\n");
    let csv = dir.path().join("hot.csv");
    let out = fbsense(&["sweep", "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 4);
    assert!(text.lines().skip(1).all(|l| l.contains(",false,")));
}

#[test]
fn sweep_writes_csv_and_script_with_scheme_subset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", "sweep.values = [0.05, 0.1]\n");
    let csv = dir.path().join("small.csv");
    let out = fbsense(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        csv.to_str().unwrap(),
        "--schemes",
        "fb,genie",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let schemes: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(schemes, ["fb", "genie", "fb", "genie"]);
    assert!(dir.path().join("small.csv.gp").exists());
}

#[test]
fn sim_flag_adds_monte_carlo_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.toml",
        "sweep.values = [0.1]\nschemes = [\"nofb\"]\nsim.slots = 30000\nsim.warmup = 1000\nsim.replications = 2\n",
    );
    let csv = dir.path().join("sim.csv");
    let out = fbsense(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        csv.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().ends_with(",seed"));
    assert!(lines.next().unwrap().ends_with(",99"));
}

#[test]
fn missing_output_path_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "noout.toml", "sweep.values = [0.1]\n");
    let out = fbsense(&["sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}
