use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
dataset = synth
synth.num_classes = 3
synth.dimension = 4
synth.per_class_source = 10
synth.per_class_target = 20
method = mkl-ms
initial_per_class = 4
cv_folds = 3
c_grid = 1
lambda_grid = 0.25
q = 3
budget = 2
seeds = 0,1
";

fn adamkl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adamkl"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ADAMKL_OUTPUT")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = adamkl(&["run", &cfg, "--output", out.to_str().unwrap()], dir.path());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for name in ["curve.csv", "summary.csv", "config.echo"] {
        assert!(out.join(name).is_file(), "{name}");
    }
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.starts_with("mkl-ms: OA"), "{stdout}");
}

#[test]
fn output_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let env_out = dir.path().join("from-env");
    let res = Command::new(env!("CARGO_BIN_EXE_adamkl"))
        .args(["run", &cfg, "--seed-override", "5"])
        .current_dir(dir.path())
        .env("ADAMKL_OUTPUT", &env_out)
        .output()
        .unwrap();
    assert!(res.status.success());
    let curve = fs::read_to_string(env_out.join("curve.csv")).unwrap();
    let echo = fs::read_to_string(env_out.join("config.echo")).unwrap();
    assert!(echo.contains("seeds = 5"), "{echo}");
    assert_eq!(curve.lines().count(), 4);
}

#[test]
fn validate_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "dataset = synth\n");
    let res = adamkl(&["validate", &cfg], dir.path());
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("method = mkl-ms"), "{stdout}");
    assert!(stdout.contains("q = 20"), "{stdout}");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "dataset = synth\ncolour = blue\n");
    let res = adamkl(&["validate", &unknown], dir.path());
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("colour"));

    let missing = dir.path().join("nope.cfg");
    let res = adamkl(&["run", missing.to_str().unwrap()], dir.path());
    assert_eq!(res.status.code(), Some(2));

    let cfg = write_config(dir.path(), "dataset = synth\nq = 0\n");
    assert_eq!(adamkl(&["run", &cfg], dir.path()).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "dataset = missing.adamkl\nseeds = 0\n");
    let res = adamkl(&["run", &cfg, "--output", "out"], dir.path());
    assert_eq!(res.status.code(), Some(3));
    let bad = dir.path().join("bad.adamkl");
    fs::write(&bad, "ADAMKL v1 N=1 D=2 C=1\n1\n0\nS\n").unwrap();
    let cfg = write_config(dir.path(), &format!("dataset = {}\nseeds = 0\n", bad.display()));
    let res = adamkl(&["run", &cfg, "--output", "out"], dir.path());
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("byte"));
}

#[test]
fn synth_writes_a_loadable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let res = adamkl(&["synth", &cfg, "--output", "data"], dir.path());
    assert!(res.status.success());
    let text = fs::read_to_string(dir.path().join("data/synthetic.adamkl")).unwrap();
    assert!(text.starts_with("ADAMKL v1 N=90 D=4 C=3\n"));

    let file_cfg = write_config(dir.path(), "dataset = data/synthetic.adamkl\n");
    assert_eq!(adamkl(&["synth", &file_cfg], dir.path()).status.code(), Some(2));
}
