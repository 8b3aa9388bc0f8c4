use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_tangent-align");

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("exp.conf");
    fs::write(&path, text).unwrap();
    path
}

fn tangent_align(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn shipped_configs_validate() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        let out = tangent_align(&["validate", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}: {}", path.display(), stderr(&out));
        seen += 1;
    }
    assert_eq!(seen, 7);
}

#[test]
fn unknown_key_fails_before_writing_anything() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "kind = noisy_regression_supernat\nlearning_rte = 0.1\n");
    let out = tangent_align(&["--out", out_dir.to_str().unwrap(), "run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("unknown key 'learning_rte'"), "{err}");
    assert!(err.contains("did you mean 'learning_rate'"), "{err}");
    assert!(!out_dir.exists());
}

#[test]
fn negative_learning_rate_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "kind = disk_alignment\nlearning_rate = -0.1\n");
    let out = tangent_align(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("'learning_rate' = -0.1"), "{}", stderr(&out));
}

#[test]
fn every_issue_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "kind = disk_alignment\nwidht = 4\nno equals sign\nsteps = many\n",
    );
    let out = tangent_align(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(
        err.contains("line 2") && err.contains("line 3") && err.contains("line 4"),
        "{err}"
    );
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = tangent_align(&["validate", "/nonexistent/exp.conf"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_outputs_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "kind = noisy_regression_supernat\nsteps = 50\n");
    let out = tangent_align(&[
        "--seed",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
        "run",
        cfg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config.seed = 3"));
    assert!(manifest.contains("sha256.curves.csv = "));
    assert!(manifest.contains("library_version = "));
    assert!(!out_dir.join("PARTIAL_RUN").exists());
}

#[test]
fn missing_dataset_file_leaves_partial_marker() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "kind = perturbation_response\ndataset = csv\ndata_path = /nonexistent/data.csv\n",
    );
    let out = tangent_align(&["--out", out_dir.to_str().unwrap(), "run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(out_dir.join("PARTIAL_RUN").exists());
    assert!(!out_dir.join("manifest.txt").exists());
}

#[test]
fn divergence_exits_with_its_own_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "kind = noisy_regression_supernat\nlearning_rate = 1000\nsteps = 200\n",
    );
    let out = tangent_align(&["--out", out_dir.to_str().unwrap(), "run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(out_dir.join("PARTIAL_RUN").exists());
}

#[test]
fn replicas_get_their_own_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "kind = noisy_regression_supernat\nsteps = 20\nreplicas = 3\nseed = 5\n",
    );
    let out = tangent_align(&[
        "--threads",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
        "run",
        cfg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for s in 5..8 {
        assert!(out_dir.join(format!("seed_{s}/curves.csv")).exists());
    }
}
