use std::fs;

use tangent_align_harness::config::{parse_config, ExperimentConfig};
use tangent_align_harness::output::Table;
use tangent_align_harness::{run_in_memory, run_to_dir, RunError};

fn config(text: &str) -> ExperimentConfig {
    let parsed = parse_config(text);
    assert!(parsed.is_valid(), "{:?}", parsed.issues);
    parsed.config
}

fn col(t: &Table, name: &str) -> Vec<f64> {
    t.column(name).unwrap().into_iter().map(|v| v.unwrap()).collect()
}

const SMALL_NET: &str = "width = 12\ndepth = 3\nprobe_size = 20\nn_train = 60\nn_test = 40\n";

/// Small network settings, overridden by any key repeated in `extra`.
fn small(kind: &str, extra: &str) -> ExperimentConfig {
    let key = |line: &str| line.split('=').next().unwrap().trim().to_string();
    let overridden: Vec<String> = extra.lines().map(key).collect();
    let base: String = SMALL_NET
        .lines()
        .filter(|l| !overridden.contains(&key(l)))
        .map(|l| format!("{l}\n"))
        .collect();
    config(&format!("kind = {kind}\n{base}{extra}"))
}

#[test]
fn every_kind_runs_at_small_scale() {
    let cases = [
        small("disk_alignment", "steps = 30\ngrid_side = 8\ntop_k = 4\n"),
        small("fourier_1d", "grid_points = 20\ntop_k = 6\n"),
        config("kind = noisy_regression_supernat\nsteps = 100\n"),
        config("kind = rbf_anisotropy\nrbf_points = 30\nrbf_features = 40\nrbf_scales = 0,0.5,1\n"),
        small(
            "split_alignment",
            "n_train = 60\nn_difficult = 20\nsteps = 20\ncheckpoints = every:5\n",
        ),
        small("complexity_sweep", "steps = 20\ncorruption_levels = 0,1\n"),
        small("perturbation_response", "steps = 20\nn_directions = 3\n"),
    ];
    let expected: [&[&str]; 7] = [
        &[
            "grid.csv",
            "spectrum_0.csv",
            "eigenfunctions_30.csv",
            "checkpoints.csv",
            "trace.csv",
        ],
        &["spectrum_0.csv", "eigenfunctions_0.csv", "dft_0.csv"],
        &["curves.csv", "trace.csv"],
        &["rbf.csv", "rbf_spectrum.csv"],
        &["split.csv", "checkpoints.csv"],
        &["complexity.csv"],
        &["response.csv", "trace.csv"],
    ];
    for (cfg, files) in cases.iter().zip(expected) {
        let sink = run_in_memory(cfg).unwrap_or_else(|e| panic!("{}: {e}", cfg.kind.name()));
        for f in files {
            assert!(sink.table(f).is_some(), "{} missing {f}", cfg.kind.name());
        }
    }
}

#[test]
fn same_seed_gives_byte_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    for (i, base) in [
        small("disk_alignment", "steps = 20\ngrid_side = 6\ntop_k = 3\n"),
        small("split_alignment", "n_train = 40\nn_difficult = 10\nsteps = 10\n"),
        small("perturbation_response", "steps = 10\nn_directions = 2\n"),
    ]
    .into_iter()
    .enumerate()
    {
        let runs: Vec<_> = ["a", "b"]
            .iter()
            .map(|r| {
                let cfg = ExperimentConfig {
                    out_dir: tmp.path().join(format!("{i}{r}")),
                    ..base.clone()
                };
                run_to_dir(&cfg).unwrap();
                cfg.out_dir
            })
            .collect();
        let mut names: Vec<_> = fs::read_dir(&runs[0])
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for n in names {
            assert_eq!(
                fs::read(runs[0].join(&n)).unwrap(),
                fs::read(runs[1].join(&n)).unwrap(),
                "{n:?}"
            );
        }
    }
}

#[test]
fn different_seeds_differ() {
    let a = small("perturbation_response", "steps = 5\nn_directions = 2\n");
    let b = ExperimentConfig { seed: 1, ..a.clone() };
    let ta = run_in_memory(&a).unwrap();
    let tb = run_in_memory(&b).unwrap();
    assert_ne!(ta.checksums(), tb.checksums());
}

#[test]
fn supernat_beats_gradient_descent_on_default_noisy_regression() {
    let sink = run_in_memory(&config("kind = noisy_regression_supernat\n")).unwrap();
    let curves = sink.table("curves.csv").unwrap();
    let (gd, sn) = (col(curves, "gd_val_mse"), col(curves, "supernat_val_mse"));
    assert_eq!(gd.len(), 2001);
    assert!(sn.last() < gd.last(), "supernat {:?} vs gd {:?}", sn.last(), gd.last());
    assert_eq!(sink.note_value("supernat_better"), Some("true"));
}

#[test]
fn fourier_dft_has_one_row_per_component() {
    let sink = run_in_memory(&small("fourier_1d", "grid_points = 16\ntop_k = 5\n")).unwrap();
    let dft = sink.table("dft_0.csv").unwrap();
    assert_eq!(dft.rows.len(), 5);
    assert_eq!(dft.header.len(), 3 + 16 / 2 + 1);
    assert!(sink.note_value("dominant_frequencies").is_some());
}

#[test]
fn rbf_erank_falls_with_anisotropy() {
    let sink = run_in_memory(&config(
        "kind = rbf_anisotropy\nrbf_points = 60\nrbf_features = 80\nrbf_scales = 0,1\n",
    ))
    .unwrap();
    let t = sink.table("rbf.csv").unwrap();
    let erank = col(t, "erank");
    assert!(erank[1] < erank[0], "{erank:?}");
    for (l2, opt) in col(t, "l2_bound").iter().zip(col(t, "optimized_bound")) {
        assert!(opt <= l2 * (1.0 + 1e-9), "{opt} > {l2}");
    }
}

#[test]
fn complexity_grows_with_label_noise() {
    let sink = run_in_memory(&small("complexity_sweep", "steps = 150\ncorruption_levels = 0,1\n")).unwrap();
    let c = col(sink.table("complexity.csv").unwrap(), "complexity");
    assert!(c[1] > c[0], "{c:?}");
}

#[test]
fn singular_directions_respond_more_than_random_ones() {
    let sink = run_in_memory(&small("perturbation_response", "steps = 30\nn_directions = 3\n")).unwrap();
    let t = sink.table("response.csv").unwrap();
    let (flag, resp) = (col(t, "singular"), col(t, "response"));
    let top = resp[0];
    let random_max = flag
        .iter()
        .zip(&resp)
        .filter(|(f, _)| **f == 0.0)
        .map(|(_, r)| *r)
        .fold(0.0, f64::max);
    assert!(top > random_max, "top {top} random {random_max}");
}

#[test]
fn disk_without_eigenvectors_emits_only_spectra() {
    let sink = run_in_memory(&small("disk_alignment", "steps = 5\ngrid_side = 6\ntop_k = 0\n")).unwrap();
    assert!(sink.table("spectrum_5.csv").is_some());
    assert!(sink.tables().iter().all(|t| !t.name.starts_with("eigenfunctions")));
}

#[test]
fn divergence_is_reported_as_such() {
    let err = run_in_memory(&small("perturbation_response", "steps = 50\nlearning_rate = 1e6\n")).unwrap_err();
    assert!(matches!(err, RunError::Divergence(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn failed_run_keeps_outputs_and_marks_them() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        out_dir: tmp.path().to_path_buf(),
        ..small(
            "disk_alignment",
            "steps = 40\ngrid_side = 5\ntop_k = 0\nlearning_rate = 1e6\neigen_steps = every:1\n",
        )
    };
    assert!(run_to_dir(&cfg).is_err());
    assert!(tmp.path().join("spectrum_0.csv").exists());
    assert!(tmp.path().join("PARTIAL_RUN").exists());
    assert!(!tmp.path().join("manifest.txt").exists());
}

#[test]
fn default_disk_erank_drops() {
    let sink = run_in_memory(&config("kind = disk_alignment\ntop_k = 0\n")).unwrap();
    let erank = col(sink.table("checkpoints.csv").unwrap(), "erank");
    assert!(erank[0] > *erank.last().unwrap(), "{erank:?}");
}
