//! End-to-end checks of the `spinsim` binary: exit codes, output artifacts,
//! determinism of reruns, and the effective-config round trip.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn alanine() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/alanine.json")
}

fn spinsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinsim"))
        .args(args)
        .output()
        .expect("spawn spinsim")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "expected exit 0, got {:?}\nstderr: {}",
        out.status.code(),
        stderr_of(out)
    );
}

fn read_to_string(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn json_field(path: &Path, key: &str) -> serde_json::Value {
    let value: serde_json::Value =
        serde_json::from_str(&read_to_string(path)).expect("valid JSON");
    value.get(key).unwrap_or_else(|| panic!("missing key {key} in {}", path.display())).clone()
}

/// Final-row means from an aggregate CSV, keyed by header column.
fn final_means(path: &Path) -> Vec<(String, f64)> {
    let text = read_to_string(path);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().expect("header").split(',').collect();
    let last: Vec<&str> = lines.last().expect("data rows").split(',').collect();
    header
        .iter()
        .zip(&last)
        .filter(|(name, _)| name.starts_with("mean_site"))
        .map(|(name, v)| ((*name).to_string(), v.parse::<f64>().expect("numeric mean")))
        .collect()
}

#[test]
fn simulate_writes_artifacts_and_reruns_are_byte_identical() {
    let structure = alanine();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let out = spinsim(&[
            "--structure",
            structure.to_str().unwrap(),
            "--protons",
            "2",
            "--orientations",
            "3",
            "--t-max",
            "2ms",
            "--seed",
            "7",
            "--jobs",
            "2",
            "--out",
            dir.path().to_str().unwrap(),
            "simulate",
        ]);
        assert_success(&out);
        assert!(stdout_of(&out).contains("site"), "summary should name the carbon sites");
    }

    for name in ["aggregate.csv", "effective_config.toml", "trajectory_o0000_r00.csv"] {
        assert!(dirs[0].path().join(name).exists(), "{name} missing");
    }
    let trajectories = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("trajectory_"))
        .count();
    assert_eq!(trajectories, 3, "one trajectory file per orientation");

    for name in ["aggregate.csv", "trajectory_o0000_r00.csv", "trajectory_o0002_r00.csv"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn effective_config_reproduces_the_run() {
    let structure = alanine();
    let first = tempfile::tempdir().unwrap();
    let out = spinsim(&[
        "--structure",
        structure.to_str().unwrap(),
        "--protons",
        "3",
        "--orientations",
        "2",
        "--t-max",
        "1ms",
        "--seed",
        "11",
        "--out",
        first.path().to_str().unwrap(),
        "simulate",
    ]);
    assert_success(&out);

    let config = first.path().join("effective_config.toml");
    let second = tempfile::tempdir().unwrap();
    let rerun = spinsim(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        second.path().to_str().unwrap(),
        "simulate",
    ]);
    assert_success(&rerun);

    let a = std::fs::read(first.path().join("aggregate.csv")).unwrap();
    let b = std::fs::read(second.path().join("aggregate.csv")).unwrap();
    assert_eq!(a, b, "rerun from the effective config must reproduce the aggregate");
}

#[test]
fn proton_free_simulation_keeps_carbons_polarized() {
    let structure = alanine();
    let dir = tempfile::tempdir().unwrap();
    let out = spinsim(&[
        "--structure",
        structure.to_str().unwrap(),
        "--protons",
        "0",
        "--orientations",
        "96",
        "--seed",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
        "simulate",
    ]);
    assert_success(&out);
    let means = final_means(&dir.path().join("aggregate.csv"));
    assert_eq!(means.len(), 3);
    for (name, pz) in means {
        if name == "mean_site0" {
            // The initially polarized carbon: quenched without a proton bath.
            assert!(pz >= 0.95, "{name} = {pz} dropped below 0.95 without protons");
        } else {
            // The other carbons start unpolarized and must stay that way.
            assert!(pz.abs() <= 0.1, "{name} = {pz} picked up polarization");
        }
    }
}

#[test]
fn invalid_inputs_exit_with_code_two() {
    let structure = alanine();
    // Time step incommensurate with the rotor period.
    let out = spinsim(&[
        "--structure",
        structure.to_str().unwrap(),
        "--dt",
        "3us",
        "simulate",
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("rotor period"));

    // Missing structure file.
    let out = spinsim(&["--structure", "/nonexistent/structure.json", "simulate"]);
    assert_eq!(out.status.code(), Some(2));

    // Missing config file.
    let out = spinsim(&["--config", "/nonexistent/run.toml", "simulate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversized_bath_exits_with_code_three() {
    let structure = alanine();
    let dir = tempfile::tempdir().unwrap();
    let out = spinsim(&[
        "--structure",
        structure.to_str().unwrap(),
        "--protons",
        "20",
        "--orientations",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
        "spectrum",
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("cap"));
}

#[test]
fn spectrum_summary_matches_rereading_the_histogram() {
    let structure = alanine();
    let dir = tempfile::tempdir().unwrap();
    let out = spinsim(&[
        "--structure",
        structure.to_str().unwrap(),
        "--protons",
        "7",
        "--orientations",
        "2",
        "--seed",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
        "spectrum",
        "--sector",
        "3",
    ]);
    assert_success(&out);

    let summary = dir.path().join("eta_summary.json");
    assert_eq!(json_field(&summary, "sector_n_up"), serde_json::json!(3));
    assert_eq!(json_field(&summary, "sector_dimension"), serde_json::json!(35));
    let eta = json_field(&summary, "eta").as_f64().unwrap();

    let reread = spinsim(&[
        "eta",
        "--histogram",
        dir.path().join("spacing.csv").to_str().unwrap(),
    ]);
    assert_success(&reread);
    let text = stdout_of(&reread);
    let printed: f64 = text
        .split('=')
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .unwrap_or_else(|| panic!("unexpected eta output: {text}"))
        .parse()
        .expect("numeric eta");
    assert!(
        (printed - eta).abs() <= 1.0e-3,
        "stored histogram gave {printed}, summary says {eta}"
    );
}

#[test]
fn eta_selftests_recover_the_reference_ensembles() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinsim(&[
        "--seed",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
        "eta",
        "--poisson",
        "--levels",
        "100000",
    ]);
    assert_success(&out);
    let eta = json_field(&dir.path().join("selftest_poisson.json"), "eta").as_f64().unwrap();
    assert!(eta >= 0.93, "Poisson selftest eta = {eta}");

    let out = spinsim(&[
        "--seed",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
        "eta",
        "--goe",
        "--levels",
        "2000",
    ]);
    assert_success(&out);
    let eta = json_field(&dir.path().join("selftest_goe.json"), "eta").as_f64().unwrap();
    assert!(eta <= 0.07, "GOE selftest eta = {eta}");
}

#[test]
fn local_field_curve_is_written_and_monotone() {
    let structure = alanine();
    let dir = tempfile::tempdir().unwrap();
    let out = spinsim(&[
        "--structure",
        structure.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "local-field",
    ]);
    assert_success(&out);

    let text = read_to_string(&dir.path().join("local_field.csv"));
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 21, "0..=20 protons on the example structure");
    let b: Vec<f64> = rows
        .iter()
        .map(|r| r.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .collect();
    assert_eq!(b[0], 0.0);
    assert!(b.windows(2).all(|w| w[1] >= w[0]), "root-mean-square field must not decrease");
    assert!(b[20] > 0.0);
}

#[test]
fn init_rate_reports_a_fit_per_bath_size() {
    let structure = alanine();
    let dir = tempfile::tempdir().unwrap();
    let out = spinsim(&[
        "--structure",
        structure.to_str().unwrap(),
        "--protons",
        "4",
        "--orientations",
        "3",
        "--t-max",
        "4ms",
        "--out",
        dir.path().to_str().unwrap(),
        "init-rate",
    ]);
    assert_success(&out);

    let text = read_to_string(&dir.path().join("rates.csv"));
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let fields: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(fields[0], "4");
    let slope: f64 = fields[1].parse().unwrap();
    assert!(slope.is_finite());
    // t_max covers twice the fit window, so the saturation column is filled.
    let saturation: f64 = fields[3].parse().expect("saturation recorded");
    assert!((0.0..=1.01).contains(&saturation), "saturation = {saturation}");
}

#[test]
fn dump_terms_lists_every_interaction_once() {
    let structure = alanine();
    let dir = tempfile::tempdir().unwrap();
    let out = spinsim(&[
        "--structure",
        structure.to_str().unwrap(),
        "--protons",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
        "dump-terms",
    ]);
    assert_success(&out);

    let text = read_to_string(&dir.path().join("terms.csv"));
    let rows: Vec<&str> = text.lines().skip(1).collect();
    let count = |kind: &str| rows.iter().filter(|r| r.split(',').nth(2) == Some(kind)).count();
    // 11 sites; like pairs C(7,2) among protons + C(3,2) among carbons;
    // unlike pairs 7*3 + 7*1 + 3*1 across species.
    assert_eq!(count("shift"), 11);
    assert_eq!(count("like"), 24);
    assert_eq!(count("unlike"), 31);
    assert_eq!(rows.len(), 66);
}
