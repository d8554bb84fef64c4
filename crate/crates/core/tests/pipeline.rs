//! Integration coverage for the shipped fixtures, the CLI surface, and the
//! on-disk artifact formats.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use num_complex::Complex64;

use graphspec::config::{load_fixture, LoadedConfig};
use graphspec::linalg::charpoly_oracle;
use graphspec::runner::{
    self, read_flow_csv, read_spectrum_csv, read_stage1_csv, read_sweep_csv, RunReport,
};
use graphspec::spectrum::{find_roots, match_spectra};

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graphspec"))
}

fn cplx(vals: &[(f64, f64)]) -> Vec<Complex64> {
    vals.iter().map(|&(re, im)| Complex64::new(re, im)).collect()
}

// --- fixture content ------------------------------------------------------

#[test]
fn scenario1_fixture_matches_frozen_coefficients() {
    let frozen = [
        0.08725252588980326,
        -0.20140211954561354,
        0.24155600608717973,
        -0.7973572171345991,
        -0.5583735799829632,
        0.858206395805819,
    ];
    let wa = load_fixture(&fixtures_dir().join("scenario1_w.json")).unwrap();
    let cp = charpoly_oracle(&wa.w).unwrap();
    for (got, want) in cp.coeffs().iter().zip(&frozen) {
        assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
    }
    // Its spectrum sits within display rounding of the published values.
    let listed = cplx(&[
        (-1.02, 0.55),
        (-1.02, -0.55),
        (-0.004, 0.46),
        (-0.004, -0.46),
        (0.38, 0.0),
        (0.81, 0.0),
    ]);
    let roots = find_roots(&cp).unwrap();
    let err = match_spectra(&roots, &listed).unwrap().max_abs_error;
    assert!(err <= 5e-3, "spectrum is {err} from the listed values");
}

#[test]
fn scenario2_fixtures_match_frozen_values() {
    // The base matrix is a plain adjacency: integer characteristic
    // coefficients and the known surd eigenvalues.
    let wbar = load_fixture(&fixtures_dir().join("scenario2_wbar.json")).unwrap();
    let cp = charpoly_oracle(&wbar.w).unwrap();
    let ints = [3.0, 12.0, 11.0, -4.0, -7.0, 0.0];
    for (got, want) in cp.coeffs().iter().zip(&ints) {
        assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
    }
    let truth = cplx(&[
        (-(3.0f64).sqrt(), 0.0),
        (-1.0, 0.0),
        (-1.0, 0.0),
        (1.0 - (2.0f64).sqrt(), 0.0),
        ((3.0f64).sqrt(), 0.0),
        (1.0 + (2.0f64).sqrt(), 0.0),
    ]);
    let roots = find_roots(&cp).unwrap();
    assert!(match_spectra(&roots, &truth).unwrap().max_abs_error <= 1e-7);

    // The perturbed matrix: frozen coefficients and the listed (2-decimal)
    // perturbed spectrum.
    let wp = load_fixture(&fixtures_dir().join("scenario2_perturbed_w.json")).unwrap();
    let cpp = charpoly_oracle(&wp.w).unwrap();
    let frozen = [
        2.9334483831797473,
        11.9519219847137,
        11.110364628007389,
        -3.932659966926235,
        -7.039246588545003,
        -0.01861342962430368,
    ];
    for (got, want) in cpp.coeffs().iter().zip(&frozen) {
        assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
    }
    let listed = cplx(&[
        (-1.74, 0.0),
        (-1.03, 0.0),
        (-0.97, 0.0),
        (-0.40, 0.0),
        (1.73, 0.0),
        (2.43, 0.0),
    ]);
    let roots = find_roots(&cpp).unwrap();
    assert!(match_spectra(&roots, &listed).unwrap().max_abs_error <= 5e-3);
}

// --- CLI behavior ---------------------------------------------------------

#[test]
fn cli_run_writes_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(fixtures_dir().join("scenario1_paper.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // stdout carries the same report that landed on disk.
    let printed: RunReport = serde_json::from_slice(&out.stdout).unwrap();
    let on_disk: RunReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(printed.seed, on_disk.seed);
    assert_eq!(printed.trace_samples, on_disk.trace_samples);

    // stage1.csv: one row per node per round, echoing the iteration trace.
    let stage1 = read_stage1_csv(&dir.path().join("stage1.csv")).unwrap();
    assert_eq!(stage1.len(), 6 * 7); // N nodes, rounds 0..=N
    assert!(stage1.iter().all(|r| (1..=6).contains(&r.node_id) && r.t <= 6));

    // flow.csv: nodes x coefficients rows per sample, V shared per sample.
    let flow = read_flow_csv(&dir.path().join("flow.csv")).unwrap();
    assert_eq!(flow.len(), on_disk.trace_samples * 6 * 6);
    let v0: Vec<_> = flow.iter().filter(|r| r.t == 0.0).map(|r| r.v).collect();
    assert!(v0.windows(2).all(|w| w[0] == w[1]));

    // spectrum.csv: six roots per node per successfully factored sample.
    let spectrum = read_spectrum_csv(&dir.path().join("spectrum.csv")).unwrap();
    assert!(!spectrum.is_empty());
    assert_eq!(spectrum.len() % 6, 0);
    assert!(spectrum.iter().all(|r| r.re.is_finite() && r.im.is_finite()));

    // The run itself converged (details are the acceptance gate's job).
    assert!(on_disk.max_coeff_error <= 1e-2);
    assert_eq!(on_disk.per_node.len(), 6);
    assert!(on_disk.per_node.iter().all(|nr| nr.roots.is_some()));
}

#[test]
fn cli_runs_are_deterministic_and_seed_sensitive() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let d3 = tempfile::tempdir().unwrap();
    let preset = fixtures_dir().join("scenario1_paper.json");
    for (dir, seed) in [(&d1, None), (&d2, None), (&d3, Some("99"))] {
        let mut cmd = bin();
        cmd.args(["run", "--config"]).arg(&preset).arg("--out").arg(dir.path());
        if let Some(s) = seed {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
    }
    let read = |d: &tempfile::TempDir, f: &str| fs::read(d.path().join(f)).unwrap();
    assert_eq!(read(&d1, "stage1.csv"), read(&d2, "stage1.csv"));
    assert_eq!(read(&d1, "report.json"), read(&d2, "report.json"));
    assert_ne!(read(&d1, "stage1.csv"), read(&d3, "stage1.csv"));
}

#[test]
fn cli_oracle_reports_reference_spectrum() {
    let out = bin()
        .args(["oracle", "--config"])
        .arg(fixtures_dir().join("scenario2_paper.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n"], 6);
    assert_eq!(report["coeffs"].as_array().unwrap().len(), 6);
    // The perturbed scenario also reports the unperturbed reference.
    assert_eq!(report["base_coeffs"].as_array().unwrap().len(), 6);
    assert!((report["base_coeffs"][0].as_f64().unwrap() - 3.0).abs() <= 1e-9);
}

#[test]
fn cli_sweep_writes_all_trials() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["sweep", "--config"])
        .arg(fixtures_dir().join("scenario2_paper.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let rows = read_sweep_csv(&dir.path().join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), 2 * 25);
    for a in [0.2, 0.02] {
        assert_eq!(rows.iter().filter(|r| r.a == a).count(), 25);
    }
    assert!(rows.iter().all(|r| r.spectrum_error.is_finite() && r.rank <= 6));
}

#[test]
fn cli_validate_accepts_shipped_presets_and_rejects_tampering() {
    for preset in ["scenario1_paper.json", "scenario2_paper.json"] {
        let out = bin()
            .args(["validate", "--config"])
            .arg(fixtures_dir().join(preset))
            .output()
            .unwrap();
        assert!(out.status.success(), "{preset} failed validation");
    }

    // Tamper with the perturbed fixture so one entry drifts past the
    // declared magnitude; validation must point at it and exit with the
    // config error code.
    let dir = tempfile::tempdir().unwrap();
    for f in ["scenario2_wbar.json", "scenario2_perturbed_w.json", "scenario2_paper.json"] {
        fs::copy(fixtures_dir().join(f), dir.path().join(f)).unwrap();
    }
    let tampered_path = dir.path().join("scenario2_perturbed_w.json");
    let mut fixture: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&tampered_path).unwrap()).unwrap();
    let first_nonzero = fixture["w"]
        .as_array()
        .unwrap()
        .iter()
        .position(|v| v.as_f64().unwrap() != 0.0)
        .unwrap();
    fixture["w"][first_nonzero] = serde_json::json!(9.0);
    fs::write(&tampered_path, serde_json::to_string(&fixture).unwrap()).unwrap();

    let out = bin()
        .args(["validate", "--config"])
        .arg(dir.path().join("scenario2_paper.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).unwrap();
    assert!(!report["problems"].as_array().unwrap().is_empty());
}

#[test]
fn cli_exit_codes_distinguish_failure_modes() {
    // Unreadable config: 2.
    let out = bin().args(["run", "--config", "/nonexistent.json", "--out", "/tmp"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // A structurally singular stacked system: 3. The base adjacency has a
    // repeated eigenvalue, so no start vector can span the Krylov space.
    let dir = tempfile::tempdir().unwrap();
    for f in ["scenario2_wbar.json"] {
        fs::copy(fixtures_dir().join(f), dir.path().join(f)).unwrap();
    }
    let config = serde_json::json!({
        "scenario": "cyclic-known",
        "graph": { "fixture": "scenario2_wbar.json" },
        "seed": 7,
        "alpha": 10.0,
        "beta": 10.0,
        "h": 0.001,
        "t_max": 1.0,
        "v_tol": 0.0,
        "sample_every": 0.5
    });
    fs::write(dir.path().join("singular.json"), config.to_string()).unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(dir.path().join("singular.json"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // Config validation failures: 2.
    let over_cap = serde_json::json!({
        "scenario": "cyclic-known",
        "graph": { "generate": { "kind": "complete", "n": 13 } },
        "w_kind": "random_weights",
        "seed": 1,
        "alpha": 1.0,
        "beta": 1.0,
        "h": 0.001,
        "t_max": 1.0,
        "v_tol": 0.0,
        "sample_every": 0.5
    });
    fs::write(dir.path().join("overcap.json"), over_cap.to_string()).unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(dir.path().join("overcap.json"))
        .arg("--out")
        .arg(dir.path().join("out2"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

// --- runner (library) surface --------------------------------------------

#[test]
fn runner_report_matches_direct_pipeline() {
    let loaded = LoadedConfig::load(&fixtures_dir().join("scenario1_paper.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = runner::cmd_run(&loaded, dir.path(), None).unwrap();

    // Flow CSV's final sample agrees with the report's final estimates.
    let flow = read_flow_csv(&dir.path().join("flow.csv")).unwrap();
    let t_last = flow.iter().map(|r| r.t).fold(0.0, f64::max);
    for row in flow.iter().filter(|r| r.t == t_last) {
        let want = run.per_node[row.node_id - 1].estimates[row.coeff_index];
        assert_eq!(row.estimate, want);
    }
    assert_eq!(run.final_time, t_last);

    // Oracle agrees with the run's reference block.
    let oracle = runner::cmd_oracle(&loaded, None).unwrap();
    assert_eq!(oracle.coeffs, run.reference_coeffs);
    assert_eq!(oracle.spectrum, run.reference_spectrum);
}

#[test]
fn sweep_summaries_order_by_magnitude() {
    let loaded = LoadedConfig::load(&fixtures_dir().join("scenario2_paper.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let sweep = runner::cmd_sweep(&loaded, dir.path(), None).unwrap();
    assert_eq!(sweep.trials, 25);
    let big = sweep.rows.iter().find(|r| r.a == 0.2).unwrap();
    let small = sweep.rows.iter().find(|r| r.a == 0.02).unwrap();
    assert!(small.median_spectrum_error < big.median_spectrum_error);
    assert!(big.nonsingular_fraction >= 0.98);
}
