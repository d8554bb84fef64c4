//! End-to-end experiment runner: wires the stages together, writes the CSV
//! artifacts and a JSON report, and backs the CLI subcommands.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{LoadedConfig, Scenario};
use crate::graph::{pattern_violations, WAssignment};
use crate::linalg::{self, CharPoly};
use crate::perturb::{self, PerturbationSpec};
use crate::spectrum::{self, ComplexVector};
use crate::stage1::{self, Stage1Output};
use crate::stage2::{self, FlowTrace};
use crate::{Error, Result};

/// Convergence figures for one node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeReport {
    pub node: usize,
    /// The node's final coefficient estimates (ascending order).
    pub estimates: Vec<f64>,
    /// Roots of the node's final polynomial as `(re, im)` pairs, sorted by
    /// real then imaginary part; `None` when the final snapshot defeated
    /// the root finder.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub roots: Option<Vec<(f64, f64)>>,
    /// `||x_i - x*||_inf` at the final state, with `x*` the reference
    /// characteristic coefficients of the matrix actually iterated.
    pub coeff_error: f64,
    /// Matched distance between the node's final roots and the reference
    /// spectrum of the matrix actually iterated; `None` when the final
    /// snapshot defeated the root finder.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spectrum_error: Option<f64>,
    /// Perturbation scenario only: matched distance to the spectrum of the
    /// original (unperturbed) matrix.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spectrum_error_vs_base: Option<f64>,
}

/// Everything a pipeline run reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub n: usize,
    pub seed: u64,
    /// Reference ascending characteristic coefficients of the iterated
    /// matrix (independent of the distributed pipeline).
    pub reference_coeffs: Vec<f64>,
    /// Reference spectrum of the iterated matrix as `(re, im)` pairs,
    /// sorted by real then imaginary part.
    pub reference_spectrum: Vec<(f64, f64)>,
    /// Perturbation scenario only: spectrum of the unperturbed matrix.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub base_spectrum: Option<Vec<(f64, f64)>>,
    /// Condition estimate of the stacked Stage-1 matrix; `None` means
    /// numerically unbounded (singular).
    pub condition_of_a: Option<f64>,
    pub final_time: f64,
    pub v_initial: f64,
    pub v_final: f64,
    pub trace_samples: usize,
    pub per_node: Vec<NodeReport>,
    pub max_coeff_error: f64,
    /// Largest per-node matched spectrum error (`None` if any node lacks
    /// final roots).
    pub max_spectrum_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_spectrum_error_vs_base: Option<f64>,
}

/// Reference answers without running the distributed pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    /// Coefficients and spectrum of the matrix the pipeline would iterate.
    pub coeffs: Vec<f64>,
    pub spectrum: Vec<(f64, f64)>,
    /// Perturbation scenario: coefficients and spectrum of the unperturbed
    /// matrix.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub base_coeffs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub base_spectrum: Option<Vec<(f64, f64)>>,
}

/// Sweep output: per-magnitude aggregates (the CSV holds raw records).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub trials: usize,
    pub rows: Vec<SweepSummaryRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummaryRow {
    pub a: f64,
    pub nonsingular_fraction: f64,
    pub median_spectrum_error: f64,
}

/// Findings of the `validate` subcommand; `problems` empty means valid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub edges: usize,
    pub problems: Vec<String>,
}

fn spectrum_pairs(roots: &[Complex64]) -> Vec<(f64, f64)> {
    roots.iter().map(|z| (z.re, z.im)).collect()
}

/// Resolve the matrix the pipeline iterates: the base assignment for the
/// known-cyclic scenario; the perturbed matrix (fixture-loaded or freshly
/// drawn with seed `base seed + 1`) otherwise. Returns `(iterated, base)`.
fn effective_assignment(
    loaded: &LoadedConfig,
    seed_override: Option<u64>,
) -> Result<(WAssignment, WAssignment)> {
    let base = loaded.base_assignment(seed_override)?;
    match loaded.config.scenario {
        Scenario::CyclicKnown => Ok((base.clone(), base)),
        Scenario::CyclicUnknown => {
            let pcfg = loaded
                .config
                .perturbation
                .as_ref()
                .expect("validated at load");
            let perturbed = if let Some(path) = loaded.perturbation_fixture() {
                let wa = crate::config::load_fixture(&path)?;
                let problems = perturb::check_perturbation(&base, &wa, pcfg.magnitude);
                if !problems.is_empty() {
                    return Err(Error::Config(format!(
                        "perturbed fixture {} is inconsistent with the base matrix: {}",
                        path.display(),
                        problems.join("; ")
                    )));
                }
                wa
            } else {
                let seed = loaded.seed(seed_override).wrapping_add(1);
                perturb::perturb_w(&base, &PerturbationSpec::new(pcfg.magnitude, seed)?)
            };
            Ok((perturbed, base))
        }
    }
}

/// Run the full pipeline described by a config and write `stage1.csv`,
/// `flow.csv`, `spectrum.csv`, and `report.json` into `out_dir`.
pub fn cmd_run(
    loaded: &LoadedConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<RunReport> {
    let (wa, base) = effective_assignment(loaded, seed_override)?;
    let n = wa.n();
    let seed = loaded.seed(seed_override);

    let y0 = stage1::init_y0(n, seed);
    let s1 = stage1::run_stage1(&wa, &y0)?;
    let a = s1.a_matrix();
    let b = s1.b_vector();

    // Solvability gate: a singular stacked system cannot identify the
    // coefficients; report its rank instead of integrating.
    linalg::solve_dense(&a, &b)?;
    let condition = linalg::condition_estimate(&a);

    let reference = linalg::charpoly_oracle(&wa.w)?;
    let reference_roots = spectrum::find_roots(&reference)?;
    let base_roots = if loaded.config.scenario == Scenario::CyclicUnknown {
        Some(spectrum::find_roots(&linalg::charpoly_oracle(&base.w)?)?)
    } else {
        None
    };

    let params = loaded.consensus_params(&wa.graph)?;
    let x_init = vec![vec![0.0; n]; n];
    let (trace, final_state) = stage2::integrate(
        &s1.equations,
        &wa.graph,
        &params,
        &x_init,
        loaded.config.sample_every,
    )?;

    fs::create_dir_all(out_dir)?;
    write_stage1_csv(&out_dir.join("stage1.csv"), &s1)?;
    write_flow_csv(&out_dir.join("flow.csv"), &trace)?;
    let spectra = spectrum::spectrum_trace(&trace);
    write_spectrum_csv(&out_dir.join("spectrum.csv"), &spectra)?;

    let mut per_node = Vec::with_capacity(n);
    for (idx, x) in final_state.estimates.iter().enumerate() {
        let coeff_error = x
            .iter()
            .zip(reference.coeffs())
            .map(|(xi, ci)| (xi - ci).abs())
            .fold(0.0, f64::max);
        let roots = CharPoly::new(x.clone())
            .and_then(|cp| spectrum::find_roots(&cp))
            .ok();
        let spectrum_error = roots
            .as_ref()
            .map(|r| spectrum::match_spectra(r, &reference_roots))
            .transpose()?
            .map(|e| e.max_abs_error);
        let spectrum_error_vs_base = match (&roots, &base_roots) {
            (Some(r), Some(br)) => Some(spectrum::match_spectra(r, br)?.max_abs_error),
            _ => None,
        };
        per_node.push(NodeReport {
            node: idx + 1,
            estimates: x.clone(),
            roots: roots.as_deref().map(spectrum_pairs),
            coeff_error,
            spectrum_error,
            spectrum_error_vs_base,
        });
    }

    let report = RunReport {
        scenario: scenario_name(loaded.config.scenario).to_string(),
        n,
        seed,
        reference_coeffs: reference.coeffs().to_vec(),
        reference_spectrum: spectrum_pairs(&reference_roots),
        base_spectrum: base_roots.as_deref().map(spectrum_pairs),
        condition_of_a: if condition.is_finite() { Some(condition) } else { None },
        final_time: final_state.time,
        v_initial: trace.samples.first().map(|s| s.v).unwrap_or(0.0),
        v_final: trace.samples.last().map(|s| s.v).unwrap_or(0.0),
        trace_samples: trace.samples.len(),
        max_coeff_error: per_node.iter().map(|r| r.coeff_error).fold(0.0, f64::max),
        max_spectrum_error: per_node
            .iter()
            .map(|r| r.spectrum_error)
            .try_fold(0.0f64, |m, e| e.map(|e| m.max(e))),
        max_spectrum_error_vs_base: per_node
            .iter()
            .map(|r| r.spectrum_error_vs_base)
            .try_fold(0.0f64, |m, e| e.map(|e| m.max(e))),
        per_node,
    };
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

fn scenario_name(s: Scenario) -> &'static str {
    match s {
        Scenario::CyclicKnown => "cyclic-known",
        Scenario::CyclicUnknown => "cyclic-unknown",
    }
}

/// Print reference coefficients and spectrum for the configured matrix.
pub fn cmd_oracle(loaded: &LoadedConfig, seed_override: Option<u64>) -> Result<OracleReport> {
    let (wa, base) = effective_assignment(loaded, seed_override)?;
    let cp = linalg::charpoly_oracle(&wa.w)?;
    let roots = spectrum::find_roots(&cp)?;
    let (base_coeffs, base_spectrum) = if loaded.config.scenario == Scenario::CyclicUnknown {
        let bcp = linalg::charpoly_oracle(&base.w)?;
        let broots = spectrum::find_roots(&bcp)?;
        (Some(bcp.coeffs().to_vec()), Some(spectrum_pairs(&broots)))
    } else {
        (None, None)
    };
    Ok(OracleReport {
        n: wa.n(),
        coeffs: cp.coeffs().to_vec(),
        spectrum: spectrum_pairs(&roots),
        base_coeffs,
        base_spectrum,
    })
}

/// Run the configured magnitude sweep and write `sweep.csv` into `out_dir`.
pub fn cmd_sweep(
    loaded: &LoadedConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<SweepReport> {
    let sweep = loaded
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("config has no `sweep` section".into()))?;
    let base = loaded.base_assignment(seed_override)?;
    let seed = loaded.seed(seed_override);
    let (records, summaries) =
        perturb::perturbation_sweep(&base, &sweep.magnitudes, sweep.trials, seed)?;
    fs::create_dir_all(out_dir)?;
    write_sweep_csv(&out_dir.join("sweep.csv"), &records)?;
    Ok(SweepReport {
        trials: sweep.trials,
        rows: summaries
            .iter()
            .map(|s| SweepSummaryRow {
                a: s.a,
                nonsingular_fraction: s.nonsingular_fraction,
                median_spectrum_error: s.median_spectrum_error,
            })
            .collect(),
    })
}

/// Check the configured assignment(s) without running anything: sparsity
/// conformance, and consistency of a perturbed fixture with its base.
pub fn cmd_validate(loaded: &LoadedConfig, seed_override: Option<u64>) -> Result<ValidationReport> {
    let base = loaded.base_assignment(seed_override)?;
    let mut problems: Vec<String> = pattern_violations(&base)
        .into_iter()
        .map(|(i, j)| format!("base matrix has a nonzero off-pattern entry at ({i},{j})"))
        .collect();
    if let Some(path) = loaded.perturbation_fixture() {
        let magnitude = loaded
            .config
            .perturbation
            .as_ref()
            .map(|p| p.magnitude)
            .unwrap_or(0.0);
        match crate::config::load_fixture(&path) {
            Ok(wa) => problems.extend(
                perturb::check_perturbation(&base, &wa, magnitude)
                    .into_iter()
                    .map(|p| format!("perturbed fixture: {p}")),
            ),
            Err(e) => problems.push(format!("perturbed fixture: {e}")),
        }
    }
    if let Err(e) = loaded.consensus_params(&base.graph) {
        problems.push(format!("consensus parameters: {e}"));
    }
    Ok(ValidationReport {
        n: base.n(),
        edges: base.graph.edge_count(),
        problems,
    })
}

// --- CSV schemas -----------------------------------------------------------

/// `stage1.csv`: one row per (node, round).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Row {
    pub node_id: usize,
    pub t: usize,
    pub y_value: f64,
}

/// `flow.csv`: one row per (sample, node, coefficient).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub t: f64,
    pub node_id: usize,
    pub coeff_index: usize,
    pub estimate: f64,
    #[serde(rename = "V")]
    pub v: f64,
}

/// `spectrum.csv`: one row per (sample, node, root); gap samples are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub t: f64,
    pub node_id: usize,
    pub root_index: usize,
    pub re: f64,
    pub im: f64,
}

/// `sweep.csv`: one row per (magnitude, trial).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub a: f64,
    pub trial: usize,
    pub rank: usize,
    pub condition: f64,
    pub spectrum_error: f64,
}

fn write_stage1_csv(path: &Path, s1: &Stage1Output) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let rounds = s1.trace.len();
    let n = s1.equations.len();
    for node in 1..=n {
        for t in 0..rounds {
            w.serialize(Stage1Row { node_id: node, t, y_value: s1.trace[t][node - 1] })?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_flow_csv(path: &Path, trace: &FlowTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for sample in &trace.samples {
        for (idx, x) in sample.estimates.iter().enumerate() {
            for (k, estimate) in x.iter().enumerate() {
                w.serialize(FlowRow {
                    t: sample.t,
                    node_id: idx + 1,
                    coeff_index: k,
                    estimate: *estimate,
                    v: sample.v,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_spectrum_csv(path: &Path, spectra: &[spectrum::SpectrumSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in spectra {
        if let Some(roots) = &s.roots {
            for (k, z) in roots.iter().enumerate() {
                w.serialize(SpectrumRow {
                    t: s.t,
                    node_id: s.node,
                    root_index: k,
                    re: z.re,
                    im: z.im,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_sweep_csv(path: &Path, records: &[perturb::SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(SweepRow {
            a: r.a,
            trial: r.trial,
            rank: r.rank,
            condition: r.condition,
            spectrum_error: r.spectrum_error,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Read back an emitted `stage1.csv`.
pub fn read_stage1_csv(path: &Path) -> Result<Vec<Stage1Row>> {
    read_csv(path)
}

/// Read back an emitted `flow.csv`.
pub fn read_flow_csv(path: &Path) -> Result<Vec<FlowRow>> {
    read_csv(path)
}

/// Read back an emitted `spectrum.csv`.
pub fn read_spectrum_csv(path: &Path) -> Result<Vec<SpectrumRow>> {
    read_csv(path)
}

/// Read back an emitted `sweep.csv`.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    read_csv(path)
}

/// Final roots per node, for callers that want the estimates themselves.
pub fn final_spectra(estimates: &[Vec<f64>]) -> Vec<Option<ComplexVector>> {
    estimates
        .iter()
        .map(|x| CharPoly::new(x.clone()).and_then(|cp| spectrum::find_roots(&cp)).ok())
        .collect()
}
