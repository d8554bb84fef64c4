//! Run configuration: a single JSON document describing which graph and
//! matrix to use, the gains and integrator controls, and (for the
//! perturbation scenario) how to perturb. File paths inside a config are
//! resolved relative to the config file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::graph::{build_w, generate_graph, Graph, GraphKind, WAssignment, WKind};
use crate::linalg::DenseMatrix;
use crate::stage2::ConsensusParams;
use crate::{Error, Result};

/// Problem sizes the runner accepts; everything here is dense and traced.
pub const MAX_NODES: usize = 12;

/// Which solvability regime the run assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// The stacked system is taken to be solvable as given.
    #[serde(rename = "cyclic-known")]
    CyclicKnown,
    /// The matrix may have repeated eigenvalues; rows are randomly
    /// perturbed before Stage 1.
    #[serde(rename = "cyclic-unknown")]
    CyclicUnknown,
}

/// Where the graph (and possibly the matrix) comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSource {
    /// Path to a fixture JSON file; exclusive with `generate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
    /// Generator family spec; exclusive with `fixture`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GeneratorSpec>,
}

/// Parameters for generated graphs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GraphKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_prob: Option<f64>,
}

/// A gain that is either shared or given per element.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Shared(f64),
    PerElement(Vec<f64>),
}

impl GainSpec {
    /// Expand to `count` values; a shared gain repeats, a list must match.
    fn expand(&self, count: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            GainSpec::Shared(v) => Ok(vec![*v; count]),
            GainSpec::PerElement(vs) => {
                if vs.len() != count {
                    return Err(Error::Config(format!(
                        "{what} list has {} entries, expected {count}",
                        vs.len()
                    )));
                }
                Ok(vs.clone())
            }
        }
    }
}

/// Perturbation settings for the `cyclic-unknown` scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    /// Noise half-width `a`.
    pub magnitude: f64,
    /// Optional fixture holding a concrete perturbed matrix; when present
    /// it is loaded (and checked against the base matrix) instead of
    /// drawing noise from the RNG.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
}

/// Settings for a magnitude sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub magnitudes: Vec<f64>,
    pub trials: usize,
}

/// A full experiment description.
///
/// Seed derivation: the start vector uses `seed`, the perturbation draw
/// `seed + 1`, and random matrix weights `seed + 2`, so one number pins the
/// whole run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub graph: GraphSource,
    /// How to fill the matrix for generated graphs (or fixtures that only
    /// name a graph). Fixtures carrying explicit entries ignore this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_kind: Option<WKind>,
    pub seed: u64,
    pub alpha: GainSpec,
    pub beta: GainSpec,
    /// Integrator step.
    pub h: f64,
    /// Integration horizon.
    pub t_max: f64,
    /// Early-stop threshold on the Lyapunov value.
    pub v_tol: f64,
    /// Trace sampling interval in time units.
    pub sample_every: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

/// A fixture file: `{n, edges, w}` where `w` is either a row-major entry
/// array or one of the tags `"adjacency"` / `"laplacian"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureFile {
    n: usize,
    edges: Vec<(usize, usize)>,
    w: FixtureW,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum FixtureW {
    Tag(String),
    Entries(Vec<f64>),
}

/// Load a graph-plus-matrix fixture.
pub fn load_fixture(path: &Path) -> Result<WAssignment> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read fixture {}: {e}", path.display())))?;
    let fixture: FixtureFile = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("fixture {}: {e}", path.display())))?;
    let graph = Graph::new(fixture.n, &fixture.edges)?;
    match fixture.w {
        FixtureW::Tag(tag) => match tag.as_str() {
            "adjacency" => Ok(build_w(&graph, WKind::Adjacency, None)),
            "laplacian" => Ok(build_w(&graph, WKind::Laplacian, None)),
            other => Err(Error::Config(format!(
                "fixture {}: unknown matrix tag {other:?} (expected \"adjacency\" or \"laplacian\")",
                path.display()
            ))),
        },
        FixtureW::Entries(entries) => {
            let w = DenseMatrix::new(fixture.n, fixture.n, entries)
                .map_err(|e| Error::Config(format!("fixture {}: {e}", path.display())))?;
            WAssignment::new(graph, w)
        }
    }
}

/// Write a fixture file for an assignment (row-major entries).
pub fn save_fixture(wa: &WAssignment, path: &Path) -> Result<()> {
    let fixture = FixtureFile {
        n: wa.n(),
        edges: wa.graph.edges().collect(),
        w: FixtureW::Entries(wa.w.entries().to_vec()),
    };
    fs::write(path, serde_json::to_string_pretty(&fixture)?)?;
    Ok(())
}

/// A loaded config together with the directory its relative paths resolve
/// against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    /// Read and structurally validate a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        let base_dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf();
        let loaded = Self { config, base_dir };
        loaded.validate()?;
        Ok(loaded)
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        let has_fixture = c.graph.fixture.is_some();
        let has_generate = c.graph.generate.is_some();
        if has_fixture == has_generate {
            return Err(Error::Config(
                "graph needs exactly one of `fixture` or `generate`".into(),
            ));
        }
        if has_generate && c.w_kind.is_none() {
            return Err(Error::Config(
                "generated graphs need `w_kind` (adjacency | laplacian | random_weights)".into(),
            ));
        }
        if c.scenario == Scenario::CyclicUnknown && c.perturbation.is_none() {
            return Err(Error::Config(
                "scenario \"cyclic-unknown\" requires a `perturbation` section".into(),
            ));
        }
        if let Some(p) = &c.perturbation {
            if !(p.magnitude > 0.0) {
                return Err(Error::Config("perturbation magnitude must be > 0".into()));
            }
        }
        if let Some(s) = &c.sweep {
            if s.magnitudes.is_empty() {
                return Err(Error::Config("sweep magnitude list is empty".into()));
            }
            if s.trials == 0 {
                return Err(Error::Config("sweep needs at least one trial".into()));
            }
        }
        for positive in [("h", c.h), ("t_max", c.t_max), ("sample_every", c.sample_every)] {
            if !(positive.1 > 0.0) {
                return Err(Error::Config(format!("{} must be > 0", positive.0)));
            }
        }
        if !(c.v_tol >= 0.0) {
            return Err(Error::Config("v_tol must be >= 0".into()));
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Effective base seed, honoring a CLI override.
    pub fn seed(&self, seed_override: Option<u64>) -> u64 {
        seed_override.unwrap_or(self.config.seed)
    }

    /// Build the base graph-plus-matrix assignment (before any perturbation).
    pub fn base_assignment(&self, seed_override: Option<u64>) -> Result<WAssignment> {
        let seed = self.seed(seed_override);
        let wa = if let Some(fixture) = &self.config.graph.fixture {
            load_fixture(&self.resolve(fixture))?
        } else {
            let spec = self.config.graph.generate.as_ref().expect("validated");
            let graph = generate_graph(spec.kind, spec.n, spec.edge_prob, seed.wrapping_add(2))?;
            let kind = self.config.w_kind.expect("validated");
            build_w(&graph, kind, Some(seed.wrapping_add(2)))
        };
        if wa.n() > MAX_NODES {
            return Err(Error::Config(format!(
                "{} nodes exceeds the supported maximum of {MAX_NODES}",
                wa.n()
            )));
        }
        Ok(wa)
    }

    /// Path of the perturbed-matrix fixture, if the config names one.
    pub fn perturbation_fixture(&self) -> Option<PathBuf> {
        self.config
            .perturbation
            .as_ref()
            .and_then(|p| p.fixture.as_ref())
            .map(|p| self.resolve(p))
    }

    /// Consensus parameters for a graph, expanding shared gains.
    pub fn consensus_params(&self, graph: &Graph) -> Result<ConsensusParams> {
        let c = &self.config;
        let alpha = c.alpha.expand(graph.node_count(), "alpha")?;
        let beta_values = c.beta.expand(graph.edge_count(), "beta")?;
        let beta: BTreeMap<(usize, usize), f64> =
            graph.edges().zip(beta_values).collect();
        ConsensusParams::new(alpha, beta, c.h, c.t_max, c.v_tol)
    }
}
