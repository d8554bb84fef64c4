//! Decentralized random perturbation of a matrix whose Krylov system may be
//! singular (repeated eigenvalues — e.g. adjacency matrices of complete or
//! cycle graphs). Each node adds independent uniform noise to its own row
//! entries; the perturbed matrix is almost surely cyclic, so the stacked
//! Stage-1 system becomes almost surely solvable, at the price of estimating
//! a nearby spectrum instead of the exact one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{pattern_violations, WAssignment};
use crate::linalg::{self, DenseMatrix};
use crate::spectrum::{find_roots, match_spectra};
use crate::stage1::init_y0;
use crate::{Error, Result};

/// Magnitude and seed for a perturbation draw.
#[derive(Debug, Clone, Copy)]
pub struct PerturbationSpec {
    /// Half-width of the uniform noise interval `[-a, a]`; must be > 0.
    pub magnitude: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(magnitude: f64, seed: u64) -> Result<Self> {
        if !(magnitude > 0.0) {
            return Err(Error::Invalid(format!(
                "perturbation magnitude must be > 0, got {magnitude}"
            )));
        }
        Ok(Self { magnitude, seed })
    }
}

/// Add independent uniform `[-a, a]` noise to every in-pattern entry of `W`:
/// node-major draw order, each node first perturbing its diagonal entry and
/// then its row entries toward neighbors in ascending order. Entries `w_ij`
/// and `w_ji` of one edge get independent draws, so the result is generally
/// asymmetric; off-pattern entries stay exactly zero.
pub fn perturb_w(wbar: &WAssignment, spec: &PerturbationSpec) -> WAssignment {
    let n = wbar.n();
    let a = spec.magnitude;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut w = wbar.w.clone();
    for i in 1..=n {
        let d: f64 = rng.random_range(-a..a);
        w.set(i - 1, i - 1, wbar.w.get(i - 1, i - 1) + d);
        for j in wbar.graph.neighbors(i) {
            let d: f64 = rng.random_range(-a..a);
            w.set(i - 1, j - 1, wbar.w.get(i - 1, j - 1) + d);
        }
    }
    WAssignment { graph: wbar.graph.clone(), w }
}

/// One sweep observation.
#[derive(Debug, Clone, Copy)]
pub struct SweepRecord {
    pub a: f64,
    pub trial: usize,
    /// Rank of the trial's Krylov matrix.
    pub rank: usize,
    /// Condition estimate of the Krylov matrix (`inf` when singular).
    pub condition: f64,
    /// Matched distance between the perturbed and unperturbed spectra.
    pub spectrum_error: f64,
}

/// Aggregates over one magnitude.
#[derive(Debug, Clone, Copy)]
pub struct SweepSummary {
    pub a: f64,
    pub nonsingular_fraction: f64,
    pub median_spectrum_error: f64,
}

/// For each magnitude and trial: perturb `wbar`, draw a fresh start vector,
/// and record the Krylov matrix's rank and conditioning plus how far the
/// perturbed spectrum moved. Magnitude `0.0` is accepted as a control row
/// meaning "no perturbation". Each trial derives its own seeds from `seed`,
/// so trials are independent and the whole sweep is reproducible.
pub fn perturbation_sweep(
    wbar: &WAssignment,
    magnitudes: &[f64],
    trials: usize,
    seed: u64,
) -> Result<(Vec<SweepRecord>, Vec<SweepSummary>)> {
    if magnitudes.is_empty() {
        return Err(Error::Invalid("sweep needs at least one magnitude".into()));
    }
    if magnitudes.iter().any(|a| *a < 0.0 || !a.is_finite()) {
        return Err(Error::Invalid("sweep magnitudes must be finite and >= 0".into()));
    }
    if trials == 0 {
        return Err(Error::Invalid("sweep needs at least one trial".into()));
    }
    let n = wbar.n();
    let ref_roots = find_roots(&linalg::charpoly_oracle(&wbar.w)?)?;

    let mut records = Vec::with_capacity(magnitudes.len() * trials);
    let mut summaries = Vec::with_capacity(magnitudes.len());
    for (mi, &a) in magnitudes.iter().enumerate() {
        let mut nonsingular = 0usize;
        let mut errors = Vec::with_capacity(trials);
        for trial in 0..trials {
            let run = (mi * trials + trial) as u64;
            let perturbed = if a == 0.0 {
                wbar.clone()
            } else {
                let spec = PerturbationSpec::new(a, seed.wrapping_add(2 * run + 1))?;
                perturb_w(wbar, &spec)
            };
            let y0 = init_y0(n, seed.wrapping_add(2 * run + 2));
            let krylov = linalg::krylov_matrix(&perturbed.w, &y0)?;
            let rank = linalg::rank(&krylov, linalg::DEFAULT_RANK_TOL);
            if rank == n {
                nonsingular += 1;
            }
            let condition = linalg::condition_estimate(&krylov);
            let roots = find_roots(&linalg::charpoly_oracle(&perturbed.w)?)?;
            let spectrum_error = match_spectra(&roots, &ref_roots)?.max_abs_error;
            records.push(SweepRecord { a, trial, rank, condition, spectrum_error });
            errors.push(spectrum_error);
        }
        summaries.push(SweepSummary {
            a,
            nonsingular_fraction: nonsingular as f64 / trials as f64,
            median_spectrum_error: median(&mut errors),
        });
    }
    Ok((records, summaries))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Largest absolute entrywise difference between two same-shape matrices.
pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.entries()
        .iter()
        .zip(b.entries())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Check that a perturbed assignment is a valid perturbation of `wbar` at
/// magnitude `a`: same graph, conforming zero pattern, and entrywise within
/// `a` of the original. Returns the list of problems found (empty = valid).
pub fn check_perturbation(wbar: &WAssignment, w: &WAssignment, a: f64) -> Vec<String> {
    let mut problems = Vec::new();
    if wbar.graph != w.graph {
        problems.push("graphs differ".to_string());
        return problems;
    }
    for (i, j) in pattern_violations(w) {
        problems.push(format!("nonzero off-pattern entry at ({i},{j})"));
    }
    let diff = max_abs_diff(&wbar.w, &w.w);
    if diff > a {
        problems.push(format!("entrywise deviation {diff} exceeds magnitude {a}"));
    }
    problems
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_w, generate_graph, GraphKind, WKind};

    fn k3_adjacency() -> WAssignment {
        let g = generate_graph(GraphKind::Complete, 3, None, 0).unwrap();
        build_w(&g, WKind::Adjacency, None)
    }

    #[test]
    fn spec_requires_positive_magnitude() {
        assert!(PerturbationSpec::new(0.0, 1).is_err());
        assert!(PerturbationSpec::new(-0.1, 1).is_err());
        assert!(PerturbationSpec::new(0.1, 1).is_ok());
    }

    #[test]
    fn tiny_magnitude_barely_moves_w() {
        let wbar = k3_adjacency();
        let spec = PerturbationSpec::new(1e-15, 7).unwrap();
        let w = perturb_w(&wbar, &spec);
        assert!(max_abs_diff(&wbar.w, &w.w) <= 1e-15);
    }

    #[test]
    fn deterministic_per_seed() {
        let wbar = k3_adjacency();
        let spec = PerturbationSpec::new(0.2, 9).unwrap();
        let w1 = perturb_w(&wbar, &spec);
        let w2 = perturb_w(&wbar, &spec);
        assert_eq!(w1.w.entries(), w2.w.entries());
        let w3 = perturb_w(&wbar, &PerturbationSpec::new(0.2, 10).unwrap());
        assert_ne!(w1.w.entries(), w3.w.entries());
    }

    #[test]
    fn pattern_and_bound_always_hold() {
        for s in 0..20u64 {
            let g = generate_graph(GraphKind::ErdosRenyi, 6, Some(0.5), s).unwrap();
            let wbar = build_w(&g, WKind::Adjacency, None);
            let w = perturb_w(&wbar, &PerturbationSpec::new(0.3, 100 + s).unwrap());
            assert!(check_perturbation(&wbar, &w, 0.3).is_empty());
        }
    }

    #[test]
    fn perturbation_is_generally_asymmetric() {
        let wbar = k3_adjacency();
        let w = perturb_w(&wbar, &PerturbationSpec::new(0.2, 3).unwrap());
        let mut asym = false;
        for i in 0..3 {
            for j in i + 1..3 {
                if w.w.get(i, j) != w.w.get(j, i) {
                    asym = true;
                }
            }
        }
        assert!(asym);
    }

    #[test]
    fn complete_graph_becomes_solvable() {
        // A repeated eigenvalue makes the unperturbed Krylov matrix singular
        // in every trial; noise splits it almost surely.
        let wbar = k3_adjacency();
        let (_, summaries) = perturbation_sweep(&wbar, &[0.0, 0.1], 50, 77).unwrap();
        assert_eq!(summaries[0].nonsingular_fraction, 0.0);
        assert!(summaries[1].nonsingular_fraction >= 49.0 / 50.0);
    }

    #[test]
    fn cycle_graph_becomes_solvable() {
        let g = generate_graph(GraphKind::Cycle, 5, None, 0).unwrap();
        let wbar = build_w(&g, WKind::Adjacency, None);
        let (records, summaries) = perturbation_sweep(&wbar, &[0.1], 50, 31).unwrap();
        assert!(summaries[0].nonsingular_fraction >= 49.0 / 50.0);
        for r in &records {
            assert!(r.rank <= 5);
            assert!(r.spectrum_error <= 0.5);
        }
    }

    #[test]
    fn smaller_magnitude_smaller_error() {
        let g = generate_graph(GraphKind::ErdosRenyi, 6, Some(0.5), 2).unwrap();
        let wbar = build_w(&g, WKind::Adjacency, None);
        let (_, summaries) = perturbation_sweep(&wbar, &[0.2, 0.02], 25, 11).unwrap();
        assert!(
            summaries[1].median_spectrum_error < summaries[0].median_spectrum_error,
            "{summaries:?}"
        );
    }

    #[test]
    fn sweep_validates_inputs() {
        let wbar = k3_adjacency();
        assert!(perturbation_sweep(&wbar, &[], 5, 0).is_err());
        assert!(perturbation_sweep(&wbar, &[0.1], 0, 0).is_err());
        assert!(perturbation_sweep(&wbar, &[-0.1], 5, 0).is_err());
    }
}
