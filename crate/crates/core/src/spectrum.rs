//! Eigenvalue recovery: roots of each node's coefficient polynomial, plus
//! scoring of estimated spectra against a reference.

use num_complex::Complex64;

use crate::linalg::CharPoly;
use crate::stage2::FlowTrace;
use crate::{Error, Result};

/// Iteration cap for the simultaneous root iteration.
const MAX_ITERS: usize = 500;

/// List of complex values, conjugate-closed for real-coefficient inputs.
pub type ComplexVector = Vec<Complex64>;

/// Evaluate the monic polynomial and its derivative at `z` by Horner.
fn eval_monic(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All `N` roots of the monic polynomial `x^N + c_(N-1) x^(N-1) + ... + c_0`
/// via Aberth–Ehrlich simultaneous iteration. Each returned root satisfies
/// `|p(root)| <= 1e-8 * (1 + max|c|)`, and the result is exactly closed
/// under conjugation (near-conjugate pairs are symmetrized, stragglers with
/// negligible imaginary part are snapped to the real axis). Roots come back
/// sorted by real part, then imaginary part.
pub fn find_roots(cp: &CharPoly) -> Result<ComplexVector> {
    let coeffs = cp.coeffs();
    let n = cp.degree();
    let residual_target = 1e-8 * (1.0 + cp.max_abs());

    if n == 1 {
        return Ok(vec![Complex64::new(-coeffs[0], 0.0)]);
    }

    // Cauchy-style inclusion radius; start on a circle, rotated so no guess
    // sits on the real axis (which would stall symmetric configurations).
    let radius = 1.0 + cp.max_abs();
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, angle)
        })
        .collect();

    let mut iterations = 0;
    for iter in 0..MAX_ITERS {
        iterations = iter + 1;
        let mut max_move: f64 = 0.0;
        for k in 0..n {
            let (p, dp) = eval_monic(coeffs, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let dp = if dp.norm() == 0.0 {
                // Derivative vanished exactly (critical point): nudge.
                Complex64::new(f64::EPSILON, f64::EPSILON)
            } else {
                dp
            };
            let newton = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).finv())
                .sum();
            let denom = Complex64::new(1.0, 0.0) - newton * repulsion;
            let step = if denom.norm() == 0.0 { newton } else { newton / denom };
            z[k] -= step;
            max_move = max_move.max(step.norm());
        }
        // Polish until the iteration reaches a fixed point at working
        // precision; a residual-level stop would leave roots of large-
        // coefficient polynomials several digits short.
        let scale = z.iter().map(|zk| zk.norm()).fold(1.0, f64::max);
        if max_move <= 1e-14 * scale {
            break;
        }
    }

    let symmetrized = symmetrize_conjugates(&z);
    let residuals: Vec<f64> =
        symmetrized.iter().map(|&r| eval_monic(coeffs, r).0.norm()).collect();
    // Written to also reject NaN residuals (overflowed evaluations).
    if !residuals.iter().all(|&r| r <= residual_target) {
        return Err(Error::RootFinding { iterations, residuals });
    }
    let mut out = symmetrized;
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(out)
}

/// Make a root multiset exactly conjugate-closed: greedily pair each root
/// above the axis with its best mirror below, average the pair into an exact
/// `m ± iq` couple, and flatten leftovers onto the real axis.
fn symmetrize_conjugates(roots: &[Complex64]) -> Vec<Complex64> {
    let mut upper: Vec<Complex64> = Vec::new();
    let mut lower: Vec<Complex64> = Vec::new();
    let mut real: Vec<Complex64> = Vec::new();
    for &r in roots {
        // Imaginary parts this far below working precision are solver noise.
        if r.im.abs() <= 1e-10 * (1.0 + r.norm()) {
            real.push(Complex64::new(r.re, 0.0));
        } else if r.im > 0.0 {
            upper.push(r);
        } else {
            lower.push(r);
        }
    }
    let mut out = real;
    for u in upper {
        let best = lower
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (u.conj() - **a).norm().total_cmp(&(u.conj() - **b).norm())
            })
            .map(|(i, _)| i);
        match best {
            Some(i) => {
                let l = lower.swap_remove(i);
                let re = 0.5 * (u.re + l.re);
                let im = 0.5 * (u.im - l.im);
                out.push(Complex64::new(re, im));
                out.push(Complex64::new(re, -im));
            }
            None => out.push(Complex64::new(u.re, 0.0)),
        }
    }
    for l in lower {
        out.push(Complex64::new(l.re, 0.0));
    }
    out
}

/// A matched comparison between an estimated and a reference spectrum.
#[derive(Debug, Clone)]
pub struct SpectrumError {
    /// `(estimate, reference)` pairs forming the chosen bijection.
    pub pairs: Vec<(Complex64, Complex64)>,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

/// Pair two equal-length spectra by repeatedly matching the globally closest
/// unmatched pair, then report max and mean absolute distance. Deterministic;
/// order-insensitive in both arguments.
pub fn match_spectra(est: &[Complex64], reference: &[Complex64]) -> Result<SpectrumError> {
    if est.len() != reference.len() {
        return Err(Error::Dimension(format!(
            "spectrum match needs equal lengths, got {} and {}",
            est.len(),
            reference.len()
        )));
    }
    let n = est.len();
    let mut est_left: Vec<(usize, Complex64)> = est.iter().copied().enumerate().collect();
    let mut ref_left: Vec<(usize, Complex64)> =
        reference.iter().copied().enumerate().collect();
    let mut pairs = Vec::with_capacity(n);
    let mut total = 0.0;
    let mut max = 0.0f64;
    while !est_left.is_empty() {
        let mut best = (0usize, 0usize, f64::INFINITY);
        for (ei, &(_, e)) in est_left.iter().enumerate() {
            for (ri, &(_, r)) in ref_left.iter().enumerate() {
                let d = (e - r).norm();
                if d < best.2 {
                    best = (ei, ri, d);
                }
            }
        }
        let (ei, ri, d) = best;
        let (_, e) = est_left.remove(ei);
        let (_, r) = ref_left.remove(ri);
        pairs.push((e, r));
        total += d;
        max = max.max(d);
    }
    Ok(SpectrumError {
        pairs,
        max_abs_error: max,
        mean_abs_error: if n == 0 { 0.0 } else { total / n as f64 },
    })
}

/// One node's eigenvalue estimates at one trace time; `roots` is `None` when
/// the snapshot's polynomial defeated the root finder (early, far-from-
/// converged samples), recorded as a gap rather than an error.
#[derive(Debug, Clone)]
pub struct SpectrumSample {
    pub t: f64,
    pub node: usize,
    pub roots: Option<ComplexVector>,
}

/// Root-find every node's coefficient snapshot at every sample of a flow
/// trace. Never fails: unconvergeable snapshots become gaps.
pub fn spectrum_trace(flow: &FlowTrace) -> Vec<SpectrumSample> {
    let mut out = Vec::new();
    for sample in &flow.samples {
        for (idx, coeffs) in sample.estimates.iter().enumerate() {
            let roots = CharPoly::new(coeffs.clone())
                .and_then(|cp| find_roots(&cp))
                .ok();
            out.push(SpectrumSample { t: sample.t, node: idx + 1, roots });
        }
    }
    out
}
