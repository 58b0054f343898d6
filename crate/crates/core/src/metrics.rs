//! Figures of merit for comparing measured and theoretical data.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mle::ReconstructionResult;
use crate::state::{SpectralAmplitude, SpectralCorrelation};

/// Normalized cross-correlation `Σ e·t / √(Σe²·Σt²)` of two non-negative profiles.
///
/// Applies equally to Q-function maps and to 1-D spectral intensity profiles
/// (pass those as single-column matrices, or use [`similarity_profiles`]).
pub fn similarity(e: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<f64> {
    if e.shape() != t.shape() {
        return Err(Error::invalid(format!(
            "similarity of {:?} and {:?} shaped data",
            e.shape(),
            t.shape()
        )));
    }
    similarity_profiles(e.as_slice(), t.as_slice())
}

pub fn similarity_profiles(e: &[f64], t: &[f64]) -> Result<f64> {
    if e.len() != t.len() {
        return Err(Error::invalid("similarity of profiles with different lengths"));
    }
    let dot: f64 = e.iter().zip(t).map(|(a, b)| a * b).sum();
    let ee: f64 = e.iter().map(|a| a * a).sum();
    let tt: f64 = t.iter().map(|b| b * b).sum();
    if ee == 0.0 || tt == 0.0 {
        return Err(Error::invalid("similarity is undefined for an all-zero profile"));
    }
    Ok(dot / (ee * tt).sqrt())
}

/// Trace overlap `F = ∫∫ W_t(ω, ω′) W_e(ω′, ω) dω′ dω` of two unit-trace correlations.
///
/// Equals `|⟨f_t|f_e⟩|²` for pure states and the purity `Tr W²` when both
/// arguments coincide.
pub fn fidelity(w_t: &SpectralCorrelation, w_e: &SpectralCorrelation) -> Result<f64> {
    if w_t.grid() != w_e.grid() {
        return Err(Error::invalid("fidelity between correlations on different grids"));
    }
    for (name, w) in [("truth", w_t), ("estimate", w_e)] {
        let tr = w.trace_measure();
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("{name} correlation has trace {tr}, expected 1")));
        }
    }
    let (a, b) = (w_t.matrix(), w_e.matrix());
    let n = a.nrows();
    // Tr(AB) = Σ_jk A_jk B_kj without forming the product.
    let mut acc = num_complex::Complex64::default();
    for j in 0..n {
        for k in 0..n {
            acc += a[(j, k)] * b[(k, j)];
        }
    }
    let dxi = w_t.grid().dxi();
    let f = acc * dxi * dxi;
    if f.im.abs() > 1e-10 {
        return Err(Error::NumericalFailure(format!(
            "fidelity has imaginary residue {:e}",
            f.im
        )));
    }
    Ok(f.re)
}

/// `est` times the unit phase that makes it agree with `reference` at the
/// reference's largest-magnitude bin.
///
/// Fixing each amplitude separately can pick different pivot bins when the
/// reference has several equal maxima (HG1, symmetric double pulses); a shared
/// pivot avoids the resulting spurious offset.
pub fn align_phase(est: &SpectralAmplitude, reference: &SpectralAmplitude) -> Result<SpectralAmplitude> {
    if est.grid() != reference.grid() {
        return Err(Error::invalid("phase alignment across different grids"));
    }
    let idx = pivot(reference)?;
    let e = est.values()[idx];
    if e.norm() == 0.0 {
        return Err(Error::invalid("estimate vanishes at the reference pivot"));
    }
    let r = reference.values()[idx];
    Ok(est.scaled((r / r.norm()) * (e.conj() / e.norm())))
}

/// Largest wrapped phase difference `|arg(e_k / t_k)|` over bins with
/// `|t_k| > threshold · max|t|`, after [`align_phase`].
pub fn max_phase_deviation(est: &SpectralAmplitude, truth: &SpectralAmplitude, threshold: f64) -> Result<f64> {
    let e = align_phase(est, truth)?;
    let peak = truth.magnitudes().into_iter().fold(0.0, f64::max);
    Ok(truth
        .values()
        .iter()
        .zip(e.values())
        .filter(|(t, _)| t.norm() > threshold * peak)
        .map(|(t, e)| (e / t).arg().abs())
        .fold(0.0, f64::max))
}

fn pivot(f: &SpectralAmplitude) -> Result<usize> {
    let mags = f.magnitudes();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::invalid("all-zero amplitude has no phase reference"));
    }
    Ok(mags.iter().position(|&m| m >= max * (1.0 - 1e-12)).expect("max exists"))
}

/// Mixture weights `λ_n`, descending.
pub fn mode_weights(result: &ReconstructionResult) -> Vec<f64> {
    result.eigenvalues.clone()
}
