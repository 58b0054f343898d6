//! Maximum-likelihood reconstruction of the spectral correlation matrix.
//!
//! The scan measures `p_k ∝ ⟨e_k|ρ|e_k⟩` for unit coherent-mode vectors `e_k`.
//! These projectors do not resolve the identity: their sum `G = Σ_k e_k e_k†`
//! is only approximately flat over the scanned region and falls off outside
//! it. The solver therefore works in the whitened frame
//!
//! ```text
//! a_k = Λ^{−1/2} U† e_k,   σ = Λ^{1/2} U† ρ U Λ^{1/2} / Tr(·)
//! ```
//!
//! restricted to the eigenvectors `U` of `G` whose eigenvalues `Λ` exceed a
//! cutoff relative to the largest. There `Σ_k a_k a_k† = I` and
//! `p_k/Σ_j p_j = a_k† σ a_k`, so the likelihood takes the usual form for a
//! complete measurement and the diluted fixed-point iteration
//!
//! ```text
//! σ ← N[(I + ε(R − I)) σ (I + ε(R − I))],   R = Σ_k (ν_k / p_k) a_k a_k†
//! ```
//!
//! keeps every iterate Hermitian, positive semidefinite and of unit trace.
//! `ν_k` are the background-subtracted relative frequencies. Writing
//! `σ = A A†`, the update is `A ← A + ε(R − I)A`, an ascent step along the
//! likelihood gradient with respect to `A`. Near a pure optimum that plain
//! step converges very slowly, so by default successive directions are
//! combined Polak-Ribière style and the step grows after each success. A step
//! that would lower the likelihood is retried with half the size, so the
//! recorded likelihood sequence never decreases.
//!
//! All sums over scan points run in a canonical point order (sorted by
//! `(t, ξ)`) with a fixed chunking and pairwise reduction, which makes the
//! result independent of the input ordering and of the number of worker threads.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{coherent_mode, measurement_vector, CountMap, QpgModel};
use crate::grid::{FrequencyGrid, PhaseSpaceGrid};
use crate::linalg::{hermitian_eigen, hermitize, trace, tree_sum, CMatrix};
use crate::state::{SpectralAmplitude, SpectralCorrelation};

/// Scan points per work unit in the parallel accumulations.
const CHUNK: usize = 64;
/// Probabilities are floored here before taking the logarithm.
const P_FLOOR: f64 = 1e-300;
/// Eigenvalues closer than this are treated as degenerate when picking the dominant mode.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Halvings of the dilution tried before a step is declared stationary.
const MAX_HALVINGS: usize = 30;
/// Growth of the step after an accepted iteration when the step is adaptive.
const STEP_GROWTH: f64 = 1.5;
const MAX_STEP: f64 = 1e4;
/// Consecutive steps with a relative gain below `tol` needed to declare convergence.
pub const STALL_STEPS: usize = 10;

/// Rank-one projectors onto the coherent modes of a scan.
#[derive(Debug, Clone)]
pub struct Povm {
    grid: FrequencyGrid,
    ps_grid: PhaseSpaceGrid,
    qpg: QpgModel,
    /// Linear scan index of each element.
    scan_index: Vec<usize>,
    /// `(ξ, t)` of each element.
    points: Vec<(f64, f64)>,
    /// Unit vectors `√Δξ·E_c`, one column per element.
    elements: CMatrix,
    completeness: CMatrix,
    diagnostics: Vec<String>,
}

/// Build one projector per scan point.
pub fn build_povm(grid: &FrequencyGrid, ps_grid: &PhaseSpaceGrid, qpg: &QpgModel) -> Result<Povm> {
    qpg.validate()?;
    let k = ps_grid.len();
    let n = grid.n_points();
    let columns: Vec<DVector<Complex64>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let (xi, t) = ps_grid.point(i);
            measurement_vector(grid, qpg, xi, t)
        })
        .collect();
    let elements = CMatrix::from_columns(&columns);
    let points: Vec<(f64, f64)> = ps_grid.points().collect();

    let mut diagnostics = Vec::new();
    if k < 2 * n {
        diagnostics.push(format!(
            "scan has {k} points for a {n}-bin grid (< {}); the measurement is likely informationally incomplete",
            2 * n
        ));
    }
    let clipped = points
        .iter()
        .filter(|(xi, _)| crate::forward::mode_diagnostic(grid, *xi).is_some())
        .count();
    if clipped > 0 {
        diagnostics.push(format!("{clipped} scan modes are clipped by the frequency grid"));
    }
    for d in &diagnostics {
        log::warn!("{d}");
    }

    let mut povm = Povm {
        grid: *grid,
        ps_grid: ps_grid.clone(),
        qpg: *qpg,
        scan_index: (0..k).collect(),
        points,
        elements,
        completeness: CMatrix::zeros(n, n),
        diagnostics,
    };
    povm.completeness = povm.compute_completeness();
    Ok(povm)
}

impl Povm {
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn ps_grid(&self) -> &PhaseSpaceGrid {
        &self.ps_grid
    }

    pub fn qpg(&self) -> &QpgModel {
        &self.qpg
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn scan_index(&self) -> &[usize] {
        &self.scan_index
    }

    /// Element `k` as a normalized spectral amplitude.
    pub fn element(&self, k: usize) -> SpectralAmplitude {
        SpectralAmplitude::from_unit_vector(self.grid, &self.elements.column(k).into_owned())
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    /// `G = Σ_k e_k e_k†`.
    pub fn completeness(&self) -> &CMatrix {
        &self.completeness
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    /// The same projectors listed in a different order: element `i` of the
    /// result is element `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Povm> {
        let mut seen = vec![false; self.len()];
        if perm.len() != self.len() || perm.iter().any(|&p| p >= self.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("not a permutation of the POVM elements"));
        }
        let cols: Vec<_> = perm.iter().map(|&p| self.elements.column(p).into_owned()).collect();
        Ok(Povm {
            grid: self.grid,
            ps_grid: self.ps_grid.clone(),
            qpg: self.qpg,
            scan_index: perm.iter().map(|&p| self.scan_index[p]).collect(),
            points: perm.iter().map(|&p| self.points[p]).collect(),
            elements: CMatrix::from_columns(&cols),
            completeness: self.completeness.clone(),
            diagnostics: self.diagnostics.clone(),
        })
    }

    /// Element indices sorted by `(t, ξ)`.
    fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            let (pa, pb) = (self.points[a], self.points[b]);
            pa.1.total_cmp(&pb.1).then(pa.0.total_cmp(&pb.0)).then(a.cmp(&b))
        });
        order
    }

    fn compute_completeness(&self) -> CMatrix {
        let order = self.canonical_order();
        let n = self.grid.n_points();
        let parts: Vec<CMatrix> = order
            .par_chunks(CHUNK)
            .map(|chunk| {
                let cols: Vec<_> = chunk.iter().map(|&k| self.elements.column(k).into_owned()).collect();
                let e = CMatrix::from_columns(&cols);
                &e * e.adjoint()
            })
            .collect();
        hermitize(&tree_sum(parts, |a, b| a + b).unwrap_or_else(|| CMatrix::zeros(n, n)))
    }

    /// Effective counts from a count map, aligned with this POVM's element order.
    pub fn align(&self, data: &CountMap) -> Result<Vec<f64>> {
        if data.ps_grid != self.ps_grid {
            return Err(Error::invalid("count map and POVM use different scans"));
        }
        let eff = data.effective_counts();
        Ok(self.scan_index.iter().map(|&s| eff[s]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub max_iters: usize,
    /// Stop once the relative log-likelihood gain stays below this for
    /// [`STALL_STEPS`] consecutive steps.
    pub tol: f64,
    /// Dilution `ε` in `(0, 1]`; the first step, and every step when not adaptive.
    pub dilution: f64,
    /// Grow the step after each accepted iteration (halving on rejection).
    pub adaptive: bool,
    /// Combine successive ascent directions (Polak-Ribière); with this and
    /// `adaptive` off the iteration is the plain diluted fixed-point map.
    pub conjugate: bool,
    /// Eigenvalues of `G` below `subspace_cutoff·λ_max(G)` are dropped.
    pub subspace_cutoff: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol: 1e-10,
            dilution: 0.5,
            adaptive: true,
            conjugate: true,
            subspace_cutoff: 1e-4,
        }
    }
}

impl MleOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.dilution > 0.0 && self.dilution <= 1.0) {
            return Err(Error::invalid(format!("dilution must lie in (0, 1], got {}", self.dilution)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("tolerance must be non-negative"));
        }
        if !(self.subspace_cutoff >= 1e-12 && self.subspace_cutoff < 1.0) {
            return Err(Error::invalid(format!(
                "subspace cutoff must lie in [1e-12, 1), got {}",
                self.subspace_cutoff
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub correlation: SpectralCorrelation,
    /// Mixture weights `λ_n`, descending, summing to one.
    pub eigenvalues: Vec<f64>,
    /// Normalized modes `f_n`, phase-fixed, aligned with `eigenvalues`.
    pub eigenmodes: Vec<SpectralAmplitude>,
    pub iterations: usize,
    /// `Σ_k n_k log p_k` with normalized `p_k`, using effective counts.
    pub final_log_likelihood: f64,
    pub converged: bool,
    /// Mean log-likelihood per count, `Σ_k ν_k log p_k`, after every accepted
    /// step; entry 0 is the initial state.
    pub log_likelihood_history: Vec<f64>,
    /// Dimension of the reconstruction subspace.
    pub subspace_dim: usize,
    /// Mean `(ξ, t)` of the scan, used to break eigenvalue ties.
    pub scan_centroid: (f64, f64),
    pub diagnostics: Vec<String>,
}

/// `Σ_k n_k log(p_k / Σ_j p_j)` with `p_k = ⟨e_k|ρ|e_k⟩` and `n_k` the
/// background-subtracted counts; zero-count points contribute nothing.
pub fn log_likelihood(w: &SpectralCorrelation, data: &CountMap, povm: &Povm) -> Result<f64> {
    if w.grid() != povm.grid() {
        return Err(Error::invalid("correlation and POVM use different grids"));
    }
    let counts = povm.align(data)?;
    if counts.iter().all(|c| *c == 0.0) {
        return Err(Error::invalid("log-likelihood of an all-zero count map"));
    }
    let rho = w.density();
    let p: Vec<f64> = (0..povm.len())
        .into_par_iter()
        .map(|k| {
            let e = povm.elements.column(k);
            e.dotc(&(&rho * e)).re
        })
        .collect();
    let total: f64 = p.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::NumericalFailure(format!("total probability is {total}")));
    }
    Ok(counts
        .iter()
        .zip(&p)
        .filter(|(n, _)| **n > 0.0)
        .map(|(n, p)| n * (p / total).max(P_FLOOR).ln())
        .sum())
}

/// Reconstruct from a count map; counts are background-subtracted per point.
pub fn reconstruct(data: &CountMap, povm: &Povm, opts: &MleOptions) -> Result<ReconstructionResult> {
    let counts = povm.align(data)?;
    reconstruct_from_counts(&counts, povm, opts)
}

/// Whitened solver state shared by the iteration helpers.
struct Frame {
    /// `a_k` as columns, canonical order.
    a: CMatrix,
    /// Relative frequencies `ν_k`, canonical order.
    nu: Vec<f64>,
}

impl Frame {
    /// `p_k = a_k† σ a_k`.
    fn probabilities(&self, sigma: &CMatrix) -> Vec<f64> {
        let k = self.a.ncols();
        let starts: Vec<usize> = (0..k).step_by(CHUNK).collect();
        starts
            .par_iter()
            .flat_map_iter(|&s| {
                let len = CHUNK.min(k - s);
                let block = self.a.columns(s, len);
                let sa = sigma * block;
                (0..len).map(move |j| block.column(j).dotc(&sa.column(j)).re).collect::<Vec<_>>()
            })
            .collect()
    }

    /// `Σ_k ν_k log p_k`, or `None` when a probability is not finite.
    fn log_likelihood(&self, p: &[f64]) -> Option<f64> {
        let parts: Vec<f64> = p
            .chunks(CHUNK)
            .zip(self.nu.chunks(CHUNK))
            .map(|(pc, nc)| {
                pc.iter()
                    .zip(nc)
                    .filter(|(_, n)| **n > 0.0)
                    .map(|(p, n)| n * p.max(P_FLOOR).ln())
                    .sum::<f64>()
            })
            .collect();
        if p.iter().any(|v| !v.is_finite()) {
            return None;
        }
        tree_sum(parts, |a, b| a + b)
    }

    /// `R = Σ_k (ν_k/p_k) a_k a_k†`.
    fn r_operator(&self, p: &[f64]) -> CMatrix {
        let (r, k) = (self.a.nrows(), self.a.ncols());
        let starts: Vec<usize> = (0..k).step_by(CHUNK).collect();
        let parts: Vec<CMatrix> = starts
            .par_iter()
            .map(|&s| {
                let len = CHUNK.min(k - s);
                let block = self.a.columns(s, len);
                let mut weighted = block.clone_owned();
                for j in 0..len {
                    let n = self.nu[s + j];
                    let w = if n > 0.0 { n / p[s + j].max(P_FLOOR) } else { 0.0 };
                    weighted.column_mut(j).scale_mut(w);
                }
                weighted * block.adjoint()
            })
            .collect();
        tree_sum(parts, |a, b| a + b).unwrap_or_else(|| CMatrix::zeros(r, r))
    }
}

fn normalized_trace(m: CMatrix) -> CMatrix {
    let m = hermitize(&m);
    let tr = trace(&m).re;
    m.unscale(tr)
}

/// Reconstruct from effective counts aligned with the POVM's element order.
pub fn reconstruct_from_counts(
    counts: &[f64],
    povm: &Povm,
    opts: &MleOptions,
) -> Result<ReconstructionResult> {
    opts.validate()?;
    if counts.len() != povm.len() {
        return Err(Error::invalid(format!(
            "{} counts for {} POVM elements",
            counts.len(),
            povm.len()
        )));
    }
    if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::invalid("counts must be finite and non-negative"));
    }
    let order = povm.canonical_order();
    let total: f64 = order.iter().map(|&k| counts[k]).sum();
    if !(total > 0.0) {
        return Err(Error::invalid("reconstruction from an all-zero count map"));
    }
    let nu: Vec<f64> = order.iter().map(|&k| counts[k] / total).collect();

    // Whitening restricted to the well-measured subspace of G.
    let g_eig = hermitian_eigen(&povm.completeness);
    let lmax = g_eig.values[0];
    if !(lmax > 0.0) {
        return Err(Error::NumericalFailure("POVM completeness matrix vanishes".into()));
    }
    let rank = g_eig
        .values
        .iter()
        .take_while(|&&l| l >= opts.subspace_cutoff * lmax)
        .count();
    let n = povm.grid.n_points();
    let basis = g_eig.vectors.columns(0, rank).into_owned();
    let inv_sqrt = DVector::from_iterator(rank, g_eig.values[..rank].iter().map(|l| 1.0 / l.sqrt()));
    let ordered: Vec<_> = order.iter().map(|&k| povm.elements.column(k).into_owned()).collect();
    let e_canon = CMatrix::from_columns(&ordered);
    let mut a = basis.adjoint() * &e_canon;
    for (i, mut row) in a.row_iter_mut().enumerate() {
        row.scale_mut(inv_sqrt[i]);
    }
    let frame = Frame { a, nu };

    let identity = CMatrix::identity(rank, rank);
    // σ = A A† with Tr σ = 1; the diluted update is A ← (I + ε(R − I)) A.
    let mut factor = identity.unscale((rank as f64).sqrt());
    let mut sigma = identity.unscale(rank as f64);
    let mut p = frame.probabilities(&sigma);
    let mut ll = frame
        .log_likelihood(&p)
        .ok_or_else(|| Error::NumericalFailure("non-finite probabilities at start".into()))?;
    let mut history = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let mut small_gains = 0;
    let mut diagnostics = povm.diagnostics.clone();

    let mut step = opts.dilution;
    let mut previous: Option<(CMatrix, CMatrix)> = None;
    while iterations < opts.max_iters {
        let r = frame.r_operator(&p);
        let grad = (&r - &identity) * &factor;
        let mut dir = grad.clone();
        if let (true, Some((g0, d0))) = (opts.conjugate, &previous) {
            // Polak-Ribière with restart whenever the direction stops ascending.
            let den = g0.dotc(g0).re;
            let beta = if den > 0.0 { (grad.dotc(&(&grad - g0)).re / den).max(0.0) } else { 0.0 };
            let cand = &grad + d0.scale(beta);
            if cand.dotc(&grad).re > 0.0 {
                dir = cand;
            }
        }
        let mut eps = step;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let a = &factor + dir.scale(eps);
            let a = a.unscale(a.norm());
            let cand = hermitize(&(&a * a.adjoint()));
            let cp = frame.probabilities(&cand);
            let cll = frame.log_likelihood(&cp).ok_or_else(|| {
                Error::NumericalFailure(format!("non-finite probabilities at iteration {}", iterations + 1))
            })?;
            if cll >= ll {
                accepted = Some((a, cand, cp, cll));
                break;
            }
            eps *= 0.5;
        }
        let Some((a, cand, cp, cll)) = accepted else {
            diagnostics.push(format!(
                "no likelihood increase after {MAX_HALVINGS} step halvings at iteration {}",
                iterations + 1
            ));
            converged = true;
            break;
        };
        iterations += 1;
        step = if opts.adaptive { (eps * STEP_GROWTH).min(MAX_STEP) } else { opts.dilution };
        let gain = cll - ll;
        previous = Some((grad, dir));
        factor = a;
        sigma = cand;
        p = cp;
        ll = cll;
        history.push(ll);
        if gain <= opts.tol * ll.abs() {
            small_gains += 1;
            if small_gains >= STALL_STEPS {
                converged = true;
                break;
            }
        } else {
            small_gains = 0;
        }
    }
    if !converged {
        diagnostics.push(format!("stopped at the iteration limit {} before convergence", opts.max_iters));
    }

    // Back to the frequency-bin basis.
    let mut half = basis.clone();
    for (j, mut col) in half.column_iter_mut().enumerate() {
        col.scale_mut(inv_sqrt[j]);
    }
    let rho = normalized_trace(&half * &sigma * half.adjoint());
    let eig = hermitian_eigen(&rho);
    let mut weights: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    let wsum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= wsum);
    let mut rebuilt = CMatrix::zeros(n, n);
    for (i, w) in weights.iter().enumerate().filter(|(_, w)| **w > 0.0) {
        let v = eig.vectors.column(i);
        rebuilt += (v * v.adjoint()).scale(*w);
    }
    let correlation = SpectralCorrelation::from_density(povm.grid, &hermitize(&rebuilt));
    let eigenmodes = (0..n)
        .map(|i| {
            let f = SpectralAmplitude::from_unit_vector(povm.grid, &eig.vectors.column(i).into_owned());
            fix_global_phase(&f).expect("eigenvectors are non-zero")
        })
        .collect();

    Ok(ReconstructionResult {
        correlation,
        eigenvalues: weights,
        eigenmodes,
        iterations,
        final_log_likelihood: ll * total,
        converged,
        log_likelihood_history: history,
        subspace_dim: rank,
        scan_centroid: povm.ps_grid.centroid(),
        diagnostics,
    })
}

/// The dominant mode and its weight.
#[derive(Debug, Clone)]
pub struct DominantMode {
    pub mode: SpectralAmplitude,
    pub weight: f64,
    /// Set when the leading eigenvalue was degenerate and the tie-break rule decided.
    pub tie_broken: bool,
}

/// Mode with the largest weight. Among modes within [`DEGENERACY_TOL`] of the
/// top weight, the one overlapping most with the coherent mode at the scan
/// centroid wins; remaining ties go to the lower index.
pub fn extract_dominant_mode(result: &ReconstructionResult) -> DominantMode {
    let top = result.eigenvalues[0];
    let tied: Vec<usize> = (0..result.eigenvalues.len())
        .take_while(|&i| (top - result.eigenvalues[i]).abs() < DEGENERACY_TOL)
        .collect();
    let mut best = 0;
    if tied.len() > 1 {
        let grid = *result.correlation.grid();
        let (cx, ct) = result.scan_centroid;
        let reference = coherent_mode(&grid, cx, ct);
        let overlap = |i: usize| reference.inner(&result.eigenmodes[i]).map(|z| z.norm()).unwrap_or(0.0);
        let mut best_overlap = overlap(0);
        for &i in &tied[1..] {
            let o = overlap(i);
            if o > best_overlap {
                best = i;
                best_overlap = o;
            }
        }
        log::info!("leading eigenvalue is {}-fold degenerate; picked mode {best}", tied.len());
    }
    DominantMode {
        mode: result.eigenmodes[best].clone(),
        weight: result.eigenvalues[best],
        tie_broken: tied.len() > 1,
    }
}

/// Rotate the global phase so the largest-magnitude sample is real and positive.
///
/// Samples within a relative `1e-12` of the maximum count as tied and the first
/// of them is used, so the choice survives rounding-level perturbations.
pub fn fix_global_phase(f: &SpectralAmplitude) -> Result<SpectralAmplitude> {
    let mags = f.magnitudes();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::invalid("cannot fix the phase of an all-zero amplitude"));
    }
    let idx = mags.iter().position(|&m| m >= max * (1.0 - 1e-12)).expect("max exists");
    let pivot = f.values()[idx];
    let rot = pivot.conj() / pivot.norm();
    let mut values: Vec<Complex64> = f.values().iter().map(|z| z * rot).collect();
    values[idx] = Complex64::new(pivot.norm(), 0.0);
    SpectralAmplitude::new(*f.grid(), values)
}
