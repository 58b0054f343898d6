//! Pure and mixed time-frequency states.
//!
//! A pure state is a complex spectral amplitude `f(ξ_in)` sampled on a
//! [`FrequencyGrid`]; it is normalized when `Σ|f_k|²·Δξ = 1`. A general state
//! is the two-point spectral correlation `W(ω′, ω) = Σ λ_n f_n*(ω′) f_n(ω)`,
//! stored with `matrix[(j, k)] = W(ω_j, ω_k)` and unit trace under the grid
//! measure, `Σ_k W_kk·Δξ = 1`.
//!
//! Internally the solvers work with the Euclidean density matrix
//! `ρ = Δξ·conj(W)`, which has unit trace and `ρ = Σ λ_n u_n u_n†` for the
//! unit vectors `u_n = √Δξ·f_n`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::linalg::{hermitian_eigen, hermiticity_error, hermitize, trace, CMatrix};

pub const NORMALIZATION_TOL: f64 = 1e-12;
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAmplitude {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
}

impl SpectralAmplitude {
    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::invalid(format!(
                "amplitude has {} samples, grid has {}",
                values.len(),
                grid.n_points()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("amplitude contains non-finite values"));
        }
        Ok(Self { grid, values })
    }

    /// Sample `f` at every dimensionless bin coordinate `ξ_in`.
    pub fn from_fn(grid: FrequencyGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.xi_coords().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `Σ|f_k|²·Δξ`.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dxi()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sq() - 1.0).abs() <= NORMALIZATION_TOL
    }

    /// Unit vector `√Δξ·f` in the Euclidean inner product.
    pub fn unit_vector(&self) -> DVector<Complex64> {
        let w = self.grid.dxi().sqrt();
        DVector::from_iterator(self.values.len(), self.values.iter().map(|z| z * w))
    }

    pub(crate) fn from_unit_vector(grid: FrequencyGrid, v: &DVector<Complex64>) -> Self {
        let w = 1.0 / grid.dxi().sqrt();
        Self {
            grid,
            values: v.iter().map(|z| z * w).collect(),
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    /// `Σ conj(self_k)·other_k·Δξ`.
    pub fn inner(&self, other: &SpectralAmplitude) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::invalid("amplitudes live on different grids"));
        }
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.dxi())
    }

    /// Per-bin `|f|`.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    /// Per-bin `arg f` in `(-π, π]`.
    pub fn phases(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.arg()).collect()
    }

    /// Amplitude with the frequency axis reversed, `f(-ξ_in)`.
    pub fn reflected(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self {
            grid: self.grid,
            values,
        }
    }
}

/// Rescale to `Σ|f_k|²·Δξ = 1`.
pub fn normalize(f: &SpectralAmplitude) -> Result<SpectralAmplitude> {
    let n = f.norm_sq();
    if !(n > 0.0) {
        return Err(Error::invalid("cannot normalize an all-zero amplitude"));
    }
    if (n - 1.0).abs() <= f64::EPSILON {
        return Ok(f.clone());
    }
    Ok(f.scaled(Complex64::new(1.0 / n.sqrt(), 0.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCorrelation {
    grid: FrequencyGrid,
    matrix: CMatrix,
}

impl SpectralCorrelation {
    /// Wrap a matrix after checking the Hermitian, PSD and unit-trace invariants.
    pub fn new(grid: FrequencyGrid, matrix: CMatrix) -> Result<Self> {
        let w = Self { grid, matrix };
        w.check()?;
        Ok(w)
    }

    /// From a unit-trace Euclidean density matrix `ρ`.
    pub fn from_density(grid: FrequencyGrid, rho: &CMatrix) -> Self {
        let s = 1.0 / grid.dxi();
        Self {
            grid,
            matrix: rho.map(|z| z.conj() * s),
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Euclidean density matrix `ρ = Δξ·conj(W)`.
    pub fn density(&self) -> CMatrix {
        let s = self.grid.dxi();
        self.matrix.map(|z| z.conj() * s)
    }

    /// `Σ_k W_kk·Δξ`.
    pub fn trace_measure(&self) -> f64 {
        trace(&self.matrix).re * self.grid.dxi()
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        let rho = self.density();
        (&rho * &rho).trace().re
    }

    /// Eigen-decomposition `W = Σ λ_n f_n* f_n`: weights descending, modes normalized.
    pub fn eigenmodes(&self) -> (Vec<f64>, Vec<SpectralAmplitude>) {
        let eig = hermitian_eigen(&self.density());
        let modes = (0..eig.values.len())
            .map(|i| {
                SpectralAmplitude::from_unit_vector(self.grid, &eig.vectors.column(i).into_owned())
            })
            .collect();
        (eig.values, modes)
    }

    pub fn check(&self) -> Result<()> {
        let n = self.grid.n_points();
        if self.matrix.nrows() != n || self.matrix.ncols() != n {
            return Err(Error::invalid(format!(
                "correlation matrix is {}x{}, grid has {n} points",
                self.matrix.nrows(),
                self.matrix.ncols()
            )));
        }
        if self.matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("correlation matrix contains non-finite values"));
        }
        let herm = hermiticity_error(&self.matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::invalid(format!("correlation matrix is not Hermitian ({herm:e})")));
        }
        let tr = self.trace_measure();
        if (tr - 1.0).abs() > NORMALIZATION_TOL * n as f64 {
            return Err(Error::invalid(format!("correlation trace is {tr}, expected 1")));
        }
        let eig = hermitian_eigen(&self.matrix);
        let (max, min) = (eig.values[0], eig.values[n - 1]);
        if min < -PSD_TOL * max {
            return Err(Error::invalid(format!(
                "correlation matrix is not positive semidefinite (λ_min = {min:e})"
            )));
        }
        Ok(())
    }
}

/// Rank-one correlation `W_jk = conj(f_j)·f_k` of a normalized amplitude.
pub fn pure_correlation(f: &SpectralAmplitude) -> Result<SpectralCorrelation> {
    if !f.is_normalized() {
        return Err(Error::invalid(format!(
            "pure_correlation needs a normalized amplitude (norm² = {})",
            f.norm_sq()
        )));
    }
    let v = &f.values;
    let matrix = CMatrix::from_fn(v.len(), v.len(), |j, k| v[j].conj() * v[k]);
    Ok(SpectralCorrelation {
        grid: f.grid,
        matrix,
    })
}

/// Incoherent mixture `Σ w_i·pure(f_i)` with weights summing to one.
pub fn mixture(components: &[(f64, &SpectralAmplitude)]) -> Result<SpectralCorrelation> {
    let Some((_, first)) = components.first() else {
        return Err(Error::invalid("mixture needs at least one component"));
    };
    let grid = first.grid;
    let total: f64 = components.iter().map(|(w, _)| w).sum();
    if components.iter().any(|(w, _)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("mixture weights must be non-negative and sum to 1"));
    }
    let n = grid.n_points();
    let mut matrix = CMatrix::zeros(n, n);
    for (w, f) in components {
        matrix += pure_correlation(f)?.matrix.scale(*w);
    }
    Ok(SpectralCorrelation {
        grid,
        matrix: hermitize(&matrix),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    fn grid() -> FrequencyGrid {
        make_grid(0.0, 8.0, 64, 1.0).unwrap()
    }

    fn gauss(center: f64) -> SpectralAmplitude {
        let f = SpectralAmplitude::from_fn(grid(), |x| {
            Complex64::new((-(x - center).powi(2) / 2.0).exp(), 0.0)
        })
        .unwrap();
        normalize(&f).unwrap()
    }

    fn hg1() -> SpectralAmplitude {
        let f =
            SpectralAmplitude::from_fn(grid(), |x| Complex64::new(x * (-x * x / 2.0).exp(), 0.0))
                .unwrap();
        normalize(&f).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let f = gauss(0.3);
        assert!((f.norm_sq() - 1.0).abs() < 1e-12);
        let again = normalize(&f).unwrap();
        for (a, b) in f.values().iter().zip(again.values()) {
            assert!((a - b).norm() <= 1e-15);
        }
        let scaled = normalize(&f.scaled(Complex64::new(7.0, 0.0))).unwrap();
        for (a, b) in f.values().iter().zip(scaled.values()) {
            assert!((a - b).norm() <= 1e-14);
        }
        let zero = SpectralAmplitude::new(grid(), vec![Complex64::default(); 64]).unwrap();
        assert!(matches!(normalize(&zero), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pure_correlation_is_rank_one() {
        let f = hg1();
        let w = pure_correlation(&f).unwrap();
        w.check().unwrap();
        let (vals, _) = w.eigenmodes();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!(vals[1..].iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn pure_correlation_drops_global_phase() {
        let f = gauss(0.5);
        let g = f.scaled(Complex64::from_polar(1.0, 1.234));
        let a = pure_correlation(&f).unwrap();
        let b = pure_correlation(&g).unwrap();
        assert!((a.matrix() - b.matrix()).norm() < 1e-13);
    }

    #[test]
    fn pure_correlation_rejects_unnormalized() {
        let f = gauss(0.0).scaled(Complex64::new(2.0, 0.0));
        assert!(pure_correlation(&f).is_err());
    }

    #[test]
    fn orthogonal_mixture_has_equal_weights() {
        let (f0, f1) = (gauss(0.0), hg1());
        assert!(f0.inner(&f1).unwrap().norm() < 1e-14);
        let w = mixture(&[(0.5, &f0), (0.5, &f1)]).unwrap();
        w.check().unwrap();
        let (vals, _) = w.eigenmodes();
        assert!((vals[0] - 0.5).abs() < 1e-12 && (vals[1] - 0.5).abs() < 1e-12);
        assert!(vals[2..].iter().all(|v| v.abs() < 1e-12));
        assert!((w.purity() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn density_round_trip() {
        let f = gauss(-0.7).scaled(Complex64::from_polar(1.0, PI / 5.0));
        let w = pure_correlation(&f).unwrap();
        let back = SpectralCorrelation::from_density(*w.grid(), &w.density());
        assert!((back.matrix() - w.matrix()).norm() < 1e-14);
        assert!((w.trace_measure() - 1.0).abs() < 1e-12);
    }
}
