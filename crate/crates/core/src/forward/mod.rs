//! Forward model: coherent measurement modes and Q-function synthesis.
//!
//! A measurement at dimensionless shift `(ξ, t)` projects the state onto the
//! Fourier-limited Gaussian
//!
//! ```text
//! E_c(ξ_in; ξ, t) = π^{−1/4} · exp[−(ξ_in − ξ)²/2] · exp[−i ξ_in t]
//! ```
//!
//! and records `|∫ f(ξ_in) E_c*(ξ_in) dξ_in|²`. The mode is centred at `+ξ`, so
//! shifting the pulse spectrum by `a` moves the Q-function peak to `ξ = a`, and
//! a linear spectral phase `e^{−i b ξ_in}` moves it to `t = b`.

mod noise;

pub use noise::{simulate_counts, subtract_background, CountMap};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, PhaseSpaceGrid};
use crate::state::{SpectralAmplitude, SpectralCorrelation};

/// How close to the grid edge a mode centre may sit before it is reported as clipped.
pub const MODE_MARGIN: f64 = 3.0;

/// Optional imperfection of the projecting device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpgModel {
    pub ideal: bool,
    /// RMS width of the Gaussian spectral acceptance window in rad/s.
    pub pm_width: f64,
}

impl Default for QpgModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl QpgModel {
    pub fn ideal() -> Self {
        Self {
            ideal: true,
            pm_width: f64::INFINITY,
        }
    }

    pub fn with_phase_matching(pm_width: f64) -> Result<Self> {
        if !(pm_width > 0.0) {
            return Err(Error::invalid(format!(
                "phase-matching width must be positive, got {pm_width}"
            )));
        }
        Ok(Self {
            ideal: false,
            pm_width,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !self.ideal && !(self.pm_width > 0.0) {
            return Err(Error::invalid("non-ideal QPG needs a positive pm_width"));
        }
        Ok(())
    }
}

/// Warning text when a mode centred at `xi` is clipped by the grid edge.
pub fn mode_diagnostic(grid: &FrequencyGrid, xi: f64) -> Option<String> {
    let limit = grid.half_span() - MODE_MARGIN;
    (xi.abs() > limit).then(|| {
        format!("coherent mode at ξ = {xi} is clipped by the grid (|ξ| must be ≤ {limit})")
    })
}

/// The coherent mode `E_c(·; ξ, t)` sampled on `grid`.
///
/// Normalization uses the continuum constant `π^{−1/4}`, so a mode that fits the
/// grid has unit norm to machine precision while a clipped mode keeps only the
/// weight that actually lies on the grid.
pub fn coherent_mode(grid: &FrequencyGrid, xi: f64, t: f64) -> SpectralAmplitude {
    if let Some(msg) = mode_diagnostic(grid, xi) {
        log::warn!("{msg}");
    }
    let norm = std::f64::consts::PI.powf(-0.25);
    SpectralAmplitude::from_fn(*grid, |x| {
        Complex64::from_polar(norm * (-(x - xi).powi(2) / 2.0).exp(), -x * t)
    })
    .expect("coherent mode samples are finite")
}

/// Euclidean measurement vector `√Δξ·E_c` for one scan point, with the QPG
/// acceptance window applied when the model is not ideal.
pub(crate) fn measurement_vector(
    grid: &FrequencyGrid,
    qpg: &QpgModel,
    xi: f64,
    t: f64,
) -> DVector<Complex64> {
    let w = grid.dxi().sqrt();
    let norm = std::f64::consts::PI.powf(-0.25) * w;
    let mut v = DVector::from_iterator(
        grid.n_points(),
        grid.xi_coords()
            .into_iter()
            .map(|x| Complex64::from_polar(norm * (-(x - xi).powi(2) / 2.0).exp(), -x * t)),
    );
    if !qpg.ideal {
        let width = qpg.pm_width / grid.sigma_c();
        for (k, z) in v.iter_mut().enumerate() {
            let x = grid.xi_in(k);
            *z *= (-x * x / (2.0 * width * width)).exp();
        }
        let n = v.norm();
        if n > 0.0 {
            v /= Complex64::new(n, 0.0);
        }
    }
    v
}

/// Projection amplitude `Σ_k f_k·conj(mode_k)·Δξ`.
pub fn project(f: &SpectralAmplitude, mode: &SpectralAmplitude) -> Result<Complex64> {
    if f.grid() != mode.grid() {
        return Err(Error::invalid("projection across different frequency grids"));
    }
    mode.inner(f)
}

/// Non-negative phase-space distribution; rows run over `t`, columns over `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    ps_grid: PhaseSpaceGrid,
    values: DMatrix<f64>,
    /// Scan points that were clamped to zero during background subtraction.
    clamped_points: usize,
}

impl QFunction {
    pub fn new(ps_grid: PhaseSpaceGrid, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != ps_grid.n_t() || values.ncols() != ps_grid.n_xi() {
            return Err(Error::invalid(format!(
                "Q values are {}x{}, scan is {}x{}",
                values.nrows(),
                values.ncols(),
                ps_grid.n_t(),
                ps_grid.n_xi()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("Q values must be finite and non-negative"));
        }
        Ok(Self {
            ps_grid,
            values,
            clamped_points: 0,
        })
    }

    /// Scale raw non-negative values to unit maximum (all-zero stays zero).
    pub(crate) fn from_raw(ps_grid: PhaseSpaceGrid, mut values: DMatrix<f64>) -> Self {
        let max = values.max();
        if max > 0.0 {
            values /= max;
        }
        Self {
            ps_grid,
            values,
            clamped_points: 0,
        }
    }

    pub fn ps_grid(&self) -> &PhaseSpaceGrid {
        &self.ps_grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn clamped_points(&self) -> usize {
        self.clamped_points
    }

    /// Value at linear scan index `k` (row-major over `t`, then `ξ`).
    pub fn at(&self, k: usize) -> f64 {
        self.values[(k / self.ps_grid.n_xi(), k % self.ps_grid.n_xi())]
    }

    /// `(i_t, i_ξ)` of the largest value; first occurrence wins.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for i in 0..self.values.nrows() {
            for j in 0..self.values.ncols() {
                if self.values[(i, j)] > self.values[best] {
                    best = (i, j);
                }
            }
        }
        best
    }

    /// `(ξ, t)` of the largest value.
    pub fn peak(&self) -> (f64, f64) {
        let (i, j) = self.argmax();
        (self.ps_grid.xi_shifts()[j], self.ps_grid.t_shifts()[i])
    }
}

/// Input state for [`q_function`].
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a SpectralAmplitude),
    Mixed(&'a SpectralCorrelation),
}

impl<'a> From<&'a SpectralAmplitude> for StateRef<'a> {
    fn from(f: &'a SpectralAmplitude) -> Self {
        StateRef::Pure(f)
    }
}

impl<'a> From<&'a SpectralCorrelation> for StateRef<'a> {
    fn from(w: &'a SpectralCorrelation) -> Self {
        StateRef::Mixed(w)
    }
}

impl StateRef<'_> {
    fn grid(&self) -> &FrequencyGrid {
        match self {
            StateRef::Pure(f) => f.grid(),
            StateRef::Mixed(w) => w.grid(),
        }
    }
}

/// Chronocyclic Q-function `⟨E_c(ξ,t)|W|E_c(ξ,t)⟩` over the scan, scaled to unit maximum.
pub fn q_function<'a>(
    state: impl Into<StateRef<'a>>,
    ps_grid: &PhaseSpaceGrid,
    qpg: &QpgModel,
) -> Result<QFunction> {
    qpg.validate()?;
    let state = state.into();
    let grid = *state.grid();
    let raw: Vec<f64> = match state {
        StateRef::Pure(f) => {
            let u = f.unit_vector();
            (0..ps_grid.len())
                .into_par_iter()
                .map(|k| {
                    let (xi, t) = ps_grid.point(k);
                    measurement_vector(&grid, qpg, xi, t).dotc(&u).norm_sqr()
                })
                .collect()
        }
        StateRef::Mixed(w) => {
            let rho = w.density();
            (0..ps_grid.len())
                .into_par_iter()
                .map(|k| {
                    let (xi, t) = ps_grid.point(k);
                    let e = measurement_vector(&grid, qpg, xi, t);
                    e.dotc(&(&rho * &e)).re.max(0.0)
                })
                .collect()
        }
    };
    Ok(QFunction::from_raw(
        ps_grid.clone(),
        DMatrix::from_row_slice(ps_grid.n_t(), ps_grid.n_xi(), &raw),
    ))
}
