//! Frequency grids and the dimensionless time-frequency phase space.
//!
//! All spectral quantities live on a uniform angular-frequency grid centred on
//! the carrier `ω⁰`. Computation is done in dimensionless units: a frequency
//! offset `ω` maps to `ξ = ω / σ_c` and a delay `τ` maps to `t = τ·σ_c`, where
//! `σ_c` is the scale of the Gaussian measurement mode. With that choice the
//! measurement mode has equal widths `1/√2` along both axes. The time origin
//! `τ₀` is fixed to zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_GRID_POINTS: usize = 8;
pub const MIN_SPAN_IN_SIGMA: f64 = 6.0;

/// Uniform angular-frequency grid, symmetric about `center_frequency`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    /// Carrier `ω⁰` in rad/s.
    center_frequency: f64,
    /// Bin spacing in rad/s.
    spacing: f64,
    n_points: usize,
    /// Coherent-mode scale `σ_c` in rad/s.
    sigma_c: f64,
}

/// Build a grid covering `center ± span_in_sigma·σ_c/2` with `n_points` bins.
pub fn make_grid(
    center: f64,
    span_in_sigma: f64,
    n_points: usize,
    sigma_c: f64,
) -> Result<FrequencyGrid> {
    FrequencyGrid::new(center, span_in_sigma, n_points, sigma_c)
}

impl FrequencyGrid {
    pub fn new(center: f64, span_in_sigma: f64, n_points: usize, sigma_c: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::invalid("grid center must be finite"));
        }
        if !(sigma_c > 0.0) || !sigma_c.is_finite() {
            return Err(Error::invalid(format!("sigma_c must be positive, got {sigma_c}")));
        }
        if !(span_in_sigma > 0.0) || !span_in_sigma.is_finite() {
            return Err(Error::invalid(format!(
                "grid span must be positive, got {span_in_sigma}"
            )));
        }
        if span_in_sigma < MIN_SPAN_IN_SIGMA {
            return Err(Error::invalid(format!(
                "grid span {span_in_sigma}·σ_c is narrower than the {MIN_SPAN_IN_SIGMA}·σ_c mode support"
            )));
        }
        if n_points < MIN_GRID_POINTS {
            return Err(Error::invalid(format!(
                "grid needs at least {MIN_GRID_POINTS} points, got {n_points}"
            )));
        }
        Ok(Self {
            center_frequency: center,
            spacing: span_in_sigma * sigma_c / (n_points - 1) as f64,
            n_points,
            sigma_c,
        })
    }

    pub fn center_frequency(&self) -> f64 {
        self.center_frequency
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn sigma_c(&self) -> f64 {
        self.sigma_c
    }

    /// Total span in units of `σ_c`.
    pub fn span_in_sigma(&self) -> f64 {
        self.spacing * (self.n_points - 1) as f64 / self.sigma_c
    }

    /// Half-span in dimensionless units.
    pub fn half_span(&self) -> f64 {
        0.5 * self.span_in_sigma()
    }

    /// Dimensionless bin width `Δξ`, the quadrature weight for every inner product.
    pub fn dxi(&self) -> f64 {
        self.spacing / self.sigma_c
    }

    /// Offset of bin `k` from the carrier, in rad/s.
    pub fn offset(&self, k: usize) -> f64 {
        (k as f64 - 0.5 * (self.n_points - 1) as f64) * self.spacing
    }

    /// Dimensionless coordinate `ξ_in` of bin `k`.
    pub fn xi_in(&self, k: usize) -> f64 {
        (k as f64 - 0.5 * (self.n_points - 1) as f64) * self.dxi()
    }

    pub fn offsets(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.offset(k)).collect()
    }

    pub fn xi_coords(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.xi_in(k)).collect()
    }

    /// Absolute angular frequency of bin `k`.
    pub fn frequency(&self, k: usize) -> f64 {
        self.center_frequency + self.offset(k)
    }
}

/// Physical (rad/s, s) → dimensionless `(ξ, t)`.
pub fn to_dimensionless(omega: f64, tau: f64, grid: &FrequencyGrid) -> (f64, f64) {
    (omega / grid.sigma_c, tau * grid.sigma_c)
}

/// Dimensionless `(ξ, t)` → physical (rad/s, s).
pub fn to_physical(xi: f64, t: f64, grid: &FrequencyGrid) -> (f64, f64) {
    (xi * grid.sigma_c, t / grid.sigma_c)
}

/// Spectral and temporal shifts of the measurement scan, both dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    xi_shifts: Vec<f64>,
    t_shifts: Vec<f64>,
}

fn check_increasing(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid(format!("{name} must not be empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{name} contains non-finite values")));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

/// `n` evenly spaced points on `[lo, hi]`, laid out symmetrically about the midpoint.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let mid = 0.5 * (lo + hi);
    let step = (hi - lo) / (n - 1) as f64;
    let c = 0.5 * (n - 1) as f64;
    (0..n).map(|i| mid + (i as f64 - c) * step).collect()
}

impl PhaseSpaceGrid {
    pub fn new(xi_shifts: Vec<f64>, t_shifts: Vec<f64>) -> Result<Self> {
        check_increasing("xi_shifts", &xi_shifts)?;
        check_increasing("t_shifts", &t_shifts)?;
        Ok(Self {
            xi_shifts,
            t_shifts,
        })
    }

    /// Rectangular scan with `n_xi × n_t` evenly spaced points.
    pub fn uniform(
        xi_range: (f64, f64),
        n_xi: usize,
        t_range: (f64, f64),
        n_t: usize,
    ) -> Result<Self> {
        if n_xi == 0 || n_t == 0 {
            return Err(Error::invalid("scan needs at least one point per axis"));
        }
        if (n_xi > 1 && !(xi_range.1 > xi_range.0)) || (n_t > 1 && !(t_range.1 > t_range.0)) {
            return Err(Error::invalid("scan ranges must be increasing"));
        }
        Self::new(
            linspace(xi_range.0, xi_range.1, n_xi),
            linspace(t_range.0, t_range.1, n_t),
        )
    }

    pub fn xi_shifts(&self) -> &[f64] {
        &self.xi_shifts
    }

    pub fn t_shifts(&self) -> &[f64] {
        &self.t_shifts
    }

    pub fn n_xi(&self) -> usize {
        self.xi_shifts.len()
    }

    pub fn n_t(&self) -> usize {
        self.t_shifts.len()
    }

    pub fn len(&self) -> usize {
        self.n_xi() * self.n_t()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(ξ, t)` of linear scan index `k`; rows run over `t`, columns over `ξ`.
    pub fn point(&self, k: usize) -> (f64, f64) {
        let (i_t, i_xi) = (k / self.n_xi(), k % self.n_xi());
        (self.xi_shifts[i_xi], self.t_shifts[i_t])
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(move |k| self.point(k))
    }

    /// Mean `(ξ, t)` over the scan.
    pub fn centroid(&self) -> (f64, f64) {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        (mean(&self.xi_shifts), mean(&self.t_shifts))
    }
}
