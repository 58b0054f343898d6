//! Hermite-Gaussian expansion of the Q-function.
//!
//! A measurement mode centred at `(ξ, t)` is, up to a global phase, the
//! coherent superposition `e^{−|β|²/2} Σ_m conj(β)^m/√m! · h_m(ξ_in)` of the
//! orthonormal Hermite functions `h_m`, with `β = (ξ + i t)/√2`. Projecting a
//! state `f` onto it therefore gives
//!
//! ```text
//! Q(ξ, t) ∝ e^{−(ξ² + t²)/2} · |Σ_m c_m β^m|²,   c_m = ⟨h_m|f⟩ / √m!
//! ```
//!
//! which is the time-frequency analogue of expanding a coherent state in Fock
//! states. The same projection can also be written through the Hermite
//! generating function `e^{−(x−y)²} = e^{−x²} Σ_m H_m(x) y^m/m!`:
//!
//! ```text
//! Q(ξ, t) ∝ e^{−t²} · |Σ_m c′_m β^m|²,   c′_m = (1/m!) ∫ f(x) e^{−x²/2} H_m(x/√2) dx
//! ```
//!
//! Both forms are exact for untruncated sums and are provided as independent
//! oracles for [`crate::forward::q_function`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::QFunction;
use crate::grid::PhaseSpaceGrid;
use crate::state::SpectralAmplitude;

/// Highest supported order; beyond this the plain recurrence overflows quickly.
pub const MAX_ORDER: usize = 60;

/// Physicists' Hermite polynomial `H_m(x)` by the three-term recurrence.
pub(crate) fn hermite_polynomial(m: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..m {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `H_m` at every point of `x`, via `H_{m+1} = 2x·H_m − 2m·H_{m−1}`.
pub fn hermite_function(m: usize, x: &[f64]) -> Result<Vec<f64>> {
    if m > MAX_ORDER {
        return Err(Error::invalid(format!(
            "Hermite order {m} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    Ok(x.iter().map(|&x| hermite_polynomial(m, x)).collect())
}

/// Orthonormal Hermite functions `h_0..=h_max` at `x`, row `m` holding `h_m`.
///
/// Uses the normalized recurrence, which stays finite far beyond the range of
/// the bare polynomials.
pub(crate) fn hermite_functions(max: usize, x: &[f64]) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(max + 1);
    let h0: Vec<f64> = x
        .iter()
        .map(|&x| std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp())
        .collect();
    rows.push(h0);
    if max >= 1 {
        let h1 = x
            .iter()
            .zip(&rows[0])
            .map(|(&x, &h)| std::f64::consts::SQRT_2 * x * h)
            .collect();
        rows.push(h1);
    }
    for m in 1..max {
        let a = (2.0 / (m + 1) as f64).sqrt();
        let b = (m as f64 / (m + 1) as f64).sqrt();
        let next = x
            .iter()
            .enumerate()
            .map(|(k, &x)| a * x * rows[m][k] - b * rows[m - 1][k])
            .collect();
        rows.push(next);
    }
    rows
}

/// Which of the two algebraically equivalent expansions the coefficients belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionBasis {
    /// `c_m = ⟨h_m|f⟩/√m!`, prefactor `e^{−(ξ²+t²)/2}`.
    Fock,
    /// `c′_m = (1/m!)∫ f e^{−x²/2} H_m(x/√2)`, prefactor `e^{−t²}`.
    Generating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    pub coefficients: Vec<Complex64>,
    pub basis: ExpansionBasis,
}

/// Complex amplitude `β = (ξ + i t)/√2` of a phase-space point.
pub fn beta(xi: f64, t: f64) -> Complex64 {
    Complex64::new(xi, t) / std::f64::consts::SQRT_2
}

impl HermiteExpansion {
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `Σ_m c_m β^m` by Horner's rule.
    pub fn series(&self, beta: Complex64) -> Complex64 {
        self.coefficients
            .iter()
            .rev()
            .fold(Complex64::default(), |acc, c| acc * beta + c)
    }

    /// Unnormalized Q at a single point.
    pub fn q_value(&self, xi: f64, t: f64) -> f64 {
        let prefactor = match self.basis {
            ExpansionBasis::Fock => (-(xi * xi + t * t) / 2.0).exp(),
            ExpansionBasis::Generating => (-t * t).exp(),
        };
        prefactor * self.series(beta(xi, t)).norm_sqr()
    }
}

/// Fock-basis coefficients `c_m = ⟨h_m|f⟩/√m!`, `m = 0..=order`, by grid quadrature.
pub fn expand_state(f: &SpectralAmplitude, order: usize) -> Result<HermiteExpansion> {
    check_order(order)?;
    let x = f.grid().xi_coords();
    let dxi = f.grid().dxi();
    let h = hermite_functions(order, &x);
    let mut inv_sqrt_fact = 1.0;
    let coefficients = h
        .iter()
        .enumerate()
        .map(|(m, hm)| {
            if m > 0 {
                inv_sqrt_fact /= (m as f64).sqrt();
            }
            let psi: Complex64 = hm.iter().zip(f.values()).map(|(h, v)| v * *h).sum();
            psi * dxi * inv_sqrt_fact
        })
        .collect();
    Ok(HermiteExpansion {
        coefficients,
        basis: ExpansionBasis::Fock,
    })
}

/// Generating-function coefficients `c′_m = (1/m!) Σ_k f_k e^{−x_k²/2} H_m(x_k/√2) Δξ`.
pub fn expand_state_generating(f: &SpectralAmplitude, order: usize) -> Result<HermiteExpansion> {
    check_order(order)?;
    let x = f.grid().xi_coords();
    let dxi = f.grid().dxi();
    let mut coefficients = vec![Complex64::default(); order + 1];
    for (k, &xk) in x.iter().enumerate() {
        let y = xk / std::f64::consts::SQRT_2;
        let w = f.values()[k] * (-xk * xk / 2.0).exp() * dxi;
        // g_m = H_m(y)/m!, g_{m+1} = (2y·g_m − 2·g_{m−1})/(m+1)
        let (mut prev, mut cur) = (0.0, 1.0);
        for (m, c) in coefficients.iter_mut().enumerate() {
            *c += w * cur;
            let next = (2.0 * y * cur - 2.0 * prev) / (m + 1) as f64;
            prev = cur;
            cur = next;
        }
    }
    Ok(HermiteExpansion {
        coefficients,
        basis: ExpansionBasis::Generating,
    })
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::invalid(format!(
            "expansion order {order} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    Ok(())
}

/// Q-function from a truncated expansion, normalized to unit maximum.
pub fn q_via_expansion(exp: &HermiteExpansion, ps_grid: &PhaseSpaceGrid) -> QFunction {
    let values: Vec<f64> = (0..ps_grid.len())
        .into_par_iter()
        .map(|k| {
            let (xi, t) = ps_grid.point(k);
            exp.q_value(xi, t)
        })
        .collect();
    let values = DMatrix::from_row_slice(ps_grid.n_t(), ps_grid.n_xi(), &values);
    QFunction::from_raw(ps_grid.clone(), values)
}
