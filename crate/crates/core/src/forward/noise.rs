//! Photon-counting model: Poisson signal on a flat Poisson background.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use super::QFunction;
use crate::error::{Error, Result};
use crate::grid::PhaseSpaceGrid;

/// Recorded counts for every scan point plus the expected background.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMap {
    pub ps_grid: PhaseSpaceGrid,
    pub counts: DMatrix<u64>,
    pub background: DMatrix<f64>,
    /// Expected counts at the Q-function maximum.
    pub scale: f64,
    pub seed: u64,
}

impl CountMap {
    pub fn new(
        ps_grid: PhaseSpaceGrid,
        counts: DMatrix<u64>,
        background: DMatrix<f64>,
        scale: f64,
        seed: u64,
    ) -> Result<Self> {
        let shape = (ps_grid.n_t(), ps_grid.n_xi());
        if counts.shape() != shape || background.shape() != shape {
            return Err(Error::invalid(format!(
                "count/background matrices must be {}x{}",
                shape.0, shape.1
            )));
        }
        if background.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::invalid("background must be finite and non-negative"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        Ok(Self {
            ps_grid,
            counts,
            background,
            scale,
            seed,
        })
    }

    /// Counts minus expected background, clamped at zero, in scan order.
    pub fn effective_counts(&self) -> Vec<f64> {
        (0..self.ps_grid.len())
            .map(|k| {
                let (i, j) = (k / self.ps_grid.n_xi(), k % self.ps_grid.n_xi());
                (self.counts[(i, j)] as f64 - self.background[(i, j)]).max(0.0)
            })
            .collect()
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Independent generator for scan point `index`, so draws do not depend on
/// evaluation order or worker count.
fn point_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Draw `counts ~ Poisson(scale·q + background_level)` at every scan point.
pub fn simulate_counts(
    q: &QFunction,
    scale: f64,
    background_level: f64,
    seed: u64,
) -> Result<CountMap> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::invalid(format!("scale must be positive, got {scale}")));
    }
    if !(background_level >= 0.0) || !background_level.is_finite() {
        return Err(Error::invalid(format!(
            "background level must be non-negative, got {background_level}"
        )));
    }
    let ps = q.ps_grid();
    let counts: Vec<u64> = (0..ps.len())
        .into_par_iter()
        .map(|k| {
            let mean = scale * q.at(k) + background_level;
            if mean <= 0.0 {
                return 0;
            }
            let poisson = Poisson::new(mean).expect("positive finite mean");
            poisson.sample(&mut point_rng(seed, k)) as u64
        })
        .collect();
    CountMap::new(
        ps.clone(),
        DMatrix::from_row_slice(ps.n_t(), ps.n_xi(), &counts),
        DMatrix::from_element(ps.n_t(), ps.n_xi(), background_level),
        scale,
        seed,
    )
}

/// `max(counts − background, 0)` scaled to unit maximum; the number of clamped
/// points is kept on the result.
pub fn subtract_background(counts: &CountMap) -> QFunction {
    let diff = counts.counts.zip_map(&counts.background, |n, b| n as f64 - b);
    let clamped = diff.iter().filter(|d| **d < 0.0).count();
    let mut q = QFunction::from_raw(counts.ps_grid.clone(), diff.map(|d| d.max(0.0)));
    q.clamped_points = clamped;
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{q_function, QpgModel};
    use crate::grid::make_grid;
    use crate::metrics::similarity;
    use crate::pulse::{make_pulse, PulseSpec};

    fn scan() -> PhaseSpaceGrid {
        PhaseSpaceGrid::uniform((-4.0, 4.0), 41, (-4.0, 4.0), 41).unwrap()
    }

    fn gaussian_q() -> QFunction {
        let g = make_grid(0.0, 16.0, 64, 1.0).unwrap();
        let f = make_pulse(&PulseSpec::default_for("gaussian").unwrap(), &g).unwrap();
        q_function(&f, &scan(), &QpgModel::ideal()).unwrap()
    }

    #[test]
    fn seeded_runs_are_identical() {
        let q = gaussian_q();
        let a = simulate_counts(&q, 500.0, 0.0, 7).unwrap();
        let b = simulate_counts(&q, 500.0, 0.0, 7).unwrap();
        assert_eq!(a, b);
        let c = simulate_counts(&q, 500.0, 0.0, 8).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn counts_concentrate_at_high_budget() {
        let q = gaussian_q();
        let scale = 1e6;
        for seed in 0..100 {
            let c = simulate_counts(&q, scale, 0.0, seed).unwrap();
            let inside = (0..q.ps_grid().len())
                .filter(|&k| {
                    let (i, j) = (k / 41, k % 41);
                    let dev = (c.counts[(i, j)] as f64 / scale - q.at(k)).abs();
                    dev <= 3.0 * (q.at(k) / scale).sqrt()
                })
                .count();
            assert!(inside as f64 >= 0.99 * 1681.0, "seed {seed}: {inside}");
        }
    }

    #[test]
    fn pure_background_mean() {
        let ps = scan();
        let zero = QFunction::new(ps.clone(), DMatrix::zeros(41, 41)).unwrap();
        let c = simulate_counts(&zero, 1.0, 5.0, 3).unwrap();
        let mean = c.total_counts() as f64 / 1681.0;
        assert!((4.5..=5.5).contains(&mean), "{mean}");
    }

    #[test]
    fn rejects_bad_parameters() {
        let q = gaussian_q();
        assert!(simulate_counts(&q, -1.0, 0.0, 0).is_err());
        assert!(simulate_counts(&q, 0.0, 0.0, 0).is_err());
        assert!(simulate_counts(&q, 1.0, -0.5, 0).is_err());
    }

    #[test]
    fn subtraction_examples() {
        let q = gaussian_q();
        let c = simulate_counts(&q, 1000.0, 0.0, 11).unwrap();
        let s = subtract_background(&c);
        let max = *c.counts.iter().max().unwrap() as f64;
        for k in 0..1681 {
            let (i, j) = (k / 41, k % 41);
            assert!((s.at(k) - c.counts[(i, j)] as f64 / max).abs() < 1e-15);
        }
        assert_eq!(s.clamped_points(), 0);

        let mut low = c.clone();
        low.counts = DMatrix::from_element(41, 41, 2);
        low.background = DMatrix::from_element(41, 41, 10.0);
        let s = subtract_background(&low);
        assert!(s.values().iter().all(|v| *v == 0.0));
        assert_eq!(s.clamped_points(), 1681);
    }

    #[test]
    fn high_budget_pipeline_recovers_q() {
        let q = gaussian_q();
        let c = simulate_counts(&q, 1e6, 0.0, 5).unwrap();
        let s = subtract_background(&c);
        assert!(similarity(s.values(), q.values()).unwrap() > 0.999);
    }
}
