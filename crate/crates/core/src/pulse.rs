//! Library of test pulses.
//!
//! Each shape is defined in dimensionless units on top of a Gaussian envelope
//! of width `w` (in units of `σ_c`), offset by `center`:
//!
//! | kind               | `f(x)`, `x = ξ_in − center`                                   |
//! |--------------------|---------------------------------------------------------------|
//! | `gaussian`         | `exp(−x²/2w²)·exp(i c x²)`                                    |
//! | `chirped_gaussian` | same as `gaussian`, chirp required to be explicit             |
//! | `hermite_gauss`    | `H_n(x/w)·exp(−x²/2w²)`                                       |
//! | `double_pulse`     | `exp(−x²/2w²)·(e^{i x Δt/2} + e^{iφ}·e^{−i x Δt/2})`          |
//! | `phase_step`       | `exp(−x²/2w²)·exp(i h·Θ(x − x_step))`                         |
//!
//! The output of [`make_pulse`] is always normalized.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::hermite::hermite_polynomial;
use crate::state::{normalize, SpectralAmplitude};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseShape {
    Gaussian { width: f64, chirp: f64 },
    HermiteGauss { order: u32, width: f64 },
    DoublePulse { width: f64, separation: f64, relative_phase: f64 },
    PhaseStep { width: f64, step_position: f64, step_height: f64 },
    ChirpedGaussian { width: f64, chirp: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub shape: PulseShape,
    /// Spectral offset of the envelope centre, dimensionless.
    pub center: f64,
}

pub const KINDS: [&str; 5] = [
    "gaussian",
    "hermite_gauss",
    "double_pulse",
    "phase_step",
    "chirped_gaussian",
];

impl PulseShape {
    pub fn kind(&self) -> &'static str {
        match self {
            PulseShape::Gaussian { .. } => "gaussian",
            PulseShape::HermiteGauss { .. } => "hermite_gauss",
            PulseShape::DoublePulse { .. } => "double_pulse",
            PulseShape::PhaseStep { .. } => "phase_step",
            PulseShape::ChirpedGaussian { .. } => "chirped_gaussian",
        }
    }

    pub fn width(&self) -> f64 {
        match *self {
            PulseShape::Gaussian { width, .. }
            | PulseShape::HermiteGauss { width, .. }
            | PulseShape::DoublePulse { width, .. }
            | PulseShape::PhaseStep { width, .. }
            | PulseShape::ChirpedGaussian { width, .. } => width,
        }
    }
}

impl PulseSpec {
    pub fn new(shape: PulseShape) -> Self {
        Self { shape, center: 0.0 }
    }

    pub fn centered_at(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn kind(&self) -> &'static str {
        self.shape.kind()
    }

    /// The default member of each kind in the test zoo.
    pub fn default_for(kind: &str) -> Result<Self> {
        Self::from_pairs(kind, &BTreeMap::new())
    }

    /// One default pulse of every kind.
    pub fn zoo() -> Vec<Self> {
        KINDS
            .iter()
            .map(|k| Self::default_for(k).expect("built-in kinds are valid"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.shape.width();
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::invalid(format!("pulse width must be positive, got {w}")));
        }
        if !self.center.is_finite() {
            return Err(Error::invalid("pulse center must be finite"));
        }
        let finite = match self.shape {
            PulseShape::Gaussian { chirp, .. } | PulseShape::ChirpedGaussian { chirp, .. } => {
                chirp.is_finite()
            }
            PulseShape::HermiteGauss { order, .. } => order <= crate::hermite::MAX_ORDER as u32,
            PulseShape::DoublePulse {
                separation,
                relative_phase,
                ..
            } => separation.is_finite() && relative_phase.is_finite(),
            PulseShape::PhaseStep {
                step_position,
                step_height,
                ..
            } => step_position.is_finite() && step_height.is_finite(),
        };
        if !finite {
            return Err(Error::invalid(format!("invalid {} parameters", self.kind())));
        }
        Ok(())
    }

    /// Build a spec from a kind name and `key = value` parameters; missing keys take
    /// the zoo defaults.
    pub fn from_pairs(kind: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match kind {
            "gaussian" | "chirped_gaussian" => &["width", "chirp", "center"],
            "hermite_gauss" => &["order", "width", "center"],
            "double_pulse" => &["width", "separation", "relative_phase", "center"],
            "phase_step" => &["width", "step_position", "step_height", "center"],
            other => {
                return Err(Error::invalid(format!(
                    "unsupported pulse kind `{other}` (expected one of {})",
                    KINDS.join(", ")
                )))
            }
        };
        if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::invalid(format!("unknown parameter `{bad}` for {kind} pulse")));
        }
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let width = get("width", 1.0);
        let shape = match kind {
            "gaussian" => PulseShape::Gaussian {
                width,
                chirp: get("chirp", 0.0),
            },
            "chirped_gaussian" => PulseShape::ChirpedGaussian {
                width,
                chirp: get("chirp", 0.3),
            },
            "hermite_gauss" => {
                let order = get("order", 1.0);
                if order < 0.0 || order.fract() != 0.0 || order > crate::hermite::MAX_ORDER as f64 {
                    return Err(Error::invalid(format!(
                        "Hermite-Gauss order must be an integer in 0..={}, got {order}",
                        crate::hermite::MAX_ORDER
                    )));
                }
                PulseShape::HermiteGauss {
                    order: order as u32,
                    width,
                }
            }
            "double_pulse" => PulseShape::DoublePulse {
                width,
                separation: get("separation", 4.0),
                relative_phase: get("relative_phase", 0.0),
            },
            "phase_step" => PulseShape::PhaseStep {
                width,
                step_position: get("step_position", 2.5),
                step_height: get("step_height", std::f64::consts::PI),
            },
            _ => unreachable!(),
        };
        let spec = Self {
            shape,
            center: get("center", 0.0),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// All parameters as `(name, value)` in a fixed order, `center` last.
    pub fn to_pairs(&self) -> Vec<(&'static str, f64)> {
        let mut out = match self.shape {
            PulseShape::Gaussian { width, chirp } | PulseShape::ChirpedGaussian { width, chirp } => {
                vec![("width", width), ("chirp", chirp)]
            }
            PulseShape::HermiteGauss { order, width } => {
                vec![("order", order as f64), ("width", width)]
            }
            PulseShape::DoublePulse {
                width,
                separation,
                relative_phase,
            } => vec![
                ("width", width),
                ("separation", separation),
                ("relative_phase", relative_phase),
            ],
            PulseShape::PhaseStep {
                width,
                step_position,
                step_height,
            } => vec![
                ("width", width),
                ("step_position", step_position),
                ("step_height", step_height),
            ],
        };
        out.push(("center", self.center));
        out
    }

    /// Unnormalized amplitude at dimensionless frequency `xi_in`.
    pub fn evaluate(&self, xi_in: f64) -> Complex64 {
        let x = xi_in - self.center;
        let w = self.shape.width();
        let env = (-x * x / (2.0 * w * w)).exp();
        match self.shape {
            PulseShape::Gaussian { chirp, .. } | PulseShape::ChirpedGaussian { chirp, .. } => {
                Complex64::from_polar(env, chirp * x * x)
            }
            PulseShape::HermiteGauss { order, .. } => {
                Complex64::new(hermite_polynomial(order as usize, x / w) * env, 0.0)
            }
            PulseShape::DoublePulse {
                separation,
                relative_phase,
                ..
            } => {
                let a = 0.5 * x * separation;
                (Complex64::from_polar(1.0, a) + Complex64::from_polar(1.0, relative_phase - a))
                    * env
            }
            PulseShape::PhaseStep {
                step_position,
                step_height,
                ..
            } => {
                let phase = if x >= step_position { step_height } else { 0.0 };
                Complex64::from_polar(env, phase)
            }
        }
    }

    /// Dimensionless half-width the pulse needs: `|center| + 4·width`.
    pub fn support(&self) -> f64 {
        self.center.abs() + 4.0 * self.shape.width()
    }
}

/// Warning text when the pulse support does not fit inside the grid.
pub fn support_diagnostic(spec: &PulseSpec, grid: &FrequencyGrid) -> Option<String> {
    let need = spec.support();
    (need > grid.half_span()).then(|| {
        format!(
            "{} pulse support {need:.3} exceeds grid half-span {:.3}; the spectrum is clipped",
            spec.kind(),
            grid.half_span()
        )
    })
}

/// Sample and normalize the pulse on `grid`.
pub fn make_pulse(spec: &PulseSpec, grid: &FrequencyGrid) -> Result<SpectralAmplitude> {
    spec.validate()?;
    if let Some(msg) = support_diagnostic(spec, grid) {
        log::warn!("{msg}");
    }
    let f = SpectralAmplitude::from_fn(*grid, |x| spec.evaluate(x))?;
    normalize(&f)
}

impl fmt::Display for PulseSpec {
    /// Inline form `kind:key=value,...`, accepted by [`FromStr`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind())?;
        for (i, (k, v)) in self.to_pairs().iter().enumerate() {
            write!(f, "{}{k}={v:?}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

impl FromStr for PulseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("pulse parameter `{item}` is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("pulse parameter `{}` is not a number", k.trim())))?;
            params.insert(k.trim().to_string(), v);
        }
        Self::from_pairs(kind.trim(), &params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    fn grid() -> FrequencyGrid {
        make_grid(0.0, 8.0, 128, 1.0).unwrap()
    }

    #[test]
    fn zoo_is_normalized() {
        for spec in PulseSpec::zoo() {
            let f = make_pulse(&spec, &grid()).unwrap();
            assert!(f.is_normalized(), "{}", spec.kind());
        }
    }

    #[test]
    fn hg1_has_node_and_pi_jump() {
        let g = make_grid(0.0, 8.0, 129, 1.0).unwrap();
        let f = make_pulse(&PulseSpec::default_for("hermite_gauss").unwrap(), &g).unwrap();
        assert_eq!(f.values()[64].norm(), 0.0);
        let (left, right) = (f.values()[63], f.values()[65]);
        assert!(((left.arg() - right.arg()).abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn gaussian_is_real_nonnegative() {
        let f = make_pulse(&PulseSpec::default_for("gaussian").unwrap(), &grid()).unwrap();
        assert!(f.values().iter().all(|z| z.im == 0.0 && z.re >= 0.0));
    }

    #[test]
    fn double_pulse_fringe_period() {
        // |e^{iξΔt/2} + e^{-iξΔt/2}|² = 4cos²(ξΔt/2): period 2π/Δt.
        let spec: PulseSpec = "double_pulse:separation=4,relative_phase=0".parse().unwrap();
        let g = grid();
        let f = make_pulse(&spec, &g).unwrap();
        let raw = SpectralAmplitude::from_fn(g, |x| spec.evaluate(x)).unwrap();
        let scale = f.values()[0].norm() / raw.values()[0].norm();
        for (k, x) in g.xi_coords().into_iter().enumerate() {
            let expected = 4.0 * (x * 2.0).cos().powi(2) * (-x * x).exp();
            let got = (f.values()[k].norm() / scale).powi(2);
            assert!((got - expected).abs() < 1e-12);
            let shifted = (spec.evaluate(x + PI / 2.0).norm() / (-(x + PI / 2.0).powi(2) / 2.0).exp()).powi(2);
            assert!((shifted - 4.0 * (x * 2.0).cos().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn parity_under_reflection() {
        let g = grid();
        let f = make_pulse(&PulseSpec::default_for("gaussian").unwrap(), &g).unwrap();
        let r = f.reflected();
        for (a, b) in f.values().iter().zip(r.values()) {
            assert!((a - b).norm() < 1e-12);
        }
        let h = make_pulse(&PulseSpec::default_for("hermite_gauss").unwrap(), &g).unwrap();
        let r = h.reflected();
        for (a, b) in h.values().iter().zip(r.values()) {
            assert!((a + b).norm() < 1e-12);
        }
    }

    #[test]
    fn parse_and_display() {
        let spec: PulseSpec = "phase_step:step_height=3.14,step_position=0.25,center=-0.5"
            .parse()
            .unwrap();
        assert_eq!(spec.kind(), "phase_step");
        assert_eq!(spec.center, -0.5);
        let again: PulseSpec = spec.to_string().parse().unwrap();
        assert_eq!(again, spec);
        assert!("sinc".parse::<PulseSpec>().is_err());
        assert!("gaussian:order=2".parse::<PulseSpec>().is_err());
        assert!("hermite_gauss:order=1.5".parse::<PulseSpec>().is_err());
        assert!("gaussian:width=-1".parse::<PulseSpec>().is_err());
    }

    #[test]
    fn support_warning() {
        let spec: PulseSpec = "gaussian:center=2".parse().unwrap();
        assert!(support_diagnostic(&spec, &grid()).is_some());
        assert!(support_diagnostic(&PulseSpec::default_for("gaussian").unwrap(), &grid()).is_none());
    }
}
