//! Run configuration: a TOML file whose every entry has a default.
//!
//! ```toml
//! seed = 7
//! pulse = "double_pulse:separation=3.0"
//!
//! [grid]
//! sigma_c_hz = 0.12e12
//!
//! [noise]
//! scale = 5000.0
//! background = 50.0
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dataset::{read_file, GridMeta};
use crate::error::{Error, Result};
use crate::forward::QpgModel;
use crate::grid::{FrequencyGrid, PhaseSpaceGrid};
use crate::mle::MleOptions;
use crate::pulse::PulseSpec;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    /// Inline pulse description, see [`PulseSpec`].
    pub pulse: String,
    pub grid: GridConfig,
    pub scan: ScanConfig,
    pub noise: NoiseConfig,
    pub mle: MleConfig,
    pub qpg: QpgConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub center_frequency_hz: f64,
    /// `σ_c/2π`.
    pub sigma_c_hz: f64,
    /// In units of `σ_c`.
    pub span: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub xi_min: f64,
    pub xi_max: f64,
    pub n_xi: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub n_t: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Expected counts at the Q-function maximum.
    pub scale: f64,
    /// Expected background counts per scan point.
    pub background: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MleConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub dilution: f64,
    pub adaptive: bool,
    pub conjugate: bool,
    pub subspace_cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QpgConfig {
    /// RMS phase-matching width `/2π`; absent for an ideal gate.
    pub phase_matching_width_hz: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            pulse: "gaussian".into(),
            grid: GridConfig::default(),
            scan: ScanConfig::default(),
            noise: NoiseConfig::default(),
            mle: MleConfig::default(),
            qpg: QpgConfig::default(),
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            center_frequency_hz: 194e12,
            sigma_c_hz: 0.2e12,
            span: 8.0,
            n_points: 128,
        }
    }
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            xi_min: -4.0,
            xi_max: 4.0,
            n_xi: 41,
            t_min: -4.0,
            t_max: 4.0,
            n_t: 41,
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            scale: 2000.0,
            background: 20.0,
        }
    }
}

impl Default for MleConfig {
    fn default() -> Self {
        let o = MleOptions::default();
        Self {
            max_iters: o.max_iters,
            tol: o.tol,
            dilution: o.dilution,
            adaptive: o.adaptive,
            conjugate: o.conjugate,
            subspace_cutoff: o.subspace_cutoff,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        Self::parse(&text, path)
    }

    /// Parse and validate; errors carry the 1-based line of the offending entry when known.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
            path: path.into(),
            line: e.span().map(|s| line_at(text, s.start)),
            message: e.message().to_string(),
        })?;
        if let Err((section, key, message)) = cfg.check() {
            return Err(Error::Config {
                path: path.into(),
                line: line_of_key(text, section, key),
                message: format!("{}{key}: {message}", if section.is_empty() { String::new() } else { format!("{section}.") }),
            });
        }
        Ok(cfg)
    }

    /// Validate every derived object; the error names the `[section]` and key.
    fn check(&self) -> std::result::Result<(), (&'static str, &'static str, String)> {
        let s = |section, key| move |e: Error| (section, key, e.to_string());
        self.pulse_spec().map_err(s("", "pulse"))?;
        self.frequency_grid().map_err(s("grid", "span"))?;
        self.ps_grid().map_err(s("scan", "n_xi"))?;
        if !(self.noise.scale > 0.0 && self.noise.scale.is_finite()) {
            return Err(("noise", "scale", "must be positive".into()));
        }
        if !(self.noise.background >= 0.0 && self.noise.background.is_finite()) {
            return Err(("noise", "background", "must be non-negative".into()));
        }
        let o = self.mle_options();
        if o.validate().is_err() {
            let key = if !(o.dilution > 0.0 && o.dilution <= 1.0) {
                "dilution"
            } else if !(o.tol >= 0.0) {
                "tol"
            } else {
                "subspace_cutoff"
            };
            return Err(("mle", key, o.validate().unwrap_err().to_string()));
        }
        self.qpg().map_err(s("qpg", "phase_matching_width_hz"))?;
        Ok(())
    }

    pub fn grid_meta(&self) -> GridMeta {
        GridMeta {
            center_frequency_hz: self.grid.center_frequency_hz,
            sigma_c_hz: self.grid.sigma_c_hz,
            n_points: self.grid.n_points,
            span: self.grid.span,
        }
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid> {
        self.grid_meta().to_grid()
    }

    pub fn ps_grid(&self) -> Result<PhaseSpaceGrid> {
        let s = &self.scan;
        PhaseSpaceGrid::uniform((s.xi_min, s.xi_max), s.n_xi, (s.t_min, s.t_max), s.n_t)
    }

    pub fn pulse_spec(&self) -> Result<PulseSpec> {
        self.pulse.parse()
    }

    pub fn qpg(&self) -> Result<QpgModel> {
        match self.qpg.phase_matching_width_hz {
            None => Ok(QpgModel::ideal()),
            Some(w) => QpgModel::with_phase_matching(std::f64::consts::TAU * w),
        }
    }

    pub fn mle_options(&self) -> MleOptions {
        let m = &self.mle;
        MleOptions {
            max_iters: m.max_iters,
            tol: m.tol,
            dilution: m.dilution,
            adaptive: m.adaptive,
            conjugate: m.conjugate,
            subspace_cutoff: m.subspace_cutoff,
        }
    }
}

/// Optional config file; the defaults when absent.
pub fn load_or_default(path: Option<&PathBuf>) -> Result<RunConfig> {
    path.map(|p| RunConfig::load(p)).unwrap_or_else(|| Ok(RunConfig::default()))
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]` (top level for an empty section).
fn line_of_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        let Some((k, _)) = l.split_once('=') else { continue };
        let k = k.trim();
        if (current == section && k == key) || (section.is_empty() && current.is_empty() && k == key) {
            return Some(i + 1);
        }
        if current.is_empty() && k == format!("{section}.{key}") {
            return Some(i + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("run.toml"))
    }

    fn line(err: Error) -> Option<usize> {
        match err {
            Error::Config { line, .. } => line,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.frequency_grid().unwrap().n_points(), 128);
        assert_eq!(c.ps_grid().unwrap().len(), 1681);
        assert_eq!(c.mle_options(), MleOptions::default());
        assert!(c.qpg().unwrap().ideal);
    }

    #[test]
    fn partial_override() {
        let c = parse("seed = 9\npulse = \"hermite_gauss:order=2\"\n[grid]\nsigma_c_hz = 0.12e12\n[qpg]\nphase_matching_width_hz = 0.06e12\n")
            .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.grid.sigma_c_hz, 0.12e12);
        assert_eq!(c.grid.n_points, 128);
        assert_eq!(c.pulse_spec().unwrap().kind(), "hermite_gauss");
        assert!(!c.qpg().unwrap().ideal);
    }

    #[test]
    fn bandwidth_range_accepted() {
        for s in [0.12e12, 0.26e12] {
            assert!(parse(&format!("[grid]\nsigma_c_hz = {s:?}\n")).is_ok());
        }
    }

    #[test]
    fn syntax_and_type_errors_report_lines() {
        assert_eq!(line(parse("seed = 1\n[grid]\nspan = \"wide\"\n").unwrap_err()), Some(3));
        assert_eq!(line(parse("seed = 1\n\n[noise]\nscael = 3.0\n").unwrap_err()), Some(4));
        assert_eq!(line(parse("seed = 1\nthreads = [\n").unwrap_err()), Some(2));
    }

    #[test]
    fn validation_errors_report_lines() {
        let e = parse("seed = 1\n[grid]\nspan = 4.0\n").unwrap_err();
        assert!(e.to_string().contains("grid.span"), "{e}");
        assert_eq!(line(e), Some(3));
        assert_eq!(line(parse("[noise]\n\nscale = -2.0\n").unwrap_err()), Some(3));
        assert_eq!(line(parse("[mle]\ndilution = 2.0\n").unwrap_err()), Some(2));
        assert_eq!(line(parse("pulse = \"sawtooth\"\n").unwrap_err()), Some(1));
        assert_eq!(line(parse("[qpg]\nphase_matching_width_hz = 0.0\n").unwrap_err()), Some(2));
    }
}
