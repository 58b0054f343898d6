//! Text file formats for scans and their noiseless theory.
//!
//! Both files are TOML documents written by hand in a fixed layout: scalars
//! first, then `[grid]`, `[scan]` and the matrix tables with one scan row per
//! line. Floats are printed in their shortest round-trip form, so reading a
//! file and writing it back reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::forward::{CountMap, QFunction};
use crate::grid::{FrequencyGrid, PhaseSpaceGrid};
use crate::pulse::PulseSpec;
use crate::state::SpectralAmplitude;

pub const FORMAT_VERSION: &str = "1";
/// Provenance marker for data that did not come from [`crate::pulse`].
pub const EXTERNAL: &str = "external";

/// Frequency grid in laboratory units, as stored in files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMeta {
    pub center_frequency_hz: f64,
    /// `σ_c/2π`.
    pub sigma_c_hz: f64,
    pub n_points: usize,
    /// Grid span in units of `σ_c`.
    pub span: f64,
}

impl GridMeta {
    pub fn to_grid(&self) -> Result<FrequencyGrid> {
        let tau = std::f64::consts::TAU;
        FrequencyGrid::new(
            tau * self.center_frequency_hz,
            self.span,
            self.n_points,
            tau * self.sigma_c_hz,
        )
    }
}

/// Counts of one scan plus the metadata needed to reconstruct from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanDataset {
    pub grid: GridMeta,
    pub data: CountMap,
    /// `None` for data recorded elsewhere.
    pub pulse: Option<PulseSpec>,
}

/// Noiseless Q-function and true amplitude belonging to a simulated scan.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryData {
    pub grid: GridMeta,
    pub pulse: Option<PulseSpec>,
    pub q: QFunction,
    pub truth: SpectralAmplitude,
}

/// Path of the theory file written next to a dataset: `scan.toml` → `scan.theory.toml`.
pub fn theory_path(dataset: &Path) -> PathBuf {
    let stem = dataset
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    dataset.with_file_name(format!("{stem}.theory.toml"))
}

impl ScanDataset {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        header(&mut s, &self.pulse);
        writeln!(s, "scale = {:?}", self.data.scale).unwrap();
        writeln!(s, "seed = {}", self.data.seed).unwrap();
        grid_section(&mut s, &self.grid, &self.data.ps_grid);
        s.push_str("\n[data]\n");
        matrix(&mut s, "counts", &self.data.counts, |v| v.to_string());
        matrix(&mut s, "background", &self.data.background, |v| format!("{v:?}"));
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let doc = Doc::new(text, path)?;
        doc.check_version()?;
        let pulse = doc.pulse()?;
        let grid = doc.grid_meta()?;
        let ps_grid = doc.scan()?;
        let shape = (ps_grid.n_t(), ps_grid.n_xi());
        let counts = doc.matrix("data.counts", shape, |v| match v {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            _ => None,
        })?;
        let background = doc.matrix("data.background", shape, as_f64)?;
        let scale = doc.float("scale")?;
        let seed = doc.integer("seed")?;
        let data = CountMap::new(ps_grid, counts, background, scale, seed)
            .map_err(|e| doc.error("data", e.to_string()))?;
        grid.to_grid().map_err(|e| doc.error("grid", e.to_string()))?;
        Ok(Self { grid, data, pulse })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_file(path)?, path)
    }
}

impl TheoryData {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        header(&mut s, &self.pulse);
        grid_section(&mut s, &self.grid, self.q.ps_grid());
        s.push_str("\n[theory]\n");
        matrix(&mut s, "q", self.q.values(), |v| format!("{v:?}"));
        let re: Vec<f64> = self.truth.values().iter().map(|z| z.re).collect();
        let im: Vec<f64> = self.truth.values().iter().map(|z| z.im).collect();
        writeln!(s, "truth_re = {}", row(&re, |v| format!("{v:?}"))).unwrap();
        writeln!(s, "truth_im = {}", row(&im, |v| format!("{v:?}"))).unwrap();
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let doc = Doc::new(text, path)?;
        doc.check_version()?;
        let pulse = doc.pulse()?;
        let grid_meta = doc.grid_meta()?;
        let grid = grid_meta.to_grid().map_err(|e| doc.error("grid", e.to_string()))?;
        let ps_grid = doc.scan()?;
        let values = doc.matrix("theory.q", (ps_grid.n_t(), ps_grid.n_xi()), as_f64)?;
        let q = QFunction::new(ps_grid, values).map_err(|e| doc.error("theory.q", e.to_string()))?;
        let re = doc.floats("theory.truth_re")?;
        let im = doc.floats("theory.truth_im")?;
        if re.len() != grid.n_points() || im.len() != grid.n_points() {
            return Err(doc.error(
                "theory.truth_re",
                format!("expected {} samples per component", grid.n_points()),
            ));
        }
        let values = re.iter().zip(&im).map(|(r, i)| Complex64::new(*r, *i)).collect();
        let truth = SpectralAmplitude::new(grid, values).map_err(|e| doc.error("theory.truth_re", e.to_string()))?;
        Ok(Self {
            grid: grid_meta,
            pulse,
            q,
            truth,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_file(path)?, path)
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn header(s: &mut String, pulse: &Option<PulseSpec>) {
    let pulse = pulse.as_ref().map(|p| p.to_string()).unwrap_or_else(|| EXTERNAL.into());
    writeln!(s, "format_version = \"{FORMAT_VERSION}\"").unwrap();
    writeln!(s, "pulse = \"{pulse}\"").unwrap();
}

fn grid_section(s: &mut String, g: &GridMeta, ps: &PhaseSpaceGrid) {
    s.push_str("\n[grid]\n");
    writeln!(s, "center_frequency_hz = {:?}", g.center_frequency_hz).unwrap();
    writeln!(s, "sigma_c_hz = {:?}", g.sigma_c_hz).unwrap();
    writeln!(s, "n_points = {}", g.n_points).unwrap();
    writeln!(s, "span = {:?}", g.span).unwrap();
    s.push_str("\n[scan]\n");
    writeln!(s, "xi = {}", row(ps.xi_shifts(), |v| format!("{v:?}"))).unwrap();
    writeln!(s, "t = {}", row(ps.t_shifts(), |v| format!("{v:?}"))).unwrap();
}

fn row<T: Copy>(values: &[T], fmt: impl Fn(T) -> String) -> String {
    let items: Vec<String> = values.iter().map(|v| fmt(*v)).collect();
    format!("[{}]", items.join(", "))
}

fn matrix<T: nalgebra::Scalar + Copy>(s: &mut String, key: &str, m: &DMatrix<T>, fmt: impl Fn(T) -> String) {
    writeln!(s, "{key} = [").unwrap();
    for i in 0..m.nrows() {
        let r: Vec<T> = m.row(i).iter().copied().collect();
        writeln!(s, "  {},", row(&r, &fmt)).unwrap();
    }
    s.push_str("]\n");
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

/// Parsed document with field-level error reporting.
struct Doc<'a> {
    table: Table,
    path: &'a Path,
}

impl<'a> Doc<'a> {
    fn new(text: &str, path: &'a Path) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Data {
            path: path.into(),
            field: "document".into(),
            message: e.message().to_string(),
        })?;
        Ok(Self { table, path })
    }

    fn error(&self, field: &str, message: impl Into<String>) -> Error {
        Error::Data {
            path: self.path.into(),
            field: field.into(),
            message: message.into(),
        }
    }

    fn get(&self, field: &str) -> Result<&Value> {
        let mut parts = field.split('.');
        let first = parts.next().expect("non-empty field");
        let mut v = self.table.get(first);
        for p in parts {
            v = v.and_then(|v| v.as_table()).and_then(|t| t.get(p));
        }
        v.ok_or_else(|| self.error(field, "missing"))
    }

    fn string(&self, field: &str) -> Result<&str> {
        self.get(field)?
            .as_str()
            .ok_or_else(|| self.error(field, "expected a string"))
    }

    fn float(&self, field: &str) -> Result<f64> {
        as_f64(self.get(field)?).ok_or_else(|| self.error(field, "expected a number"))
    }

    fn integer(&self, field: &str) -> Result<u64> {
        match self.get(field)? {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            _ => Err(self.error(field, "expected a non-negative integer")),
        }
    }

    fn floats(&self, field: &str) -> Result<Vec<f64>> {
        let arr = self
            .get(field)?
            .as_array()
            .ok_or_else(|| self.error(field, "expected an array"))?;
        arr.iter()
            .enumerate()
            .map(|(i, v)| as_f64(v).ok_or_else(|| self.error(&format!("{field}[{i}]"), "expected a number")))
            .collect()
    }

    fn matrix<T: nalgebra::Scalar>(
        &self,
        field: &str,
        shape: (usize, usize),
        conv: impl Fn(&Value) -> Option<T>,
    ) -> Result<DMatrix<T>> {
        let rows = self
            .get(field)?
            .as_array()
            .ok_or_else(|| self.error(field, "expected an array of rows"))?;
        if rows.len() != shape.0 {
            return Err(self.error(field, format!("expected {} rows (one per t shift), found {}", shape.0, rows.len())));
        }
        let mut out = Vec::with_capacity(shape.0 * shape.1);
        for (i, r) in rows.iter().enumerate() {
            let r = r
                .as_array()
                .filter(|r| r.len() == shape.1)
                .ok_or_else(|| self.error(&format!("{field}[{i}]"), format!("expected a row of {} values", shape.1)))?;
            for (j, v) in r.iter().enumerate() {
                out.push(conv(v).ok_or_else(|| self.error(&format!("{field}[{i}][{j}]"), "invalid value"))?);
            }
        }
        Ok(DMatrix::from_row_iterator(shape.0, shape.1, out))
    }

    fn check_version(&self) -> Result<()> {
        let v = self.string("format_version")?;
        if v != FORMAT_VERSION {
            return Err(self.error(
                "format_version",
                format!("unsupported version \"{v}\", expected \"{FORMAT_VERSION}\""),
            ));
        }
        Ok(())
    }

    fn pulse(&self) -> Result<Option<PulseSpec>> {
        match self.string("pulse")? {
            EXTERNAL => Ok(None),
            s => s.parse().map(Some).map_err(|e: Error| self.error("pulse", e.to_string())),
        }
    }

    fn grid_meta(&self) -> Result<GridMeta> {
        let n = self.integer("grid.n_points")?;
        Ok(GridMeta {
            center_frequency_hz: self.float("grid.center_frequency_hz")?,
            sigma_c_hz: self.float("grid.sigma_c_hz")?,
            n_points: usize::try_from(n).map_err(|_| self.error("grid.n_points", "too large"))?,
            span: self.float("grid.span")?,
        })
    }

    fn scan(&self) -> Result<PhaseSpaceGrid> {
        let xi = self.floats("scan.xi")?;
        let t = self.floats("scan.t")?;
        PhaseSpaceGrid::new(xi, t).map_err(|e| self.error("scan", e.to_string()))
    }
}
