//! The `simulate`, `reconstruct` and `metrics` commands.
//!
//! Each command is a plain function over already-parsed options so it can be
//! driven from tests as well as from the `chronoq` binary.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::dataset::{read_file, theory_path, write_file, ScanDataset, TheoryData};
use crate::error::{Error, Result};
use crate::forward::{q_function, simulate_counts, subtract_background};
use crate::grid::FrequencyGrid;
use crate::linalg::CMatrix;
use crate::metrics::{align_phase, fidelity, max_phase_deviation, similarity};
use crate::mle::{build_povm, extract_dominant_mode, reconstruct};
use crate::pulse::make_pulse;
use crate::state::{pure_correlation, SpectralCorrelation};

/// Output files of `reconstruct`, relative to its output directory.
pub const SPECTRUM_FILE: &str = "spectrum.tsv";
pub const EIGENVALUES_FILE: &str = "eigenvalues.tsv";
pub const W_ABS_FILE: &str = "w_abs.tsv";
pub const W_ARG_FILE: &str = "w_arg.tsv";
pub const W_RE_FILE: &str = "w_re.tsv";
pub const W_IM_FILE: &str = "w_im.tsv";
pub const LIKELIHOOD_FILE: &str = "likelihood.tsv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.toml";

/// Run `f` on a pool of `threads` workers (0: one per core).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// A `--pulse` argument is either an inline spec or a file holding one.
pub fn resolve_pulse(arg: &str) -> Result<String> {
    let p = Path::new(arg);
    if p.is_file() {
        Ok(read_file(p)?.trim().to_string())
    } else {
        Ok(arg.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub dataset: PathBuf,
    pub theory: PathBuf,
    pub total_counts: u64,
    pub max_count: u64,
}

impl fmt::Display for SimulateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dataset: {}", self.dataset.display())?;
        writeln!(f, "theory: {}", self.theory.display())?;
        writeln!(f, "total counts: {}", self.total_counts)?;
        write!(f, "max count: {}", self.max_count)
    }
}

/// Simulate a scan of `cfg.pulse`; writes the dataset to `out` and the
/// noiseless theory next to it (see [`theory_path`]).
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<SimulateSummary> {
    let grid = cfg.frequency_grid()?;
    let ps = cfg.ps_grid()?;
    let spec = cfg.pulse_spec()?;
    let truth = make_pulse(&spec, &grid)?;
    let q = q_function(&truth, &ps, &cfg.qpg()?)?;
    let data = simulate_counts(&q, cfg.noise.scale, cfg.noise.background, cfg.seed)?;
    let summary = SimulateSummary {
        dataset: out.to_path_buf(),
        theory: theory_path(out),
        total_counts: data.total_counts(),
        max_count: data.counts.max(),
    };
    ScanDataset {
        grid: cfg.grid_meta(),
        data,
        pulse: Some(spec.clone()),
    }
    .write(out)?;
    TheoryData {
        grid: cfg.grid_meta(),
        pulse: Some(spec),
        q,
        truth,
    }
    .write(&summary.theory)?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct ReconstructSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_log_likelihood: f64,
    pub leading_weight: f64,
    pub subspace_dim: usize,
}

impl fmt::Display for ReconstructSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "iterations: {}", self.iterations)?;
        writeln!(f, "converged: {}", self.converged)?;
        writeln!(f, "log-likelihood: {:?}", self.final_log_likelihood)?;
        writeln!(f, "subspace dimension: {}", self.subspace_dim)?;
        write!(f, "leading weight: {:?}", self.leading_weight)
    }
}

/// Reconstruct the correlation matrix of a dataset and write the tables into `out_dir`.
pub fn cmd_reconstruct(cfg: &RunConfig, input: &Path, out_dir: &Path) -> Result<ReconstructSummary> {
    let ds = ScanDataset::read(input)?;
    let grid = ds.grid.to_grid().map_err(|e| Error::Data {
        path: input.into(),
        field: "grid".into(),
        message: e.to_string(),
    })?;
    let povm = build_povm(&grid, &ds.data.ps_grid, &cfg.qpg()?)?;
    let result = reconstruct(&ds.data, &povm, &cfg.mle_options())?;
    let dominant = extract_dominant_mode(&result);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut s = String::from("# offset_hz\txi_in\tabs_f\targ_f\n");
    for (k, z) in dominant.mode.values().iter().enumerate() {
        let offset_hz = grid.offset(k) / std::f64::consts::TAU;
        writeln!(s, "{offset_hz:?}\t{:?}\t{:?}\t{:?}", grid.xi_in(k), z.norm(), z.arg()).unwrap();
    }
    write_file(&out_dir.join(SPECTRUM_FILE), &s)?;

    let mut s = String::from("# n\tlambda\n");
    for (i, l) in result.eigenvalues.iter().enumerate() {
        writeln!(s, "{i}\t{l:?}").unwrap();
    }
    write_file(&out_dir.join(EIGENVALUES_FILE), &s)?;

    let w = result.correlation.matrix();
    write_file(&out_dir.join(W_ABS_FILE), &matrix_tsv(w, |z| z.norm()))?;
    write_file(&out_dir.join(W_ARG_FILE), &matrix_tsv(w, |z| z.arg()))?;
    write_file(&out_dir.join(W_RE_FILE), &matrix_tsv(w, |z| z.re))?;
    write_file(&out_dir.join(W_IM_FILE), &matrix_tsv(w, |z| z.im))?;

    let mut s = String::from("# iteration\tmean_log_likelihood\n");
    for (i, l) in result.log_likelihood_history.iter().enumerate() {
        writeln!(s, "{i}\t{l:?}").unwrap();
    }
    write_file(&out_dir.join(LIKELIHOOD_FILE), &s)?;

    let mut s = String::new();
    writeln!(s, "iterations = {}", result.iterations).unwrap();
    writeln!(s, "converged = {}", result.converged).unwrap();
    writeln!(s, "final_log_likelihood = {:?}", result.final_log_likelihood).unwrap();
    writeln!(s, "subspace_dim = {}", result.subspace_dim).unwrap();
    writeln!(s, "dominant_weight = {:?}", dominant.weight).unwrap();
    writeln!(s, "tie_broken = {}", dominant.tie_broken).unwrap();
    let msgs: Vec<String> = result
        .diagnostics
        .iter()
        .map(|m| toml::Value::String(m.clone()).to_string())
        .collect();
    writeln!(s, "messages = [{}]", msgs.join(", ")).unwrap();
    write_file(&out_dir.join(DIAGNOSTICS_FILE), &s)?;

    Ok(ReconstructSummary {
        iterations: result.iterations,
        converged: result.converged,
        final_log_likelihood: result.final_log_likelihood,
        leading_weight: result.eigenvalues[0],
        subspace_dim: result.subspace_dim,
    })
}

fn matrix_tsv(m: &CMatrix, f: impl Fn(&num_complex::Complex64) -> f64) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|z| format!("{:?}", f(z))).collect();
        s.push_str(&row.join("\t"));
        s.push('\n');
    }
    s
}

fn read_matrix_tsv(path: &Path, n: usize) -> Result<nalgebra::DMatrix<f64>> {
    let text = read_file(path)?;
    let bad = |message: String| Error::Data {
        path: path.into(),
        field: "matrix".into(),
        message,
    };
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if rows.len() != n {
        return Err(bad(format!("expected {n} rows, found {}", rows.len())));
    }
    let mut values = Vec::with_capacity(n * n);
    for (i, r) in rows.iter().enumerate() {
        let cells: Vec<&str> = r.split('\t').collect();
        if cells.len() != n {
            return Err(bad(format!("row {i} has {} columns, expected {n}", cells.len())));
        }
        for c in cells {
            values.push(c.trim().parse::<f64>().map_err(|_| bad(format!("row {i}: `{c}` is not a number")))?);
        }
    }
    Ok(nalgebra::DMatrix::from_row_slice(n, n, &values))
}

/// Correlation matrix written by [`cmd_reconstruct`].
pub fn read_reconstruction(dir: &Path, grid: FrequencyGrid) -> Result<SpectralCorrelation> {
    let n = grid.n_points();
    let re = read_matrix_tsv(&dir.join(W_RE_FILE), n)?;
    let im = read_matrix_tsv(&dir.join(W_IM_FILE), n)?;
    let w = re.zip_map(&im, num_complex::Complex64::new);
    SpectralCorrelation::new(grid, w).map_err(|e| Error::Data {
        path: dir.join(W_RE_FILE),
        field: "matrix".into(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone)]
pub struct ProfileRow {
    pub xi_in: f64,
    pub truth_abs: f64,
    pub recon_abs: f64,
    pub truth_arg: f64,
    pub recon_arg: f64,
}

#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub similarity: f64,
    pub fidelity: Option<f64>,
    pub leading_weight: Option<f64>,
    /// Largest phase error on bins above 10% of the peak amplitude.
    pub max_phase_deviation: Option<f64>,
    pub profile: Vec<ProfileRow>,
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "similarity = {:?}", self.similarity)?;
        if let Some(x) = self.fidelity {
            write!(f, "\nfidelity = {x:?}")?;
        }
        if let Some(x) = self.leading_weight {
            write!(f, "\nleading_weight = {x:?}")?;
        }
        if let Some(x) = self.max_phase_deviation {
            write!(f, "\nmax_phase_deviation = {x:?}")?;
        }
        Ok(())
    }
}

impl MetricsReport {
    /// Profile comparison as a tab-separated table (amplitudes scaled to unit peak).
    pub fn profile_tsv(&self) -> String {
        let mut s = String::from("# xi_in\ttruth_abs\trecon_abs\ttruth_arg\trecon_arg\n");
        for r in &self.profile {
            writeln!(
                s,
                "{:?}\t{:?}\t{:?}\t{:?}\t{:?}",
                r.xi_in, r.truth_abs, r.recon_abs, r.truth_arg, r.recon_arg
            )
            .unwrap();
        }
        s
    }
}

/// Compare a dataset with its theory, and optionally a reconstruction with the truth.
pub fn cmd_metrics(input: &Path, truth: &Path, recon: Option<&Path>) -> Result<MetricsReport> {
    let ds = ScanDataset::read(input)?;
    let th = TheoryData::read(truth)?;
    if ds.data.ps_grid != *th.q.ps_grid() {
        return Err(Error::Data {
            path: truth.into(),
            field: "scan".into(),
            message: format!(
                "scan is {}x{} but the dataset is {}x{} or uses other shifts",
                th.q.ps_grid().n_t(),
                th.q.ps_grid().n_xi(),
                ds.data.ps_grid.n_t(),
                ds.data.ps_grid.n_xi()
            ),
        });
    }
    let measured = subtract_background(&ds.data);
    let mut report = MetricsReport {
        similarity: similarity(measured.values(), th.q.values())?,
        fidelity: None,
        leading_weight: None,
        max_phase_deviation: None,
        profile: Vec::new(),
    };
    let Some(dir) = recon else {
        return Ok(report);
    };
    let grid = *th.truth.grid();
    let w = read_reconstruction(dir, grid)?;
    report.fidelity = Some(fidelity(&pure_correlation(&th.truth)?, &w)?);
    let (weights, modes) = w.eigenmodes();
    report.leading_weight = Some(weights[0]);
    let est = align_phase(&modes[0], &th.truth)?;
    report.max_phase_deviation = Some(max_phase_deviation(&est, &th.truth, 0.1)?);
    let tpeak = th.truth.magnitudes().into_iter().fold(0.0, f64::max);
    let epeak = est.magnitudes().into_iter().fold(0.0, f64::max);
    report.profile = (0..grid.n_points())
        .map(|k| ProfileRow {
            xi_in: grid.xi_in(k),
            truth_abs: th.truth.values()[k].norm() / tpeak,
            recon_abs: est.values()[k].norm() / epeak,
            truth_arg: th.truth.values()[k].arg(),
            recon_arg: est.values()[k].arg(),
        })
        .collect();
    Ok(report)
}
