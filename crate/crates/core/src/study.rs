//! Convergence studies: refine, assemble, solve, measure errors and rates.

use std::fmt;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use crate::assembly::{Assembler, Beta, NitscheConfig};
use crate::error::{Error, Result};
use crate::mesh::{build_mesh, Mesh};
use crate::norms::{error_report, ErrorReport, ExactSolution};
use crate::solver::{relative_residual, solve_krylov, DirectSolver, KrylovOptions};
use crate::space::DofMap;
use crate::sparse::CsrMatrix;

pub const CSV_HEADER: &str = "level,h,dofs,l2_rel,l2_rate,h1_rel,h1_rate,bnd_abs,bnd_rate,residual,elapsed";

#[derive(Debug, Clone)]
pub enum SolutionKind {
    /// `sin(πx) cos(πy)` on the unit square.
    Sine2d,
    /// Three-component solution on the unit cube, solved componentwise.
    Sine3dVector,
    /// A global polynomial of the space's degree, reproduced exactly.
    Polynomial,
    Custom(ExactSolution),
}

impl SolutionKind {
    pub fn name(&self) -> &str {
        match self {
            SolutionKind::Sine2d => "sine2d",
            SolutionKind::Sine3dVector => "sine3d_vector",
            SolutionKind::Polynomial => "polynomial",
            SolutionKind::Custom(u) => u.name(),
        }
    }

    /// Scalar components for a problem of dimension `dim` and degree `k`.
    pub fn components(&self, dim: usize, k: usize) -> Result<Vec<ExactSolution>> {
        let wrong = |need: usize| {
            Err(Error::InvalidArgument(format!(
                "solution {} needs dim = {need}, got {dim}",
                self.name()
            )))
        };
        match self {
            SolutionKind::Sine2d if dim != 2 => wrong(2),
            SolutionKind::Sine2d => Ok(vec![ExactSolution::sine2d()]),
            SolutionKind::Sine3dVector if dim != 3 => wrong(3),
            SolutionKind::Sine3dVector => Ok(ExactSolution::sine3d_components().to_vec()),
            SolutionKind::Polynomial => Ok(vec![ExactSolution::polynomial(dim, k)]),
            SolutionKind::Custom(u) if u.dim() != dim => wrong(u.dim()),
            SolutionKind::Custom(u) => Ok(vec![u.clone()]),
        }
    }
}

impl FromStr for SolutionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine2d" => Ok(SolutionKind::Sine2d),
            "sine3d_vector" | "sine3d" => Ok(SolutionKind::Sine3dVector),
            "polynomial" | "polynomial_k" => Ok(SolutionKind::Polynomial),
            "custom" => Err(Error::InvalidArgument(
                "custom solutions are only available through the library API".into(),
            )),
            other => Err(Error::Parse(format!("unknown solution {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Direct,
    Krylov,
}

impl FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(SolverChoice::Direct),
            "krylov" | "gmres" => Ok(SolverChoice::Krylov),
            other => Err(Error::Parse(format!("unknown solver {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            other => Err(Error::Parse(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub dim: usize,
    pub degree: usize,
    pub beta: Beta,
    pub alpha: f64,
    pub c0: f64,
    pub levels: RangeInclusive<u32>,
    pub grading: f64,
    pub solution: SolutionKind,
    pub solver: SolverChoice,
    /// Relative residual target of the Krylov solver.
    pub tol: f64,
    /// Extra quadrature degree for assembly and error integrals.
    pub quad_bump: usize,
    /// When false, the elapsed column is written as zero so that repeated
    /// runs produce identical output.
    pub record_timing: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            degree: 1,
            beta: Beta::NonSymmetric,
            alpha: 1.0,
            c0: 1.0,
            levels: 1..=5,
            grading: 1.0,
            solution: SolutionKind::Sine2d,
            solver: SolverChoice::Direct,
            tol: 1e-12,
            quad_bump: 0,
            record_timing: true,
        }
    }
}

impl StudyConfig {
    pub fn nitsche(&self) -> Result<NitscheConfig> {
        NitscheConfig::new(self.beta, self.alpha, self.c0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::InvalidArgument(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if !(1..=3).contains(&self.degree) {
            return Err(Error::InvalidArgument(format!("degree must be 1, 2 or 3, got {}", self.degree)));
        }
        if self.levels.end() <= self.levels.start() {
            return Err(Error::InvalidArgument(format!(
                "level range {}:{} must be increasing",
                self.levels.start(),
                self.levels.end()
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        if !(self.grading.is_finite() && self.grading >= 1.0) {
            return Err(Error::InvalidArgument(format!("grading must be >= 1, got {}", self.grading)));
        }
        self.nitsche()?;
        self.solution.components(self.dim, self.degree)?;
        Ok(())
    }
}

/// Parses `A:B` into an inclusive level range.
pub fn parse_levels(s: &str) -> Result<RangeInclusive<u32>> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("levels must look like A:B, got {s:?}")))?;
    let p = |t: &str| t.trim().parse::<u32>().map_err(|e| Error::Parse(format!("level {t:?}: {e}")));
    Ok(p(a)?..=p(b)?)
}

/// Parses a `key = value` file. Blank lines and lines starting with `#` are
/// skipped; keys may be written with or without a leading `--`.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(Error::Parse(format!("line {}: empty key", n + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub level: u32,
    pub h: f64,
    pub dofs: usize,
    pub l2_rel: f64,
    pub l2_rate: Option<f64>,
    pub h1_rel: f64,
    pub h1_rate: Option<f64>,
    pub bnd_abs: f64,
    pub bnd_rate: Option<f64>,
    pub residual: f64,
    pub elapsed: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
}

/// `rates[i] = log2(errors[i-1] / errors[i])`; absent for the first entry
/// and wherever an error is not a positive finite number.
pub fn compute_rates(errors: &[f64]) -> Vec<Option<f64>> {
    let ok = |e: f64| e > 0.0 && e.is_finite();
    (0..errors.len())
        .map(|i| {
            if i == 0 || !ok(errors[i - 1]) || !ok(errors[i]) {
                None
            } else {
                Some((errors[i - 1] / errors[i]).log2())
            }
        })
        .collect()
}

pub(crate) fn fmt_float(v: f64) -> String {
    format!("{v:e}")
}

pub(crate) fn fmt_rate(r: Option<f64>) -> String {
    r.map(fmt_float).unwrap_or_default()
}

impl StudyTable {
    /// Fills the rate columns from the error columns.
    pub fn update_rates(&mut self) {
        let col = |f: fn(&StudyRow) -> f64| compute_rates(&self.rows.iter().map(f).collect::<Vec<_>>());
        let (l2, h1, bnd) = (col(|r| r.l2_rel), col(|r| r.h1_rel), col(|r| r.bnd_abs));
        for (i, r) in self.rows.iter_mut().enumerate() {
            r.l2_rate = l2[i];
            r.h1_rate = h1[i];
            r.bnd_rate = bnd[i];
        }
    }

    pub fn last(&self) -> Option<&StudyRow> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.level,
                fmt_float(r.h),
                r.dofs,
                fmt_float(r.l2_rel),
                fmt_rate(r.l2_rate),
                fmt_float(r.h1_rel),
                fmt_rate(r.h1_rate),
                fmt_float(r.bnd_abs),
                fmt_rate(r.bnd_rate),
                fmt_float(r.residual),
                fmt_float(r.elapsed)
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn write_markdown<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "| Level | h | DoFs | L2 Error | Rate | H1 Error | Rate | Bnd Error | Rate | Residual |")?;
        writeln!(out, "|---|---|---|---|---|---|---|---|---|---|")?;
        let rate = |r: Option<f64>| r.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        for r in &self.rows {
            writeln!(
                out,
                "| {} | 2^-{} | {} | {:.2e} | {} | {:.2e} | {} | {:.2e} | {} | {:.1e} |",
                r.level,
                r.level,
                r.dofs,
                r.l2_rel,
                rate(r.l2_rate),
                r.h1_rel,
                rate(r.h1_rate),
                r.bnd_abs,
                rate(r.bnd_rate),
                r.residual
            )?;
        }
        Ok(())
    }

    /// Writes the table to `path` in the chosen format.
    pub fn emit(&self, format: OutputFormat, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        match format {
            OutputFormat::Csv => self.write_csv(&mut file)?,
            OutputFormat::Markdown => self.write_markdown(&mut file)?,
        }
        file.flush()?;
        Ok(())
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == CSV_HEADER => {}
            other => return Err(Error::Parse(format!("unexpected header {other:?}"))),
        }
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let t: Vec<&str> = line.split(',').collect();
            if t.len() != 11 {
                return Err(Error::Parse(format!("expected 11 fields, got {}: {line:?}", t.len())));
            }
            let f = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
            let rate = |s: &str| if s.is_empty() { Ok(None) } else { f(s).map(Some) };
            rows.push(StudyRow {
                level: t[0].parse().map_err(|e| Error::Parse(format!("level {:?}: {e}", t[0])))?,
                h: f(t[1])?,
                dofs: t[2].parse().map_err(|e| Error::Parse(format!("dofs {:?}: {e}", t[2])))?,
                l2_rel: f(t[3])?,
                l2_rate: rate(t[4])?,
                h1_rel: f(t[5])?,
                h1_rate: rate(t[6])?,
                bnd_abs: f(t[7])?,
                bnd_rate: rate(t[8])?,
                residual: f(t[9])?,
                elapsed: f(t[10])?,
            });
        }
        Ok(Self { rows })
    }
}

impl fmt::Display for StudyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        self.write_markdown(&mut buf).map_err(|_| fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}

/// A study table together with the data of its finest level.
#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub table: StudyTable,
    pub mesh: Mesh,
    pub space: DofMap,
    pub matrix: CsrMatrix,
    /// One coefficient vector per solution component.
    pub solution: Vec<Vec<f64>>,
    pub reports: Vec<ErrorReport>,
}

struct LevelResult {
    row: StudyRow,
    report: ErrorReport,
    mesh: Mesh,
    space: DofMap,
    matrix: CsrMatrix,
    solution: Vec<Vec<f64>>,
}

fn run_level(cfg: &StudyConfig, components: &[ExactSolution], level: u32) -> Result<LevelResult> {
    let start = Instant::now();
    let nitsche = cfg.nitsche()?;
    let mesh = build_mesh(cfg.dim, level, cfg.grading)?;
    let space = DofMap::new(&mesh, cfg.degree)?;
    let asm = Assembler::with_quadrature_degree(&mesh, &space, nitsche, 2 * cfg.degree + cfg.quad_bump)?;
    let matrix = asm.matrix();
    let rhs: Vec<Vec<f64>> = components
        .iter()
        .map(|u| asm.rhs(&|p| u.source(p), &|p| u.value(p)))
        .collect();

    let mut solution = Vec::with_capacity(rhs.len());
    match cfg.solver {
        SolverChoice::Direct => {
            let lu = DirectSolver::factor(&matrix)?;
            for b in &rhs {
                solution.push(lu.solve_refined(&matrix, b)?.0);
            }
        }
        SolverChoice::Krylov => {
            let opts = KrylovOptions {
                tol: cfg.tol,
                ..KrylovOptions::default()
            };
            for b in &rhs {
                let sys = crate::assembly::LinearSystem {
                    matrix: matrix.clone(),
                    rhs: b.clone(),
                };
                solution.push(solve_krylov(&sys, opts)?.0);
            }
        }
    }

    let reports: Vec<ErrorReport> = components
        .iter()
        .zip(&solution)
        .zip(&rhs)
        .map(|((u, x), b)| error_report(&mesh, &space, x, u, cfg.quad_bump, relative_residual(&matrix, x, b)))
        .collect();
    let report = if reports.len() == 1 { reports[0] } else { ErrorReport::combine(&reports) };
    let elapsed = if cfg.record_timing { start.elapsed().as_secs_f64() } else { 0.0 };
    Ok(LevelResult {
        row: StudyRow {
            level,
            h: mesh.grid_spacing(),
            dofs: space.num_dofs(),
            l2_rel: report.l2_rel,
            l2_rate: None,
            h1_rel: report.h1_rel,
            h1_rate: None,
            bnd_abs: report.bnd_abs,
            bnd_rate: None,
            residual: report.residual,
            elapsed,
        },
        report,
        mesh,
        space,
        matrix,
        solution,
    })
}

/// Runs the study and keeps the finest level's mesh, matrix and solution.
pub fn run_study_full(cfg: &StudyConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    let components = cfg.solution.components(cfg.dim, cfg.degree)?;
    let mut table = StudyTable::default();
    let mut reports = Vec::new();
    let mut last = None;
    for level in cfg.levels.clone() {
        let res = run_level(cfg, &components, level).map_err(|e| Error::AtLevel {
            level,
            source: Box::new(e),
        })?;
        table.rows.push(res.row);
        reports.push(res.report);
        last = Some(res);
    }
    table.update_rates();
    let last = last.expect("validated level range is non-empty");
    Ok(StudyOutcome {
        table,
        mesh: last.mesh,
        space: last.space,
        matrix: last.matrix,
        solution: last.solution,
        reports,
    })
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudyTable> {
    run_study_full(cfg).map(|o| o.table)
}
