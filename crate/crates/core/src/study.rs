//! Convergence studies: configuration, the level sweep, and the table and
//! sample-dump writers used by the command-line harness.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::analysis::{decorate_rates, energy_error, h1h_error, l2_error, ErrorReport};
use crate::basis::MonomialBasis;
use crate::error::{Error, Result};
use crate::field::BrokenPolynomial;
use crate::mesh::{generate, Mesh, MeshFamily, MAX_POLYGONAL_LEVEL, MAX_TRIANGULAR_LEVEL};
use crate::problem::{Problem, SineProblem};
use crate::quadrature::polygon_rule;
use crate::system::{assemble_with, solve, Discretization, DEFAULT_TOLERANCE};
use crate::weakgrad::BcMode;

pub const MAX_DEGREE: usize = 5;
pub const DEFAULT_SEED: u64 = 20240229;

/// Header of the machine-readable convergence table.
pub const CSV_HEADER: &str = "level,l2_error,l2_rate,energy_error,energy_rate,dim,cg_iters,seconds";

/// Settings of one convergence sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub family: MeshFamily,
    pub k: usize,
    pub bc: BcMode,
    /// Inclusive `(first, last)` mesh levels.
    pub levels: (u32, u32),
    pub j: Option<usize>,
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub dump_matrix: Option<PathBuf>,
    /// Write per-level solution samples into `out_dir`.
    pub dump_solution: bool,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Record wall-clock seconds; disabling it makes the CSV reproducible
    /// byte for byte.
    pub timing: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            family: MeshFamily::ForwardSlashTriangles,
            k: 1,
            bc: BcMode::Strong,
            levels: (2, 5),
            j: None,
            tol: DEFAULT_TOLERANCE,
            max_iter: None,
            out_dir: None,
            dump_matrix: None,
            dump_solution: false,
            seed: DEFAULT_SEED,
            threads: None,
            timing: true,
        }
    }
}

/// Parses `A..B` (inclusive) or a single level `A`.
pub fn parse_levels(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::InvalidArgument(format!("levels must look like A..B, got '{s}'"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b),
        None => (s, s),
    };
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    Ok((a, b))
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

impl StudyConfig {
    /// Parses a flat `key = value` file. Blank lines and `#` comments are
    /// ignored; unknown keys are errors.
    pub fn parse(text: &str) -> Result<StudyConfig> {
        let mut cfg = StudyConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: line_no,
                message: match e {
                    Error::InvalidArgument(m) => m,
                    other => other.to_string(),
                },
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<StudyConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        StudyConfig::parse(&text)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let invalid = |what: &str| Error::InvalidArgument(format!("invalid {what} '{value}'"));
        match key {
            "family" => self.family = value.parse()?,
            "k" => self.k = value.parse().map_err(|_| invalid("k"))?,
            "bc" => self.bc = value.parse()?,
            "levels" => self.levels = parse_levels(value)?,
            "j" => {
                self.j = match value {
                    "" | "auto" | "default" => None,
                    v => Some(v.parse().map_err(|_| invalid("j"))?),
                }
            }
            "tol" => self.tol = value.parse().map_err(|_| invalid("tol"))?,
            "maxit" => self.max_iter = Some(value.parse().map_err(|_| invalid("maxit"))?),
            "out" => self.out_dir = Some(PathBuf::from(value)),
            "dump_matrix" => self.dump_matrix = Some(PathBuf::from(value)),
            "dump_solution" => self.dump_solution = parse_bool(value).ok_or_else(|| invalid("dump_solution"))?,
            "seed" => self.seed = value.parse().map_err(|_| invalid("seed"))?,
            "threads" => self.threads = Some(value.parse().map_err(|_| invalid("threads"))?),
            "timing" => self.timing = parse_bool(value).ok_or_else(|| invalid("timing"))?,
            other => return Err(Error::InvalidArgument(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DEGREE).contains(&self.k) {
            return Err(Error::InvalidArgument(format!("k must be in 1..={MAX_DEGREE}, got {}", self.k)));
        }
        let (lo, hi) = self.levels;
        let max_level = match self.family {
            MeshFamily::ForwardSlashTriangles => MAX_TRIANGULAR_LEVEL,
            MeshFamily::CutCornerPolygons => MAX_POLYGONAL_LEVEL,
            MeshFamily::Custom => {
                return Err(Error::InvalidArgument(
                    "convergence studies need a generated family (tri or poly)".into(),
                ))
            }
        };
        if lo < 1 || lo > hi || hi > max_level {
            return Err(Error::InvalidArgument(format!(
                "levels {lo}..{hi} must be nonempty, ascending and within 1..{max_level}"
            )));
        }
        if let Some(j) = self.j {
            if j + 1 < self.k {
                return Err(Error::InvalidArgument(format!("j must be at least k-1 = {}, got {j}", self.k - 1)));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidArgument(format!("tol must be in (0, 1), got {}", self.tol)));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("threads must be positive".into()));
        }
        Ok(())
    }

    /// `key = value` lines that reproduce this configuration.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "family = {}", self.family);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "bc = {}", self.bc);
        let _ = writeln!(s, "levels = {}..{}", self.levels.0, self.levels.1);
        let _ = writeln!(s, "j = {}", self.j.map_or("auto".to_string(), |j| j.to_string()));
        let _ = writeln!(s, "tol = {:e}", self.tol);
        if let Some(m) = self.max_iter {
            let _ = writeln!(s, "maxit = {m}");
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "timing = {}", self.timing);
        s
    }
}

/// One level of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelRow {
    pub errors: ErrorReport,
    pub cg_iters: usize,
    pub cg_residual: f64,
    /// Wall-clock seconds for mesh, assembly, solve and error evaluation;
    /// `None` when timing is disabled.
    pub seconds: Option<f64>,
}

/// A level whose solve failed; later levels are not attempted.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelFailure {
    pub level: u32,
    pub message: String,
    pub exit_code: i32,
    /// Relative residual per CG iteration, when the failure came from CG.
    pub history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub rows: Vec<LevelRow>,
    pub failure: Option<LevelFailure>,
}

/// Mesh, discretization and solution of one level.
pub struct LevelSolution {
    pub mesh: Mesh,
    pub disc: Discretization,
    pub u_h: BrokenPolynomial,
    pub row: LevelRow,
    pub matrix: crate::system::CsrMatrix,
}

/// Solves the sine test problem on one level and measures its errors.
pub fn solve_level(config: &StudyConfig, level: u32) -> Result<LevelSolution> {
    let start = Instant::now();
    let problem = SineProblem;
    let mesh = generate(config.family, level)?;
    let disc = Discretization::new(&mesh, config.k, config.bc, config.j)?;
    let system = assemble_with(&mesh, &disc, &|p| problem.source(p))?;
    let sol = solve(&system, config.tol, config.max_iter)?;
    let u_h = disc.to_broken(&sol.coeffs);
    let l2 = l2_error(&mesh, &u_h, &|p| problem.solution(p))?;
    let energy = energy_error(&mesh, &disc.ops, &u_h, &|p| problem.gradient(p))?;
    let h1h = h1h_error(&mesh, &u_h, |p| problem.solution(p))?;
    let seconds = config.timing.then(|| start.elapsed().as_secs_f64());
    let row = LevelRow {
        errors: ErrorReport {
            level,
            l2_error: l2,
            l2_rate: None,
            energy_error: energy,
            energy_rate: None,
            h1h_error: h1h,
            dim: disc.n_dofs(),
        },
        cg_iters: sol.iterations,
        cg_residual: sol.residual,
        seconds,
    };
    Ok(LevelSolution {
        mesh,
        disc,
        u_h,
        row,
        matrix: system.matrix,
    })
}

/// Runs every level of the configured sweep in order.
///
/// A numerical failure on one level is recorded (with the CG residual
/// history when available) and ends the sweep; earlier rows are kept.
/// Configuration and I/O errors are returned as errors.
pub fn run_convergence(config: &StudyConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    match config.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot start {n} worker threads: {e}")))?;
            pool.install(|| sweep(config))
        }
        None => sweep(config),
    }
}

fn sweep(config: &StudyConfig) -> Result<ConvergenceReport> {
    let mut rows = Vec::new();
    let mut failure = None;
    let (lo, hi) = config.levels;
    for level in lo..=hi {
        match solve_level(config, level) {
            Ok(sol) => {
                if let Some(dir) = &config.out_dir {
                    if config.dump_solution {
                        dump_solution(&sol.mesh, &sol.u_h, dir.join(format!("solution_l{level}.txt")))?;
                    }
                }
                if level == hi {
                    if let Some(path) = &config.dump_matrix {
                        sol.matrix.write_triplets(path)?;
                    }
                }
                rows.push(sol.row);
            }
            Err(e @ (Error::InvalidArgument(_) | Error::Parse { .. } | Error::Io { .. })) => return Err(e),
            Err(e) => {
                let history = match &e {
                    Error::NotConverged { history, .. } => history.clone(),
                    _ => Vec::new(),
                };
                failure = Some(LevelFailure {
                    level,
                    message: e.to_string(),
                    exit_code: e.exit_code(),
                    history,
                });
                break;
            }
        }
    }
    let mut reports: Vec<ErrorReport> = rows.iter().map(|r| r.errors.clone()).collect();
    decorate_rates(&mut reports);
    for (row, rep) in rows.iter_mut().zip(reports) {
        row.errors = rep;
    }
    let report = ConvergenceReport {
        config: config.clone(),
        rows,
        failure,
    };
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        emit_table(&report, TableFormat::Csv, dir.join("convergence.csv"))?;
        emit_table(&report, TableFormat::Markdown, dir.join("convergence.md"))?;
        let echo = dir.join("config.txt");
        std::fs::write(&echo, config.echo()).map_err(|e| Error::io(&echo, e))?;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(Error::InvalidArgument(format!("unknown table format '{other}'"))),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:e}"))
}

/// CSV rendering. Floats use the shortest representation that parses back
/// to the same value; undefined rates and disabled timings are empty cells.
pub fn to_csv(report: &ConvergenceReport) -> String {
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for row in &report.rows {
        let e = &row.errors;
        let _ = writeln!(
            s,
            "{},{:e},{},{:e},{},{},{},{}",
            e.level,
            e.l2_error,
            opt(e.l2_rate),
            e.energy_error,
            opt(e.energy_rate),
            e.dim,
            row.cg_iters,
            opt(row.seconds)
        );
    }
    s
}

/// Markdown rendering in the layout of a published error table.
pub fn to_markdown(report: &ConvergenceReport) -> String {
    let c = &report.config;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "P{} elements, {} boundary condition, {} meshes\n",
        c.k,
        match c.bc {
            BcMode::Strong => "strongly enforced",
            BcMode::Weak => "weakly enforced",
        },
        match c.family {
            MeshFamily::ForwardSlashTriangles => "triangular",
            MeshFamily::CutCornerPolygons => "cut-corner polygonal",
            MeshFamily::Custom => "custom",
        }
    );
    s.push_str("| level | ‖u_h − Q_0 u‖ | rate | |||u_h − u||| | rate | dim |\n");
    s.push_str("|---:|---:|---:|---:|---:|---:|\n");
    let rate = |r: Option<f64>| r.map_or(String::new(), |r| format!("{r:.2}"));
    for row in &report.rows {
        let e = &row.errors;
        let _ = writeln!(
            s,
            "| {} | {:.4e} | {} | {:.4e} | {} | {} |",
            e.level,
            e.l2_error,
            rate(e.l2_rate),
            e.energy_error,
            rate(e.energy_rate),
            e.dim
        );
    }
    if let Some(f) = &report.failure {
        let _ = writeln!(s, "\nLevel {} failed: {}", f.level, f.message);
    }
    s
}

pub fn emit_table(report: &ConvergenceReport, format: TableFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        TableFormat::Csv => to_csv(report),
        TableFormat::Markdown => to_markdown(report),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One data line of a convergence CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub level: u32,
    pub l2_error: f64,
    pub l2_rate: Option<f64>,
    pub energy_error: f64,
    pub energy_rate: Option<f64>,
    pub dim: usize,
    pub cg_iters: usize,
    pub seconds: Option<f64>,
}

/// Parses text written by [`to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header '{CSV_HEADER}'"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 8 fields, found {}", fields.len()),
            });
        }
        let err = |what: &str| Error::Parse {
            line: line_no,
            message: format!("bad {what}"),
        };
        let optional = |s: &str, what: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| err(what))
            }
        };
        rows.push(CsvRow {
            level: fields[0].parse().map_err(|_| err("level"))?,
            l2_error: fields[1].parse().map_err(|_| err("l2_error"))?,
            l2_rate: optional(fields[2], "l2_rate")?,
            energy_error: fields[3].parse().map_err(|_| err("energy_error"))?,
            energy_rate: optional(fields[4], "energy_rate")?,
            dim: fields[5].parse().map_err(|_| err("dim"))?,
            cg_iters: fields[6].parse().map_err(|_| err("cg_iters"))?,
            seconds: optional(fields[7], "seconds")?,
        });
    }
    Ok(rows)
}

/// Writes `cell_id x y u_h` at the points of an order-`2k` rule on every
/// cell.
pub fn write_solution_samples(mesh: &Mesh, u_h: &BrokenPolynomial, out: &mut impl Write) -> std::io::Result<()> {
    let order = (2 * u_h.degree).max(1);
    for c in 0..mesh.n_cells() {
        let rule = polygon_rule(mesh, c, order).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        let basis = MonomialBasis::for_cell(mesh, c, u_h.degree);
        for p in &rule.points {
            let v = basis.evaluate(u_h.coeffs[c].as_slice(), *p);
            writeln!(out, "{c} {:.16e} {:.16e} {:.16e}", p[0], p[1], v)?;
        }
    }
    Ok(())
}

pub fn dump_solution(mesh: &Mesh, u_h: &BrokenPolynomial, path: impl AsRef<Path>) -> Result<()> {
    if mesh.n_cells() == 0 {
        return Err(Error::InvalidArgument("cannot dump a solution on an empty mesh".into()));
    }
    if u_h.coeffs.len() != mesh.n_cells() {
        return Err(Error::InvalidArgument(format!(
            "solution has {} cells, mesh has {}",
            u_h.coeffs.len(),
            mesh.n_cells()
        )));
    }
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_solution_samples(mesh, u_h, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
