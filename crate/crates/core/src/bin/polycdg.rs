use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polycdg::error::{EXIT_CONFIG, EXIT_SOLVER};
use polycdg::mesh::{generate, read_mesh, validate, write_mesh, Mesh, MeshFamily};
use polycdg::study::{run_convergence, to_csv, to_markdown, StudyConfig, TableFormat};
use polycdg::{verify, BcMode, Error};

#[derive(Parser)]
#[command(name = "polycdg", version, about = "Stabilizer-free conforming DG solver for the Poisson problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence sweep on the sine test problem.
    Run(RunArgs),
    /// Print statistics and validation results of a mesh.
    MeshInfo(MeshInfoArgs),
    /// Run the built-in property checks and print one line per check.
    Verify,
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mesh family: `tri` or `poly`.
    #[arg(long)]
    family: Option<MeshFamily>,
    /// Polynomial degree, 1..=5.
    #[arg(long)]
    k: Option<usize>,
    /// Boundary condition: `strong` or `weak`.
    #[arg(long)]
    bc: Option<BcMode>,
    /// Inclusive level range, e.g. `2..5`.
    #[arg(long)]
    levels: Option<String>,
    /// Weak-gradient degree override.
    #[arg(long)]
    j: Option<usize>,
    /// Relative residual at which CG stops (default 1e-12).
    #[arg(long)]
    tol: Option<f64>,
    /// CG iteration cap (default 20·√N + 1000).
    #[arg(long)]
    maxit: Option<usize>,
    /// Worker threads; 1 is the reproducibility mode.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed recorded with the configuration; the sweep itself draws no random numbers.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for convergence.csv, convergence.md, config.txt and solution dumps.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the finest-level matrix as `i j value` lines.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
    /// Write `cell_id x y u_h` samples for every level into the output directory.
    #[arg(long)]
    dump_solution: bool,
    /// Leave the seconds column empty so the CSV is reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Table printed to standard output: `markdown` or `csv`.
    #[arg(long, default_value = "markdown")]
    format: TableFormat,
}

#[derive(Args)]
struct MeshInfoArgs {
    #[arg(long, required_unless_present = "input")]
    family: Option<MeshFamily>,
    #[arg(long, required_unless_present = "input")]
    level: Option<u32>,
    /// Read a mesh file instead of generating one.
    #[arg(long, conflicts_with_all = ["family", "level"])]
    input: Option<PathBuf>,
    /// Write the mesh in text format.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(args: &RunArgs) -> Result<StudyConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => StudyConfig::from_file(path)?,
        None => StudyConfig::default(),
    };
    if let Some(f) = args.family {
        cfg.family = f;
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(bc) = args.bc {
        cfg.bc = bc;
    }
    if let Some(levels) = &args.levels {
        cfg.set("levels", levels)?;
    }
    if args.j.is_some() {
        cfg.j = args.j;
    }
    if let Some(tol) = args.tol {
        cfg.tol = tol;
    }
    if args.maxit.is_some() {
        cfg.max_iter = args.maxit;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.out.is_some() {
        cfg.out_dir = args.out.clone();
    }
    if args.dump_matrix.is_some() {
        cfg.dump_matrix = args.dump_matrix.clone();
    }
    if args.dump_solution {
        cfg.dump_solution = true;
    }
    if args.no_timing {
        cfg.timing = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<i32, Error> {
    let cfg = build_config(&args)?;
    let report = run_convergence(&cfg)?;
    match args.format {
        TableFormat::Csv => print!("{}", to_csv(&report)),
        TableFormat::Markdown => print!("{}", to_markdown(&report)),
    }
    if let Some(f) = &report.failure {
        eprintln!("level {} failed: {}", f.level, f.message);
        if !f.history.is_empty() {
            let tail: Vec<String> = f.history.iter().rev().take(10).rev().map(|r| format!("{r:.3e}")).collect();
            eprintln!("last residuals: {}", tail.join(" "));
        }
        return Ok(f.exit_code);
    }
    Ok(0)
}

fn describe(mesh: &Mesh) {
    println!("family: {}", mesh.family);
    println!("level: {}", mesh.level);
    println!("vertices: {}", mesh.n_vertices());
    println!("edges: {} ({} on the boundary)", mesh.n_edges(), mesh.n_boundary_edges());
    println!("cells: {}", mesh.n_cells());
    let mut by_sides = std::collections::BTreeMap::new();
    for c in &mesh.cells {
        *by_sides.entry(c.n_vertices()).or_insert(0usize) += 1;
    }
    for (sides, count) in by_sides {
        println!("  {sides}-gons: {count}");
    }
    let area: f64 = mesh.cells.iter().map(|c| c.area).sum();
    println!("total area: {area:.15}");
    println!("max diameter: {:.6e}", mesh.max_diameter());
}

fn mesh_info(args: MeshInfoArgs) -> Result<i32, Error> {
    let mesh = match (&args.input, args.family, args.level) {
        (Some(path), _, _) => read_mesh(path)?,
        (None, Some(family), Some(level)) => generate(family, level)?,
        _ => return Err(Error::InvalidArgument("give --family and --level, or --input".into())),
    };
    describe(&mesh);
    let violations = validate(&mesh);
    if violations.is_empty() {
        println!("validation: ok");
    } else {
        println!("validation: {} violation(s)", violations.len());
        for v in &violations {
            println!("  {v}");
        }
    }
    if let Some(out) = &args.out {
        write_mesh(&mesh, out)?;
    }
    Ok(if violations.is_empty() { 0 } else { EXIT_CONFIG })
}

fn verify_all() -> i32 {
    let results = verify::run_suite();
    let mut failed = 0;
    for c in &results {
        println!("{} {} — {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.passed {
            failed += 1;
        }
    }
    println!("{} checks, {} failed", results.len(), failed);
    if failed == 0 {
        0
    } else {
        EXIT_SOLVER
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::MeshInfo(args) => mesh_info(args),
        Command::Verify => Ok(verify_all()),
    };
    let code = match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
