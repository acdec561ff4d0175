//! Command-line driver for convergence studies.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use nitsche::interpolation::{interpolation_rate_study, ProjectionVariant};
use nitsche::study::{parse_key_values, parse_levels, run_study_full, OutputFormat, SolutionKind, SolverChoice, StudyConfig};
use nitsche::{Beta, Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "nitsche",
    about = "Convergence studies for Nitsche's method on the unit square and cube",
    args_override_self = true
)]
struct Cli {
    /// Spatial dimension (2 or 3)
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Polynomial degree k (1 to 3)
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// +1 for the non-symmetric method, -1 for the symmetric one
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    beta: f64,
    /// Exponent of the penalty weight h^-alpha
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Penalty constant; defaults to 1 for beta = +1 and 10 k^2 for beta = -1
    #[arg(long)]
    c0: Option<f64>,
    /// Refinement levels as A:B
    #[arg(long, default_value = "1:5")]
    levels: String,
    /// Mesh grading exponent (1 = uniform)
    #[arg(long, default_value_t = 1.0)]
    grading: f64,
    /// sine2d, sine3d_vector or polynomial
    #[arg(long)]
    solution: Option<String>,
    /// direct or krylov
    #[arg(long, default_value = "direct")]
    solver: String,
    /// Relative residual target of the Krylov solver
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Extra quadrature degree for assembly and error integrals
    #[arg(long, default_value_t = 0)]
    quad_bump: usize,
    /// csv or markdown
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output file; standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the finest solution as a legacy VTK file
    #[arg(long)]
    export_vtk: Option<PathBuf>,
    /// Write the finest matrix in MatrixMarket format
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
    /// key=value file supplying defaults for any flag
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write zero in the elapsed column
    #[arg(long)]
    no_timing: bool,
    /// Run the interpolation study instead of solving
    #[arg(long)]
    interpolation: bool,
    /// Boundary projection of the interpolation study: weighted or plain
    #[arg(long, default_value = "weighted")]
    projection: String,
}

const BOOL_FLAGS: [&str; 2] = ["no-timing", "interpolation"];

/// Expands `--config FILE` into flags placed before the command-line flags,
/// so explicit flags win.
fn expand_args(args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            path = it.next().cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)?;
    let mut out = vec![args[0].clone()];
    for (key, value) in parse_key_values(&text)? {
        if key == "config" {
            return Err(Error::Parse("config files cannot include other config files".into()));
        }
        if BOOL_FLAGS.contains(&key.as_str()) {
            match value.as_str() {
                "true" | "1" | "yes" => out.push(format!("--{key}")),
                "false" | "0" | "no" => {}
                other => return Err(Error::Parse(format!("{key}: expected a boolean, got {other:?}"))),
            }
        } else {
            out.push(format!("--{key}={value}"));
        }
    }
    out.extend(args.into_iter().skip(1));
    Ok(out)
}

fn write_output(cli: &Cli, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match &cli.out {
        Some(path) => {
            let mut f = io::BufWriter::new(fs::File::create(path)?);
            write(&mut f)?;
            f.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let format: OutputFormat = cli.format.parse()?;
    let levels = parse_levels(&cli.levels)?;
    let beta = Beta::from_sign(cli.beta)?;

    if cli.interpolation {
        let variant = match cli.projection.as_str() {
            "weighted" => ProjectionVariant::Weighted,
            "plain" => ProjectionVariant::Plain,
            other => return Err(Error::Parse(format!("unknown projection {other:?}"))),
        };
        let solution: SolutionKind = cli.solution.as_deref().unwrap_or(default_solution(cli.dim)).parse()?;
        let exact = solution
            .components(cli.dim, cli.degree)?
            .into_iter()
            .next()
            .expect("at least one component");
        let table = interpolation_rate_study(cli.dim, cli.degree, levels, cli.alpha, variant, &exact)?;
        return write_output(&cli, |w| match format {
            OutputFormat::Csv => table.write_csv(w),
            OutputFormat::Markdown => table.write_markdown(w),
        });
    }

    let c0 = cli.c0.unwrap_or(match beta {
        Beta::NonSymmetric => 1.0,
        Beta::Symmetric => nitsche::assembly::default_symmetric_penalty(cli.degree),
    });
    let cfg = StudyConfig {
        dim: cli.dim,
        degree: cli.degree,
        beta,
        alpha: cli.alpha,
        c0,
        levels,
        grading: cli.grading,
        solution: cli.solution.as_deref().unwrap_or(default_solution(cli.dim)).parse()?,
        solver: cli.solver.parse::<SolverChoice>()?,
        tol: cli.tol,
        quad_bump: cli.quad_bump,
        record_timing: !cli.no_timing,
    };
    let outcome = run_study_full(&cfg)?;
    write_output(&cli, |w| match format {
        OutputFormat::Csv => outcome.table.write_csv(w),
        OutputFormat::Markdown => outcome.table.write_markdown(w),
    })?;
    if let Some(path) = &cli.export_vtk {
        let names: Vec<String> = if outcome.solution.len() == 1 {
            vec!["u".into()]
        } else {
            (1..=outcome.solution.len()).map(|i| format!("u{i}")).collect()
        };
        let fields: Vec<(&str, &[f64])> = names.iter().map(String::as_str).zip(outcome.solution.iter().map(Vec::as_slice)).collect();
        let mut f = io::BufWriter::new(fs::File::create(path)?);
        nitsche::vtk::write_vtk(&mut f, &outcome.mesh, &outcome.space, &fields)?;
        f.flush()?;
    }
    if let Some(path) = &cli.dump_matrix {
        let mut f = io::BufWriter::new(fs::File::create(path)?);
        outcome.matrix.write_matrix_market(&mut f)?;
        f.flush()?;
    }
    Ok(())
}

fn default_solution(dim: usize) -> &'static str {
    if dim == 3 {
        "sine3d_vector"
    } else {
        "sine2d"
    }
}

fn main() -> ExitCode {
    let args = match expand_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
