mod commands;
mod draw;
mod error;
mod instance;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use ftsurf::Execution;
use serde_json::Value;

use commands::Command;
use error::CliError;
use instance::{Method, Overrides};

/// Weighted Fermat-Torricelli trees on constant-curvature planes and
/// surfaces of revolution.
#[derive(Debug, Parser)]
#[command(name = "ftsurf", version)]
struct Args {
    command: Command,

    /// Instance file (TOML).
    #[arg(required_unless_present = "batch", conflicts_with = "batch")]
    input: Option<PathBuf>,

    /// Run the command on every `*.toml` file in a directory and write
    /// `<stem>.<command>.json` next to each one.
    #[arg(long, value_name = "DIR")]
    batch: Option<PathBuf>,

    #[arg(long)]
    tol: Option<f64>,

    #[arg(long)]
    max_iter: Option<usize>,

    /// Initial step length of the line search.
    #[arg(long)]
    step: Option<f64>,

    /// Line-search shrink factor.
    #[arg(long)]
    backtrack: Option<f64>,

    #[arg(long, value_enum)]
    method: Option<Method>,

    /// Geodesic integration step on surfaces of revolution.
    #[arg(long)]
    integration_step: Option<f64>,

    /// Number of initial angles scanned when shooting geodesics.
    #[arg(long)]
    scan: Option<usize>,

    #[arg(long, value_enum, default_value_t = Format::Pretty)]
    format: Format,

    /// Read and report angles in degrees.
    #[arg(long)]
    degrees: bool,

    /// Write an SVG figure to this file (a directory in batch mode).
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Pretty,
    Compact,
}

impl Format {
    fn render(self, doc: &Value) -> String {
        match self {
            Format::Pretty => serde_json::to_string_pretty(doc),
            Format::Compact => serde_json::to_string(doc),
        }
        .expect("JSON values serialise")
    }
}

impl Args {
    fn overrides(&self) -> Overrides {
        Overrides {
            tol: self.tol,
            max_iter: self.max_iter,
            step: self.step,
            backtrack: self.backtrack,
            method: self.method,
            integration_step: self.integration_step,
            scan: self.scan,
            degrees: self.degrees,
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn run_one(args: &Args, input: &Path, svg: Option<&Path>) -> Result<Value, CliError> {
    let inst = instance::load(input)?;
    let out = commands::run(args.command, &inst, &args.overrides(), svg.is_some())?;
    if let (Some(path), Some(fig)) = (svg, &out.figure) {
        write(path, &fig.to_svg())?;
    }
    Ok(out.doc)
}

fn single(args: &Args, input: &Path) -> i32 {
    match run_one(args, input, args.svg.as_deref()) {
        Ok(doc) => {
            println!("{}", args.format.render(&doc));
            0
        }
        Err(e) => {
            println!("{}", args.format.render(&e.to_json()));
            eprintln!("ftsurf: {e}");
            e.exit_code()
        }
    }
}

fn batch(args: &Args, dir: &Path) -> i32 {
    let entries = match std::fs::read_dir(dir) {
        Ok(entries) => entries,
        Err(e) => {
            eprintln!("ftsurf: {}: {e}", dir.display());
            return 1;
        }
    };
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    if let Some(svg_dir) = &args.svg {
        if let Err(e) = std::fs::create_dir_all(svg_dir) {
            eprintln!("ftsurf: {}: {e}", svg_dir.display());
            return 1;
        }
    }
    let name = args.command.name();
    let codes = Execution::Parallel.map(&files, |file| {
        let stem = file.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let svg = args.svg.as_ref().map(|d| d.join(format!("{stem}.{name}.svg")));
        let (doc, code) = match run_one(args, file, svg.as_deref()) {
            Ok(doc) => (doc, 0),
            Err(e) => (e.to_json(), e.exit_code()),
        };
        let out = file.with_file_name(format!("{stem}.{name}.json"));
        match write(&out, &args.format.render(&doc)) {
            Ok(()) => code,
            Err(e) => {
                eprintln!("ftsurf: {e}");
                1.max(code)
            }
        }
    });
    for (file, code) in files.iter().zip(&codes) {
        let status = if *code == 0 { "ok" } else { "failed" };
        println!("{status:<6} {} (exit {code})", file.display());
    }
    let failed = codes.iter().filter(|c| **c != 0).count();
    println!("{} instances, {failed} failed", files.len());
    codes.into_iter().max().unwrap_or(0)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match (&args.batch, &args.input) {
        (Some(dir), _) => batch(&args, dir),
        (None, Some(input)) => single(&args, input),
        (None, None) => unreachable!("clap requires an input or --batch"),
    };
    ExitCode::from(code as u8)
}
