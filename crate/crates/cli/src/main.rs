//! `sqbpaths`: command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 non-generic parameters,
//! 3 numerical failure. Errors are reported as one JSON object on stderr.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use commands::{CliError, Output};

#[derive(Parser, Debug)]
#[command(name = "sqbpaths", version, about = "Non-intersecting squared Bessel paths: phases, limiting densities, finite-n checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// write the result to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// output format (each command has its own default)
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Copy)]
struct Instance {
    /// starting point a > 0
    #[arg(long)]
    a: f64,
    /// ending point b > 0
    #[arg(long)]
    b: f64,
    /// time t in (0, 1)
    #[arg(long)]
    t: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// phase of (a, b, t), with the critical times when ab < 1/4
    #[command(allow_negative_numbers = true)]
    Classify(Instance),
    /// support endpoints r1, r3, p, q
    #[command(allow_negative_numbers = true)]
    BranchPoints(Instance),
    /// limiting densities and constraint densities on a grid
    #[command(allow_negative_numbers = true)]
    Density {
        #[command(flatten)]
        inst: Instance,
        /// number of grid points (cell midpoints of [x-min, x-max])
        #[arg(long, default_value_t = 201)]
        grid: usize,
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
    },
    /// equalities and inequalities satisfied by the potentials
    #[command(allow_negative_numbers = true)]
    VariationalCheck {
        #[command(flatten)]
        inst: Instance,
        #[arg(long, default_value_t = 400)]
        grid: usize,
    },
    /// discretised equilibrium problem and its comparison with the spectral densities
    #[command(allow_negative_numbers = true)]
    Oracle {
        #[command(flatten)]
        inst: Instance,
        /// cells on each half line
        #[arg(long, default_value_t = 400)]
        grid: usize,
        /// projected-gradient tolerance
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 50_000)]
        max_iter: usize,
        /// also write the discrete weights as CSV here
        #[arg(long)]
        weights_out: Option<PathBuf>,
    },
    /// profile of K_n(x, x)/n against the limiting density
    #[command(allow_negative_numbers = true)]
    Kernel {
        #[command(flatten)]
        inst: Instance,
        /// number of paths (even)
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
    },
    /// sample a path fan, or the positions at one time with --t
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        /// sample the positions at this time only
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long)]
        seed: u64,
        /// comma-separated interior times of the fan
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        /// equally spaced interior times k/(grid+1) when --times is absent
        #[arg(long, default_value_t = 19)]
        grid: usize,
        #[arg(long, default_value_t = 2000)]
        burn_in: usize,
        #[arg(long, default_value_t = 10)]
        thin: usize,
        /// recorded states in single-time mode
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// phase labels on a (t, a) lattice at fixed b
    #[command(allow_negative_numbers = true)]
    PhaseDiagram {
        #[arg(long, default_value_t = 0.25)]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        a_max: f64,
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: u8,
}

fn report(err: &CliError) -> ExitCode {
    let code = err.exit_code();
    let body = ErrorReport {
        error: err.kind(),
        message: err.to_string(),
        exit_code: code,
    };
    let line = serde_json::to_string(&body).unwrap_or_else(|_| "{\"error\":\"internal\"}".into());
    let _ = writeln!(std::io::stderr(), "{line}");
    ExitCode::from(code)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SQB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("SQB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))
}

fn emit(out: &Output, format: Format, path: Option<&PathBuf>) -> Result<(), CliError> {
    let text = out.render(format)?;
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let (output, default_format) = commands::dispatch(cli.command)?;
    emit(&output, cli.format.unwrap_or(default_format), cli.out.as_ref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return report(&CliError::Usage(e.render().to_string().trim_end().to_string()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
