use serde::Serialize;
use serde_json::{json, Value};

use sqbpaths::equilibrium::{discretize, ComparisonReport, GridSpec, MinimizeOpts, MinimizeReport};
use sqbpaths::export::{self, Cell, CsvTable};
use sqbpaths::kernel::{CorrelationKernel, EnsembleSpec};
use sqbpaths::measures::{variational_check, LimitingMeasures};
use sqbpaths::simulate::{mcmc_positions, path_ensemble, McmcOptions};
use sqbpaths::spectral::{self, classify, critical_times, phase_diagram, ModelParams};
use sqbpaths::Error;

use crate::{Command, Format, Instance};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(Error::NonGenericPhase { .. }) => 2,
            CliError::Core(_) | CliError::Io(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "validation",
            CliError::Core(e) if e.is_validation() => "validation",
            CliError::Core(Error::NonGenericPhase { .. }) => "non_generic",
            CliError::Core(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }
}

pub enum Output {
    Json(Value),
    Table(CsvTable),
    /// JSON report with a table form selected by `--format csv`
    Both(Value, CsvTable),
}

fn cell_value(c: &Cell) -> Value {
    match c {
        Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
        Cell::Int(v) => json!(v),
        Cell::Text(s) => json!(s),
    }
}

impl Output {
    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match (self, format) {
            (Output::Json(v) | Output::Both(v, _), Format::Json) => Ok(export::to_json(v)?),
            (Output::Both(_, t), Format::Csv) => Ok(t.to_string()),
            (Output::Json(_), Format::Csv) => Err(CliError::Usage("this command only writes JSON".into())),
            (Output::Table(t), Format::Csv) => Ok(t.to_string()),
            (Output::Table(t), Format::Json) => {
                let rows: Vec<Vec<Value>> = t.rows.iter().map(|r| r.iter().map(cell_value).collect()).collect();
                Ok(export::to_json(&json!({
                    "comments": t.comments,
                    "header": t.header,
                    "rows": rows,
                }))?)
            }
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Io(format!("json encoding failed: {e}")))
}

fn params(i: &Instance) -> Result<ModelParams, CliError> {
    Ok(ModelParams::new(i.a, i.b, i.t)?)
}

fn midpoints(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, CliError> {
    if n == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(CliError::Usage(format!("need a positive grid size and x-min < x-max (got {n}, {lo}, {hi})")));
    }
    let h = (hi - lo) / n as f64;
    Ok((0..n).map(|k| lo + (k as f64 + 0.5) * h).collect())
}

#[derive(Serialize)]
struct ClassifyOut {
    case: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    t1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t2: Option<f64>,
}

#[derive(Serialize)]
struct OracleOut {
    n_neg: usize,
    n_pos: usize,
    minimize: MinimizeReport,
    comparison: ComparisonReport,
}

/// Runs a command; returns its output and default format.
pub fn dispatch(cmd: Command) -> Result<(Output, Format), CliError> {
    match cmd {
        Command::Classify(i) => {
            let p = params(&i)?;
            let phase = classify(&p)?;
            let (t1, t2) = match critical_times(p.a, p.b) {
                Ok((t1, t2)) => (Some(t1), Some(t2)),
                Err(_) => (None, None),
            };
            let out = ClassifyOut {
                case: phase.label(),
                t1,
                t2,
            };
            Ok((Output::Json(to_value(&out)?), Format::Json))
        }
        Command::BranchPoints(i) => {
            let bp = spectral::branch_points(&params(&i)?)?;
            Ok((Output::Json(to_value(&bp)?), Format::Json))
        }
        Command::Density { inst, grid, x_min, x_max } => {
            let m = LimitingMeasures::new(params(&inst)?)?;
            let q = m.curve.branch.q;
            let xs = midpoints(x_min.unwrap_or(-2.0 * q), x_max.unwrap_or(1.25 * q), grid)?;
            Ok((Output::Table(export::density_table(&m, &xs)?), Format::Csv))
        }
        Command::VariationalCheck { inst, grid } => {
            let p = params(&inst)?;
            let q = spectral::branch_points(&p)?.q;
            let xs = midpoints(-3.0 * q, 1.5 * q, grid)?;
            let rep = variational_check(&p, &xs)?;
            Ok((Output::Json(to_value(&rep)?), Format::Json))
        }
        Command::Oracle {
            inst,
            grid,
            tol,
            max_iter,
            weights_out,
        } => {
            let p = params(&inst)?;
            if !(tol > 0.0) {
                return Err(CliError::Usage(format!("tolerance must be positive, got {tol}")));
            }
            let problem = discretize(&p, &GridSpec::for_params(&p, grid, grid)?)?;
            let (w, rep) = problem.minimize(&MinimizeOpts {
                tol,
                max_iter,
                record_energies: false,
            })?;
            rep.require_converged()?;
            let table = export::discrete_weights_table(&problem, &w);
            if let Some(path) = weights_out {
                std::fs::write(&path, table.to_string()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
            let out = OracleOut {
                n_neg: grid,
                n_pos: grid,
                minimize: rep,
                comparison: problem.compare_to_spectral(&w),
            };
            Ok((Output::Both(to_value(&out)?, table), Format::Json))
        }
        Command::Kernel {
            inst,
            n,
            alpha,
            grid,
            x_min,
            x_max,
        } => {
            let p = params(&inst)?;
            let q = spectral::branch_points(&p)?.q;
            let k = CorrelationKernel::new(&EnsembleSpec::new(n, alpha, p)?)?;
            let lo = x_min.unwrap_or(0.0);
            let xs = midpoints(lo, x_max.unwrap_or(1.25 * q), grid)?;
            if !(lo >= 0.0) {
                return Err(CliError::Usage("kernel grid must lie in x > 0".into()));
            }
            Ok((Output::Table(export::kernel_profile(&k, &xs)?), Format::Csv))
        }
        Command::Simulate {
            a,
            b,
            t,
            n,
            alpha,
            seed,
            times,
            grid,
            burn_in,
            thin,
            steps,
        } => {
            let opts = McmcOptions {
                burn_in,
                thin,
                ..Default::default()
            };
            match t {
                Some(t) => {
                    let spec = EnsembleSpec::new(n, alpha, ModelParams::new(a, b, t)?)?;
                    if times.is_some() {
                        return Err(CliError::Usage("--t and --times are mutually exclusive".into()));
                    }
                    let run = mcmc_positions(&spec, t, steps, seed, &opts)?;
                    Ok((Output::Table(export::mcmc_table(&run)), Format::Csv))
                }
                None => {
                    let spec = EnsembleSpec::new(n, alpha, ModelParams::new(a, b, 0.5)?)?;
                    let times = match times {
                        Some(ts) => ts,
                        None if grid > 0 => (1..=grid).map(|k| k as f64 / (grid + 1) as f64).collect(),
                        None => return Err(CliError::Usage("grid must be positive".into())),
                    };
                    let e = path_ensemble(&spec, &times, &opts, seed)?;
                    let table = export::path_ensemble_table(&e);
                    Ok((Output::Both(to_value(&e)?, table), Format::Csv))
                }
            }
        }
        Command::PhaseDiagram { b, a_max, grid } => {
            let cells = phase_diagram(b, a_max, grid)?;
            Ok((Output::Table(export::phase_diagram_table(b, &cells)), Format::Csv))
        }
    }
}
