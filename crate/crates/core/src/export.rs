//! CSV and JSON output. Numbers are written in scientific notation with 17
//! significant digits, which round-trips every `f64`.

use std::io::Write;

use serde::Serialize;

use crate::equilibrium::{DiscreteMeasureTriple, EquilibriumProblem};
use crate::error::{Error, Result};
use crate::kernel::CorrelationKernel;
use crate::measures::{rho_density, Constraint, LimitingMeasures};
use crate::simulate::{McmcRun, PathEnsemble};
use crate::spectral::PhaseCell;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// A table with a mandatory header line, optionally preceded by `# ` comment
/// lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            comments: Vec::new(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::domain(format!(
                "row has {} cells, header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for c in &self.comments {
            writeln!(out, "# {c}")?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()
    }

}

impl std::fmt::Display for CsvTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut buf = Vec::new();
        self.write(&mut buf).map_err(|_| std::fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}

/// `v` with 17 significant digits, e.g. `4.5000000000000000e0`.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

/// Compact JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value).map_err(|e| Error::domain(format!("json encoding failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Columns `x, mu1, mu2, mu3, rho1, rho3`; each density is zero off its half
/// line.
pub fn density_table(m: &LimitingMeasures, xs: &[f64]) -> Result<CsvTable> {
    let mut t = CsvTable::new(["x", "mu1", "mu2", "mu3", "rho1", "rho3"]);
    let p = m.params();
    for &x in xs {
        let rho = |c| if x < 0.0 { rho_density(c, &p, x) } else { Ok(0.0) };
        t.push(vec![
            x.into(),
            m.mu1.density(x).into(),
            m.mu2.density(x).into(),
            m.mu3.density(x).into(),
            rho(Constraint::Rho1)?.into(),
            rho(Constraint::Rho3)?.into(),
        ])?;
    }
    Ok(t)
}

/// Columns `x, mean_density, density_mu2`.
pub fn kernel_profile(k: &CorrelationKernel, xs: &[f64]) -> Result<CsvTable> {
    let mut t = CsvTable::new(["x", "mean_density", "density_mu2"]);
    t.comments.push(format!("n={} alpha={}", k.spec.n, k.spec.alpha.value()));
    for &x in xs {
        let mu2 = crate::measures::density_mu2(&k.spec.params, x)?;
        t.push(vec![x.into(), k.mean_density(x)?.into(), mu2.into()])?;
    }
    Ok(t)
}

/// Columns `measure, lo, hi, weight, cap`; `cap` is empty for `nu2`.
pub fn discrete_weights_table(problem: &EquilibriumProblem, w: &DiscreteMeasureTriple) -> CsvTable {
    let mut t = CsvTable::new(["measure", "lo", "hi", "weight", "cap"]);
    let neg = &problem.grid.neg_edges;
    let pos = &problem.grid.pos_edges;
    for (name, weights, caps) in [("nu1", &w.w1, &problem.caps1), ("nu3", &w.w3, &problem.caps3)] {
        for (k, (&wk, &ck)) in weights.iter().zip(caps).enumerate() {
            t.rows.push(vec![name.into(), neg[k].into(), neg[k + 1].into(), wk.into(), ck.into()]);
        }
    }
    for (k, &wk) in w.w2.iter().enumerate() {
        t.rows.push(vec!["nu2".into(), pos[k].into(), pos[k + 1].into(), wk.into(), Cell::Text(String::new())]);
    }
    t
}

/// Columns `time, path_index, position`, with the seed in a comment line.
pub fn path_ensemble_table(e: &PathEnsemble) -> CsvTable {
    let mut t = CsvTable::new(["time", "path_index", "position"]);
    t.comments.push(format!("seed={}", e.seed));
    for (k, &time) in e.time_grid.iter().enumerate() {
        for (i, row) in e.paths.iter().enumerate() {
            t.rows.push(vec![time.into(), i.into(), row[k].into()]);
        }
    }
    t
}

/// Columns `sample, position_index, position` for a single-time run.
pub fn mcmc_table(run: &McmcRun) -> CsvTable {
    let mut t = CsvTable::new(["sample", "position_index", "position"]);
    let time = run.samples.first().map_or(f64::NAN, |s| s.time);
    t.comments.push(format!("seed={} time={}", run.seed, format_f64(time)));
    for (s, smp) in run.samples.iter().enumerate() {
        for (i, &x) in smp.positions.iter().enumerate() {
            t.rows.push(vec![s.into(), i.into(), x.into()]);
        }
    }
    t
}

/// Columns `t, a, case`; non-generic cells are labelled `non-generic`.
pub fn phase_diagram_table(b: f64, cells: &[PhaseCell]) -> CsvTable {
    let mut t = CsvTable::new(["t", "a", "case"]);
    t.comments.push(format!("b={}", format_f64(b)));
    for c in cells {
        let label = c.phase.map_or("non-generic", |p| p.label());
        t.rows.push(vec![c.t.into(), c.a.into(), label.into()]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for &v in &[0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 4.5, 0.0] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17);
        }
        assert_eq!(format_f64(f64::NAN), "NaN");
    }

    #[test]
    fn table_layout() {
        let mut t = CsvTable::new(["x", "label"]);
        t.comments.push("seed=3".into());
        t.push(vec![0.5.into(), "a,b".into()]).unwrap();
        assert!(t.push(vec![1.0.into()]).is_err());
        assert_eq!(t.to_string(), "# seed=3\nx,label\n5.0000000000000000e-1,\"a,b\"\n");
    }

    #[test]
    fn json_has_no_trailing_whitespace() {
        let s = to_json(&serde_json::json!({"case": "I", "xs": [1.0, 2.0]})).unwrap();
        assert_eq!(s, "{\"case\":\"I\",\"xs\":[1.0,2.0]}\n");
    }
}
