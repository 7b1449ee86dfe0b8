use rayon::prelude::*;
use serde::Serialize;

use super::LimitingMeasures;
use crate::error::{Error, Result};
use crate::spectral::{ModelParams, Phase};

/// Smallest strict-inequality margins found off the supports; `None` when
/// the grid had no point in the relevant region.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IneqMargins {
    /// `2U2 - U1 - U3 + V - l` on `(0, inf) \ [p, q]`
    pub mu2: Option<f64>,
    /// `U2 - 2U1` on `(-r1, 0)`
    pub mu1: Option<f64>,
    /// `U2 - 2U3` on `(-r3, 0)`
    pub mu3: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationalReport {
    pub phase: Phase,
    /// Fitted constant of the `mu_2` equality.
    pub l: f64,
    /// `max |2U2 - U1 - U3 + V - l|` over grid points inside `(p, q)`.
    pub eq_residual_max: f64,
    pub ineq_margins: IneqMargins,
    /// `max |2U1 - U2|` over grid points in `(-inf, -r1)`.
    pub eq_residual_mu1: Option<f64>,
    /// `max |2U3 - U2|` over grid points in `(-inf, -r3)`.
    pub eq_residual_mu3: Option<f64>,
    pub support_points: usize,
}

pub fn variational_check(params: &ModelParams, grid: &[f64]) -> Result<VariationalReport> {
    variational_check_with(&LimitingMeasures::new(*params)?, grid)
}

fn min_opt(v: &[f64]) -> Option<f64> {
    v.iter().copied().reduce(f64::min)
}

fn max_abs_opt(v: &[f64]) -> Option<f64> {
    v.iter().map(|x| x.abs()).reduce(f64::max)
}

pub fn variational_check_with(m: &LimitingMeasures, grid: &[f64]) -> Result<VariationalReport> {
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Grid("variational grid must be finite and strictly increasing".into()));
    }
    let bp = m.curve.branch;
    let params = m.params();
    let pots: Vec<(f64, [f64; 3])> = grid
        .par_iter()
        .filter(|&&x| x != 0.0)
        .map(|&x| {
            Ok((
                x,
                [
                    m.mu1.log_potential(x)?,
                    m.mu2.log_potential(x)?,
                    m.mu3.log_potential(x)?,
                ],
            ))
        })
        .collect::<Result<_>>()?;

    let f2 = |x: f64, u: &[f64; 3]| 2.0 * u[1] - u[0] - u[2] + if x > 0.0 { params.external_field(x) } else { 0.0 };
    let inside: Vec<f64> = pots
        .iter()
        .filter(|(x, _)| *x > bp.p && *x < bp.q)
        .map(|(x, u)| f2(*x, u))
        .collect();
    if inside.is_empty() {
        return Err(Error::Grid(format!("no grid point inside the support ({}, {})", bp.p, bp.q)));
    }
    let l = inside.iter().sum::<f64>() / inside.len() as f64;
    let eq_residual_max = inside.iter().map(|v| (v - l).abs()).fold(0.0, f64::max);

    let off2: Vec<f64> = pots
        .iter()
        .filter(|(x, _)| *x > 0.0 && (*x < bp.p || *x > bp.q))
        .map(|(x, u)| f2(*x, u) - l)
        .collect();
    let split = |r: f64, k: usize| -> (Vec<f64>, Vec<f64>) {
        let neg = pots.iter().filter(|(x, _)| *x < 0.0);
        let eq = neg.clone().filter(|(x, _)| *x < -r).map(|(_, u)| 2.0 * u[k] - u[1]).collect();
        let ineq = neg.filter(|(x, _)| *x > -r).map(|(_, u)| u[1] - 2.0 * u[k]).collect();
        (eq, ineq)
    };
    let (eq1, in1) = split(bp.r1, 0);
    let (eq3, in3) = split(bp.r3, 2);
    Ok(VariationalReport {
        phase: m.curve.phase,
        l,
        eq_residual_max,
        ineq_margins: IneqMargins {
            mu2: min_opt(&off2),
            mu1: min_opt(&in1),
            mu3: min_opt(&in3),
        },
        eq_residual_mu1: max_abs_opt(&eq1),
        eq_residual_mu3: max_abs_opt(&eq3),
        support_points: inside.len(),
    })
}
