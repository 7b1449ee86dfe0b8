//! Limiting measures `mu_1, mu_2, mu_3`, the constraints `rho_1, rho_3`,
//! logarithmic potentials, the variational conditions and balayage.
//!
//! Pointwise densities come from boundary values of the sheet functions:
//! `dmu_2 = Im xi_2(x + i0)/pi` on `(p, q)`, `dmu_1 = drho_1 + Im xi_1(x + i0)/pi`
//! and `dmu_3 = drho_3 + Im xi_3(x + i0)/pi` on the negative axis.

mod balayage;
mod density;
mod variational;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{ModelParams, SpectralCurve};

pub use balayage::{balayage_delta, balayage_measure, balayage_of_measure};
pub use density::{Edge, EdgeKind, FarEnd, MeasureDensity, PowerTail, Support, TAIL_BUDGET};
pub use variational::{variational_check, variational_check_with, IneqMargins, VariationalReport};

/// Which upper constraint: `rho_1` (from the start point `a`) or `rho_3`
/// (from the end point `b`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    #[serde(rename = "1")]
    Rho1,
    #[serde(rename = "3")]
    Rho3,
}

impl Constraint {
    pub fn from_index(which: u8) -> Result<Self> {
        match which {
            1 => Ok(Constraint::Rho1),
            3 => Ok(Constraint::Rho3),
            _ => Err(Error::domain(format!("constraint index must be 1 or 3, got {which}"))),
        }
    }

    /// Prefactor `k` in `drho = k |x|^{-1/2} dx`.
    pub fn prefactor(self, params: &ModelParams) -> f64 {
        match self {
            Constraint::Rho1 => params.a.sqrt() / (PI * params.t),
            Constraint::Rho3 => params.b.sqrt() / (PI * (1.0 - params.t)),
        }
    }
}

/// Density of `rho_1` or `rho_3` at `x < 0`.
pub fn rho_density(which: Constraint, params: &ModelParams, x: f64) -> Result<f64> {
    if !(x < 0.0) {
        return Err(Error::domain(format!("constraint density needs x < 0, got {x}")));
    }
    Ok(which.prefactor(params) / (-x).sqrt())
}

/// `rho([x1, x2])` for `x1 <= x2 <= 0`, from the antiderivative `2 sqrt|x|`.
pub fn rho_mass(which: Constraint, params: &ModelParams, x1: f64, x2: f64) -> Result<f64> {
    if !(x1 <= x2 && x2 <= 0.0) {
        return Err(Error::domain(format!("rho_mass needs x1 <= x2 <= 0, got [{x1}, {x2}]")));
    }
    Ok(which.prefactor(params) * 2.0 * ((-x1).sqrt() - (-x2).sqrt()))
}

/// `dmu_2/dx` at `x` for a classified curve.
pub fn mu2_at(curve: &SpectralCurve, x: f64) -> Result<f64> {
    let bp = curve.branch;
    if !(x > bp.p && x < bp.q) {
        return Ok(0.0);
    }
    let xi = curve.xi(Complex64::new(x, 0.0))?;
    Ok((xi.xi[1].im / PI).max(0.0))
}

fn constrained_at(curve: &SpectralCurve, which: Constraint, x: f64) -> Result<f64> {
    let rho = rho_density(which, &curve.params, x)?;
    let (r, sheet) = match which {
        Constraint::Rho1 => (curve.branch.r1, 0),
        Constraint::Rho3 => (curve.branch.r3, 2),
    };
    if x > -r {
        return Ok(rho);
    }
    let xi = curve.xi(Complex64::new(x, 0.0))?;
    Ok((rho + xi.xi[sheet].im / PI).clamp(0.0, rho))
}

/// `dmu_1/dx` at `x < 0`.
pub fn mu1_at(curve: &SpectralCurve, x: f64) -> Result<f64> {
    constrained_at(curve, Constraint::Rho1, x)
}

/// `dmu_3/dx` at `x < 0`.
pub fn mu3_at(curve: &SpectralCurve, x: f64) -> Result<f64> {
    constrained_at(curve, Constraint::Rho3, x)
}

pub fn density_mu1(params: &ModelParams, x: f64) -> Result<f64> {
    mu1_at(&SpectralCurve::new(*params)?, x)
}

pub fn density_mu2(params: &ModelParams, x: f64) -> Result<f64> {
    mu2_at(&SpectralCurve::new(*params)?, x)
}

pub fn density_mu3(params: &ModelParams, x: f64) -> Result<f64> {
    mu3_at(&SpectralCurve::new(*params)?, x)
}

/// Default truncation radius for the negative half-line measures.
pub fn default_cutoff(q: f64) -> f64 {
    1e4 * q.max(1.0)
}

/// The three limiting measures of one instance in interpolated form.
#[derive(Debug, Clone)]
pub struct LimitingMeasures {
    pub curve: SpectralCurve,
    pub mu1: MeasureDensity,
    pub mu2: MeasureDensity,
    pub mu3: MeasureDensity,
}

impl LimitingMeasures {
    pub fn new(params: ModelParams) -> Result<Self> {
        Self::from_curve(SpectralCurve::new(params)?)
    }

    pub fn from_curve(curve: SpectralCurve) -> Result<Self> {
        let bp = curve.branch;
        let p_edge = if bp.p > 0.0 {
            EdgeKind::SquareRoot
        } else {
            EdgeKind::Unasserted
        };
        let mu2 = MeasureDensity::interval(
            |x| mu2_at(&curve, x),
            bp.p,
            bp.q,
            1.0,
            vec![
                Edge { at: bp.p, kind: p_edge },
                Edge {
                    at: bp.q,
                    kind: EdgeKind::SquareRoot,
                },
            ],
        )?;
        let cutoff = default_cutoff(bp.q);
        let build = |which: Constraint, r: f64| {
            let d0 = if r > 0.0 { r } else { bp.p.max(1e-3 * bp.q) };
            let mut edges = vec![Edge {
                at: 0.0,
                kind: EdgeKind::InverseSquareRoot,
            }];
            if r > 0.0 {
                edges.push(Edge {
                    at: -r,
                    kind: EdgeKind::ConstraintRelease,
                });
            }
            MeasureDensity::half_line(
                |x| constrained_at(&curve, which, x),
                r,
                d0,
                0.5,
                edges,
                FarEnd::Truncated { cutoff },
            )
        };
        let mu1 = build(Constraint::Rho1, bp.r1)?;
        let mu3 = build(Constraint::Rho3, bp.r3)?;
        Ok(LimitingMeasures { curve, mu1, mu2, mu3 })
    }

    pub fn params(&self) -> ModelParams {
        self.curve.params
    }

    /// Constraint measure `rho` restricted to `(-r, 0)`.
    pub fn rho_restricted(&self, which: Constraint, r: f64) -> Result<MeasureDensity> {
        let params = self.curve.params;
        let k = which.prefactor(&params);
        MeasureDensity::interval(
            move |x| Ok(if x < 0.0 { k / (-x).sqrt() } else { 0.0 }),
            -r,
            0.0,
            2.0 * k * r.sqrt(),
            vec![Edge {
                at: 0.0,
                kind: EdgeKind::InverseSquareRoot,
            }],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mp(a: f64, b: f64, t: f64) -> ModelParams {
        ModelParams::new(a, b, t).unwrap()
    }

    #[test]
    fn rho_examples() {
        let p = mp(1.0, 1.0, 0.5);
        assert_relative_eq!(rho_density(Constraint::Rho1, &p, -1.0).unwrap(), 2.0 / PI, max_relative = 1e-15);
        let p4 = mp(4.0, 1.0, 0.5);
        assert_relative_eq!(
            rho_density(Constraint::Rho1, &p4, -0.7).unwrap(),
            2.0 * rho_density(Constraint::Rho1, &p, -0.7).unwrap(),
            max_relative = 1e-15
        );
        assert_relative_eq!(rho_mass(Constraint::Rho1, &p, -4.0, -1.0).unwrap(), 4.0 / PI, max_relative = 1e-15);
        assert!(rho_density(Constraint::Rho3, &p, 0.0).is_err());
        assert!(Constraint::from_index(2).is_err());
    }

    #[test]
    fn case1_mu2_matches_closed_form() {
        // dmu2/dx = sqrt((sqrt x - sqrt p)(sqrt q - sqrt x)) / (2 pi t(1-t) sqrt x)
        for &(a, b, t) in &[(2.0, 2.0, 0.5), (1.5, 0.7, 0.3)] {
            let c = SpectralCurve::new(mp(a, b, t)).unwrap();
            let (p, q) = (c.branch.p, c.branch.q);
            for i in 1..20 {
                let x = p + (q - p) * i as f64 / 20.0;
                let s = x.sqrt();
                let want = ((s - p.sqrt()) * (q.sqrt() - s)).sqrt() / (2.0 * PI * t * (1.0 - t) * s);
                assert_relative_eq!(mu2_at(&c, x).unwrap(), want, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn mu2_vanishes_off_support() {
        let p = mp(2.0, 2.0, 0.5);
        assert_eq!(density_mu2(&p, 5.0).unwrap(), 0.0);
        assert_eq!(density_mu2(&p, 0.2).unwrap(), 0.0);
        assert!(density_mu1(&p, 0.5).is_err());
    }

    #[test]
    fn saturation_on_active_interval() {
        let p = mp(1.0 / 3.0, 0.25, 0.5);
        let c = SpectralCurve::new(p).unwrap();
        let x = -0.5 * c.branch.r1;
        assert_eq!(mu1_at(&c, x).unwrap(), rho_density(Constraint::Rho1, &p, x).unwrap());
        // the sheet values agree with saturation on their own
        let xi = c.xi(Complex64::new(x, 0.0)).unwrap();
        assert!(xi.xi[0].im.abs() < 1e-8);
    }
}
