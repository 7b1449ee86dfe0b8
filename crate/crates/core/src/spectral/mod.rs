//! The quartic spectral curve
//! `xi^4 + A xi^3 + B(z) xi^2 + C(z) xi + D(z) = 0`
//! whose four sheet-labelled solutions encode the limiting measures.
//!
//! Phases are separated by `ab = 1/4` (Case I above it) and, for `ab < 1/4`,
//! by the critical times `t1 < t2` (Case III between them, Case II outside).

mod case1;
mod disc;
mod xi;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::horner;

pub use case1::{case1_endpoints, case1_xi2};
pub use disc::DiscriminantPoly;
pub use xi::XiBranches;

/// One problem instance: start point `a`, end point `b`, rescaled time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    pub t: f64,
}

impl ModelParams {
    pub fn new(a: f64, b: f64, t: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
            return Err(Error::domain(format!("need a > 0 and b > 0, got a={a}, b={b}")));
        }
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::domain(format!("need 0 < t < 1, got t={t}")));
        }
        Ok(ModelParams { a, b, t })
    }

    /// The time-reversed instance `(b, a, 1 - t)`.
    pub fn reversed(&self) -> Self {
        ModelParams {
            a: self.b,
            b: self.a,
            t: 1.0 - self.t,
        }
    }

    /// External field `V(x) = x/(t(1-t)) - 2 sqrt(ax)/t - 2 sqrt(bx)/(1-t)`.
    pub fn external_field(&self, x: f64) -> f64 {
        let (a, b, t) = (self.a, self.b, self.t);
        let s = x.max(0.0).sqrt();
        x / (t * (1.0 - t)) - 2.0 * a.sqrt() * s / t - 2.0 * b.sqrt() * s / (1.0 - t)
    }

    pub(crate) fn tt(&self) -> f64 {
        self.t * (1.0 - self.t)
    }
}

/// Generic phases of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// `ab > 1/4`: no constraint active, `r1 = r3 = 0 < p`.
    #[serde(rename = "I")]
    CaseI,
    /// `r1 > 0`, `r3 = 0`, `p > 0`.
    #[serde(rename = "IIa")]
    CaseIIa,
    /// `r1 = 0`, `r3 > 0`, `p > 0`.
    #[serde(rename = "IIb")]
    CaseIIb,
    /// both constraints active, `p = 0`.
    #[serde(rename = "III")]
    CaseIII,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::CaseI => "I",
            Phase::CaseIIa => "IIa",
            Phase::CaseIIb => "IIb",
            Phase::CaseIII => "III",
        }
    }

    /// Case label without the II subcase.
    pub fn family(self) -> &'static str {
        match self {
            Phase::CaseI => "I",
            Phase::CaseIIa | Phase::CaseIIb => "II",
            Phase::CaseIII => "III",
        }
    }

    pub fn is_case_ii(self) -> bool {
        matches!(self, Phase::CaseIIa | Phase::CaseIIb)
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Rejection thresholds around the non-generic loci `ab = 1/4`, `t = t1, t2`.
#[derive(Debug, Clone, Copy)]
pub struct Genericity {
    pub eps_c: f64,
    pub eps_t: f64,
}

impl Default for Genericity {
    fn default() -> Self {
        Genericity {
            eps_c: 1e-9,
            eps_t: 1e-9,
        }
    }
}

/// Coefficients of the spectral curve. `B(z) = b0 + b1/z`, `C(z) = c1/z`,
/// `D(z) = d1/z + c/(z^2 t^2 (1-t)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveCoeffs {
    pub params: ModelParams,
    #[serde(rename = "A")]
    pub a_const: f64,
    pub b0: f64,
    pub b1: f64,
    pub c1: f64,
    pub d1: f64,
    /// The Case-I constant `c`; zero in all other cases.
    pub c: f64,
}

impl CurveCoeffs {
    /// Coefficient of `1/z^2` in `D(z)`.
    pub fn d2(&self) -> f64 {
        let tt = self.params.tt();
        self.c / (tt * tt)
    }

    /// `[A, B(z), C(z), D(z)]`.
    pub fn at(&self, z: num_complex::Complex64) -> [num_complex::Complex64; 4] {
        let u = 1.0 / z;
        [
            num_complex::Complex64::new(self.a_const, 0.0),
            self.b0 + self.b1 * u,
            self.c1 * u,
            (self.d1 + self.d2() * u) * u,
        ]
    }
}

/// Branch points: `-r1`, `-r3` on the negative axis and `[p, q]` the support
/// of `mu_2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoints {
    pub r1: f64,
    pub r3: f64,
    pub p: f64,
    pub q: f64,
}

/// `t1 <= t2`, the times at which the paths reach and leave the hard edge.
pub fn critical_times(a: f64, b: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain("critical times need a > 0, b > 0"));
    }
    let disc = 1.0 - 4.0 * a * b;
    if disc < 0.0 {
        return Err(Error::domain(format!("critical times exist only for ab < 1/4 (ab = {})", a * b)));
    }
    let s = disc.sqrt();
    let den = 2.0 * (a + b + 1.0);
    Ok(((2.0 * a + 1.0 - s) / den, (2.0 * a + 1.0 + s) / den))
}

/// Phase family without resolving the II subcase; `CaseIIa` stands in for II.
fn coarse_phase(params: &ModelParams, g: Genericity) -> Result<Phase> {
    let ab = params.a * params.b;
    if (ab - 0.25).abs() < g.eps_c {
        return Err(Error::NonGenericPhase {
            ab,
            t: params.t,
            detail: "ab = 1/4".into(),
        });
    }
    if ab > 0.25 {
        return Ok(Phase::CaseI);
    }
    let (t1, t2) = critical_times(params.a, params.b)?;
    if (params.t - t1).abs() < g.eps_t || (params.t - t2).abs() < g.eps_t {
        return Err(Error::NonGenericPhase {
            ab,
            t: params.t,
            detail: format!("t at a critical time ({t1}, {t2})"),
        });
    }
    Ok(if params.t > t1 && params.t < t2 {
        Phase::CaseIII
    } else {
        Phase::CaseIIa
    })
}

/// Phase of a parameter triple.
pub fn classify(params: &ModelParams) -> Result<Phase> {
    classify_with(params, Genericity::default())
}

pub fn classify_with(params: &ModelParams, g: Genericity) -> Result<Phase> {
    match coarse_phase(params, g)? {
        Phase::CaseIIa | Phase::CaseIIb => Ok(SpectralCurve::with_genericity(*params, g)?.phase),
        p => Ok(p),
    }
}

/// Closed-form coefficients for a given phase.
pub fn curve_coeffs(params: &ModelParams, phase: Phase) -> CurveCoeffs {
    let (a, b, t) = (params.a, params.b, params.t);
    let s = 1.0 - t;
    let tt = t * s;
    let c = match phase {
        Phase::CaseI => {
            let d = (a * b).sqrt() - 0.5;
            d * d
        }
        _ => 0.0,
    };
    CurveCoeffs {
        params: *params,
        a_const: -2.0 / tt,
        b0: 1.0 / (tt * tt),
        b1: -b / (s * s) - a / (t * t) + 1.0 / tt,
        c1: 2.0 * b / (t * s * s * s) - 1.0 / (tt * tt),
        d1: -b / (t * t * s.powi(4)),
        c,
    }
}

/// Pole-cleared discriminant `z^6 Disc(z)` of the `c = 0` curve.
pub fn discriminant(params: &ModelParams, z: f64) -> f64 {
    DiscriminantPoly::new(&curve_coeffs(params, Phase::CaseIII)).eval(z)
}

/// Branch points of a generic instance.
pub fn branch_points(params: &ModelParams) -> Result<BranchPoints> {
    Ok(SpectralCurve::new(*params)?.branch)
}

/// Sheet-labelled roots of the spectral curve at `z`.
pub fn xi_branches(params: &ModelParams, z: num_complex::Complex64, phase: Phase) -> Result<XiBranches> {
    XiBranches::evaluate(&curve_coeffs(params, phase), z)
}

/// One cell of a phase diagram over `(t, a)` at fixed `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseCell {
    pub t: f64,
    pub a: f64,
    /// `None` on a non-generic locus
    pub phase: Option<Phase>,
}

/// Phases at the centres of a `grid x grid` lattice covering
/// `t in (0, 1)` and `a in (0, a_max]`, ordered by `a` then `t`.
pub fn phase_diagram(b: f64, a_max: f64, grid: usize) -> Result<Vec<PhaseCell>> {
    use rayon::prelude::*;
    if !(b > 0.0) || !(a_max > 0.0) || !b.is_finite() || !a_max.is_finite() {
        return Err(Error::domain("phase diagram needs b > 0 and a_max > 0"));
    }
    if grid == 0 {
        return Err(Error::domain("grid must be positive"));
    }
    (0..grid * grid)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / grid, k % grid);
            let a = a_max * (i as f64 + 0.5) / grid as f64;
            let t = (j as f64 + 0.5) / grid as f64;
            let phase = match classify(&ModelParams::new(a, b, t)?) {
                Ok(p) => Some(p),
                Err(Error::NonGenericPhase { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(PhaseCell { t, a, phase })
        })
        .collect()
}

/// A classified instance with its coefficients and branch points.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralCurve {
    pub params: ModelParams,
    pub phase: Phase,
    pub coeffs: CurveCoeffs,
    pub branch: BranchPoints,
}

impl SpectralCurve {
    pub fn new(params: ModelParams) -> Result<Self> {
        Self::with_genericity(params, Genericity::default())
    }

    pub fn with_genericity(params: ModelParams, g: Genericity) -> Result<Self> {
        let phase = coarse_phase(&params, g)?;
        if phase == Phase::CaseI {
            let (p, q) = case1_endpoints(&params);
            return Ok(SpectralCurve {
                params,
                phase,
                coeffs: curve_coeffs(&params, phase),
                branch: BranchPoints { r1: 0.0, r3: 0.0, p, q },
            });
        }
        let coeffs = curve_coeffs(&params, phase);
        let poly = DiscriminantPoly::new(&coeffs);
        let roots = poly.nonzero_real_roots();
        let neg: Vec<f64> = roots.iter().copied().filter(|&r| r < 0.0).collect();
        let pos: Vec<f64> = roots.iter().copied().filter(|&r| r > 0.0).collect();
        let fail = |what: &str| {
            Error::RootAssignment(format!(
                "{what}: real roots {roots:?} of the discriminant for (a={}, b={}, t={})",
                params.a, params.b, params.t
            ))
        };
        match phase {
            Phase::CaseIII => {
                if neg.len() != 2 || pos.len() != 1 {
                    return Err(fail("Case III expects two negative and one positive root"));
                }
                let q = pos[0];
                let (ra, rb) = (-neg[0], -neg[1]);
                let (r1, r3) = if ((ra - rb) / ra.max(rb)).abs() < 1e-7 {
                    let r = 0.5 * (ra + rb);
                    (r, r)
                } else {
                    // the root whose collision involves sheets 1 and 2 is r1
                    let gap = (ra - rb).abs();
                    if collides_on_first_pair(&coeffs, ra, gap)? {
                        (ra, rb)
                    } else {
                        (rb, ra)
                    }
                };
                Ok(SpectralCurve {
                    params,
                    phase,
                    coeffs,
                    branch: BranchPoints { r1, r3, p: 0.0, q },
                })
            }
            _ => {
                if neg.len() != 1 || pos.len() != 2 {
                    return Err(fail("Case II expects one negative and two positive roots"));
                }
                let r = -neg[0];
                let first = collides_on_first_pair(&coeffs, r, r)?;
                let (phase, r1, r3) = if first {
                    (Phase::CaseIIa, r, 0.0)
                } else {
                    (Phase::CaseIIb, 0.0, r)
                };
                Ok(SpectralCurve {
                    params,
                    phase,
                    coeffs,
                    branch: BranchPoints {
                        r1,
                        r3,
                        p: pos[0],
                        q: pos[1],
                    },
                })
            }
        }
    }

    pub fn xi(&self, z: num_complex::Complex64) -> Result<XiBranches> {
        XiBranches::evaluate(&self.coeffs, z)
    }
}

/// Whether the branch point `-r` joins sheets 1 and 2 (rather than 3 and 4):
/// just above it, the colliding pair is the one at distance `O(sqrt(eps))`.
fn collides_on_first_pair(coeffs: &CurveCoeffs, r: f64, gap: f64) -> Result<bool> {
    let eps = (1e-8 * r).min(1e-3 * gap).max(1e-14 * r);
    let xi = XiBranches::evaluate(coeffs, num_complex::Complex64::new(-r, eps))?;
    let d12 = (xi.xi[0] - xi.xi[1]).norm();
    let d34 = (xi.xi[2] - xi.xi[3]).norm();
    Ok(d12 < d34)
}

/// Real roots of a real polynomial (ascending coefficients) inside
/// `[-radius, radius]`, located by sign changes on a log-spaced grid on each
/// side of the origin and refined by bisection then Newton.
pub fn scan_real_roots(coeffs: &[f64], radius: f64, points_per_side: usize) -> Vec<f64> {
    let f = |x: f64| horner(coeffs, x).0;
    let lo = radius * 1e-12;
    let grid: Vec<f64> = (0..points_per_side)
        .map(|i| lo * (radius / lo).powf(i as f64 / (points_per_side - 1) as f64))
        .collect();
    let mut roots = Vec::new();
    for sign in [-1.0, 1.0] {
        for w in grid.windows(2) {
            let (x0, x1) = (sign * w[0], sign * w[1]);
            let (f0, f1) = (f(x0), f(x1));
            if f0 == 0.0 {
                roots.push(x0);
            } else if f0 * f1 < 0.0 {
                roots.push(refine_bracketed(coeffs, x0, x1));
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

fn refine_bracketed(coeffs: &[f64], mut lo: f64, mut hi: f64) -> f64 {
    let f = |x: f64| horner(coeffs, x).0;
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) * flo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < 1e-13 * mid.abs() {
            break;
        }
    }
    newton_polish(coeffs, 0.5 * (lo + hi))
}

pub(crate) fn newton_polish(coeffs: &[f64], mut x: f64) -> f64 {
    let (mut p, _) = horner(coeffs, x);
    for _ in 0..20 {
        let (_, dp) = horner(coeffs, x);
        if dp == 0.0 {
            break;
        }
        let cand = x - p / dp;
        let (pc, _) = horner(coeffs, cand);
        if pc.abs() < p.abs() {
            x = cand;
            p = pc;
        } else {
            break;
        }
    }
    x
}
