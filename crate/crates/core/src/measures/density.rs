use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{integrate_checked, Chebyshev, QuadOpts};

/// Where a measure lives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support {
    /// `[lo, hi]`
    Interval { lo: f64, hi: f64 },
    /// `(-inf, end]`
    HalfLine { end: f64 },
}

/// Declared local behaviour of a density at a finite endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// density vanishes like a square root
    SquareRoot,
    /// density blows up like an inverse square root
    InverseSquareRoot,
    /// `rho - mu` vanishes like a square root (constraint released)
    ConstraintRelease,
    /// exponent not asserted
    Unasserted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub at: f64,
    pub kind: EdgeKind,
}

/// Parametrisation `y(u)` of one support piece, with `u` in `[0, umax]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum MapKind {
    /// `y = lo + (hi - lo)(1 - cos(pi u))/2`: square-root behaviour at both ends
    Arc { lo: f64, hi: f64 },
    /// `y = a + d u^2`: square-root behaviour at `a`
    Sqrt { a: f64, d: f64 },
    /// `y = a + (b - a) u`
    Linear { a: f64, b: f64 },
    /// `y = a + d / u^2` for `u` in `(0, 1]`: reaches infinity as `u -> 0`
    Inverted { a: f64, d: f64 },
}

impl MapKind {
    fn y(&self, u: f64) -> f64 {
        match *self {
            MapKind::Arc { lo, hi } => lo + (hi - lo) * 0.5 * (1.0 - (std::f64::consts::PI * u).cos()),
            MapKind::Sqrt { a, d } => a + d * u * u,
            MapKind::Linear { a, b } => a + (b - a) * u,
            MapKind::Inverted { a, d } => a + d / (u * u),
        }
    }

    fn jac(&self, u: f64) -> f64 {
        match *self {
            MapKind::Arc { lo, hi } => {
                (hi - lo).abs() * 0.5 * std::f64::consts::PI * (std::f64::consts::PI * u).sin()
            }
            MapKind::Sqrt { d, .. } => 2.0 * d.abs() * u,
            MapKind::Linear { a, b } => (b - a).abs(),
            MapKind::Inverted { d, .. } => 2.0 * d.abs() / (u * u * u),
        }
    }

    /// `x - y(u)` measured from the nearer anchor, so that it keeps full
    /// relative accuracy when `x` sits on an endpoint.
    fn offset(&self, x: f64, u: f64) -> f64 {
        use std::f64::consts::FRAC_PI_2;
        match *self {
            MapKind::Arc { lo, hi } => {
                if u < 0.5 {
                    (x - lo) - (hi - lo) * (FRAC_PI_2 * u).sin().powi(2)
                } else {
                    (x - hi) + (hi - lo) * (FRAC_PI_2 * u).cos().powi(2)
                }
            }
            MapKind::Sqrt { a, d } => (x - a) - d * u * u,
            MapKind::Linear { a, b } => {
                if u < 0.5 {
                    (x - a) - (b - a) * u
                } else {
                    (x - b) + (b - a) * (1.0 - u)
                }
            }
            MapKind::Inverted { a, d } => (x - a) - d / (u * u),
        }
    }

    /// Ordered `y` range covered by the piece.
    fn range(&self) -> (f64, f64) {
        let (y0, y1) = match *self {
            MapKind::Inverted { a, d } => (a + d, if d > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY }),
            _ => (self.y(0.0), self.y(1.0)),
        };
        (y0.min(y1), y0.max(y1))
    }

    fn inverse(&self, y: f64) -> f64 {
        match *self {
            MapKind::Arc { lo, hi } => {
                let c = (1.0 - 2.0 * (y - lo) / (hi - lo)).clamp(-1.0, 1.0);
                c.acos() / std::f64::consts::PI
            }
            MapKind::Sqrt { a, d } => ((y - a) / d).max(0.0).sqrt(),
            MapKind::Linear { a, b } => (y - a) / (b - a),
            MapKind::Inverted { a, d } => (d / (y - a)).sqrt(),
        }
    }
}

#[derive(Debug, Clone)]
struct Piece {
    map: MapKind,
    /// `density(y(u)) |y'(u)|`
    g: Chebyshev,
}

/// `K |x|^{-3/2} + K2 |x|^{-5/2}` for `x < -cutoff`, matched to the density
/// at `cutoff` and `cutoff/2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerTail {
    pub cutoff: f64,
    pub k: f64,
    pub k2: f64,
    /// relative misfit of the model at `cutoff/4`
    pub drift: f64,
}

impl PowerTail {
    fn fit<F: FnMut(f64) -> Result<f64>>(f: &mut F, cutoff: f64) -> Result<Self> {
        let scaled = |f: &mut F, y: f64| -> Result<f64> { Ok(f(-y)? * y.powf(1.5)) };
        let a1 = scaled(f, cutoff)?;
        let a2 = scaled(f, 0.5 * cutoff)?;
        let a4 = scaled(f, 0.25 * cutoff)?;
        let k = 2.0 * a1 - a2;
        let k2 = (a2 - a1) * cutoff;
        let predicted = k + 4.0 * k2 / cutoff;
        Ok(PowerTail {
            cutoff,
            k,
            k2,
            drift: ((predicted - a4) / k).abs(),
        })
    }

    pub fn density(&self, x: f64) -> f64 {
        let w = -x;
        self.k * w.powf(-1.5) + self.k2 * w.powf(-2.5)
    }

    /// Mass of `(-inf, -w]` for `w >= cutoff`.
    fn mass_beyond(&self, w: f64) -> f64 {
        2.0 * self.k / w.sqrt() + (2.0 / 3.0) * self.k2 / w.powf(1.5)
    }

    pub fn mass(&self) -> f64 {
        self.mass_beyond(self.cutoff)
    }

    /// Weight in `s` after the substitution `|x| = cutoff / s^2`.
    fn weight(&self, s: f64) -> f64 {
        let y = self.cutoff;
        2.0 * self.k / y.sqrt() + 2.0 * self.k2 * s * s / y.powf(1.5)
    }
}

/// How a half-line measure is closed off at `-infinity`.
#[derive(Debug, Clone, Copy)]
pub enum FarEnd {
    /// Interpolate up to `|x| = cutoff` and model the rest by a `-3/2` power tail.
    Truncated { cutoff: f64 },
    /// Interpolate all the way, the last piece mapping `|x| -> infinity`.
    Exact,
}

/// A measure on the real line with a piecewise interpolated density.
#[derive(Debug, Clone)]
pub struct MeasureDensity {
    pub support: Support,
    /// Nominal mass.
    pub mass: f64,
    pub edges: Vec<Edge>,
    pieces: Vec<Piece>,
    tail: Option<PowerTail>,
}

/// Trailing-coefficient thresholds above which an interpolant is rejected.
/// The absolute one is in mass units: pieces far out carry tiny mass and
/// their values are limited by cancellation in `rho + Im xi / pi`.
const MAX_TAIL_RATIO: f64 = 1e-7;
const MAX_TAIL_ABS: f64 = 1e-9;
const FIT_TOL: f64 = 1e-12;
const FIT_ABS_TOL: f64 = 1e-12;
const FIT_MAX_N: usize = 1024;
/// Largest acceptable error estimate of the power-tail model.
pub const TAIL_BUDGET: f64 = 1e-6;

fn fit_piece<F: FnMut(f64) -> Result<f64>>(f: &mut F, map: MapKind) -> Result<Piece> {
    let mut g = Chebyshev::fit_adaptive(|u| Ok(f(map.y(u))? * map.jac(u)), 0.0, 1.0, FIT_TOL, FIT_ABS_TOL, FIT_MAX_N)?;
    if g.tail_ratio() > MAX_TAIL_RATIO && g.tail_abs() > MAX_TAIL_ABS {
        return Err(Error::Quadrature(format!(
            "density interpolant on {:?} stalled at relative tail {:e} (absolute {:e})",
            map.range(),
            g.tail_ratio(),
            g.tail_abs()
        )));
    }
    // coefficients at the rounding plateau carry no information
    let scale = g.tail_abs() / g.tail_ratio().max(f64::MIN_POSITIVE);
    g.chop((FIT_TOL * scale).max(FIT_ABS_TOL).max(4.0 * g.tail_abs()));
    Ok(Piece { map, g })
}

impl MeasureDensity {
    /// A density on `[lo, hi]` with square-root-friendly endpoint mapping.
    pub fn interval<F: FnMut(f64) -> Result<f64>>(
        mut f: F,
        lo: f64,
        hi: f64,
        mass: f64,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::domain(format!("empty interval [{lo}, {hi}]")));
        }
        let piece = fit_piece(&mut f, MapKind::Arc { lo, hi })?;
        Ok(MeasureDensity {
            support: Support::Interval { lo, hi },
            mass,
            edges,
            pieces: vec![piece],
            tail: None,
        })
    }

    /// A density on `(-inf, 0]` whose behaviour changes at `-r` (`r >= 0`).
    ///
    /// `(-r, 0)` is one piece with an inverse-square-root map at 0. Beyond
    /// `-r` the distance `d = -r - x` is covered by a square-root piece on
    /// `[0, d0]` followed by geometric pieces of ratio 8.
    pub fn half_line<F: FnMut(f64) -> Result<f64>>(
        mut f: F,
        r: f64,
        d0: f64,
        mass: f64,
        edges: Vec<Edge>,
        far: FarEnd,
    ) -> Result<Self> {
        if !(r >= 0.0) || !(d0 > 0.0) {
            return Err(Error::domain(format!("half-line needs r >= 0, d0 > 0 (r={r}, d0={d0})")));
        }
        let mut maps = Vec::new();
        if r > 0.0 {
            maps.push(MapKind::Sqrt { a: 0.0, d: -r });
        }
        maps.push(MapKind::Sqrt { a: -r, d: -d0 });
        let d_end = match far {
            FarEnd::Truncated { cutoff } => {
                if cutoff <= r + d0 {
                    return Err(Error::domain("truncation radius inside the first pieces"));
                }
                cutoff - r
            }
            FarEnd::Exact => 64.0 * d0,
        };
        let mut d = d0;
        while d < d_end {
            let next = (8.0 * d).min(d_end);
            maps.push(MapKind::Linear { a: -r - d, b: -r - next });
            d = next;
        }
        let mut tail = None;
        match far {
            FarEnd::Exact => maps.push(MapKind::Inverted { a: -r, d: -d_end }),
            FarEnd::Truncated { cutoff } => {
                tail = Some(PowerTail::fit(&mut f, cutoff)?);
            }
        }
        let pieces = maps.into_iter().map(|m| fit_piece(&mut f, m)).collect::<Result<Vec<_>>>()?;
        Ok(MeasureDensity {
            support: Support::HalfLine { end: 0.0 },
            mass,
            edges,
            pieces,
            tail,
        })
    }

    /// Number of Chebyshev coefficients per piece.
    pub fn interpolant_sizes(&self) -> Vec<usize> {
        self.pieces.iter().map(|p| p.g.len()).collect()
    }

    pub fn tail(&self) -> Option<PowerTail> {
        self.tail
    }

    /// Interpolated density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        for p in &self.pieces {
            let (lo, hi) = p.map.range();
            if x >= lo && x <= hi {
                let u = p.map.inverse(x);
                let j = p.map.jac(u);
                return if j > 0.0 { p.g.eval(u) / j } else { 0.0 };
            }
        }
        match self.tail {
            Some(t) if x < -t.cutoff => t.density(x),
            _ => 0.0,
        }
    }

    /// Total mass of the interpolated density (including any power tail).
    pub fn total_mass(&self) -> f64 {
        self.pieces.iter().map(|p| p.g.integral()).sum::<f64>() + self.tail.map_or(0.0, |t| t.mass())
    }

    /// Mass carried by `[lo, hi]`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> Result<f64> {
        let mut total = 0.0;
        for p in &self.pieces {
            let (a, b) = p.map.range();
            let (l, h) = (lo.max(a), hi.min(b));
            if h <= l {
                continue;
            }
            let (u0, u1) = (p.map.inverse(l), p.map.inverse(h));
            let (u0, u1) = (u0.min(u1), u0.max(u1));
            total += integrate_checked(|u| p.g.eval(u), &[u0, u1], QuadOpts::tol(1e-14, 1e-12))?;
        }
        if let Some(t) = self.tail {
            let h = hi.min(-t.cutoff);
            if h > lo {
                let beyond = |x: f64| if x.is_infinite() { 0.0 } else { t.mass_beyond(-x) };
                total += beyond(h) - beyond(lo);
            }
        }
        Ok(total)
    }

    /// Logarithmic potential `U(x) = -int log|x - y| dmu(y)`.
    pub fn log_potential(&self, x: f64) -> Result<f64> {
        let opts = QuadOpts {
            abs_tol: 1e-12,
            rel_tol: 1e-11,
            max_intervals: 4000,
        };
        let mut total = 0.0;
        for p in &self.pieces {
            let (lo, hi) = p.map.range();
            let map = p.map;
            let f = |u: f64| {
                let d = map.offset(x, u).abs();
                if d == 0.0 {
                    0.0
                } else {
                    -d.ln() * p.g.eval(u)
                }
            };
            if x >= lo && x <= hi {
                // u = su +- len w^2 flattens the log singularity at su
                let su = map.inverse(x).clamp(0.0, 1.0);
                for (len, sign) in [(su, -1.0), (1.0 - su, 1.0)] {
                    if len > 0.0 {
                        total += integrate_checked(
                            |w| 2.0 * len * w * f(su + sign * len * w * w),
                            &[0.0, 1.0],
                            opts,
                        )?;
                    }
                }
            } else {
                total += integrate_checked(f, &[0.0, 1.0], opts)?;
            }
        }
        if let Some(t) = self.tail {
            let y = t.cutoff;
            let estimate = t.mass() * t.drift * ((y + x.abs()).ln().abs() + 2.0);
            if estimate > TAIL_BUDGET {
                return Err(Error::TailBudgetExceeded {
                    estimate,
                    budget: TAIL_BUDGET,
                    cutoff: y,
                });
            }
            // substitute |y| = Y / s^2
            let mut pts = vec![0.0, 1.0];
            if -x > y {
                pts.insert(1, (y / -x).sqrt());
            }
            total -= integrate_checked(
                |s| {
                    let v = (x * s * s + y).abs();
                    if v == 0.0 || s == 0.0 {
                        0.0
                    } else {
                        t.weight(s) * (v.ln() - 2.0 * s.ln())
                    }
                },
                &pts,
                opts,
            )?;
        }
        Ok(total)
    }

    /// `int h(y) dmu(y)` for a smooth `h`.
    pub fn integrate<H: FnMut(f64) -> f64>(&self, mut h: H) -> Result<f64> {
        let mut total = 0.0;
        for p in &self.pieces {
            let map = p.map;
            total += integrate_checked(|u| h(map.y(u)) * p.g.eval(u), &[0.0, 1.0], QuadOpts::tol(1e-14, 1e-12))?;
        }
        if let Some(t) = self.tail {
            let y = t.cutoff;
            total += integrate_checked(
                |s| if s == 0.0 { 0.0 } else { t.weight(s) * h(-y / (s * s)) },
                &[0.0, 1.0],
                QuadOpts::tol(1e-14, 1e-12),
            )?;
        }
        Ok(total)
    }
}
