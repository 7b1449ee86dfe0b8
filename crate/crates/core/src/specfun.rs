//! Modified Bessel function of the first kind and squared Bessel transition
//! densities.
//!
//! `I_nu(x)` is summed from its power series for moderate arguments and from
//! the Hankel large-argument expansion beyond `SERIES_CUTOFF`. Everything is
//! carried in log form so that arguments of order `n` (and beyond the f64
//! overflow point near 700) stay representable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this argument the power series is always used.
pub const SERIES_CUTOFF: f64 = 30.0;

const MAX_SERIES_TERMS: usize = 100_000;

/// Order of a squared Bessel process / Bessel function, `nu > -1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if !nu.is_finite() || nu <= -1.0 {
            return Err(Error::domain(format!("Bessel order must be finite and > -1, got {nu}")));
        }
        Ok(BesselOrder(nu))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for BesselOrder {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        BesselOrder::new(v)
    }
}

impl From<BesselOrder> for f64 {
    fn from(o: BesselOrder) -> f64 {
        o.0
    }
}

/// `I_nu(x)`, or `log I_nu(x)` when `log_scaled` is set.
pub fn bessel_i(nu: BesselOrder, x: f64, log_scaled: bool) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("bessel_i needs x >= 0, got {x}")));
    }
    let (log_abs, sign) = log_bessel_i_signed(nu.value(), x);
    if log_scaled {
        return Ok(log_abs);
    }
    let v = sign * log_abs.exp();
    if v.is_infinite() && log_abs.is_finite() {
        return Err(Error::domain(format!("I_{}({x}) overflows f64; use the log-scaled form", nu.0)));
    }
    Ok(v)
}

/// `(log|I_nu(x)|, sign I_nu(x))` for any real order.
///
/// Orders `nu <= -1` are needed by the ensemble weights (`I_{alpha-1}`).
/// Negative integer orders reduce to `I_{|nu|}`; other negative orders are
/// summed directly, the series having finitely many negative leading terms.
pub fn log_bessel_i_signed(nu: f64, x: f64) -> (f64, f64) {
    debug_assert!(x >= 0.0);
    let nu = if nu < 0.0 && nu == nu.round() { -nu } else { nu };
    if x == 0.0 {
        return if nu == 0.0 {
            (0.0, 1.0)
        } else if nu > 0.0 {
            (f64::NEG_INFINITY, 1.0)
        } else {
            let (_, sg) = libm::lgamma_r(nu + 1.0);
            (f64::INFINITY, sg as f64)
        };
    }
    if use_asymptotic(nu, x) {
        hankel_log(nu, x)
    } else {
        series_log(nu, x)
    }
}

fn use_asymptotic(nu: f64, x: f64) -> bool {
    x > SERIES_CUTOFF && x > 1.5 * nu * nu
}

fn series_log(nu: f64, x: f64) -> (f64, f64) {
    let half = 0.5 * x;
    let q = half * half;
    let (lg, sg) = libm::lgamma_r(nu + 1.0);
    let log_t0 = nu * half.ln() - lg;

    // Terms scaled by the k = 0 term; the ratio t_k / t_{k-1} = q / (k (k + nu)).
    let mut sum = 1.0_f64;
    let mut term = 1.0_f64;
    let mut k = 1usize;
    // Once k + nu > 0 every remaining term has the same sign, so the partial
    // sums can be rescaled when they grow large.
    let mut log_scale = 0.0_f64;
    while k < MAX_SERIES_TERMS {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if sum.abs() > 1e250 {
            log_scale += sum.abs().ln();
            term /= sum.abs();
            sum = sum.signum();
        }
        if kf + nu > 0.0 && kf > half && term.abs() <= 1e-17 * sum.abs() {
            break;
        }
        k += 1;
    }
    (log_t0 + log_scale + sum.abs().ln(), sg as f64 * sum.signum())
}

fn hankel_log(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut sum = 1.0_f64;
    let mut term = 1.0_f64;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= -(mu - odd * odd) / (kf * 8.0 * x);
        if term.abs() > prev {
            break;
        }
        sum += term;
        prev = term.abs();
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln(), 1.0)
}

/// `log p_tau^alpha(x, y)`, the log transition density of the squared Bessel
/// process. `x = 0` uses the Gamma-function form.
pub fn log_transition_density(alpha: BesselOrder, tau: f64, x: f64, y: f64) -> Result<f64> {
    if !(tau > 0.0) || !(x >= 0.0) || !(y > 0.0) {
        return Err(Error::domain(format!(
            "transition density needs tau > 0, x >= 0, y > 0 (got tau={tau}, x={x}, y={y})"
        )));
    }
    let al = alpha.value();
    if x == 0.0 {
        let (lg, _) = libm::lgamma_r(al + 1.0);
        return Ok(al * y.ln() - (al + 1.0) * (2.0 * tau).ln() - lg - y / (2.0 * tau));
    }
    let z = (x * y).sqrt() / tau;
    let (log_i, _) = log_bessel_i_signed(al, z);
    Ok(-(2.0 * tau).ln() + 0.5 * al * (y.ln() - x.ln()) - (x + y) / (2.0 * tau) + log_i)
}

/// `p_tau^alpha(x, y)`, computed in log space and exponentiated.
pub fn transition_density(alpha: BesselOrder, tau: f64, x: f64, y: f64) -> Result<f64> {
    log_transition_density(alpha, tau, x, y).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ord(v: f64) -> BesselOrder {
        BesselOrder::new(v).unwrap()
    }

    // log I_nu(x) from mpmath at 40 digits.
    const REFERENCE: &[(f64, f64, f64)] = &[
        (0.0, 1.0, 0.2359143585071786486894148),
        (1.0, 2.5, 0.9229549745134935450736121),
        (2.5, 10.0, 7.615058171703351680019563),
        (0.3, 29.9, 27.28485417539312993102872),
        (0.3, 30.1, 27.48150242643389561061765),
        (3.0, 45.0, 42.07944035426941549348131),
        (0.5, 200.0, 196.4319027835213089194931),
        (1.0, 700.0, 695.8049852018556523307128),
        (2.0, 1500.0, 1495.423200856479412843596),
        (-0.5, 3.0, 1.534231007599002862052907),
        (-0.5, 40.0, 37.23662173973835910679344),
        (0.7, 0.001, -5.224823877213571902579933),
    ];

    #[test]
    fn values_at_zero() {
        assert_eq!(bessel_i(ord(0.0), 0.0, false).unwrap(), 1.0);
        assert_eq!(bessel_i(ord(1.0), 0.0, false).unwrap(), 0.0);
    }

    #[test]
    fn half_order_closed_form() {
        let v = bessel_i(ord(0.5), 1.0, false).unwrap();
        assert_relative_eq!(v, 0.9376748882454876, max_relative = 1e-13);
    }

    #[test]
    fn large_argument_log_matches_series_oracle() {
        // log of the 200-term series at 40 digits
        let v = bessel_i(ord(0.3), 50.0, true).unwrap();
        assert_relative_eq!(v, 47.12666630316175611729, max_relative = 1e-10);
    }

    #[test]
    fn reference_table() {
        for &(nu, x, want) in REFERENCE {
            let (got, sign) = log_bessel_i_signed(nu, x);
            assert_eq!(sign, 1.0);
            let want_val = want.exp();
            let got_val = got.exp();
            let tol = if x <= SERIES_CUTOFF { 1e-12 } else { 1e-10 };
            assert_relative_eq!(got_val, want_val, max_relative = tol);
        }
    }

    #[test]
    fn orders_below_minus_one() {
        // I_{-1.5}(2) > 0 and I_{-1.5}(60), mpmath
        let (l, s) = log_bessel_i_signed(-1.5, 2.0);
        assert_eq!(s, 1.0);
        assert_relative_eq!(l.exp(), (-0.01517348427062258963465688f64).exp(), max_relative = 1e-12);
        let (l, _) = log_bessel_i_signed(-1.5, 60.0);
        assert_relative_eq!(l, 57.01708206736789568159002, max_relative = 1e-12);
        // I_{-1} = I_1
        assert_eq!(log_bessel_i_signed(-1.0, 3.3), log_bessel_i_signed(1.0, 3.3));
    }

    #[test]
    fn domain_errors() {
        assert!(BesselOrder::new(-1.0).is_err());
        assert!(bessel_i(ord(0.0), -1.0, false).is_err());
        assert!(bessel_i(ord(0.0), 800.0, false).is_err());
        assert!(bessel_i(ord(0.0), 800.0, true).is_ok());
        assert!(transition_density(ord(0.0), 0.0, 1.0, 1.0).is_err());
        assert!(transition_density(ord(0.0), 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn log_mode_consistent_with_direct() {
        for &nu in &[0.0, 0.25, 1.0, 3.5] {
            for i in 1..200 {
                let x = i as f64 * 3.3;
                let d = bessel_i(ord(nu), x, false).unwrap();
                let l = bessel_i(ord(nu), x, true).unwrap();
                assert_relative_eq!(l.exp(), d, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn three_term_recurrence() {
        for i in 0..=60 {
            let x = 0.1 * (1000.0f64).powf(i as f64 / 60.0);
            for j in 1..=10 {
                let nu = 0.5 * j as f64;
                let (lm, sm) = log_bessel_i_signed(nu - 1.0, x);
                let (lp, sp) = log_bessel_i_signed(nu + 1.0, x);
                let (l0, _) = log_bessel_i_signed(nu, x);
                let lhs = sm * (lm - l0).exp() - sp * (lp - l0).exp();
                let rhs = 2.0 * nu / x;
                assert!(((lhs - rhs) / rhs).abs() < 1e-10, "nu={nu} x={x} lhs={lhs} rhs={rhs}");
            }
        }
    }

    #[test]
    fn monotone_in_argument() {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..2000 {
            let x = i as f64 * 0.05;
            let l = bessel_i(ord(1.3), x, true).unwrap();
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn density_continuous_at_origin() {
        let a = ord(1.0);
        let p0 = transition_density(a, 1.0, 0.0, 2.0).unwrap();
        let p = transition_density(a, 1.0, 1e-10, 2.0).unwrap();
        assert!(((p - p0) / p0).abs() < 1e-8);
    }
}
