use std::f64::consts::PI;

use super::density::{Edge, EdgeKind, FarEnd, MeasureDensity, Support};
use crate::error::{Error, Result};

/// Density at `x <= -c` of the balayage of `delta_s` onto `K_c = (-inf, -c]`:
/// `sqrt(s + c) / (pi sqrt|x + c| (s - x))`.
///
/// Any `s > -c` is accepted; the sweep of a point of `(-c, 0)` is needed when
/// a constraint is active.
pub fn balayage_delta(s: f64, c: f64, x: f64) -> Result<f64> {
    if !(c >= 0.0) || !(s > -c) {
        return Err(Error::domain(format!("balayage needs c >= 0 and s > -c (s={s}, c={c})")));
    }
    if !(x <= -c) {
        return Err(Error::domain(format!("balayage density lives on x <= -c (x={x}, c={c})")));
    }
    Ok(kernel(s, c, x))
}

fn kernel(s: f64, c: f64, x: f64) -> f64 {
    (s + c).sqrt() / (PI * (-x - c).sqrt() * (s - x))
}

/// Density at `x` of `Bal(nu, K_c)` for a measure `nu` carried by `(-c, inf)`.
pub fn balayage_of_measure(measure: &MeasureDensity, c: f64, x: f64) -> Result<f64> {
    let lo = match measure.support {
        Support::Interval { lo, .. } => lo,
        Support::HalfLine { .. } => {
            return Err(Error::domain("balayage source must have bounded support"));
        }
    };
    if !(c >= 0.0) || lo < -c {
        return Err(Error::domain(format!("source support must lie in (-c, inf) (lo={lo}, c={c})")));
    }
    if !(x < -c) {
        return Err(Error::domain(format!("balayage density lives on x < -c (x={x}, c={c})")));
    }
    measure.integrate(|s| kernel(s, c, x))
}

/// `Bal(nu, K_c)` as an interpolated measure on `(-inf, -c]`.
pub fn balayage_measure(measure: &MeasureDensity, c: f64) -> Result<MeasureDensity> {
    let (lo, hi) = match measure.support {
        Support::Interval { lo, hi } => (lo, hi),
        Support::HalfLine { .. } => {
            return Err(Error::domain("balayage source must have bounded support"));
        }
    };
    let d0 = (lo + c).max(1e-3 * (hi + c));
    MeasureDensity::half_line(
        |x| if x < -c { balayage_of_measure(measure, c, x) } else { Ok(0.0) },
        c,
        d0,
        measure.mass,
        vec![Edge {
            at: -c,
            kind: EdgeKind::InverseSquareRoot,
        }],
        FarEnd::Exact,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_checked, QuadOpts};

    #[test]
    fn delta_value() {
        assert!((balayage_delta(1.0, 0.0, -1.0).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(balayage_delta(1.0, 0.5, -0.2).is_err());
    }

    #[test]
    fn delta_mass_is_one() {
        let (s, c) = (2.0, 0.5);
        // x = -c - w^2/(1-w)^2
        let m = integrate_checked(
            |w| {
                if w >= 1.0 {
                    return 0.0;
                }
                let v = w / (1.0 - w);
                let x = -c - v * v;
                kernel(s, c, x) * 2.0 * v / ((1.0 - w) * (1.0 - w))
            },
            &[0.0, 1.0],
            QuadOpts::tol(1e-13, 1e-13),
        )
        .unwrap();
        assert!((m - 1.0).abs() < 1e-8);
    }

    #[test]
    fn delta_potential_identity() {
        let (s, c) = (1.0, 0.5);
        let bal = MeasureDensity::half_line(
            |x| if x < -c { balayage_delta(s, c, x) } else { Ok(0.0) },
            c,
            s + c,
            1.0,
            vec![],
            FarEnd::Exact,
        )
        .unwrap();
        assert!((bal.total_mass() - 1.0).abs() < 1e-9);
        for &x in &[-3.0, -0.5, -0.5000001, -1.0, -40.0] {
            let u = bal.log_potential(x).unwrap();
            assert!((u + (x - s).abs().ln()).abs() < 1e-9, "x={x}: {u}");
        }
    }
}
