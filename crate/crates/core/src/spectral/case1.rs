use num_complex::Complex64;

use super::ModelParams;
use crate::error::{Error, Result};

/// Closed-form endpoints `(p, q)` of the support of `mu_2` when no constraint
/// is active:
/// `sqrt p = (1-t) sqrt a + t sqrt b - sqrt(2t(1-t))`,
/// `sqrt q = (1-t) sqrt a + t sqrt b + sqrt(2t(1-t))`.
///
/// No genericity check is made, so this also covers `ab = 1/4`.
pub fn case1_endpoints(params: &ModelParams) -> (f64, f64) {
    let (a, b, t) = (params.a, params.b, params.t);
    let m = (1.0 - t) * a.sqrt() + t * b.sqrt();
    let h = (2.0 * t * (1.0 - t)).sqrt();
    ((m - h).powi(2), (m + h).powi(2))
}

/// Explicit `xi_2(z)` for Case I, from the factorisation of the curve in
/// `w = sqrt z` (principal branches throughout).
pub fn case1_xi2(params: &ModelParams, z: Complex64) -> Result<Complex64> {
    if z.norm() == 0.0 {
        return Err(Error::domain("case1_xi2 needs z != 0"));
    }
    let (a, b, t) = (params.a, params.b, params.t);
    let tt = t * (1.0 - t);
    let m = (1.0 - t) * a.sqrt() + t * b.sqrt();
    let h = (2.0 * tt).sqrt();
    let (sp, sq) = (m - h, m + h);
    let w = z.sqrt();
    let s = w / tt - a.sqrt() / t + b.sqrt() / (1.0 - t);
    let r = (w - sp).sqrt() * (w - sq).sqrt() / tt;
    Ok(0.5 * (s + r) / w)
}

#[cfg(test)]
mod tests {
    use super::super::{curve_coeffs, xi_branches, Phase};
    use super::*;

    #[test]
    fn example_endpoints() {
        let (p, q) = case1_endpoints(&ModelParams::new(2.0, 2.0, 0.5).unwrap());
        assert!((p - 0.5).abs() < 1e-14 && (q - 4.5).abs() < 1e-14);
        let (p, q) = case1_endpoints(&ModelParams::new(0.5, 0.5, 0.5).unwrap());
        assert!(p.abs() < 1e-15 && (q - 2.0).abs() < 1e-14);
    }

    #[test]
    fn closed_form_solves_curve_and_matches_sheet_two() {
        for &(a, b, t) in &[(2.0, 2.0, 0.5), (1.5, 0.7, 0.3), (0.6, 3.0, 0.8)] {
            let pm = ModelParams::new(a, b, t).unwrap();
            let cc = curve_coeffs(&pm, Phase::CaseI);
            let (p, q) = case1_endpoints(&pm);
            for &z in &[
                Complex64::new(-2.0, 0.0),
                Complex64::new(0.5 * (p + q), 0.0),
                Complex64::new(p + 0.1 * (q - p), 0.0),
                Complex64::new(2.0 * q, 0.3),
                Complex64::new(1.0, -2.0),
            ] {
                let zq = if z.im == 0.0 {
                    Complex64::new(z.re, 1e-9 * z.norm().max(1.0))
                } else {
                    z
                };
                let x2 = case1_xi2(&pm, zq).unwrap();
                let c = cc.at(zq);
                let res = (((x2 + c[0]) * x2 + c[1]) * x2 + c[2]) * x2 + c[3];
                assert!(res.norm() < 1e-8 * (1.0 + x2.norm().powi(4)), "residual {res}");
                let tracked = xi_branches(&pm, z, Phase::CaseI).unwrap().xi[1];
                assert!((tracked - x2).norm() < 1e-6 * (1.0 + x2.norm()), "z={z}: {tracked} vs {x2}");
            }
        }
    }
}
