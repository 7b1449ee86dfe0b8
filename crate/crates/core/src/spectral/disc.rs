use nalgebra::DMatrix;
use serde::Serialize;

use super::{newton_polish, CurveCoeffs};
use crate::linalg::horner;

/// `z^6 Disc(z)` as a polynomial of degree at most four in `z`.
///
/// The discriminant of the quartic in `xi` is a polynomial in `u = 1/z` of
/// degree at most six whose `u^0` and `u^1` coefficients vanish identically
/// (`4 B0 = A^2`), so multiplying by `z^6` leaves coefficients of
/// `u^6, ..., u^2` on `z^0, ..., z^4`. For `c = 0` the `z^0` term is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscriminantPoly {
    /// Ascending powers of `z`.
    pub coeffs: [f64; 5],
}

type Poly = Vec<f64>;

fn mul(p: &Poly, q: &Poly) -> Poly {
    let mut r = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            r[i + j] += a * b;
        }
    }
    r
}

fn prod(factors: &[&Poly]) -> Poly {
    factors.iter().fold(vec![1.0], |acc, f| mul(&acc, f))
}

fn add_scaled(acc: &mut Poly, k: f64, p: &Poly) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    for (a, &b) in acc.iter_mut().zip(p) {
        *a += k * b;
    }
}

impl DiscriminantPoly {
    pub fn new(cc: &CurveCoeffs) -> Self {
        let a: Poly = vec![1.0];
        let b: Poly = vec![cc.a_const];
        let c: Poly = vec![cc.b0, cc.b1];
        let d: Poly = vec![0.0, cc.c1];
        let e: Poly = vec![0.0, cc.d1, cc.d2()];
        let terms: [(f64, Vec<&Poly>); 16] = [
            (256.0, vec![&a, &a, &a, &e, &e, &e]),
            (-192.0, vec![&a, &a, &b, &d, &e, &e]),
            (-128.0, vec![&a, &a, &c, &c, &e, &e]),
            (144.0, vec![&a, &a, &c, &d, &d, &e]),
            (-27.0, vec![&a, &a, &d, &d, &d, &d]),
            (144.0, vec![&a, &b, &b, &c, &e, &e]),
            (-6.0, vec![&a, &b, &b, &d, &d, &e]),
            (-80.0, vec![&a, &b, &c, &c, &d, &e]),
            (18.0, vec![&a, &b, &c, &d, &d, &d]),
            (16.0, vec![&a, &c, &c, &c, &c, &e]),
            (-4.0, vec![&a, &c, &c, &c, &d, &d]),
            (-27.0, vec![&b, &b, &b, &b, &e, &e]),
            (18.0, vec![&b, &b, &b, &c, &d, &e]),
            (-4.0, vec![&b, &b, &b, &d, &d, &d]),
            (-4.0, vec![&b, &b, &c, &c, &c, &e]),
            (1.0, vec![&b, &b, &c, &c, &d, &d]),
        ];
        let mut disc: Poly = vec![0.0; 13];
        for (k, fs) in &terms {
            add_scaled(&mut disc, *k, &prod(fs));
        }
        disc.resize(13, 0.0);
        // u^j -> z^(6-j); u^0, u^1 vanish and u^7.. cannot occur
        let mut coeffs = [0.0; 5];
        for (j, cz) in coeffs.iter_mut().enumerate() {
            *cz = disc[6 - j];
        }
        if cc.c == 0.0 {
            coeffs[0] = 0.0;
        }
        DiscriminantPoly { coeffs }
    }

    pub fn eval(&self, z: f64) -> f64 {
        horner(&self.coeffs, z).0
    }

    /// Real roots other than `z = 0`, listed with multiplicity and sorted.
    ///
    /// Roots come from the eigenvalues of the companion matrix so that the
    /// double root of the symmetric case `r1 = r3` is not lost. Simple roots
    /// are polished by Newton on the polynomial, double roots by Newton on its
    /// derivative.
    pub fn nonzero_real_roots(&self) -> Vec<f64> {
        let mut c: Vec<f64> = self.coeffs.to_vec();
        while c.len() > 1 && c[0] == 0.0 {
            c.remove(0);
        }
        while c.len() > 1 && *c.last().unwrap() == 0.0 {
            c.pop();
        }
        let deg = c.len() - 1;
        if deg == 0 {
            return Vec::new();
        }
        let lead = c[deg];
        let mut m = DMatrix::<f64>::zeros(deg, deg);
        for j in 0..deg {
            m[(0, j)] = -c[deg - 1 - j] / lead;
        }
        for i in 1..deg {
            m[(i, i - 1)] = 1.0;
        }
        let ev = m.complex_eigenvalues();
        let mut cand: Vec<num_complex::Complex64> = ev.iter().copied().collect();
        cand.sort_by(|x, y| x.re.total_cmp(&y.re));
        let deriv: Vec<f64> = (1..c.len()).map(|k| k as f64 * c[k]).collect();
        let mut out = Vec::new();
        let mut used = vec![false; cand.len()];
        // |P| at a true double root is rounding-level relative to this
        let size = |z: f64| c.iter().enumerate().map(|(k, ck)| ck.abs() * z.abs().powi(k as i32)).sum::<f64>();
        for i in 0..cand.len() {
            if used[i] {
                continue;
            }
            let zi = cand[i];
            let scale = zi.norm().max(f64::MIN_POSITIVE);
            // a near-coincident partner may be a numerically split double root
            let partner = (i + 1..cand.len())
                .filter(|&j| !used[j])
                .find(|&j| (cand[j] - zi).norm() < 1e-3 * scale);
            if let Some(j) = partner {
                let mid = 0.5 * (zi + cand[j]);
                if mid.im.abs() < 1e-3 * scale {
                    let r = newton_polish(&deriv, mid.re);
                    if horner(&c, r).0.abs() <= 1e-10 * size(r) {
                        used[i] = true;
                        used[j] = true;
                        out.push(r);
                        out.push(r);
                        continue;
                    }
                }
            }
            used[i] = true;
            if zi.im.abs() < 1e-7 * scale {
                out.push(newton_polish(&c, zi.re));
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// Nonzero real roots of odd multiplicity: the points where exactly one
    /// pair of sheets collides. Double roots (nodes of the curve, or two
    /// simultaneous collisions) are dropped.
    pub fn simple_real_roots(&self) -> Vec<f64> {
        let all = self.nonzero_real_roots();
        let mut out = Vec::new();
        let mut i = 0;
        while i < all.len() {
            if i + 1 < all.len() && all[i + 1] == all[i] {
                i += 2;
            } else {
                out.push(all[i]);
                i += 1;
            }
        }
        out
    }
}


#[cfg(test)]
mod case1_tests {
    use super::super::{case1_endpoints, curve_coeffs, ModelParams, Phase};
    use super::*;

    #[test]
    fn case1_simple_roots_are_the_endpoints() {
        for &(a, b, t) in &[(2.0, 2.0, 0.5), (1.5, 0.7, 0.3)] {
            let pm = ModelParams::new(a, b, t).unwrap();
            let r = DiscriminantPoly::new(&curve_coeffs(&pm, Phase::CaseI)).simple_real_roots();
            let (p, q) = case1_endpoints(&pm);
            assert_eq!(r.len(), 2, "{r:?}");
            assert!((r[0] - p).abs() < 1e-10 && (r[1] - q).abs() < 1e-10);
        }
    }
}
