use num_complex::Complex64;
use serde::Serialize;

use super::CurveCoeffs;
use crate::error::{Error, Result};
use crate::linalg::quartic_roots;

/// The four sheet-labelled roots `xi_1..xi_4` at a point `z`.
///
/// For real `z` the value is the boundary value from the upper half plane,
/// taken at `z + i delta` with `delta = 1e-9 |z|`. The offset is relative so
/// that points close to the hard edge `z = 0`, where some sheets blow up like
/// `z^{-1/2}`, are not smeared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiBranches {
    #[serde(serialize_with = "ser_c")]
    pub z: Complex64,
    #[serde(serialize_with = "ser_c4")]
    pub xi: [Complex64; 4],
}

fn ser_c<S: serde::Serializer>(c: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [c.re, c.im].serialize(s)
}

fn ser_c4<S: serde::Serializer>(c: &[Complex64; 4], s: S) -> std::result::Result<S::Ok, S::Error> {
    c.map(|v| [v.re, v.im]).serialize(s)
}

const MIN_STEP: f64 = 1e-8;
const REAL_AXIS_OFFSET: f64 = 1e-9;

impl XiBranches {
    pub fn evaluate(cc: &CurveCoeffs, z: Complex64) -> Result<Self> {
        if !(z.re.is_finite() && z.im.is_finite()) || z.norm() == 0.0 {
            return Err(Error::domain(format!("xi_branches needs finite z != 0, got {z}")));
        }
        let (target, conj) = if z.im == 0.0 {
            (Complex64::new(z.re, REAL_AXIS_OFFSET * z.re.abs()), false)
        } else if z.im < 0.0 {
            (z.conj(), true)
        } else {
            (z, false)
        };
        let mut xi = track(cc, target)?;
        if conj {
            xi = xi.map(|v| v.conj());
        }
        Ok(XiBranches { z, xi })
    }

    pub fn get(&self, sheet: usize) -> Complex64 {
        self.xi[sheet - 1]
    }
}

/// Leading behaviour of the four sheets as `z -> infinity`.
fn asymptotic(cc: &CurveCoeffs, z: Complex64) -> [Complex64; 4] {
    let p = &cc.params;
    let (t, s) = (p.t, 1.0 - p.t);
    let w = z.sqrt();
    let k1 = p.a.sqrt() / (t * w);
    let k3 = p.b.sqrt() / (s * w);
    let c0 = 1.0 / (t * s);
    [c0 + k1, c0 - k1, k3, -k3]
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let mut seen = [false; 4];
                    if p.iter().all(|&i| !std::mem::replace(&mut seen[i], true)) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

fn label_at_infinity(cc: &CurveCoeffs, z: Complex64) -> Result<[Complex64; 4]> {
    let roots = quartic_roots(cc.at(z));
    let target = asymptotic(cc, z);
    let mut costs: Vec<(f64, [usize; 4])> = permutations4()
        .into_iter()
        .map(|p| {
            let cost = (0..4).map(|k| (roots[p[k]] - target[k]).norm()).fold(0.0, f64::max);
            (cost, p)
        })
        .collect();
    costs.sort_by(|x, y| x.0.total_cmp(&y.0));
    // the best match must be clearly better than the runner-up
    let min_sep = (0..4)
        .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
        .map(|(i, j)| (target[i] - target[j]).norm())
        .fold(f64::INFINITY, f64::min);
    if costs[0].0 > 0.25 * min_sep {
        return Err(Error::RootAssignment(format!(
            "ambiguous labelling at z = {z}: best cost {} vs separation {min_sep}",
            costs[0].0
        )));
    }
    let p = costs[0].1;
    Ok([roots[p[0]], roots[p[1]], roots[p[2]], roots[p[3]]])
}

fn eval(c: &[Complex64; 4], x: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &ck in c {
        dp = dp * x + p;
        p = p * x + ck;
    }
    (p, dp)
}

fn newton(c: &[Complex64; 4], mut x: Complex64) -> Option<Complex64> {
    for _ in 0..40 {
        let (p, dp) = eval(c, x);
        if p.norm() == 0.0 {
            return Some(x);
        }
        if dp.norm() == 0.0 {
            return None;
        }
        let step = p / dp;
        // rounding level of p near x, mapped to a root displacement
        let xn = x.norm();
        let mut mag = xn.powi(4);
        for (k, ck) in c.iter().enumerate() {
            mag += ck.norm() * xn.powi(3 - k as i32);
        }
        let noise = 4.0 * f64::EPSILON * mag / dp.norm();
        x -= step;
        if !x.re.is_finite() || !x.im.is_finite() {
            return None;
        }
        if step.norm() <= (1e-14 * x.norm()).max(10.0 * noise) {
            return Some(x);
        }
    }
    None
}

fn min_sep(r: &[Complex64; 4], k: usize) -> f64 {
    (0..4)
        .filter(|&j| j != k)
        .map(|j| (r[j] - r[k]).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Continue the labelled roots from far up the imaginary axis above
/// `Re z` straight down to `z` (`Im z > 0`), stepping in `log Im z`.
fn track(cc: &CurveCoeffs, z: Complex64) -> Result<[Complex64; 4]> {
    let x = z.re;
    let h0 = 1e6 * z.norm().max(1.0);
    let s_end = z.im.ln();
    let mut s = h0.ln();
    let point = |s: f64| Complex64::new(x, s.exp());
    let mut cur = label_at_infinity(cc, point(s))?;
    let mut prev: Option<([Complex64; 4], f64)> = None;
    let mut h: f64 = 0.5;
    while s > s_end {
        let step = h.min(s - s_end);
        let s_new = if step == s - s_end { s_end } else { s - step };
        let zn = if s_new == s_end { z } else { point(s_new) };
        let pred: [Complex64; 4] = match prev {
            Some((pr, hp)) => std::array::from_fn(|k| cur[k] + (cur[k] - pr[k]) * (step / hp)),
            None => cur,
        };
        let coeffs = cc.at(zn);
        let mut ok = true;
        let mut next = [Complex64::new(0.0, 0.0); 4];
        for k in 0..4 {
            let sep = min_sep(&pred, k).min(min_sep(&cur, k));
            match newton(&coeffs, pred[k]) {
                Some(r) if (r - pred[k]).norm() < 0.3 * sep => next[k] = r,
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            // distinct roots: each converged to a different one
            for i in 0..4 {
                for j in i + 1..4 {
                    if next[i] == next[j] {
                        ok = false;
                    }
                }
            }
        }
        if !ok {
            h *= 0.5;
            if h < MIN_STEP {
                return Err(Error::BranchCollision { z });
            }
            continue;
        }
        prev = Some((cur, step));
        cur = next;
        s = s_new;
        h = (h * 1.5).min(2.0);
    }
    Ok(cur)
}
