use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;

/// Roots of the monic quartic `x^4 + c[0] x^3 + c[1] x^2 + c[2] x + c[3]`
/// from the eigenvalues of the balanced companion matrix, each polished by
/// Newton steps that are kept only while they reduce the residual.
pub fn quartic_roots(c: [Complex64; 4]) -> [Complex64; 4] {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut m = Matrix4::from_element(zero);
    for j in 0..4 {
        m[(0, j)] = -c[j];
    }
    for i in 1..4 {
        m[(i, i - 1)] = one;
    }
    balance(&mut m);
    let ev = match m.eigenvalues() {
        Some(ev) => [ev[0], ev[1], ev[2], ev[3]],
        None => aberth(c),
    };
    ev.map(|r| polish(c, r))
}

fn eval_quartic(c: &[Complex64; 4], x: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &ck in c {
        dp = dp * x + p;
        p = p * x + ck;
    }
    (p, dp)
}

fn polish(c: [Complex64; 4], mut r: Complex64) -> Complex64 {
    let (mut p, _) = eval_quartic(&c, r);
    for _ in 0..3 {
        let (_, dp) = eval_quartic(&c, r);
        if dp.norm() == 0.0 {
            break;
        }
        let cand = r - p / dp;
        let (pc, _) = eval_quartic(&c, cand);
        if pc.norm() < p.norm() {
            r = cand;
            p = pc;
        } else {
            break;
        }
    }
    r
}

// Parlett-Reinsch balancing with powers of two.
fn balance(m: &mut Matrix4<Complex64>) {
    let n = 4;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += m[(j, i)].norm();
                    row += m[(i, j)].norm();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let s = col + row;
            let mut f = 1.0;
            let mut cc = col;
            let mut rr = row;
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while cc >= rr * 2.0 {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if (cc + rr) < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

fn aberth(c: [Complex64; 4]) -> [Complex64; 4] {
    let radius = 1.0 + c.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let mut z: [Complex64; 4] =
        std::array::from_fn(|k| Complex64::from_polar(radius, 0.4 + k as f64 * std::f64::consts::FRAC_PI_2));
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for k in 0..4 {
            let (p, dp) = eval_quartic(&c, z[k]);
            let ratio = p / dp;
            let s: Complex64 = (0..4).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let w = ratio / (1.0 - ratio * s);
            z[k] -= w;
            moved = moved.max(w.norm());
        }
        if moved < 1e-15 * radius {
            break;
        }
    }
    z
}

/// `(log|det m|, sign det m)` by LU with partial pivoting.
pub fn log_det(m: DMatrix<f64>) -> (f64, f64) {
    let n = m.nrows();
    let lu = m.lu();
    let u = lu.u();
    let mut log = 0.0;
    let mut sign = lu.p().determinant::<f64>();
    for i in 0..n {
        let d = u[(i, i)];
        if d == 0.0 {
            return (f64::NEG_INFINITY, 0.0);
        }
        log += d.abs().ln();
        sign *= d.signum();
    }
    (log, sign)
}

/// Horner evaluation of a real polynomial given in ascending powers.
pub fn horner(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}
