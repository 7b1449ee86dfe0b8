//! Quadrature and interpolation helpers shared by the measure, kernel and
//! verification code.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208327232495,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// 10-point Gauss weights for the odd-indexed Kronrod abscissae.
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOpts {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOpts {
    fn default() -> Self {
        QuadOpts {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 2000,
        }
    }
}

impl QuadOpts {
    pub fn tol(abs_tol: f64, rel_tol: f64) -> Self {
        QuadOpts {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub converged: bool,
}

fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    for (j, (&x, &w)) in XGK[..10].iter().zip(&WGK[..10]).enumerate() {
        let dx = h * x;
        let s = f(c - dx) + f(c + dx);
        resk += w * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    let val = resk * h;
    let err = ((resk - resg) * h).abs();
    (val, err)
}

struct Piece {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive 21-point Gauss-Kronrod quadrature on `[a, b]`.
///
/// Integrable endpoint singularities (logarithmic, inverse square root) are
/// handled by bisection; interior singularities should be passed as
/// breakpoints through [`integrate_points`].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOpts) -> QuadResult {
    integrate_points(&mut f, &[a, b], opts)
}

/// As [`integrate`], with the initial partition given by the sorted `points`.
pub fn integrate_points<F: FnMut(f64) -> f64>(f: &mut F, points: &[f64], opts: QuadOpts) -> QuadResult {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (val, err) = gk21(f, a, b);
        total += val;
        total_err += err;
        heap.push(Piece { a, b, val, err });
    }
    let mut n = heap.len();
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= tol || !total.is_finite() {
            break;
        }
        if n >= opts.max_intervals {
            return QuadResult {
                value: total,
                abs_err: total_err,
                converged: false,
            };
        }
        let Some(worst) = heap.pop() else { break };
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // interval below floating-point resolution
            heap.push(Piece { err: 0.0, ..worst });
            total_err -= worst.err;
            continue;
        }
        let (v1, e1) = gk21(f, worst.a, m);
        let (v2, e2) = gk21(f, m, worst.b);
        total += v1 + v2 - worst.val;
        total_err += e1 + e2 - worst.err;
        heap.push(Piece { a: worst.a, b: m, val: v1, err: e1 });
        heap.push(Piece { a: m, b: worst.b, val: v2, err: e2 });
        n += 1;
    }
    // re-sum to shed accumulated rounding from the incremental updates
    let (value, abs_err) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.val, e + p.err));
    QuadResult {
        value,
        abs_err,
        converged: value.is_finite(),
    }
}

/// [`integrate_points`] that fails when the tolerance was not reached.
pub fn integrate_checked<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], opts: QuadOpts) -> Result<f64> {
    let r = integrate_points(&mut f, points, opts);
    if !r.converged {
        return Err(Error::Quadrature(format!(
            "estimate {} with error {:e} on [{}, {}]",
            r.value,
            r.abs_err,
            points[0],
            points[points.len() - 1]
        )));
    }
    Ok(r.value)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Chebyshev interpolant on `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct Chebyshev {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

impl Chebyshev {
    /// Interpolate at `n` Chebyshev points of the first kind (interior only).
    pub fn fit<F: FnMut(f64) -> Result<f64>>(mut f: F, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let values = (0..n)
            .map(|k| {
                let th = std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                f(0.5 * (lo + hi) + 0.5 * (hi - lo) * th.cos())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_values(&values, lo, hi))
    }

    fn from_values(values: &[f64], lo: f64, hi: f64) -> Self {
        let n = values.len();
        let nf = n as f64;
        let coeffs = (0..n)
            .map(|j| {
                let s: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / nf).cos())
                    .sum();
                if j == 0 {
                    s / nf
                } else {
                    2.0 * s / nf
                }
            })
            .collect();
        Chebyshev { lo, hi, coeffs }
    }

    /// Double the node count until the trailing coefficients fall below
    /// `rel_tol` times the largest one or below `abs_tol`, or `max_n` is
    /// reached.
    pub fn fit_adaptive<F: FnMut(f64) -> Result<f64>>(
        mut f: F,
        lo: f64,
        hi: f64,
        rel_tol: f64,
        abs_tol: f64,
        max_n: usize,
    ) -> Result<Self> {
        let mut n = 32;
        loop {
            let c = Self::fit(&mut f, lo, hi, n)?;
            if c.tail_ratio() < rel_tol || c.tail_abs() < abs_tol || 2 * n > max_n {
                return Ok(c);
            }
            n *= 2;
        }
    }

    /// Size of the last few coefficients relative to the largest one.
    pub fn tail_ratio(&self) -> f64 {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let k = (self.coeffs.len() / 8).max(2);
        let tail = self.coeffs[self.coeffs.len() - k..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
        tail / scale
    }

    /// Drop trailing coefficients of magnitude at most `threshold`.
    pub fn chop(&mut self, threshold: f64) {
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.abs() <= threshold) {
            self.coeffs.pop();
        }
    }

    /// Largest of the last few coefficients.
    pub fn tail_abs(&self) -> f64 {
        let k = (self.coeffs.len() / 8).max(2);
        self.coeffs[self.coeffs.len() - k..].iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * s * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        s * b1 - b2 + self.coeffs[0]
    }

    /// Exact integral of the interpolant over `[lo, hi]`.
    pub fn integral(&self) -> f64 {
        let s: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(j, _)| j % 2 == 0)
            .map(|(j, c)| {
                let jf = j as f64;
                2.0 * c / (1.0 - jf * jf)
            })
            .sum();
        0.5 * (self.hi - self.lo) * s
    }
}
