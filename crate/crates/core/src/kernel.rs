//! Finite-n correlation kernel of the positions at time `t`.
//!
//! The positions form a biorthogonal ensemble with
//! `f_{2j-1} = x^{j-1} w11`, `f_{2j} = x^{j-1} w12`,
//! `g_{2j-1} = x^{j-1} w21`, `g_{2j} = x^{j-1} w22`, and
//! `K_n(x, y) = sum_{j,k} f_j(x) (G^{-1})_{kj} g_k(y)` with the Gram matrix
//! `G_{jk} = int f_j g_k`. Since `K_n` only depends on the spans, the
//! default construction replaces `x^{j-1}` by shifted Chebyshev polynomials
//! and orthonormalises both families at the quadrature nodes before
//! forming the mixed Gram matrix. The representation through `x^{j-1}`
//! times two weights whose ratio is smooth is intrinsically sensitive to
//! rounding in that ratio; the amplification is estimated at construction
//! and folded into `cond_estimate`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::specfun::{log_bessel_i_signed, BesselOrder};
use crate::spectral::ModelParams;

/// Largest supported number of paths.
pub const MAX_N: usize = 24;
/// Condition estimate above which a Gram matrix is rejected.
pub const MAX_COND: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub alpha: BesselOrder,
    pub params: ModelParams,
}

impl EnsembleSpec {
    pub fn new(n: usize, alpha: f64, params: ModelParams) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::domain(format!("n must be even and at least 2, got {n}")));
        }
        Ok(EnsembleSpec {
            n,
            alpha: BesselOrder::new(alpha)?,
            params,
        })
    }

    /// `n1 = n2 = n/2`
    pub fn half(&self) -> usize {
        self.n / 2
    }

    fn check_size(&self) -> Result<()> {
        if self.n > MAX_N {
            return Err(Error::domain(format!("n = {} exceeds the double-precision cap {MAX_N}", self.n)));
        }
        Ok(())
    }
}

/// `(log|w|, sign w)` of the four weights at `x > 0`, in the order
/// `w11, w12, w21, w22`.
pub fn log_weights(spec: &EnsembleSpec, x: f64) -> Result<[(f64, f64); 4]> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("weights need x > 0, got {x}")));
    }
    let (a, b, t) = (spec.params.a, spec.params.b, spec.params.t);
    let n = spec.n as f64;
    let al = spec.alpha.value();
    let lx = x.ln();
    let za = 2.0 * n * (a * x).sqrt() / t;
    let zb = 2.0 * n * (b * x).sqrt() / (1.0 - t);
    let w = |pow: f64, decay: f64, order: f64, z: f64| {
        let (li, s) = log_bessel_i_signed(order, z);
        (pow * lx - n * x / decay + li, s)
    };
    Ok([
        w(0.5 * al, t, al, za),
        w(0.5 * (al + 1.0), t, al + 1.0, za),
        w(-0.5 * al, 1.0 - t, al, zb),
        w(-0.5 * (al - 1.0), 1.0 - t, al - 1.0, zb),
    ])
}

fn monomial_basis(spec: &EnsembleSpec, j: usize, x: f64, first: usize) -> Result<(f64, f64)> {
    if j == 0 || j > spec.n {
        return Err(Error::domain(format!("basis index must be in 1..={}, got {j}", spec.n)));
    }
    let w = log_weights(spec, x)?;
    let power = ((j - 1) / 2) as f64;
    let (lw, s) = w[first + (j - 1) % 2];
    Ok((power * x.ln() + lw, s))
}

/// `(log|f_j(x)|, sign f_j(x))`, `j = 1..=n`.
pub fn basis_f(spec: &EnsembleSpec, j: usize, x: f64) -> Result<(f64, f64)> {
    monomial_basis(spec, j, x, 0)
}

/// `(log|g_j(x)|, sign g_j(x))`, `j = 1..=n`.
pub fn basis_g(spec: &EnsembleSpec, j: usize, x: f64) -> Result<(f64, f64)> {
    monomial_basis(spec, j, x, 2)
}

/// Composite Gauss-Legendre rule in `s = sqrt(x)` on `(0, x_max)`, returned
/// as nodes and weights in `x`.
fn sqrt_rule(x_max: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    const ORDER: usize = 16;
    let (gn, gw) = gauss_legendre(ORDER);
    let s_max = x_max.sqrt();
    let h = s_max / panels as f64;
    let mut xs = Vec::with_capacity(panels * ORDER);
    let mut ws = Vec::with_capacity(panels * ORDER);
    for p in 0..panels {
        for (u, w) in gn.iter().zip(&gw) {
            let s = h * (p as f64 + 0.5 * (u + 1.0));
            xs.push(s * s);
            ws.push(0.5 * h * w * 2.0 * s);
        }
    }
    (xs, ws)
}

/// Log-weight envelope used to place the quadrature window.
fn log_envelope(spec: &EnsembleSpec, x: f64) -> f64 {
    let w = log_weights(spec, x).expect("x > 0");
    let m = (spec.half() - 1) as f64;
    let lf = w[0].0.max(w[1].0);
    let lg = w[2].0.max(w[3].0);
    lf + lg + 2.0 * m * x.ln().max(0.0)
}

/// Right end of the integration window: beyond the peak of the integrand
/// envelope, where it has fallen by `e^{-45}` (below `1e-14` of the peak
/// with margin).
pub(crate) fn window(spec: &EnsembleSpec) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut x = 1e-6;
    while x < 1e6 {
        let v = log_envelope(spec, x);
        if v > best.0 {
            best = (v, x);
        }
        x *= 1.05;
    }
    let (peak, x_peak) = best;
    let mut x = x_peak;
    while log_envelope(spec, x) > peak - 45.0 {
        x *= 1.02;
    }
    (x, x_peak)
}

/// Basis values at `x` with shifted Chebyshev ladders, each weight scaled by
/// `exp(-shift)`.
fn cheb_basis(spec: &EnsembleSpec, x: f64, x_max: f64, shifts: &[f64; 4]) -> Result<(DVector<f64>, DVector<f64>)> {
    let w = log_weights(spec, x)?;
    Ok(cheb_basis_from(spec, &w, x, x_max, shifts))
}

fn cheb_basis_from(
    spec: &EnsembleSpec,
    w: &[(f64, f64); 4],
    x: f64,
    x_max: f64,
    shifts: &[f64; 4],
) -> (DVector<f64>, DVector<f64>) {
    let h = spec.half();
    let u = 2.0 * x / x_max - 1.0;
    let mut cheb = vec![1.0; h];
    if h > 1 {
        cheb[1] = u;
    }
    for k in 2..h {
        cheb[k] = 2.0 * u * cheb[k - 1] - cheb[k - 2];
    }
    // The second weight of each family is formed from the first through the
    // log ratio, which is much more accurate than either log: the kernel is
    // sensitive to errors in w12/w11 and w22/w21 but not to a common factor.
    let val = |i: usize| w[i].1 * (w[i].0 - shifts[i]).exp();
    let ratio = |i: usize| w[i].1 * w[i - 1].1 * ((w[i].0 - w[i - 1].0) - (shifts[i] - shifts[i - 1])).exp();
    let (w11, w21) = (val(0), val(2));
    let (w12, w22) = (w11 * ratio(1), w21 * ratio(3));
    let f = DVector::from_fn(spec.n, |j, _| cheb[j / 2] * if j % 2 == 0 { w11 } else { w12 });
    let g = DVector::from_fn(spec.n, |j, _| cheb[j / 2] * if j % 2 == 0 { w21 } else { w22 });
    (f, g)
}

/// Both families at `x` in the shifted Chebyshev basis on `(0, x_max)`, as
/// `(log scale, values / exp(log scale))` for one family.
pub(crate) type ScaledColumn = (f64, DVector<f64>);

/// `(log scale, values / exp(log scale))`. Spans and hence determinant
/// ratios are those of the monomial basis.
pub(crate) fn log_scaled_columns(
    spec: &EnsembleSpec,
    x: f64,
    x_max: f64,
) -> Result<(ScaledColumn, ScaledColumn)> {
    let w = log_weights(spec, x)?;
    let shifts = [w[0].0, w[0].0, w[2].0, w[2].0];
    let (f, g) = cheb_basis_from(spec, &w, x, x_max, &shifts);
    Ok(((w[0].0, f), (w[2].0, g)))
}

/// Gram matrix of the monomial basis (each weight scaled by its peak).
#[derive(Debug, Clone, Serialize)]
pub struct GramMatrix {
    #[serde(serialize_with = "ser_matrix")]
    pub g: DMatrix<f64>,
    pub cond_estimate: f64,
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

fn cond(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

struct Nodes {
    x_max: f64,
    shifts: [f64; 4],
    xs: Vec<f64>,
    ws: Vec<f64>,
    /// rows: nodes; columns: basis functions
    f: DMatrix<f64>,
    g: DMatrix<f64>,
}

fn nodes(spec: &EnsembleSpec, panels: usize, monomial: bool) -> Result<Nodes> {
    let (x_max, x_peak) = window(spec);
    let w = log_weights(spec, x_peak)?;
    let shifts = [w[0].0, w[1].0, w[2].0, w[3].0];
    let (xs, ws) = sqrt_rule(x_max, panels);
    let rows: Vec<(DVector<f64>, DVector<f64>)> = xs
        .par_iter()
        .map(|&x| {
            if monomial {
                let eval = |first: usize| {
                    DVector::from_fn(spec.n, |j, _| {
                        let (l, s) = monomial_basis(spec, j + 1, x, first).expect("valid node");
                        s * (l - shifts[first + j % 2]).exp()
                    })
                };
                Ok((eval(0), eval(2)))
            } else {
                cheb_basis(spec, x, x_max, &shifts)
            }
        })
        .collect::<Result<_>>()?;
    let f = DMatrix::from_fn(xs.len(), spec.n, |m, j| rows[m].0[j]);
    let g = DMatrix::from_fn(xs.len(), spec.n, |m, j| rows[m].1[j]);
    Ok(Nodes { x_max, shifts, xs, ws, f, g })
}

/// Nodes at which the mixed inner products `int f_j g_k` have settled:
/// the panel count doubles until the entries change by less than `1e-12` of
/// the largest one.
fn settled(spec: &EnsembleSpec, monomial: bool) -> Result<(Nodes, DMatrix<f64>)> {
    let mut panels = 16;
    let mut prev: Option<DMatrix<f64>> = None;
    loop {
        let nd = nodes(spec, panels, monomial)?;
        let wf = DMatrix::from_fn(nd.xs.len(), spec.n, |m, j| nd.f[(m, j)] * nd.ws[m]);
        let m = wf.transpose() * &nd.g;
        if let Some(p) = &prev {
            let scale = m.amax().max(f64::MIN_POSITIVE);
            if (&m - p).amax() <= 1e-12 * scale {
                return Ok((nd, m));
            }
        }
        if panels >= 1024 {
            return Err(Error::Quadrature(format!("Gram entries did not settle with {panels} panels")));
        }
        prev = Some(m);
        panels *= 2;
    }
}

/// Gram matrix of the raw basis `x^{j-1} w`, each weight scaled by its value
/// at the peak of the integrand.
pub fn gram(spec: &EnsembleSpec) -> Result<GramMatrix> {
    spec.check_size()?;
    let (_, g) = settled(spec, true)?;
    let c = cond(&g);
    if c > MAX_COND {
        return Err(Error::IllConditioned { cond: c });
    }
    Ok(GramMatrix { g, cond_estimate: c })
}

/// How the kernel is assembled.
#[derive(Debug, Clone, Default)]
pub struct KernelOptions {
    /// Invert the raw mixed Gram matrix of the Chebyshev-shifted basis
    /// instead of orthonormalising first. Only sensible for small `n`.
    pub raw: bool,
    /// Replace the `f` and `g` families by `f R_f` and `g R_g` (for
    /// invariance checks).
    pub basis_change: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

#[derive(Debug, Clone)]
enum Assembly {
    /// `phi = R^{-T} f` with `F = Q R` at the nodes
    Orthonormal { r_f: DMatrix<f64>, r_g: DMatrix<f64> },
    Raw,
}

/// `K_n` ready for evaluation.
#[derive(Debug, Clone)]
pub struct CorrelationKernel {
    pub spec: EnsembleSpec,
    /// right end of the quadrature window
    pub x_max: f64,
    /// larger of the mixed Gram condition number and the estimated
    /// amplification of rounding errors in the weights
    pub cond_estimate: f64,
    shifts: [f64; 4],
    assembly: Assembly,
    basis_change: Option<(DMatrix<f64>, DMatrix<f64>)>,
    /// `K(x, y) = phi(x)^T core psi(y)`
    core: DMatrix<f64>,
}

impl CorrelationKernel {
    pub fn new(spec: &EnsembleSpec) -> Result<Self> {
        Self::with_options(spec, &KernelOptions::default())
    }

    pub fn with_options(spec: &EnsembleSpec, opts: &KernelOptions) -> Result<Self> {
        spec.check_size()?;
        let n = spec.n;
        if let Some((rf, rg)) = &opts.basis_change {
            if rf.shape() != (n, n) || rg.shape() != (n, n) {
                return Err(Error::domain("basis change matrices must be n x n"));
            }
        }
        let (nd, _) = settled(spec, false)?;
        let (mut a, mut b) = match &opts.basis_change {
            Some((rf, rg)) => (&nd.f * rf, &nd.g * rg),
            None => (nd.f.clone(), nd.g.clone()),
        };
        for ((mut ra, mut rb), w) in a.row_iter_mut().zip(b.row_iter_mut()).zip(&nd.ws) {
            ra *= w.sqrt();
            rb *= w.sqrt();
        }
        let (mixed, assembly) = if opts.raw {
            (a.transpose() * b, Assembly::Raw)
        } else {
            let (qa, qb) = (a.qr(), b.qr());
            (qa.q().transpose() * qb.q(), Assembly::Orthonormal { r_f: qa.r(), r_g: qb.r() })
        };
        let c = cond(&mixed);
        if !(c <= MAX_COND) {
            return Err(Error::IllConditioned { cond: c });
        }
        // LU: nalgebra's closed-form inverse for n <= 4 loses accuracy
        let inv = mixed.lu().try_inverse().ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
        let mut k = CorrelationKernel {
            spec: *spec,
            x_max: nd.x_max,
            cond_estimate: c,
            shifts: nd.shifts,
            assembly,
            basis_change: opts.basis_change.clone(),
            core: inv.transpose(),
        };
        let amp = k.amplification(&nd)?;
        k.cond_estimate = c.max(amp);
        if !(k.cond_estimate <= MAX_COND) {
            return Err(Error::IllConditioned { cond: k.cond_estimate });
        }
        Ok(k)
    }

    /// Basis vectors at `x` in the assembled representation.
    fn phi_psi(&self, x: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        self.phi_psi_perturbed(x, [0.0; 2])
    }

    // The second weight of each family is scaled by `1 + rel[0]` and
    // `1 + rel[1]`.
    fn phi_psi_perturbed(&self, x: f64, rel: [f64; 2]) -> Result<(DVector<f64>, DVector<f64>)> {
        let (mut f, mut g) = cheb_basis(&self.spec, x, self.x_max, &self.shifts)?;
        for j in (1..self.spec.n).step_by(2) {
            f[j] *= 1.0 + rel[0];
            g[j] *= 1.0 + rel[1];
        }
        if let Some((rf, rg)) = &self.basis_change {
            f = rf.tr_mul(&f);
            g = rg.tr_mul(&g);
        }
        match &self.assembly {
            Assembly::Raw => Ok((f, g)),
            Assembly::Orthonormal { r_f, r_g } => {
                let solve = |r: &DMatrix<f64>, v: DVector<f64>| {
                    r.transpose().solve_lower_triangular(&v).ok_or(Error::IllConditioned { cond: f64::INFINITY })
                };
                Ok((solve(r_f, f)?, solve(r_g, g)?))
            }
        }
    }

    /// How strongly a relative error in the weight ratios `w12/w11` and
    /// `w22/w21` is amplified in `K_n(x, x)`, relative to the largest value
    /// of `K_n(x, x)`, sampled at the nodes carrying the bulk of the mass.
    fn amplification(&self, nd: &Nodes) -> Result<f64> {
        const REL: f64 = 1e-6;
        let mass: Vec<f64> = (0..nd.xs.len())
            .map(|m| (nd.f[(m, 0)] * nd.g[(m, 0)]).abs() * nd.ws[m])
            .collect();
        let total: f64 = mass.iter().sum();
        let mut acc = 0.0;
        let mut next = 0.05;
        let mut worst = 0.0f64;
        let mut peak = 0.0f64;
        for (m, &w) in mass.iter().enumerate() {
            acc += w;
            if acc >= next * total && next < 1.0 {
                next += 0.1;
                let x = nd.xs[m];
                let diag = |rel| -> Result<f64> {
                    let (phi, psi) = self.phi_psi_perturbed(x, rel)?;
                    Ok(phi.dot(&(&self.core * psi)))
                };
                let k0 = diag([0.0; 2])?;
                peak = peak.max(k0.abs());
                // K is linear in each family separately
                for rel in [[REL, 0.0], [0.0, REL]] {
                    worst = worst.max((diag(rel)? - k0).abs() / REL);
                }
            }
        }
        Ok(if peak > 0.0 { worst / peak } else { f64::INFINITY })
    }

    /// `K_n(x, y)` for `x, y > 0`.
    pub fn kernel(&self, x: f64, y: f64) -> Result<f64> {
        let (phi, _) = self.phi_psi(x)?;
        let (_, psi) = self.phi_psi(y)?;
        Ok(phi.dot(&(&self.core * psi)))
    }

    /// `K_n(x, x) / n`.
    pub fn mean_density(&self, x: f64) -> Result<f64> {
        let (phi, psi) = self.phi_psi(x)?;
        Ok(phi.dot(&(&self.core * psi)) / self.spec.n as f64)
    }
}

/// Convenience wrapper around [`CorrelationKernel`].
pub fn kernel(spec: &EnsembleSpec, x: f64, y: f64) -> Result<f64> {
    CorrelationKernel::new(spec)?.kernel(x, y)
}

pub fn mean_density(spec: &EnsembleSpec, x: f64) -> Result<f64> {
    CorrelationKernel::new(spec)?.mean_density(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::bessel_i;

    fn spec(n: usize, alpha: f64) -> EnsembleSpec {
        EnsembleSpec::new(n, alpha, ModelParams::new(1.0, 1.0, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn weight_product_matches_rank_one_entry() {
        let s = spec(4, 0.0);
        let w = log_weights(&s, 1.0).unwrap();
        let n = 4.0;
        let o = BesselOrder::new(0.0).unwrap();
        let direct = (-n / 0.25f64).exp() * bessel_i(o, 4.0 * n, false).unwrap() * bessel_i(o, 4.0 * n, false).unwrap();
        let got = (w[0].0 + w[2].0).exp();
        assert!(((got - direct) / direct).abs() < 1e-12);
    }

    #[test]
    fn weights_positive_and_ladder() {
        let s = spec(6, 0.5);
        for &x in &[0.01, 0.7, 3.0] {
            assert!(log_weights(&s, x).unwrap().iter().all(|w| w.1 > 0.0 && w.0.is_finite()));
            let (l1, _) = basis_f(&s, 1, x).unwrap();
            let (l3, _) = basis_f(&s, 3, x).unwrap();
            assert!((l3 - l1 - x.ln()).abs() < 1e-12);
        }
        assert!(basis_f(&s, 1, 0.0).is_err());
        assert!(basis_g(&s, 7, 1.0).is_err());
    }

    #[test]
    fn spec_validation() {
        let p = ModelParams::new(1.0, 1.0, 0.5).unwrap();
        assert!(EnsembleSpec::new(3, 0.0, p).is_err());
        assert!(EnsembleSpec::new(4, -1.0, p).is_err());
        assert!(CorrelationKernel::new(&EnsembleSpec::new(26, 0.0, p).unwrap()).is_err());
    }

    #[test]
    fn gram_small_n_positive() {
        let g = gram(&spec(4, 0.0)).unwrap();
        assert!(g.g.iter().all(|v| v.is_finite() && *v > 0.0));
        assert!(g.cond_estimate >= 1.0);
    }

    #[test]
    fn raw_and_orthonormal_paths_agree() {
        let s = spec(4, 0.0);
        let k1 = CorrelationKernel::new(&s).unwrap();
        let k2 = CorrelationKernel::with_options(
            &s,
            &KernelOptions {
                raw: true,
                basis_change: None,
            },
        )
        .unwrap();
        for &(x, y) in &[(1.0, 2.0), (0.5, 0.5), (2.5, 1.1)] {
            let (a, b) = (k1.kernel(x, y).unwrap(), k2.kernel(x, y).unwrap());
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn large_n_is_rejected_not_garbage() {
        let s = EnsembleSpec::new(24, 0.0, ModelParams::new(2.0, 2.0, 0.5).unwrap()).unwrap();
        assert!(matches!(CorrelationKernel::new(&s), Err(Error::IllConditioned { .. })));
        let s = EnsembleSpec::new(26, 0.0, ModelParams::new(2.0, 2.0, 0.5).unwrap()).unwrap();
        assert!(matches!(CorrelationKernel::new(&s), Err(Error::Domain(_))));
    }
}
