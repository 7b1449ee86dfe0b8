#![allow(dead_code)]

use sqbpaths::kernel::CorrelationKernel;
use sqbpaths::quad::gauss_legendre;
use sqbpaths::spectral::{ModelParams, Phase};

pub fn mp(a: f64, b: f64, t: f64) -> ModelParams {
    ModelParams::new(a, b, t).unwrap()
}

/// One representative instance per phase family.
pub const CASE_I: (f64, f64, f64) = (2.0, 2.0, 0.5);
pub const CASE_II: (f64, f64, f64) = (0.5, 0.25, 0.9);
pub const CASE_III: (f64, f64, f64) = (0.2, 0.3, 0.5);

pub fn representatives() -> [(Phase, ModelParams); 3] {
    let p = |(a, b, t)| mp(a, b, t);
    [(Phase::CaseI, p(CASE_I)), (Phase::CaseIIa, p(CASE_II)), (Phase::CaseIII, p(CASE_III))]
}

/// Composite Gauss-Legendre rule on `[lo, hi]`.
pub fn composite_rule(lo: f64, hi: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (xs, ws) = gauss_legendre(order);
    let h = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for k in 0..panels {
        let c = lo + (k as f64 + 0.5) * h;
        for (x, w) in xs.iter().zip(&ws) {
            out.push((c + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

/// Rule for kernel integrals over `(0, x_max)`: a graded first panel plus
/// uniform panels.
pub fn kernel_rule(k: &CorrelationKernel) -> Vec<(f64, f64)> {
    let x_max = k.x_max;
    let mut rule = composite_rule(0.0, 0.01 * x_max, 8, 24);
    rule.extend(composite_rule(0.01 * x_max, x_max, 120, 24));
    rule
}

/// L1 distance between a histogram of `samples` and the probability density
/// `f` on `bins` equal cells of `[lo, hi]`, with everything outside the
/// range lumped into one extra cell.
pub fn histogram_l1<F: Fn(f64) -> f64>(samples: &[f64], f: F, lo: f64, hi: f64, bins: usize) -> f64 {
    let h = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut outside = 0usize;
    for &x in samples {
        let k = ((x - lo) / h).floor();
        if k >= 0.0 && (k as usize) < bins {
            counts[k as usize] += 1;
        } else {
            outside += 1;
        }
    }
    let total = samples.len() as f64;
    let mut l1 = 0.0;
    let mut inside_mass = 0.0;
    for (k, &c) in counts.iter().enumerate() {
        let m: f64 = composite_rule(lo + k as f64 * h, lo + (k + 1) as f64 * h, 1, 12)
            .iter()
            .map(|&(x, w)| w * f(x))
            .sum();
        inside_mass += m;
        l1 += (c as f64 / total - m).abs();
    }
    l1 + (outside as f64 / total - (1.0 - inside_mass)).abs()
}
