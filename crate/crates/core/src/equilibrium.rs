//! Discretised vector equilibrium problem, minimised directly.
//!
//! Measures are piecewise constant on cells: `nu_1, nu_3` on geometric cells
//! of `[-M, 0]` and `nu_2` on uniform cells of `[0, L]`. The energy
//!
//! `E = I(nu1) + I(nu2) + I(nu3) - I(nu1, nu2) - I(nu2, nu3) + int V dnu2`
//!
//! becomes a quadratic form in the cell weights, minimised by spectral
//! projected gradient over `{sum w1 = 1/2, 0 <= w1 <= cap1}`,
//! `{sum w2 = 1, w2 >= 0}` and the analogue for `w3`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{Constraint, LimitingMeasures};
use crate::quad::gauss_legendre;
use crate::spectral::{classify, ModelParams};

const GRADED_CELLS: usize = 15;

/// Crude upper bound for the right end of `supp mu_2`.
pub fn support_bound(params: &ModelParams) -> f64 {
    let (a, b, t) = (params.a, params.b, params.t);
    let m = (a.sqrt() * (1.0 - t) + b.sqrt() * t).powi(2);
    m + 4.0 * params.tt() + 4.0 * (m * params.tt()).sqrt()
}

/// Cells of the two half-lines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    /// Increasing edges from `-M` to `0`.
    pub neg_edges: Vec<f64>,
    /// Increasing edges from `0` to `L`.
    pub pos_edges: Vec<f64>,
}

impl GridSpec {
    pub fn new(neg_edges: Vec<f64>, pos_edges: Vec<f64>) -> Result<Self> {
        let check = |e: &[f64], name: &str| -> Result<()> {
            if e.len() < 2 || e.iter().any(|x| !x.is_finite()) || e.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Grid(format!("{name} edges must be finite, strictly increasing, at least two")));
            }
            Ok(())
        };
        check(&neg_edges, "negative")?;
        check(&pos_edges, "positive")?;
        if *neg_edges.last().unwrap() != 0.0 || pos_edges[0] != 0.0 {
            return Err(Error::Grid("negative cells must end at 0 and positive cells start at 0".into()));
        }
        Ok(GridSpec { neg_edges, pos_edges })
    }

    /// `n_neg` log-spaced cells on `[-m, 0]` (the innermost one is
    /// `[-m 1e-7, 0]`) and `n_pos` cells on `[0, l]`: uniform, except that
    /// for `n_pos >= 64` the first one is halved repeatedly into 16.
    pub fn geometric(m: f64, n_neg: usize, l: f64, n_pos: usize) -> Result<Self> {
        if !(m > 0.0 && l > 0.0) || n_neg < 2 || n_pos < 2 {
            return Err(Error::Grid("need m, l > 0 and at least two cells per side".into()));
        }
        const DECADES: f64 = 7.0;
        let mut neg: Vec<f64> = (0..n_neg)
            .map(|k| -m * 10f64.powf(-DECADES * k as f64 / (n_neg - 1) as f64))
            .collect();
        neg.push(0.0);
        // the first uniform cell is split geometrically towards 0, where
        // mu_2 may blow up like x^{-1/2}
        let graded = if n_pos >= 64 { GRADED_CELLS } else { 0 };
        let n_uniform = n_pos - graded;
        let h = l / n_uniform as f64;
        let mut pos = vec![0.0];
        pos.extend((0..graded).rev().map(|j| h * 0.5f64.powi(j as i32 + 1)));
        pos.extend((1..=n_uniform).map(|k| l * k as f64 / n_uniform as f64));
        Self::new(neg, pos)
    }

    /// Default layout sized by a bound `Q` on the right endpoint that does
    /// not use the spectral curve: `Q = m + 4 t(1-t) + 4 sqrt(m t(1-t))` with
    /// `m = (sqrt(a)(1-t) + sqrt(b) t)^2`, the squared mean path plus a
    /// spread term. `M = 1e3 max(1, Q)` and `L = 2.5 Q`.
    pub fn for_params(params: &ModelParams, n_neg: usize, n_pos: usize) -> Result<Self> {
        let q = support_bound(params);
        Self::geometric(1e3 * q.max(1.0), n_neg, 2.5 * q, n_pos)
    }

    pub fn n_neg(&self) -> usize {
        self.neg_edges.len() - 1
    }

    pub fn n_pos(&self) -> usize {
        self.pos_edges.len() - 1
    }

    /// All cells as `(lo, hi)`, negative ones first.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.neg_edges
            .windows(2)
            .chain(self.pos_edges.windows(2))
            .map(|w| (w[0], w[1]))
            .collect()
    }
}

/// Cell weights of `(nu1, nu2, nu3)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasureTriple {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub w3: Vec<f64>,
}

/// A discretised instance.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumProblem {
    pub params: ModelParams,
    pub grid: GridSpec,
    /// exact `rho_1` mass of each negative cell
    pub caps1: Vec<f64>,
    /// exact `rho_3` mass of each negative cell
    pub caps3: Vec<f64>,
    /// `V` at positive cell midpoints
    pub v: Vec<f64>,
    #[serde(skip)]
    k_nn: DMatrix<f64>,
    #[serde(skip)]
    k_pp: DMatrix<f64>,
    #[serde(skip)]
    k_np: DMatrix<f64>,
}

/// `F'' = log|u|`, `F(0) = 0`.
fn second_primitive(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        0.5 * u * u * u.abs().ln() - 0.75 * u * u
    }
}

/// Mean of `-log|x - y|` over two uniform cells.
fn cell_interaction(c1: (f64, f64), c2: (f64, f64)) -> f64 {
    let (a1, b1) = c1;
    let (a2, b2) = c2;
    let (w1, w2) = (b1 - a1, b2 - a2);
    let gap = (a2 - b1).max(a1 - b2);
    if gap > 2.0 * w1.max(w2) {
        let d = 0.5 * ((a1 + b1) - (a2 + b2));
        return -d.abs().ln();
    }
    if c1 == c2 {
        return -w1.ln() + 1.5;
    }
    let f = second_primitive;
    -(f(b1 - a2) - f(a1 - a2) - f(b1 - b2) + f(a1 - b2)) / (w1 * w2)
}

fn interaction_block(rows: &[(f64, f64)], cols: &[(f64, f64)]) -> DMatrix<f64> {
    let data: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|&r| cols.iter().map(|&c| cell_interaction(r, c)).collect())
        .collect();
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| data[i][j])
}

/// Assemble the interaction matrices, field and caps.
pub fn discretize(params: &ModelParams, grid: &GridSpec) -> Result<EquilibriumProblem> {
    let grid = GridSpec::new(grid.neg_edges.clone(), grid.pos_edges.clone())?;
    let neg: Vec<(f64, f64)> = grid.neg_edges.windows(2).map(|w| (w[0], w[1])).collect();
    let pos: Vec<(f64, f64)> = grid.pos_edges.windows(2).map(|w| (w[0], w[1])).collect();
    let cap = |which: Constraint| -> Vec<f64> {
        let k = which.prefactor(params);
        neg.iter().map(|&(lo, hi)| 2.0 * k * ((-lo).sqrt() - (-hi).sqrt())).collect()
    };
    let caps1 = cap(Constraint::Rho1);
    let caps3 = cap(Constraint::Rho3);
    for (caps, name) in [(&caps1, "rho_1"), (&caps3, "rho_3")] {
        let total: f64 = caps.iter().sum();
        if total < 0.5 {
            return Err(Error::Infeasible(format!(
                "{name} carries only {total} on [{}, 0]; widen the negative grid",
                grid.neg_edges[0]
            )));
        }
    }
    let v = pos.iter().map(|&(lo, hi)| params.external_field(0.5 * (lo + hi))).collect();
    Ok(EquilibriumProblem {
        params: *params,
        caps1,
        caps3,
        v,
        k_nn: interaction_block(&neg, &neg),
        k_pp: interaction_block(&pos, &pos),
        k_np: interaction_block(&neg, &pos),
        grid,
    })
}

/// Euclidean projection onto `{sum x = total, 0 <= x}`.
fn project_simplex(y: &[f64], total: f64) -> Vec<f64> {
    let mut s = y.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (k, &v) in s.iter().enumerate() {
        acc += v;
        let cand = (acc - total) / (k + 1) as f64;
        if v - cand > 0.0 {
            tau = cand;
        } else {
            break;
        }
    }
    y.iter().map(|&v| (v - tau).max(0.0)).collect()
}

/// Euclidean projection onto `{sum x = total, 0 <= x <= cap}`.
fn project_capped(y: &[f64], cap: &[f64], total: f64) -> Vec<f64> {
    let mass = |tau: f64| -> f64 { y.iter().zip(cap).map(|(&v, &c)| (v - tau).clamp(0.0, c)).sum() };
    let mut lo = y.iter().zip(cap).map(|(&v, &c)| v - c).fold(f64::INFINITY, f64::min);
    let mut hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // solve for tau exactly on the free set of the bracket
    let tau0 = 0.5 * (lo + hi);
    let mut fixed = 0.0;
    let mut free_sum = 0.0;
    let mut free_n = 0usize;
    for (&v, &c) in y.iter().zip(cap) {
        let x = v - tau0;
        if x <= 0.0 {
        } else if x >= c {
            fixed += c;
        } else {
            free_sum += v;
            free_n += 1;
        }
    }
    let tau = if free_n > 0 {
        (free_sum - (total - fixed)) / free_n as f64
    } else {
        tau0
    };
    y.iter().zip(cap).map(|(&v, &c)| (v - tau).clamp(0.0, c)).collect()
}

impl EquilibriumProblem {
    /// Mass-proportional start: `w2` uniform in `x`, `w1, w3` proportional to
    /// the caps.
    pub fn uniform_start(&self) -> DiscreteMeasureTriple {
        let l = self.grid.pos_edges.last().unwrap();
        let w2 = self.grid.pos_edges.windows(2).map(|w| (w[1] - w[0]) / l).collect();
        let scaled = |caps: &[f64]| {
            let s = 0.5 / caps.iter().sum::<f64>();
            caps.iter().map(|c| c * s).collect()
        };
        DiscreteMeasureTriple {
            w1: scaled(&self.caps1),
            w2,
            w3: scaled(&self.caps3),
        }
    }

    /// Nearest feasible triple to arbitrary weights.
    pub fn project(&self, t: &DiscreteMeasureTriple) -> DiscreteMeasureTriple {
        DiscreteMeasureTriple {
            w1: project_capped(&t.w1, &self.caps1, 0.5),
            w2: project_simplex(&t.w2, 1.0),
            w3: project_capped(&t.w3, &self.caps3, 0.5),
        }
    }

    pub fn check_feasible(&self, t: &DiscreteMeasureTriple, tol: f64) -> Result<()> {
        let (nn, np) = (self.grid.n_neg(), self.grid.n_pos());
        if t.w1.len() != nn || t.w3.len() != nn || t.w2.len() != np {
            return Err(Error::Infeasible("weight vectors do not match the grid".into()));
        }
        let sums = [t.w1.iter().sum::<f64>(), t.w2.iter().sum(), t.w3.iter().sum()];
        for (s, want) in sums.iter().zip([0.5, 1.0, 0.5]) {
            if (s - want).abs() > tol {
                return Err(Error::Infeasible(format!("mass {s} instead of {want}")));
            }
        }
        let boxed = |w: &[f64], caps: &[f64]| w.iter().zip(caps).all(|(&x, &c)| x >= -tol && x <= c + tol);
        if !boxed(&t.w1, &self.caps1) || !boxed(&t.w3, &self.caps3) || t.w2.iter().any(|&x| x < -tol) {
            return Err(Error::Infeasible("weights violate the bounds".into()));
        }
        Ok(())
    }

    fn energy_raw(&self, w1: &DVector<f64>, w2: &DVector<f64>, w3: &DVector<f64>) -> f64 {
        let v = DVector::from_column_slice(&self.v);
        let k_np_w2 = &self.k_np * w2;
        w1.dot(&(&self.k_nn * w1)) + w3.dot(&(&self.k_nn * w3)) + w2.dot(&(&self.k_pp * w2))
            - w1.dot(&k_np_w2)
            - w3.dot(&k_np_w2)
            + v.dot(w2)
    }

    /// Discrete energy of a feasible triple.
    pub fn energy(&self, t: &DiscreteMeasureTriple) -> Result<f64> {
        self.check_feasible(t, 1e-9)?;
        let (w1, w2, w3) = vecs(t);
        Ok(self.energy_raw(&w1, &w2, &w3))
    }

    /// `I(nu)` of a signed measure given by its weights on all cells
    /// (negative cells first).
    pub fn signed_energy(&self, w: &[f64]) -> f64 {
        let nn = self.grid.n_neg();
        let a = DVector::from_column_slice(&w[..nn]);
        let b = DVector::from_column_slice(&w[nn..]);
        a.dot(&(&self.k_nn * &a)) + b.dot(&(&self.k_pp * &b)) + 2.0 * a.dot(&(&self.k_np * &b))
    }

    fn gradient(&self, w1: &DVector<f64>, w2: &DVector<f64>, w3: &DVector<f64>) -> [DVector<f64>; 3] {
        let k_np_w2 = &self.k_np * w2;
        let v = DVector::from_column_slice(&self.v);
        let g1 = 2.0 * (&self.k_nn * w1) - &k_np_w2;
        let g3 = 2.0 * (&self.k_nn * w3) - &k_np_w2;
        let g2 = 2.0 * (&self.k_pp * w2) - self.k_np.tr_mul(&(w1 + w3)) + v;
        // a constant shift per block does not change the projected step;
        // removing the multiplier (the mean over free cells) keeps g.d free
        // of cancellation against rounding in the block mass
        let centre = |g: DVector<f64>, w: &DVector<f64>, caps: Option<&[f64]>| {
            let free = |k: usize| w[k] > 0.0 && caps.is_none_or(|c| w[k] < c[k]);
            let (sum, n) = (0..w.len()).filter(|&k| free(k)).fold((0.0, 0usize), |(s, n), k| (s + g[k], n + 1));
            if n == 0 {
                return g;
            }
            g.add_scalar(-sum / n as f64)
        };
        [
            centre(g1, w1, Some(&self.caps1)),
            centre(g2, w2, None),
            centre(g3, w3, Some(&self.caps3)),
        ]
    }

    pub fn minimize(&self, opts: &MinimizeOpts) -> Result<(DiscreteMeasureTriple, MinimizeReport)> {
        self.minimize_from(&self.uniform_start(), opts)
    }

    /// Spectral projected gradient with Barzilai-Borwein steps and Armijo
    /// backtracking. Without convergence the best iterate is returned with
    /// `converged = false`.
    pub fn minimize_from(
        &self,
        start: &DiscreteMeasureTriple,
        opts: &MinimizeOpts,
    ) -> Result<(DiscreteMeasureTriple, MinimizeReport)> {
        self.check_feasible(start, 1e-9)?;
        let mut x = start.clone();
        let (mut w1, mut w2, mut w3) = vecs(&x);
        let mut e = self.energy_raw(&w1, &w2, &w3);
        let mut g = self.gradient(&w1, &w2, &w3);
        let mut alpha = 1.0;
        let mut iterations = 0;
        let mut pg = [f64::INFINITY; 3];
        let mut energies = Vec::new();
        let mut converged = false;
        let mut stalls = 0;
        while iterations < opts.max_iter {
            pg = self.projected_gradient(&x, &g);
            if pg.iter().all(|&r| r < opts.tol) {
                converged = true;
                break;
            }
            iterations += 1;
            let trial = DiscreteMeasureTriple {
                w1: (&w1 - alpha * &g[0]).as_slice().to_vec(),
                w2: (&w2 - alpha * &g[1]).as_slice().to_vec(),
                w3: (&w3 - alpha * &g[2]).as_slice().to_vec(),
            };
            let p = vecs(&self.project(&trial));
            let d = [&p.0 - &w1, &p.1 - &w2, &p.2 - &w3];
            let slope: f64 = d.iter().zip(&g).map(|(di, gi)| di.dot(gi)).sum();
            if slope >= 0.0 {
                // rounding stalled the short BB step; retry with a unit step
                stalls += 1;
                if stalls > 3 {
                    break;
                }
                alpha = 1.0;
                continue;
            }
            stalls = 0;
            // the energy is quadratic, so the change along d is exact in
            // terms of the slope and the curvature, free of cancellation
            let v = DVector::from_column_slice(&self.v);
            let curv = self.energy_raw(&d[0], &d[1], &d[2]) - v.dot(&d[1]);
            let mut lambda = 1.0;
            while lambda * slope + lambda * lambda * curv > 1e-4 * lambda * slope {
                lambda *= 0.5;
                if lambda < 1e-20 {
                    break;
                }
            }
            let change = lambda * slope + lambda * lambda * curv;
            if !(change < 0.0) {
                break;
            }
            let n1 = &w1 + lambda * &d[0];
            let n2 = &w2 + lambda * &d[1];
            let n3 = &w3 + lambda * &d[2];
            let en = e + change;
            let gn = self.gradient(&n1, &n2, &n3);
            let s = [&n1 - &w1, &n2 - &w2, &n3 - &w3];
            let y = [&gn[0] - &g[0], &gn[1] - &g[1], &gn[2] - &g[2]];
            let ss: f64 = s.iter().map(|v| v.dot(v)).sum();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a.dot(b)).sum();
            alpha = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { 1e10 };
            w1 = n1;
            w2 = n2;
            w3 = n3;
            e = en;
            g = gn;
            x = DiscreteMeasureTriple {
                w1: w1.as_slice().to_vec(),
                w2: w2.as_slice().to_vec(),
                w3: w3.as_slice().to_vec(),
            };
            if opts.record_energies {
                energies.push(e);
            }
        }
        Ok((
            x,
            MinimizeReport {
                energy: e,
                iterations,
                converged,
                kkt_residuals: pg,
                energies,
            },
        ))
    }

    /// `max |P(w - grad) - w|` per block.
    fn projected_gradient(&self, x: &DiscreteMeasureTriple, g: &[DVector<f64>; 3]) -> [f64; 3] {
        let step = |w: &[f64], gi: &DVector<f64>| -> Vec<f64> { w.iter().zip(gi.iter()).map(|(a, b)| a - b).collect() };
        let p = self.project(&DiscreteMeasureTriple {
            w1: step(&x.w1, &g[0]),
            w2: step(&x.w2, &g[1]),
            w3: step(&x.w3, &g[2]),
        });
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        [dist(&p.w1, &x.w1), dist(&p.w2, &x.w2), dist(&p.w3, &x.w3)]
    }
}

fn vecs(t: &DiscreteMeasureTriple) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    (
        DVector::from_column_slice(&t.w1),
        DVector::from_column_slice(&t.w2),
        DVector::from_column_slice(&t.w3),
    )
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinimizeOpts {
    /// stop when every block's projected-gradient norm is below this
    pub tol: f64,
    pub max_iter: usize,
    /// keep the energy after every accepted step
    pub record_energies: bool,
}

impl Default for MinimizeOpts {
    fn default() -> Self {
        MinimizeOpts {
            tol: 1e-10,
            max_iter: 50_000,
            record_energies: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizeReport {
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// projected-gradient norms of the `w1, w2, w3` blocks
    pub kkt_residuals: [f64; 3],
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub energies: Vec<f64>,
}

impl MinimizeReport {
    pub fn require_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
                residual: self.kkt_residuals.iter().copied().fold(0.0, f64::max),
            })
        }
    }
}

/// Support endpoints read off the discrete weights.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EstimatedEndpoints {
    pub p: f64,
    pub q: f64,
    pub r1: f64,
    pub r3: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    /// `None` when the comparison was skipped
    #[serde(rename = "L1_mu1")]
    pub l1_mu1: Option<f64>,
    #[serde(rename = "L1_mu2")]
    pub l1_mu2: Option<f64>,
    #[serde(rename = "L1_mu3")]
    pub l1_mu3: Option<f64>,
    pub support_endpoints_estimated: EstimatedEndpoints,
    /// spectral branch points, when computed
    pub branch_points: Option<crate::spectral::BranchPoints>,
    pub skipped: Option<String>,
}

/// Density threshold for support detection, relative to the mean density
/// `1/L` of a unit mass spread over `[0, L]`.
const SUPPORT_THRESHOLD: f64 = 1e-3;
/// Relative slack for calling a cell saturated.
const SATURATION_SLACK: f64 = 1e-6;

impl EquilibriumProblem {
    pub fn estimate_endpoints(&self, t: &DiscreteMeasureTriple) -> EstimatedEndpoints {
        let e = &self.grid.pos_edges;
        let dens: Vec<f64> = t.w2.iter().zip(e.windows(2)).map(|(w, c)| w / (c[1] - c[0])).collect();
        let level = SUPPORT_THRESHOLD / e[e.len() - 1];
        let first = dens.iter().position(|&d| d > level).unwrap_or(0);
        let last = dens.iter().rposition(|&d| d > level).unwrap_or(dens.len() - 1);
        let saturated_to = |w: &[f64], caps: &[f64]| -> f64 {
            let ne = &self.grid.neg_edges;
            let mut r = 0.0;
            for i in (0..w.len()).rev() {
                if w[i] >= caps[i] * (1.0 - SATURATION_SLACK) {
                    r = -ne[i];
                } else {
                    break;
                }
            }
            r
        };
        EstimatedEndpoints {
            p: if first == 0 { 0.0 } else { e[first] },
            q: e[last + 1],
            r1: saturated_to(&t.w1, &self.caps1),
            r3: saturated_to(&t.w3, &self.caps3),
        }
    }

    /// L1 distances between the cell densities and the spectral densities.
    /// Skipped when `ab` is within `1e-6` of `1/4`.
    pub fn compare_to_spectral(&self, t: &DiscreteMeasureTriple) -> ComparisonReport {
        let est = self.estimate_endpoints(t);
        let skip = |why: String| ComparisonReport {
            l1_mu1: None,
            l1_mu2: None,
            l1_mu3: None,
            support_endpoints_estimated: est,
            branch_points: None,
            skipped: Some(why),
        };
        let params = self.params;
        if (params.a * params.b - 0.25).abs() < 1e-6 {
            return skip("ab within 1e-6 of 1/4".into());
        }
        if classify(&params).is_err() {
            return skip("parameters are not generic".into());
        }
        let m = match LimitingMeasures::new(params) {
            Ok(m) => m,
            Err(e) => return skip(e.to_string()),
        };
        let (nodes, weights) = gauss_legendre(8);
        let l1 = |edges: &[f64], w: &[f64], dens: &dyn Fn(f64) -> f64| -> f64 {
            edges
                .windows(2)
                .zip(w)
                .map(|(c, &wi)| {
                    let (lo, hi) = (c[0], c[1]);
                    let h = 0.5 * (hi - lo);
                    let level = wi / (hi - lo);
                    nodes
                        .iter()
                        .zip(&weights)
                        .map(|(&s, &ws)| ws * h * (level - dens(lo + h * (s + 1.0))).abs())
                        .sum::<f64>()
                })
                .sum()
        };
        let ne = &self.grid.neg_edges;
        let beyond = |mu: &crate::measures::MeasureDensity| mu.mass_between(f64::NEG_INFINITY, ne[0]).unwrap_or(0.0);
        let l1_mu1 = l1(ne, &t.w1, &|x| m.mu1.density(x)) + beyond(&m.mu1);
        let l1_mu3 = l1(ne, &t.w3, &|x| m.mu3.density(x)) + beyond(&m.mu3);
        let l1_mu2 = l1(&self.grid.pos_edges, &t.w2, &|x| m.mu2.density(x));
        ComparisonReport {
            l1_mu1: Some(l1_mu1),
            l1_mu2: Some(l1_mu2),
            l1_mu3: Some(l1_mu3),
            support_endpoints_estimated: est,
            branch_points: Some(m.curve.branch),
            skipped: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp(a: f64, b: f64, t: f64) -> ModelParams {
        ModelParams::new(a, b, t).unwrap()
    }

    fn toy() -> EquilibriumProblem {
        let g = GridSpec::new(vec![-4.0, -1.0, -0.25, 0.0], vec![0.0, 0.5, 1.0, 2.0]).unwrap();
        discretize(&mp(1.0, 1.0, 0.5), &g).unwrap()
    }

    #[test]
    fn caps_are_exact() {
        let p = toy();
        assert!((p.caps1[0] - 4.0 / std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn field_at_midpoint() {
        let g = GridSpec::new(vec![-1e4, 0.0], vec![0.0, 2.0]).unwrap();
        let p = discretize(&mp(1.0, 1.0, 0.5), &g).unwrap();
        assert!((p.v[0] + 4.0).abs() < 1e-14);
    }

    #[test]
    fn self_energy_of_uniform_cell() {
        // -log(2) + 3/2 for width 2
        assert!((cell_interaction((0.0, 2.0), (0.0, 2.0)) - (1.5 - 2f64.ln())).abs() < 1e-15);
        // adjacent cells by quadrature
        let (n, w) = gauss_legendre(40);
        let mut s = 0.0;
        for (i, &x) in n.iter().enumerate() {
            for (j, &y) in n.iter().enumerate() {
                let (xx, yy) = (0.5 * (x + 1.0), 1.0 + 0.5 * (y + 1.0));
                s += w[i] * w[j] * 0.25 * -(yy - xx).abs().ln();
            }
        }
        assert!((cell_interaction((0.0, 1.0), (1.0, 2.0)) - s).abs() < 1e-4);
    }

    #[test]
    fn interaction_symmetric() {
        let p = toy();
        assert_eq!(p.k_nn, p.k_nn.transpose());
        assert_eq!(p.k_pp, p.k_pp.transpose());
    }

    #[test]
    fn projections_preserve_mass() {
        let y = [0.3, -0.2, 0.9, 0.1];
        let s = project_simplex(&y, 1.0);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(s.iter().all(|&v| v >= 0.0));
        let cap = [0.2, 0.2, 0.2, 0.2];
        let c = project_capped(&y, &cap, 0.5);
        assert!((c.iter().sum::<f64>() - 0.5).abs() < 1e-15);
        assert!(c.iter().zip(&cap).all(|(v, k)| *v >= 0.0 && v <= k));
    }

    #[test]
    fn attraction_lowers_energy() {
        // nu2 moved towards nu1 lowers -I(nu1, nu2)
        let p = toy();
        let near = -p.k_np[(2, 0)];
        let far = -p.k_np[(2, 2)];
        assert!(near < far);
    }

    #[test]
    fn infeasible_grid_detected() {
        let g = GridSpec::new(vec![-0.01, 0.0], vec![0.0, 1.0]).unwrap();
        assert!(matches!(discretize(&mp(1.0, 1.0, 0.5), &g), Err(Error::Infeasible(_))));
    }
}
