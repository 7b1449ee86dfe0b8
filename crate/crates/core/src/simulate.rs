//! Metropolis-Hastings sampling of the positions at a fixed time and of path
//! fans on a time grid.
//!
//! At time `t` the positions have density proportional to
//! `|det f_j(x_k)| |det g_j(x_k)|`. Given the positions `x` at time `s`, the
//! positions at a later grid time `t` have density proportional to
//! `|det p(x_i, y_j)| |det g_j(y_k)|` with the transition density taken over
//! `t - s` and `g` built for time `t` (a Doob transform of the
//! Karlin-McGregor semigroup). Both are sampled with single-coordinate
//! Gaussian moves, reflected back into the gap between the neighbours so the
//! ordering is preserved.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{log_scaled_columns, window, EnsembleSpec};
use crate::linalg::log_det;
use crate::specfun::log_transition_density;
use crate::spectral::ModelParams;

/// Largest number of paths accepted by the samplers.
pub const MAX_SIM_N: usize = 10;
/// Acceptance rates outside this range trigger a [`MixingWarning`].
pub const ACCEPTANCE_RANGE: (f64, f64) = (0.1, 0.6);

#[derive(Debug, Clone, Serialize)]
pub struct McmcOptions {
    /// sweeps (one proposal per coordinate) used to adapt the proposal scales
    pub burn_in: usize,
    /// sweeps between recorded states
    pub thin: usize,
    pub target_acceptance: f64,
    /// initial proposal scale for every coordinate; a scale derived from the
    /// parameters is used when absent
    pub initial_sigma: Option<f64>,
}

impl Default for McmcOptions {
    fn default() -> Self {
        McmcOptions {
            burn_in: 2000,
            thin: 10,
            target_acceptance: 0.3,
            initial_sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceSample {
    pub time: f64,
    /// strictly increasing, all positive
    pub positions: Vec<f64>,
}

/// Acceptance rate outside [`ACCEPTANCE_RANGE`] after burn-in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingWarning {
    /// slice time, or `None` for a rate pooled over a whole fan
    pub time: Option<f64>,
    pub acceptance: f64,
    pub proposals: usize,
}

/// Fewer proposals than this give too noisy a rate to warn about.
pub const MIN_PROPOSALS_FOR_WARNING: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct McmcRun {
    pub seed: u64,
    pub samples: Vec<SliceSample>,
    /// acceptance rate after burn-in
    pub acceptance: f64,
    /// frozen proposal scales per coordinate
    pub sigma: Vec<f64>,
    /// proposals rejected because a determinant underflowed
    pub degenerate_proposals: usize,
    pub warning: Option<MixingWarning>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathEnsemble {
    /// `0`, the requested grid, `1`
    pub time_grid: Vec<f64>,
    /// `paths[i][k]`: position of path `i` (in increasing order) at
    /// `time_grid[k]`
    pub paths: Vec<Vec<f64>>,
    pub seed: u64,
    /// acceptance rate per interior slice over its frozen sweeps
    pub acceptance: Vec<f64>,
    /// per slice with enough proposals, and pooled over all slices
    pub warnings: Vec<MixingWarning>,
}

type Column = [(f64, DVector<f64>); 2];

/// A density on ordered tuples of the form `prod_d |det M_d|`, where column
/// `k` of each `M_d` only depends on the `k`-th point.
trait Target: Sync {
    fn column(&self, y: f64) -> Result<Column>;
}

fn log_density_of(cols: &[Column]) -> Option<f64> {
    let n = cols.len();
    let mut total = 0.0;
    for d in 0..2 {
        let m = DMatrix::from_fn(n, n, |j, k| cols[k][d].1[j]);
        let (l, s) = log_det(m);
        if s == 0.0 || !l.is_finite() {
            return None;
        }
        total += l + cols.iter().map(|c| c[d].0).sum::<f64>();
    }
    total.is_finite().then_some(total)
}

struct PositionTarget {
    spec: EnsembleSpec,
    x_max: f64,
}

impl PositionTarget {
    fn new(spec: &EnsembleSpec) -> Self {
        PositionTarget {
            spec: *spec,
            x_max: window(spec).0,
        }
    }
}

impl Target for PositionTarget {
    fn column(&self, y: f64) -> Result<Column> {
        let (f, g) = log_scaled_columns(&self.spec, y, self.x_max)?;
        Ok([f, g])
    }
}

struct TransitionTarget {
    previous: Vec<f64>,
    tau: f64,
    /// ensemble at the new time, used for its `g` family
    spec: EnsembleSpec,
    x_max: f64,
}

impl Target for TransitionTarget {
    fn column(&self, y: f64) -> Result<Column> {
        let logs = self
            .previous
            .iter()
            .map(|&x| log_transition_density(self.spec.alpha, self.tau, x, y))
            .collect::<Result<Vec<_>>>()?;
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let p = DVector::from_iterator(logs.len(), logs.iter().map(|l| (l - top).exp()));
        let (_, g) = log_scaled_columns(&self.spec, y, self.x_max)?;
        Ok([(top, p), g])
    }
}

/// `log` of the unnormalised density of the positions at time `spec.params.t`.
pub fn log_position_density(spec: &EnsembleSpec, positions: &[f64]) -> Result<f64> {
    check_spec(spec)?;
    check_state(spec.n, positions)?;
    let target = PositionTarget::new(spec);
    let cols = positions.iter().map(|&y| target.column(y)).collect::<Result<Vec<_>>>()?;
    log_density_of(&cols).ok_or(Error::DegenerateDeterminant)
}

/// Metropolis-Hastings acceptance probability for a symmetric proposal.
pub fn acceptance_probability(log_current: f64, log_proposed: f64) -> f64 {
    (log_proposed - log_current).exp().min(1.0)
}

/// Folds `y` back into `(lo, hi)` by reflection at the ends.
fn reflect(y: f64, lo: f64, hi: Option<f64>) -> f64 {
    match hi {
        None => lo + (y - lo).abs(),
        Some(hi) => {
            let w = hi - lo;
            let r = (y - lo).rem_euclid(2.0 * w);
            lo + if r > w { 2.0 * w - r } else { r }
        }
    }
}

fn check_spec(spec: &EnsembleSpec) -> Result<()> {
    if spec.n > MAX_SIM_N {
        return Err(Error::domain(format!("sampling supports n <= {MAX_SIM_N}, got {}", spec.n)));
    }
    Ok(())
}

fn check_state(n: usize, x: &[f64]) -> Result<()> {
    if x.len() != n {
        return Err(Error::domain(format!("expected {n} positions, got {}", x.len())));
    }
    if !(x[0] > 0.0) || x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("positions must be positive and strictly increasing"));
    }
    Ok(())
}

struct Chain<'a, T: Target + ?Sized> {
    target: &'a T,
    x: Vec<f64>,
    cols: Vec<Column>,
    log_p: f64,
    sigma: Vec<f64>,
    accepted: Vec<usize>,
    proposed: Vec<usize>,
    degenerate: usize,
}

impl<'a, T: Target + ?Sized> Chain<'a, T> {
    fn new(target: &'a T, x: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let cols = x.iter().map(|&y| target.column(y)).collect::<Result<Vec<_>>>()?;
        let log_p = log_density_of(&cols).ok_or(Error::DegenerateDeterminant)?;
        let n = x.len();
        Ok(Chain {
            target,
            x,
            cols,
            log_p,
            sigma,
            accepted: vec![0; n],
            proposed: vec![0; n],
            degenerate: 0,
        })
    }

    fn sweep(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let n = self.x.len();
        for i in 0..n {
            self.proposed[i] += 1;
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let lo = if i == 0 { 0.0 } else { self.x[i - 1] };
            let hi = self.x.get(i + 1).copied();
            let y = reflect(self.x[i] + self.sigma[i] * z, lo, hi);
            if !(y > lo) || hi.is_some_and(|h| !(y < h)) {
                continue;
            }
            let col = self.target.column(y)?;
            let old = std::mem::replace(&mut self.cols[i], col);
            match log_density_of(&self.cols) {
                Some(lp) if u < acceptance_probability(self.log_p, lp) => {
                    self.x[i] = y;
                    self.log_p = lp;
                    self.accepted[i] += 1;
                }
                res => {
                    if res.is_none() {
                        self.degenerate += 1;
                    }
                    self.cols[i] = old;
                }
            }
        }
        Ok(())
    }

    fn reset_stats(&mut self) {
        self.accepted.iter_mut().for_each(|a| *a = 0);
        self.proposed.iter_mut().for_each(|p| *p = 0);
    }

    /// Burn-in with the proposal scales adapted in batches towards the target
    /// acceptance rate; the scales are frozen afterwards.
    fn burn_in(&mut self, sweeps: usize, target: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        const BATCH: usize = 25;
        let mut done = 0;
        while done < sweeps {
            let b = BATCH.min(sweeps - done);
            self.reset_stats();
            for _ in 0..b {
                self.sweep(rng)?;
            }
            done += b;
            for i in 0..self.x.len() {
                let rate = self.accepted[i] as f64 / self.proposed[i].max(1) as f64;
                let scale = self.x[i].max(1e-12);
                self.sigma[i] = (self.sigma[i] * (2.0 * (rate - target)).exp()).clamp(1e-10 * scale, 1e3 * scale);
            }
        }
        self.reset_stats();
        Ok(())
    }

    /// `(accepted, proposed)` since the last reset
    fn counts(&self) -> (usize, usize) {
        (self.accepted.iter().sum(), self.proposed.iter().sum())
    }

    fn acceptance(&self) -> f64 {
        let (a, p) = self.counts();
        a as f64 / p.max(1) as f64
    }
}

fn mixing_warning(time: Option<f64>, accepted: usize, proposals: usize) -> Option<MixingWarning> {
    let (lo, hi) = ACCEPTANCE_RANGE;
    let acceptance = accepted as f64 / proposals.max(1) as f64;
    (proposals >= MIN_PROPOSALS_FOR_WARNING && !(lo..=hi).contains(&acceptance)).then_some(MixingWarning {
        time,
        acceptance,
        proposals,
    })
}

/// Mean path position `(sqrt(a)(1-t) + sqrt(b) t)^2` and the spread of the
/// positions at `t` for `n` paths.
fn typical_scale(params: &ModelParams, t: f64, n: usize) -> (f64, f64) {
    let m = (params.a.sqrt() * (1.0 - t) + params.b.sqrt() * t).powi(2);
    let spread = 2.0 * (m * t * (1.0 - t) / n as f64).sqrt();
    (m, spread.max(1e-3 * m))
}

fn with_time(spec: &EnsembleSpec, t: f64) -> Result<EnsembleSpec> {
    let p = ModelParams::new(spec.params.a, spec.params.b, t)?;
    Ok(EnsembleSpec { params: p, ..*spec })
}

fn starting_state<T: Target>(target: &T, m: f64, spread: f64, n: usize) -> Result<Vec<f64>> {
    let mut width = spread;
    for _ in 0..30 {
        let x: Vec<f64> = (0..n)
            .map(|k| {
                let off = width * (k as f64 - 0.5 * (n - 1) as f64);
                if off >= 0.0 {
                    m + off
                } else {
                    m * (off / m).exp()
                }
            })
            .collect();
        let cols = x.iter().map(|&y| target.column(y)).collect::<Result<Vec<_>>>()?;
        if log_density_of(&cols).is_some() {
            return Ok(x);
        }
        width *= 1.5;
    }
    Err(Error::DegenerateDeterminant)
}

/// `steps` states of the positions at time `t` (overriding `spec.params.t`),
/// recorded every `opts.thin` sweeps after `opts.burn_in` adaptive sweeps.
pub fn mcmc_positions(spec: &EnsembleSpec, t: f64, steps: usize, seed: u64, opts: &McmcOptions) -> Result<McmcRun> {
    check_spec(spec)?;
    if opts.thin == 0 {
        return Err(Error::domain("thinning must be at least 1"));
    }
    let spec = with_time(spec, t)?;
    let target = PositionTarget::new(&spec);
    let (m, spread) = typical_scale(&spec.params, t, spec.n);
    let x0 = starting_state(&target, m, spread, spec.n)?;
    let sigma = vec![opts.initial_sigma.unwrap_or(spread); spec.n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chain = Chain::new(&target, x0, sigma)?;
    chain.burn_in(opts.burn_in, opts.target_acceptance, &mut rng)?;
    let mut samples = Vec::with_capacity(steps);
    for _ in 0..steps {
        for _ in 0..opts.thin {
            chain.sweep(&mut rng)?;
        }
        samples.push(SliceSample {
            time: t,
            positions: chain.x.clone(),
        });
    }
    let (acc, prop) = chain.counts();
    Ok(McmcRun {
        seed,
        samples,
        acceptance: chain.acceptance(),
        sigma: chain.sigma.clone(),
        degenerate_proposals: chain.degenerate,
        warning: mixing_warning(Some(t), acc, prop),
    })
}

/// One path fan: the first slice from the positions sampler, every later
/// slice from the conditional law given the previous one, each after
/// `opts.burn_in` adaptive and `opts.thin` frozen sweeps.
pub fn path_ensemble(spec: &EnsembleSpec, time_grid: &[f64], opts: &McmcOptions, seed: u64) -> Result<PathEnsemble> {
    check_spec(spec)?;
    if time_grid.is_empty() {
        return Err(Error::domain("time grid is empty"));
    }
    if !(time_grid[0] > 0.0) || !(time_grid[time_grid.len() - 1] < 1.0) || time_grid.windows(2).any(|w| !(w[1] > w[0]))
    {
        return Err(Error::domain("time grid must be strictly increasing inside (0, 1)"));
    }
    if opts.thin == 0 {
        return Err(Error::domain("thinning must be at least 1"));
    }
    let n = spec.n;
    let (a, b) = (spec.params.a, spec.params.b);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slices: Vec<Vec<f64>> = Vec::with_capacity(time_grid.len());
    let mut acceptance = Vec::with_capacity(time_grid.len());
    let mut warnings = Vec::new();

    let mut pooled = (0usize, 0usize);
    let mut finish = |c: &mut Chain<'_, dyn Target>, t: f64, rng: &mut ChaCha8Rng| -> Result<Vec<f64>> {
        c.burn_in(opts.burn_in, opts.target_acceptance, rng)?;
        for _ in 0..opts.thin {
            c.sweep(rng)?;
        }
        let (a, p) = c.counts();
        pooled = (pooled.0 + a, pooled.1 + p);
        acceptance.push(c.acceptance());
        warnings.extend(mixing_warning(Some(t), a, p));
        Ok(c.x.clone())
    };

    let first = with_time(spec, time_grid[0])?;
    let target = PositionTarget::new(&first);
    let (m, spread) = typical_scale(&first.params, time_grid[0], n);
    let x0 = starting_state(&target, m, spread, n)?;
    let sigma = vec![opts.initial_sigma.unwrap_or(spread); n];
    let mut chain = Chain::new(&target as &dyn Target, x0, sigma)?;
    slices.push(finish(&mut chain, time_grid[0], &mut rng)?);

    for w in time_grid.windows(2) {
        let (s, t) = (w[0], w[1]);
        let here = with_time(spec, t)?;
        let tau = (t - s) / (2.0 * n as f64);
        let previous = slices.last().expect("first slice").clone();
        let sigma: Vec<f64> = previous
            .iter()
            .map(|&x| opts.initial_sigma.unwrap_or(2.0 * (x * tau).sqrt().max(1e-6 * x)))
            .collect();
        let target = TransitionTarget {
            previous: previous.clone(),
            tau,
            spec: here,
            x_max: window(&here).0,
        };
        let mut chain = Chain::new(&target as &dyn Target, previous, sigma)?;
        slices.push(finish(&mut chain, t, &mut rng)?);
    }
    warnings.extend(mixing_warning(None, pooled.0, pooled.1));

    let mut grid = Vec::with_capacity(time_grid.len() + 2);
    grid.push(0.0);
    grid.extend_from_slice(time_grid);
    grid.push(1.0);
    let paths = (0..n)
        .map(|i| {
            let mut row = Vec::with_capacity(grid.len());
            row.push(a);
            row.extend(slices.iter().map(|s| s[i]));
            row.push(b);
            row
        })
        .collect();
    Ok(PathEnsemble {
        time_grid: grid,
        paths,
        seed,
        acceptance,
        warnings,
    })
}

/// `count` independent fans in parallel, fan `i` seeded with `seed + i`.
pub fn path_ensembles(
    spec: &EnsembleSpec,
    time_grid: &[f64],
    opts: &McmcOptions,
    seed: u64,
    count: usize,
) -> Result<Vec<PathEnsemble>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| path_ensemble(spec, time_grid, opts, seed.wrapping_add(i)))
        .collect()
}
