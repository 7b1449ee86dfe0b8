mod common;

use sqbpaths::kernel::{CorrelationKernel, EnsembleSpec};
use sqbpaths::simulate::{mcmc_positions, path_ensemble, path_ensembles, McmcOptions, PathEnsemble};

use common::{histogram_l1, mp};

fn spec(n: usize, a: f64, b: f64, t: f64) -> EnsembleSpec {
    EnsembleSpec::new(n, 0.0, mp(a, b, t)).unwrap()
}

fn positions_at(fans: &[PathEnsemble], k: usize) -> Vec<f64> {
    fans.iter().flat_map(|e| e.paths.iter().map(move |p| p[k])).collect()
}

fn equispaced(m: usize) -> Vec<f64> {
    (1..=m).map(|k| k as f64 / (m + 1) as f64).collect()
}

#[test]
fn four_point_intensity() {
    let s = spec(4, 1.0, 1.0, 0.5);
    let opts = McmcOptions {
        thin: 5,
        ..Default::default()
    };
    let run = mcmc_positions(&s, 0.5, 40_000, 21, &opts).unwrap();
    assert!(run.warning.is_none(), "{:?}", run.warning);
    let k = CorrelationKernel::new(&s).unwrap();
    let xs: Vec<f64> = run.samples.iter().flat_map(|r| r.positions.clone()).collect();
    let l1 = histogram_l1(&xs, |x| k.mean_density(x).unwrap(), 0.0, k.x_max, 50);
    assert!(l1 < 0.1, "L1 {l1}");
}

#[test]
fn fans_are_reproducible() {
    let s = spec(4, 1.0, 1.0, 0.5);
    let opts = McmcOptions {
        burn_in: 100,
        thin: 2,
        ..Default::default()
    };
    let grid = [0.3, 0.6];
    let a = path_ensemble(&s, &grid, &opts, 5).unwrap();
    let b = path_ensemble(&s, &grid, &opts, 5).unwrap();
    let c = path_ensemble(&s, &grid, &opts, 6).unwrap();
    assert_eq!(a.paths, b.paths);
    assert_ne!(a.paths, c.paths);
    let many = path_ensembles(&s, &grid, &opts, 5, 3).unwrap();
    assert_eq!(many[0].paths, a.paths);
    assert_eq!(many[1].paths, c.paths);
}

#[test]
fn case_one_fans_avoid_the_hard_edge() {
    let s = spec(6, 2.0, 2.0, 0.5);
    let opts = McmcOptions {
        burn_in: 300,
        thin: 5,
        ..Default::default()
    };
    let fans = path_ensembles(&s, &equispaced(19), &opts, 100, 30).unwrap();
    for e in &fans {
        let low = e.paths[0].iter().copied().fold(f64::INFINITY, f64::min);
        assert!(low > 0.1, "seed {}: lowest path reaches {low}", e.seed);
    }
}

#[test]
fn case_three_fans_reach_the_hard_edge() {
    let third = 1.0 / 3.0;
    let s = spec(8, third, third, 0.5);
    let opts = McmcOptions {
        burn_in: 300,
        thin: 5,
        ..Default::default()
    };
    let grid = equispaced(9);
    let mid = grid.iter().position(|&t| t == 0.5).unwrap() + 1;
    let fans = path_ensembles(&s, &grid, &opts, 200, 30).unwrap();
    let touching = fans.iter().filter(|e| e.paths[0][mid] < 0.05).count();
    assert!(touching >= 27, "{touching}/30 fans near 0 at t = 1/2");
}

#[test]
fn spread_grows_like_square_root_at_the_ends() {
    let s = spec(2, 1.0, 1.0, 0.5);
    let opts = McmcOptions {
        burn_in: 200,
        thin: 2,
        ..Default::default()
    };
    let grid = [0.005, 0.01, 0.02, 0.04, 0.96, 0.98, 0.99, 0.995];
    let fans = path_ensembles(&s, &grid, &opts, 300, 400).unwrap();
    let sd = |k: usize| {
        let xs = positions_at(&fans, k);
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    };
    // time_grid has 0 prepended, so slice k sits at index k + 1
    let start = (sd(4) / sd(1)).ln() / 8f64.ln();
    let end = (sd(5) / sd(8)).ln() / 8f64.ln();
    assert!((start - 0.5).abs() < 0.1, "slope at t = 0: {start}");
    assert!((end - 0.5).abs() < 0.1, "slope at t = 1: {end}");
}

#[test]
fn fan_marginal_matches_single_time_law() {
    let s = spec(4, 1.0, 1.0, 0.5);
    let opts = McmcOptions {
        burn_in: 30,
        thin: 2,
        ..Default::default()
    };
    let fans = path_ensembles(&s, &[0.25, 0.5], &opts, 1_000, 3_000).unwrap();
    let k = CorrelationKernel::new(&s).unwrap();
    let xs = positions_at(&fans, 2);
    let l1 = histogram_l1(&xs, |x| k.mean_density(x).unwrap(), 0.0, k.x_max, 30);
    assert!(l1 < 0.15, "L1 {l1}");
}
