mod common;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sqbpaths::kernel::{CorrelationKernel, EnsembleSpec, KernelOptions};
use sqbpaths::measures::density_mu2;
use sqbpaths::spectral::branch_points;
use sqbpaths::Error;

use common::{kernel_rule, mp};

fn spec(n: usize, alpha: f64, (a, b, t): (f64, f64, f64)) -> EnsembleSpec {
    EnsembleSpec::new(n, alpha, mp(a, b, t)).unwrap()
}

#[test]
fn trace_and_reproducing_identities() {
    for &n in &[2usize, 4, 6, 8] {
        for &alpha in &[0.0, 0.5, 2.0] {
            let k = CorrelationKernel::new(&spec(n, alpha, (2.0, 2.0, 0.5))).unwrap();
            let rule = kernel_rule(&k);
            let trace: f64 = rule.iter().map(|&(x, w)| w * k.kernel(x, x).unwrap()).sum();
            assert!((trace - n as f64).abs() < 1e-6, "n={n} alpha={alpha}: trace {trace}");
            for &(x, y) in &[(0.4, 1.5), (2.5, 2.5), (3.9, 0.9)] {
                let lhs: f64 = rule.iter().map(|&(s, w)| w * k.kernel(x, s).unwrap() * k.kernel(s, y).unwrap()).sum();
                let rhs = k.kernel(x, y).unwrap();
                assert!((lhs - rhs).abs() < 1e-6, "n={n} alpha={alpha} ({x},{y}): {lhs} vs {rhs}");
            }
        }
    }
}

fn random_triangular(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => rng.random_range(0.5..2.0),
        std::cmp::Ordering::Less => rng.random_range(-0.5..0.5),
        std::cmp::Ordering::Greater => 0.0,
    })
}

#[test]
fn kernel_is_basis_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for &n in &[4usize, 6, 8] {
        for &alpha in &[0.0, 0.5, 2.0] {
            let s = spec(n, alpha, (1.0, 1.0, 0.5));
            let k0 = CorrelationKernel::new(&s).unwrap();
            let opts = KernelOptions {
                basis_change: Some((random_triangular(n, &mut rng), random_triangular(n, &mut rng))),
                ..Default::default()
            };
            let k1 = CorrelationKernel::with_options(&s, &opts).unwrap();
            for &(x, y) in &[(0.3, 0.3), (1.0, 2.2), (3.0, 0.5)] {
                let (u, v) = (k0.kernel(x, y).unwrap(), k1.kernel(x, y).unwrap());
                assert!((u - v).abs() < 1e-8, "n={n} alpha={alpha}: {u} vs {v}");
            }
        }
    }
}

#[test]
fn limit_does_not_depend_on_alpha() {
    let p = (2.0, 2.0, 0.5);
    let k0 = CorrelationKernel::new(&spec(12, 0.0, p)).unwrap();
    let k2 = CorrelationKernel::new(&spec(12, 2.0, p)).unwrap();
    let mut gap: f64 = 0.0;
    for i in 1..=20 {
        let x = 0.5 + 4.0 * i as f64 / 21.0;
        gap = gap.max((k0.mean_density(x).unwrap() - k2.mean_density(x).unwrap()).abs());
    }
    assert!(gap < 0.05, "{gap}");
}

#[test]
fn diagonal_is_nonnegative_and_localised() {
    let p = mp(2.0, 2.0, 0.5);
    let q = branch_points(&p).unwrap().q;
    let k = CorrelationKernel::new(&EnsembleSpec::new(8, 0.5, p).unwrap()).unwrap();
    for i in 1..200 {
        let x = 2.0 * q * i as f64 / 200.0;
        assert!(k.kernel(x, x).unwrap() > -1e-9, "x={x}");
    }
    assert!(k.mean_density(1.6 * q).unwrap() < 1e-3);
    assert!(k.mean_density(0.5 * q).unwrap() > 0.5 * density_mu2(&p, 0.5 * q).unwrap());
}

#[test]
fn raw_assembly_agrees_at_small_n() {
    let s = spec(4, 0.5, (1.0, 1.0, 0.5));
    let k0 = CorrelationKernel::new(&s).unwrap();
    let k1 = CorrelationKernel::with_options(
        &s,
        &KernelOptions {
            raw: true,
            ..Default::default()
        },
    )
    .unwrap();
    for &(x, y) in &[(0.5, 0.5), (1.5, 0.2)] {
        let (u, v) = (k0.kernel(x, y).unwrap(), k1.kernel(x, y).unwrap());
        // the raw path inverts the unorthonormalised Gram matrix
        let tol = 1e-14 * k1.cond_estimate;
        assert!((u - v).abs() < tol, "{u} vs {v}, tolerance {tol:e}");
    }
}

#[test]
fn invalid_specs() {
    let p = mp(1.0, 1.0, 0.5);
    assert!(matches!(EnsembleSpec::new(3, 0.0, p), Err(Error::Domain(_))));
    assert!(EnsembleSpec::new(0, 0.0, p).is_err());
    assert!(EnsembleSpec::new(4, -1.5, p).is_err());
    let k = CorrelationKernel::new(&EnsembleSpec::new(4, 0.0, p).unwrap()).unwrap();
    assert!(k.kernel(-1.0, 1.0).is_err());
}
