mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sqbpaths::equilibrium::{discretize, DiscreteMeasureTriple, EquilibriumProblem, GridSpec, MinimizeOpts};
use sqbpaths::spectral::branch_points;

use common::{mp, CASE_I, CASE_III};

fn problem((a, b, t): (f64, f64, f64), n: usize) -> EquilibriumProblem {
    let p = mp(a, b, t);
    discretize(&p, &GridSpec::for_params(&p, n, n).unwrap()).unwrap()
}

fn random_feasible(pb: &EquilibriumProblem, rng: &mut ChaCha8Rng) -> DiscreteMeasureTriple {
    let mut draw = |n: usize| (0..n).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
    let raw = DiscreteMeasureTriple {
        w1: draw(pb.grid.n_neg()),
        w2: draw(pb.grid.n_pos()),
        w3: draw(pb.grid.n_neg()),
    };
    pb.project(&raw)
}

fn mix(x: &DiscreteMeasureTriple, y: &DiscreteMeasureTriple, s: f64) -> DiscreteMeasureTriple {
    let m = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (1.0 - s) * p + s * q).collect();
    DiscreteMeasureTriple {
        w1: m(&x.w1, &y.w1),
        w2: m(&x.w2, &y.w2),
        w3: m(&x.w3, &y.w3),
    }
}

#[test]
fn energy_is_convex_along_segments() {
    let pb = problem(CASE_III, 60);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let (x, y) = (random_feasible(&pb, &mut rng), random_feasible(&pb, &mut rng));
        let (ex, ey) = (pb.energy(&x).unwrap(), pb.energy(&y).unwrap());
        for s in [0.25, 0.5, 0.75] {
            let em = pb.energy(&mix(&x, &y, s)).unwrap();
            assert!(em <= (1.0 - s) * ex + s * ey + 1e-12 * (ex.abs() + ey.abs()));
        }
    }
}

#[test]
fn energy_splits_into_signed_energies() {
    // I1 + I2 + I3 - I12 - I23 = (I(nu1) + I(nu1 - nu2) + I(nu2 - nu3) + I(nu3)) / 2
    let pb = problem(CASE_I, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let w = random_feasible(&pb, &mut rng);
        let zeros = vec![0.0; pb.grid.n_pos()];
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        let join = |a: &[f64], b: &[f64]| [a, b].concat();
        let parts = [
            join(&w.w1, &zeros),
            join(&w.w1, &neg(&w.w2)),
            join(&neg(&w.w3), &w.w2),
            join(&w.w3, &zeros),
        ];
        let half: f64 = 0.5 * parts.iter().map(|p| pb.signed_energy(p)).sum::<f64>();
        let field: f64 = pb.v.iter().zip(&w.w2).map(|(v, x)| v * x).sum();
        let e = pb.energy(&w).unwrap();
        assert!((e - field - half).abs() < 1e-10 * (1.0 + e.abs()), "{e} vs {}", field + half);
    }
}

#[test]
fn energies_decrease_monotonically() {
    let pb = problem(CASE_III, 80);
    let (_, rep) = pb
        .minimize(&MinimizeOpts {
            tol: 1e-9,
            record_energies: true,
            ..Default::default()
        })
        .unwrap();
    assert!(rep.converged);
    assert!(rep.energies.len() > 2);
    for w in rep.energies.windows(2) {
        assert!(w[1] <= w[0] + 1e-13 * w[0].abs(), "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn minimizer_does_not_depend_on_start() {
    let pb = problem(CASE_III, 80);
    let opts = MinimizeOpts {
        tol: 1e-10,
        ..Default::default()
    };
    let (w0, r0) = pb.minimize(&opts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = random_feasible(&pb, &mut rng);
    let (w1, r1) = pb.minimize_from(&start, &opts).unwrap();
    assert!(r0.converged && r1.converged);
    assert!((r0.energy - r1.energy).abs() < 1e-9);
    let d: f64 = w0.w2.iter().zip(&w1.w2).map(|(a, b)| (a - b).abs()).sum();
    assert!(d < 1e-3, "L1 gap between minimizers {d}");
}

#[test]
fn refinement_improves_agreement() {
    let l1 = |n| {
        let pb = problem(CASE_I, n);
        let (w, _) = pb
            .minimize(&MinimizeOpts {
                tol: 1e-9,
                ..Default::default()
            })
            .unwrap();
        pb.compare_to_spectral(&w).l1_mu2.unwrap()
    };
    let (coarse, fine) = (l1(50), l1(200));
    assert!(fine < coarse, "{coarse} -> {fine}");
}

#[test]
fn case_three_caps_bind_near_origin() {
    let pb = problem(CASE_III, 200);
    let (w, rep) = pb
        .minimize(&MinimizeOpts {
            tol: 1e-10,
            ..Default::default()
        })
        .unwrap();
    rep.require_converged().unwrap();
    let bp = branch_points(&pb.params).unwrap();
    let edges = &pb.grid.neg_edges;
    let mut saturated = 0;
    let mut inside = 0;
    for (k, (&x, &c)) in w.w1.iter().zip(&pb.caps1).enumerate() {
        // cells well inside (-r1, 0)
        if edges[k] > -0.8 * bp.r1 {
            inside += 1;
            if (c - x).abs() <= 1e-6 * c {
                saturated += 1;
            }
        }
    }
    assert!(inside > 3);
    assert!(saturated as f64 >= 0.9 * inside as f64, "{saturated}/{inside}");
}

#[test]
fn case_one_caps_do_not_bind() {
    let pb = problem(CASE_I, 200);
    let (w, rep) = pb
        .minimize(&MinimizeOpts {
            tol: 1e-10,
            ..Default::default()
        })
        .unwrap();
    rep.require_converged().unwrap();
    // only the cell touching the origin may come close, where mu1 and rho1 share the 1/sqrt|x| edge
    let binding = w
        .w1
        .iter()
        .zip(&pb.caps1)
        .filter(|(x, c)| (*c - *x).abs() <= 1e-6 * **c)
        .count();
    assert!(binding <= 1, "{binding} binding cells");
}

#[test]
fn infeasible_start_is_rejected() {
    let pb = problem(CASE_I, 20);
    let mut w = pb.uniform_start();
    w.w2[0] += 0.1;
    assert!(pb.minimize_from(&w, &MinimizeOpts::default()).is_err());
}
