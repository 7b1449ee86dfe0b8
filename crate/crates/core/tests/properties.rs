mod common;

use proptest::prelude::*;

use sqbpaths::equilibrium::{discretize, DiscreteMeasureTriple, GridSpec};
use sqbpaths::export::format_f64;
use sqbpaths::simulate::acceptance_probability;
use sqbpaths::specfun::{bessel_i, BesselOrder};
use sqbpaths::spectral::{branch_points, classify, Phase};
use sqbpaths::Error;

use common::mp;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn case_one_iff_ab_above_quarter(a in 0.01f64..4.0, b in 0.01f64..4.0, t in 0.02f64..0.98) {
        prop_assume!((a * b - 0.25).abs() > 1e-3);
        match classify(&mp(a, b, t)) {
            Ok(ph) => prop_assert_eq!(ph == Phase::CaseI, a * b > 0.25),
            Err(Error::NonGenericPhase { .. }) => prop_assert!(a * b < 0.25),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn branch_points_are_ordered(a in 0.02f64..3.0, b in 0.02f64..3.0, t in 0.05f64..0.95) {
        prop_assume!((a * b - 0.25).abs() > 1e-3);
        let p = mp(a, b, t);
        let Ok(ph) = classify(&p) else { return Ok(()) };
        let bp = branch_points(&p).unwrap();
        prop_assert!(bp.p >= 0.0 && bp.p < bp.q);
        prop_assert!(bp.r1 >= 0.0 && bp.r3 >= 0.0);
        match ph {
            Phase::CaseI => prop_assert!(bp.r1 == 0.0 && bp.r3 == 0.0 && bp.p > 0.0),
            Phase::CaseIIa => prop_assert!(bp.r1 > 0.0 && bp.r3 == 0.0),
            Phase::CaseIIb => prop_assert!(bp.r1 == 0.0 && bp.r3 > 0.0),
            Phase::CaseIII => prop_assert!(bp.r1 > 0.0 && bp.r3 > 0.0 && bp.p == 0.0),
        }
        let rev = branch_points(&p.reversed()).unwrap();
        prop_assert!((rev.r1 - bp.r3).abs() <= 1e-8 * (1.0 + bp.q));
        prop_assert!((rev.q - bp.q).abs() <= 1e-8 * bp.q);
    }

    #[test]
    fn projection_is_feasible_and_idempotent(
        w1 in prop::collection::vec(-1.0f64..2.0, 12),
        w2 in prop::collection::vec(-1.0f64..2.0, 12),
        w3 in prop::collection::vec(-1.0f64..2.0, 12),
    ) {
        let p = mp(0.2, 0.3, 0.5);
        let pb = discretize(&p, &GridSpec::for_params(&p, 12, 12).unwrap()).unwrap();
        let once = pb.project(&DiscreteMeasureTriple { w1, w2, w3 });
        prop_assert!(pb.check_feasible(&once, 1e-12).is_ok());
        let twice = pb.project(&once);
        for (x, y) in once.w2.iter().chain(&once.w1).zip(twice.w2.iter().chain(&twice.w1)) {
            prop_assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn numbers_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn acceptance_is_a_probability(lc in -1e3f64..1e3, lp in -1e3f64..1e3) {
        let a = acceptance_probability(lc, lp);
        prop_assert!((0.0..=1.0).contains(&a));
        if lp >= lc {
            prop_assert_eq!(a, 1.0);
        } else {
            prop_assert!((a - (lp - lc).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn bessel_recurrence(nu in 0.5f64..6.0, x in 0.1f64..60.0) {
        let i = |n: f64| (bessel_i(BesselOrder::new(n).unwrap(), x, true).unwrap() - x).exp();
        let lhs = i(nu - 1.0) - i(nu + 1.0);
        let rhs = 2.0 * nu / x * i(nu);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (i(nu - 1.0) + rhs.abs()), "{lhs} vs {rhs}");
    }
}
