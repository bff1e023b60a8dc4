use cpdeconv::estimator::{h_regular_anu, h_regular_fm, h_singular, localize, refine};
use cpdeconv::probe::{ProbeCurve, ProbeKind};
use proptest::prelude::*;

fn curve(values: Vec<f64>) -> ProbeCurve {
    let n = values.len();
    ProbeCurve {
        h: 0.1,
        t: (0..n).map(|i| -0.1 + 1.2 * i as f64 / (n - 1) as f64).collect(),
        values,
        kind: ProbeKind::Estimated,
        eps: None,
        seed: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn refined_point_stays_in_interval(values in prop::collection::vec(-1e3f64..1e3, 8..200)) {
        let c = curve(values);
        let loc = localize(&c).unwrap();
        prop_assert!(loc.a_hat[0] <= loc.a_hat[1]);
        prop_assert!(loc.a_hat[0] >= 0.0 && loc.a_hat[1] <= 1.0);
        let t = refine(&c, loc.a_hat).unwrap();
        prop_assert!(t >= loc.a_hat[0] && t <= loc.a_hat[1]);
    }

    #[test]
    fn estimate_ignores_positive_scale(
        values in prop::collection::vec(-1e3f64..1e3, 8..100),
        scale in 1e-3f64..1e3,
    ) {
        let a = curve(values.clone());
        let b = curve(values.iter().map(|v| v * scale).collect());
        let (la, lb) = (localize(&a).unwrap(), localize(&b).unwrap());
        let tol = 1e-9;
        prop_assert!((la.t_hat_star - lb.t_hat_star).abs() < tol);
        prop_assert!((la.t_hat_upper_star - lb.t_hat_upper_star).abs() < tol);
        let (ra, rb) = (refine(&a, la.a_hat).unwrap(), refine(&b, lb.a_hat).unwrap());
        prop_assert!((ra - rb).abs() < tol);
    }

    #[test]
    fn bandwidths_shrink_with_noise(
        e1 in 1e-6f64..0.1,
        ratio in 1.01f64..100.0,
        beta in 0.6f64..2.0,
        beta_s in 0.1f64..=0.5,
    ) {
        let e2 = e1 / ratio;
        prop_assert!(h_regular_fm(e2, 10.0, 1.0, beta, 1.0).unwrap() < h_regular_fm(e1, 10.0, 1.0, beta, 1.0).unwrap());
        prop_assert!(h_regular_anu(e2, 1e3, 1.0, beta).unwrap() < h_regular_anu(e1, 1e3, 1.0, beta).unwrap());
        prop_assert!(h_singular(e2, beta_s, 1.0).unwrap() < h_singular(e1, beta_s, 1.0).unwrap());
    }

    #[test]
    fn regular_bandwidth_shrinks_with_budget(eps in 1e-6f64..0.5, l in 0.01f64..1e3, ratio in 1.01f64..100.0) {
        prop_assert!(h_regular_fm(eps, l * ratio, 1.0, 1.0, 1.0).unwrap() < h_regular_fm(eps, l, 1.0, 1.0, 1.0).unwrap());
    }
}
