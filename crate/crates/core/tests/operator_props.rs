use orlicz_core::operators::*;
use orlicz_core::young::*;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn small_spec(seed: u64) -> SampleSpec {
    SampleSpec { s_count: 9, xi_count: 24, directions: 4, random_samples: 2000, ..SampleSpec::unit_square(3) }.with_seed(seed)
}

fn potential_family() -> Vec<EllipticOperator> {
    vec![
        make_builtin("p_laplacian", &params(&[("p", 3.0)]), None).unwrap(),
        make_builtin("xuf", &params(&[("p", 2.5), ("r", 1.5), ("n", 3.0)]), None).unwrap(),
        make_builtin("areg", &params(&[("p", 2.5), ("q", 1.0), ("gamma", 1.0), ("delta", 1.0)]), None).unwrap(),
    ]
}

fn point() -> impl Strategy<Value = Point> {
    (0.05f64..1.0, 0.05f64..1.0).prop_map(|(x, y)| [x, y])
}

fn gradient() -> impl Strategy<Value = Point> {
    (-3.0f64..3.0, 0.0f64..std::f64::consts::TAU).prop_map(|(l, th)| {
        let t = 10f64.powf(l);
        [t * th.cos(), t * th.sin()]
    })
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn potential_gradient_is_the_field(k in 0usize..3, x in point(), s in -2.0f64..2.0, xi in gradient()) {
        let op = &potential_family()[k];
        let w = potential_gradient_slack(op, x, s, xi);
        prop_assert!(w.slack >= 0.0, "{}: {w:?}", op.name());
    }

    #[test]
    fn monotonicity_pairing_is_symmetric(x in point(), s in -2.0f64..2.0, xi in gradient(), xi2 in gradient()) {
        let op = make_builtin("areg", &params(&[("p", 2.5), ("q", 1.0), ("gamma", 1.0), ("delta", 1.0)]), None).unwrap();
        let a = a2_slack(&op, x, s, xi, xi2);
        let b = a2_slack(&op, x, s, xi2, xi);
        prop_assert!((a.slack - b.slack).abs() <= 1e-12 * (1.0 + a.slack.abs()));
    }

    #[test]
    fn exponent_differences_are_bounded(rho in 0.1f64..4.0, seed in 0u64..1000) {
        let c = exponent_difference_constant(rho, 500, seed);
        prop_assert!(c.is_finite() && c > 0.0);
        // mean value bounds: c <= 2 for rho <= 1 and c <= rho beyond
        let bound = if rho <= 1.0 { 2.0 } else { rho };
        prop_assert!(c <= bound * (1.0 + 1e-9), "rho={rho}: c={c}");
    }
}

proptest! {
    #![proptest_config(config(6))]

    #[test]
    fn witnesses_reproduce_their_slack(seed in 0u64..1_000_000) {
        let spec = small_spec(seed);
        let op = make_builtin("p_laplacian", &params(&[("p", 3.0)]), None).unwrap();
        let a = power_over_p(3.0);
        let conj = a.conjugate();

        let r1 = check_a1(&op, &a, None, None, &spec);
        let k1 = A1Constants { q: r1.constant("q").unwrap(), b: r1.constant("b").unwrap() };
        let w = r1.witness.clone().unwrap();
        prop_assert!((a1_slack(&op, &a, &conj, None, &k1, w.x, w.s, w.xi).slack - w.slack).abs() <= 1e-12);

        let r2 = check_a2(&op, &spec);
        let w = r2.witness.clone().unwrap();
        prop_assert!((a2_slack(&op, w.x, w.s, w.xi, w.xi2.unwrap()).slack - w.slack).abs() <= 1e-12);

        let r3 = check_a3(&op, &a, None, None, &spec);
        let k3 = A3Constants { c: r3.constant("c").unwrap(), d: r3.constant("d").unwrap(), r: r3.constant("r").unwrap() };
        let w = r3.witness.clone().unwrap();
        prop_assert!((a3_slack(&op, &a, None, &k3, w.x, w.s, w.xi).slack - w.slack).abs() <= 1e-12);
    }
}

#[test]
fn potential_sandwich_holds_with_fitted_constants() {
    let spec = small_spec(3);
    let cases = [
        (make_builtin("p_laplacian", &params(&[("p", 3.0)]), None).unwrap(), power(3.0)),
        (make_builtin("areg", &params(&[("p", 2.5), ("q", 1.0), ("gamma", 1.0), ("delta", 1.0)]), None).unwrap(), power_log(2.5, 1.0)),
    ];
    for (op, a) in &cases {
        let k = fit_equiv_constants(op, a, None, &spec).unwrap();
        assert!(k.holds && k.k4 > 0.0 && k.k5.is_finite(), "{}: {k:?}", op.name());
        for &x in &spec.points {
            for t in log_grid(1e-3, 1e3, 40) {
                let phi = op.potential(x, 0.5, [t, 0.0]).unwrap();
                assert!(k.k4 * a.value(k.k4 * t) <= phi * (1.0 + 1e-12));
                assert!(phi <= k.k5 * a.value(k.k5 * t) * (1.0 + 1e-12));
            }
        }
    }
}
