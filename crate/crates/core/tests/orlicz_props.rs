use std::sync::Arc;

use orlicz_core::grid::GridFunction;
use orlicz_core::mesh::{Mesh, MeshSpec};
use orlicz_core::orlicz::*;
use orlicz_core::young::*;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn square() -> Arc<Mesh> {
    Arc::new(Mesh::new(MeshSpec::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0, nx: 7, ny: 6 }).unwrap())
}

fn line() -> Arc<Mesh> {
    Arc::new(Mesh::new(MeshSpec::Interval { x0: 0.0, x1: 2.0, nodes: 25 }).unwrap())
}

fn field(mesh: Arc<Mesh>, v: &[f64], zero_trace: bool) -> GridFunction {
    let mut g = GridFunction::new(mesh.clone(), v[..mesh.num_nodes()].to_vec()).unwrap();
    if zero_trace {
        g.pin_boundary();
    }
    g
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 42)
}

fn young() -> impl Strategy<Value = YoungFunction> {
    prop_oneof![Just(power(2.0)), Just(power_over_p(3.0)), Just(power_log(2.0, 1.0)), Just(power(1.5))]
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn norm_is_absolutely_homogeneous(v in values(), c in -20.0f64..20.0, a in young()) {
        let u = field(square(), &v, false);
        let n = luxemburg_norm(&u, &a).luxemburg_norm;
        let nc = luxemburg_norm(&u.scaled(c), &a).luxemburg_norm;
        prop_assert!((nc - c.abs() * n).abs() <= 1e-9 * (c.abs() * n).max(1e-300));
    }

    #[test]
    fn normalized_field_has_unit_modular(v in values(), a in young()) {
        let u = field(line(), &v, false);
        let n = luxemburg_norm(&u, &a).luxemburg_norm;
        prop_assume!(n > 0.0);
        let m = modular(&u.scaled(1.0 / n), &a);
        prop_assert!((m - 1.0).abs() <= 1e-8, "modular {m}");
    }

    #[test]
    fn triangle_inequality(v in values(), w in values(), a in young()) {
        let (u, z) = (field(square(), &v, false), field(square(), &w, false));
        let sum = GridFunction::new(square(), u.values().iter().zip(z.values()).map(|(x, y)| x + y).collect()).unwrap();
        let lhs = luxemburg_norm(&sum, &a).luxemburg_norm;
        let rhs = luxemburg_norm(&u, &a).luxemburg_norm + luxemburg_norm(&z, &a).luxemburg_norm;
        prop_assert!(lhs <= rhs * (1.0 + 1e-9));
    }

    #[test]
    fn power_norm_is_the_discrete_lebesgue_norm(v in values(), p in 1.2f64..6.0) {
        let u = field(square(), &v, false);
        let (w, q) = quadrature(&u);
        let lp = w.iter().zip(&q).map(|(w, x)| w * x.abs().powf(p)).sum::<f64>().powf(1.0 / p);
        let n = luxemburg_norm(&u, &power(p)).luxemburg_norm;
        prop_assert!((n - lp).abs() <= 1e-9 * lp, "{n} vs {lp}");
    }

    #[test]
    fn holder_and_poincare_inequalities_hold(v in values(), w in values(), a in young()) {
        let (u, z) = (field(square(), &v, true), field(square(), &w, false));
        let conj = a.conjugate();
        prop_assert!(holder_pairing_check(&u, &z, &a, &conj).holds);
        prop_assert!(poincare_modular_check(&u, &a).unwrap().holds);
    }
}
