use std::sync::Arc;

use orlicz_core::grid::GridFunction;
use orlicz_core::mesh::{Mesh, MeshSpec};
use orlicz_core::operators::*;
use orlicz_core::solver::*;
use orlicz_core::young::*;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn mesh() -> Arc<Mesh> {
    Arc::new(Mesh::new(MeshSpec::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0, nx: 6, ny: 6 }).unwrap())
}

fn zero_trace(v: &[f64]) -> GridFunction {
    let mut g = GridFunction::new(mesh(), v.to_vec()).unwrap();
    g.pin_boundary();
    g
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 36)
}

fn band(lo: &[f64], width: &[f64]) -> (GridFunction, GridFunction) {
    let m = mesh();
    let sub: Vec<f64> = (0..m.num_nodes()).map(|i| if m.is_boundary(i) { -lo[i].abs() } else { lo[i] }).collect();
    let sup: Vec<f64> = sub.iter().zip(width).map(|(s, w)| s + w.abs()).collect();
    let sup: Vec<f64> = (0..m.num_nodes()).map(|i| if m.is_boundary(i) { sup[i].max(0.0) } else { sup[i] }).collect();
    (GridFunction::new(m.clone(), sub).unwrap(), GridFunction::new(m, sup).unwrap())
}

fn p_laplacian_problem(p: f64, sub: GridFunction, sup: GridFunction) -> TruncatedProblem {
    let m = mesh();
    TruncatedProblem::new(
        m,
        make_builtin("p_laplacian", &params(&[("p", p)]), None).unwrap(),
        make_convection("constant", &params(&[("c", 1.0)]), None).unwrap(),
        power(p),
        sub,
        sup,
        power(2.0),
        default_mu_schedule(),
        SolverControls::default(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn truncation_is_idempotent(u in values(), lo in values(), w in values()) {
        let (sub, sup) = band(&lo, &w);
        let u = GridFunction::new(mesh(), u).unwrap();
        let once = truncate(&u, &sub, &sup).unwrap();
        let twice = truncate(&once, &sub, &sup).unwrap();
        prop_assert_eq!(once.values(), twice.values());
    }

    #[test]
    fn penalty_has_the_sign_of_the_violation(u in values(), lo in values(), w in values()) {
        let (sub, sup) = band(&lo, &w);
        let u = GridFunction::new(mesh(), u).unwrap();
        let pi = penalty(&u, &sub, &sup, &power_log(2.0, 1.0)).unwrap();
        for i in 0..u.values().len() {
            let (v, l, h, p) = (u.values()[i], sub.values()[i], sup.values()[i], pi.values()[i]);
            if v > h {
                prop_assert!(p > 0.0);
            } else if v < l {
                prop_assert!(p < 0.0);
            } else {
                prop_assert_eq!(p, 0.0);
            }
        }
    }

    #[test]
    fn residual_inside_the_band_ignores_mu(u in values(), mu1 in 0.1f64..1e4, mu2 in 0.1f64..1e4) {
        let u = zero_trace(&u);
        let m = mesh();
        let (sub, sup) = (GridFunction::constant(m.clone(), -10.0), GridFunction::constant(m, 10.0));
        let prob = p_laplacian_problem(3.0, sub, sup);
        let r1 = assemble_residual(&u, &prob, mu1).unwrap();
        let r2 = assemble_residual(&u, &prob, mu2).unwrap();
        prop_assert!(r1.iter().zip(&r2).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn p_laplacian_is_monotone(u in values(), v in values(), p in 1.5f64..4.0) {
        let (u, v) = (zero_trace(&u), zero_trace(&v));
        let m = mesh();
        let prob = TruncatedProblem {
            convection: make_convection("zero", &Params::new(), None).unwrap(),
            ..p_laplacian_problem(p, GridFunction::constant(m.clone(), -10.0), GridFunction::constant(m, 10.0))
        };
        let ru = assemble_residual(&u, &prob, 1.0).unwrap();
        let rv = assemble_residual(&v, &prob, 1.0).unwrap();
        let pairing: f64 = (0..ru.len()).map(|i| (ru[i] - rv[i]) * (u.values()[i] - v.values()[i])).sum();
        prop_assert!(pairing >= -1e-12);
    }
}

proptest! {
    #![proptest_config(config(6))]

    #[test]
    fn converged_solutions_lie_in_the_band(c in 0.2f64..4.0, hi in 0.05f64..1.0, p in 1.8f64..3.0) {
        let m = Arc::new(Mesh::new(MeshSpec::Interval { x0: 0.0, x1: 1.0, nodes: 33 }).unwrap());
        let prob = TruncatedProblem::new(
            m.clone(),
            make_builtin("p_laplacian", &params(&[("p", p)]), None).unwrap(),
            make_convection("constant", &params(&[("c", c)]), None).unwrap(),
            power(p),
            GridFunction::zeros(m.clone()),
            GridFunction::constant(m, hi),
            power(2.0),
            default_mu_schedule(),
            SolverControls::default(),
        )
        .unwrap();
        let rep = solve_truncated(&prob).unwrap();
        if rep.converged {
            let tol = prob.controls.tolerance;
            for (i, &u) in rep.solution.values().iter().enumerate() {
                prop_assert!(prob.sub.values()[i] - tol <= u && u <= prob.sup.values()[i] + tol);
            }
            prop_assert!(verify_solution(&rep.solution, &prob).unwrap().passes(tol));
        }
    }
}

#[test]
fn p3_error_decreases_with_order_at_least_one() {
    let exact = |x: f64| (2.0 / 3.0) * (0.5f64.powf(1.5) - (x - 0.5).abs().powf(1.5));
    let mut errors = Vec::new();
    for nodes in [33, 65, 129] {
        let m = Arc::new(Mesh::new(MeshSpec::Interval { x0: 0.0, x1: 1.0, nodes }).unwrap());
        let prob = TruncatedProblem::new(
            m.clone(),
            make_builtin("p_laplacian", &params(&[("p", 3.0)]), None).unwrap(),
            make_convection("constant", &params(&[("c", 1.0)]), None).unwrap(),
            power(3.0),
            GridFunction::zeros(m.clone()),
            GridFunction::constant(m.clone(), 1.0),
            power(2.0),
            default_mu_schedule(),
            SolverControls::default(),
        )
        .unwrap();
        let rep = solve_truncated(&prob).unwrap();
        assert!(rep.converged);
        errors.push(m.nodes().iter().zip(rep.solution.values()).fold(0.0f64, |e, (x, u)| e.max((u - exact(x[0])).abs())));
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    eprintln!("p = 3 errors {errors:?}, observed orders {orders:?}");
    assert!(orders.iter().all(|&o| o >= 1.0), "{orders:?}");
}
