//! Damped Newton with a fixed-point fallback, the penalty-parameter loop and
//! independent re-verification.

use serde::Serialize;

use super::assembly::{basis_norms, dual_norm, laplacian, Mode, Pattern, Prepared};
use super::banded::{BandLu, BandMatrix};
use super::{InitialGuess, IterationRecord, SolveReport, TruncatedProblem};
use crate::error::{Error, Result};
use crate::grid::{norm2, GridFunction};
use crate::orlicz::modular;

const PIVOT_TINY: f64 = 1e-13;

fn euclid(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Re-verification of a candidate solution against the original problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    /// Untruncated weak residual, `max_i |<R(u), φ_i>| / ||φ_i||_{W^{1,A}}`.
    pub weak_residual_norm: f64,
    pub enclosure_violation: f64,
    pub penalty_norm: f64,
    pub modular_u: f64,
    pub modular_gradient: f64,
    pub max_value: f64,
    pub min_value: f64,
}

impl Verification {
    pub fn passes(&self, tol: f64) -> bool {
        self.weak_residual_norm <= tol && self.enclosure_violation <= tol && self.penalty_norm <= tol
    }
}

fn enclosure(u: &[f64], prob: &TruncatedProblem) -> f64 {
    let (lo, hi) = (prob.sub.values(), prob.sup.values());
    (0..u.len()).fold(0.0, |m, i| m.max(lo[i] - u[i]).max(u[i] - hi[i]))
}

fn verify_with(u: &GridFunction, prob: &TruncatedProblem, prep: &Prepared, norms: &[f64]) -> Result<Verification> {
    let mesh = &prob.mesh;
    let r = prep.residual(u.values(), Mode::Plain)?;
    let (w, g): (Vec<f64>, Vec<f64>) = (0..mesh.num_elements()).map(|e| (mesh.measure(e), norm2(u.element_gradient(e)))).unzip();
    let modular_gradient = w.iter().zip(&g).map(|(w, g)| w * prob.a.value(*g)).sum();
    Ok(Verification {
        weak_residual_norm: dual_norm(mesh, &r, norms),
        enclosure_violation: enclosure(u.values(), prob),
        penalty_norm: prep.penalty_norm(u.values()),
        modular_u: modular(u, &prob.a),
        modular_gradient,
        max_value: u.max(),
        min_value: u.min(),
    })
}

/// Recomputes the untruncated weak residual (no `T`, no `Π`), the band
/// violation and the modulars of `u` and `∇u`.
pub fn verify_solution(u: &GridFunction, prob: &TruncatedProblem) -> Result<Verification> {
    if u.values().len() != prob.mesh.num_nodes() {
        return Err(Error::Domain("solution does not live on the problem mesh".into()));
    }
    let prep = Prepared::new(prob)?;
    let norms = basis_norms(&prob.mesh, &prob.a);
    verify_with(u, prob, &prep, &norms)
}

struct Attempt {
    u: Vec<f64>,
    iterations: usize,
    dual: f64,
    reached: bool,
}

struct Driver<'a> {
    prob: &'a TruncatedProblem,
    prep: Prepared<'a>,
    pattern: Pattern,
    norms: Vec<f64>,
    lap: Option<BandLu>,
}

impl<'a> Driver<'a> {
    fn new(prob: &'a TruncatedProblem) -> Result<Driver<'a>> {
        let pattern = Pattern::new(&prob.mesh);
        let lap = laplacian(&prob.mesh, &pattern).factor(PIVOT_TINY);
        Ok(Driver { prob, prep: Prepared::new(prob)?, pattern, norms: basis_norms(&prob.mesh, &prob.a), lap })
    }

    fn residual(&self, u: &[f64], mu: f64) -> Result<Vec<f64>> {
        self.prep.residual(u, Mode::Truncated { mu })
    }

    fn in_band(&self, u: &[f64]) -> bool {
        enclosure(u, self.prob) <= 0.0
    }

    fn pinned(&self, v: &[f64]) -> Vec<f64> {
        let mesh = &self.prob.mesh;
        (0..v.len()).map(|i| if mesh.is_boundary(i) { 0.0 } else { v[i] }).collect()
    }

    fn initial_guess(&self, mu: f64) -> Result<(Vec<f64>, String)> {
        let prob = self.prob;
        let zero = vec![0.0; prob.mesh.num_nodes()];
        let clamped: Vec<f64> = prob.sub.values().iter().zip(prob.sup.values()).map(|(l, h)| 0f64.clamp(*l, *h)).collect();
        let t0 = self.pinned(&clamped);
        Ok(match prob.controls.initial_guess {
            InitialGuess::Zero => (zero, "initial guess 0".into()),
            InitialGuess::Sub => (self.pinned(prob.sub.values()), "initial guess sub".into()),
            InitialGuess::Super => (self.pinned(prob.sup.values()), "initial guess super".into()),
            InitialGuess::Poisson => {
                let Some(lap) = &self.lap else {
                    return Ok((t0, "initial guess T(0): singular stiffness matrix".into()));
                };
                let r = self.residual(&t0, mu)?;
                let d = lap.solve(&r.iter().map(|v| -v).collect::<Vec<_>>());
                let mut theta = 1.0;
                for _ in 0..11 {
                    let cand: Vec<f64> = t0.iter().zip(&d).map(|(a, b)| a + theta * b).collect();
                    if self.in_band(&cand) {
                        return Ok((self.pinned(&cand), format!("initial guess: Poisson correction scaled by {theta}")));
                    }
                    theta *= 0.5;
                }
                (t0, "initial guess T(0): Poisson correction leaves the band".into())
            }
        })
    }

    /// Newton and fallback iterations at one penalty parameter.
    fn solve_mu(&self, mu: f64, mut u: Vec<f64>, history: &mut Vec<IterationRecord>) -> Result<Attempt> {
        let c = &self.prob.controls;
        let target = 0.1 * c.tolerance;
        let mut r = self.residual(&u, mu)?;
        let mut norm = euclid(&r);
        let mut dual = dual_norm(&self.prob.mesh, &r, &self.norms);
        let mut it = 0;
        let mut last_jacobian: Option<BandLu> = None;
        let mut failures = 0;
        while dual > target && it < c.max_outer_iterations {
            // Newton step
            let jac = self.pattern.jacobian(&u, &r, c.fd_step, |v| self.residual(v, mu))?;
            let lu = jac.factor(PIVOT_TINY);
            let mut accepted = false;
            if let Some(lu) = &lu {
                let d = lu.solve(&r.iter().map(|v| -v).collect::<Vec<_>>());
                let mut alpha = 1.0;
                for _ in 0..=c.line_search_halvings {
                    let cand: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                    let rc = self.residual(&cand, mu)?;
                    let nc = euclid(&rc);
                    if nc < (1.0 - 1e-4 * alpha) * norm {
                        u = cand;
                        r = rc;
                        norm = nc;
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                it += 1;
                dual = dual_norm(&self.prob.mesh, &r, &self.norms);
                history.push(IterationRecord {
                    mu,
                    iteration: it,
                    method: "newton",
                    residual: dual,
                    step_length: if accepted { alpha } else { 0.0 },
                });
            }
            if let Some(lu) = lu {
                last_jacobian = Some(lu);
            }
            if accepted {
                failures = 0;
                continue;
            }
            if dual <= target || it >= c.max_outer_iterations {
                break;
            }
            // fixed-point fallback
            let before = norm;
            let matrix: Option<BandMatrix> = self.prep.kacanov(&u, mu, &self.pattern);
            let fallback = match matrix.and_then(|m| m.factor(PIVOT_TINY)) {
                Some(lu) => lu,
                None => match last_jacobian.take() {
                    Some(lu) => lu,
                    None => {
                        return Err(Error::Singular {
                            mu,
                            detail: format!("iteration {it}, iterate range [{:.3e}, {:.3e}]", min(&u), max(&u)),
                        })
                    }
                },
            };
            for _ in 0..c.fallback_iterations {
                if dual <= target || it >= c.max_outer_iterations {
                    break;
                }
                let d = fallback.solve(&r.iter().map(|v| -v).collect::<Vec<_>>());
                for (a, b) in u.iter_mut().zip(&d) {
                    *a += c.relaxation * b;
                }
                r = self.residual(&u, mu)?;
                norm = euclid(&r);
                dual = dual_norm(&self.prob.mesh, &r, &self.norms);
                it += 1;
                history.push(IterationRecord { mu, iteration: it, method: "fixed_point", residual: dual, step_length: c.relaxation });
            }
            if !(norm < before) {
                failures += 1;
                if failures >= 2 {
                    break;
                }
            }
        }
        Ok(Attempt { u, iterations: it, dual, reached: dual <= target })
    }
}

fn min(u: &[f64]) -> f64 {
    u.iter().fold(f64::INFINITY, |m, v| m.min(*v))
}

fn max(u: &[f64]) -> f64 {
    u.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
}

/// Solves `⟨𝒜_μ(u), φ⟩ = 0` for each `μ` of the schedule, warm-starting from
/// the previous one, and accepts the first solution inside the band with a
/// vanishing penalty.
pub fn solve_truncated(prob: &TruncatedProblem) -> Result<SolveReport> {
    let driver = Driver::new(prob)?;
    let tol = prob.controls.tolerance;
    let mut notes = vec!["the L^{A_n} hypothesis on f(x, Tu, ∇Tu) holds on a finite-dimensional space".to_string()];
    let (mut u, note) = driver.initial_guess(prob.mu_schedule[0])?;
    notes.push(note);
    let mut history = Vec::new();
    let mut total = 0;
    let mut best: Option<(f64, SolveReport)> = None;
    for &mu in &prob.mu_schedule {
        let attempt = driver.solve_mu(mu, u, &mut history)?;
        total += attempt.iterations;
        let g = GridFunction::new(prob.mesh.clone(), attempt.u.clone())?;
        let v = verify_with(&g, prob, &driver.prep, &driver.norms)?;
        let converged = attempt.reached && v.passes(tol);
        let score = (v.weak_residual_norm.max(v.enclosure_violation).max(v.penalty_norm).max(attempt.dual)) / tol;
        let report = SolveReport {
            solution: g,
            mu_used: mu,
            outer_iterations: total,
            weak_residual_norm: v.weak_residual_norm,
            truncated_residual_norm: attempt.dual,
            enclosure_violation: v.enclosure_violation,
            penalty_norm: v.penalty_norm,
            converged,
            modular_u: v.modular_u,
            modular_gradient: v.modular_gradient,
            max_value: v.max_value,
            min_value: v.min_value,
            history: Vec::new(),
            notes: Vec::new(),
        };
        if converged {
            return Ok(SolveReport { history, notes, ..report });
        }
        notes.push(format!(
            "mu = {mu}: truncated residual {:.3e}, weak residual {:.3e}, enclosure {:.3e}, penalty {:.3e}",
            attempt.dual, v.weak_residual_norm, v.enclosure_violation, v.penalty_norm
        ));
        if best.as_ref().map_or(true, |(s, _)| score.is_nan() || score < *s) {
            best = Some((score, report));
        }
        u = attempt.u;
    }
    let (_, report) = best.expect("mu schedule is non-empty");
    notes.push(format!("no penalty parameter met the tolerance {tol:e}; reporting the best attempt"));
    Ok(SolveReport { outer_iterations: total, history, notes, ..report })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::{Mesh, MeshSpec};
    use crate::operators::{make_builtin, make_convection, Params};
    use crate::solver::{default_mu_schedule, SolverControls};
    use crate::young::power;

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn problem(nodes: usize, p: f64) -> TruncatedProblem {
        let mesh = Arc::new(Mesh::new(MeshSpec::Interval { x0: 0.0, x1: 1.0, nodes }).unwrap());
        TruncatedProblem::new(
            mesh.clone(),
            make_builtin("p_laplacian", &params(&[("p", p)]), None).unwrap(),
            make_convection("constant", &params(&[("c", 1.0)]), None).unwrap(),
            power(p),
            GridFunction::zeros(mesh.clone()),
            GridFunction::constant(mesh, 1.0),
            power(2.0),
            default_mu_schedule(),
            SolverControls::default(),
        )
        .unwrap()
    }

    #[test]
    fn linear_poisson_matches_the_parabola() {
        let prob = problem(33, 2.0);
        let rep = solve_truncated(&prob).unwrap();
        assert!(rep.converged, "{:?}", rep.notes);
        assert_eq!(rep.mu_used, 1.0);
        for (x, u) in prob.mesh.nodes().iter().zip(rep.solution.values()) {
            let exact = x[0] * (1.0 - x[0]) / 2.0;
            assert!((u - exact).abs() < 1e-9, "{u} vs {exact}");
        }
    }

    #[test]
    fn p3_laplacian_approaches_the_flux_integral() {
        let exact = |x: f64| (2.0 / 3.0) * (0.5f64.powf(1.5) - (x - 0.5).abs().powf(1.5));
        let mut errors = Vec::new();
        for nodes in [17, 33, 65] {
            let prob = problem(nodes, 3.0);
            let rep = solve_truncated(&prob).unwrap();
            assert!(rep.converged, "{:?}", rep.notes);
            let err = prob.mesh.nodes().iter().zip(rep.solution.values()).fold(0.0f64, |m, (x, u)| m.max((u - exact(x[0])).abs()));
            errors.push(err);
        }
        assert!(errors[2] < 2e-3, "{errors:?}");
        assert!((errors[1] / errors[2]).log2() >= 1.0, "{errors:?}");
    }

    #[test]
    fn perturbed_solution_fails_verification() {
        let prob = problem(33, 2.0);
        let rep = solve_truncated(&prob).unwrap();
        let again = verify_solution(&rep.solution, &prob).unwrap();
        assert!(again.passes(prob.controls.tolerance));
        let mut bumped = rep.solution.clone();
        bumped.values_mut()[16] += 1e-2;
        let v = verify_solution(&bumped, &prob).unwrap();
        assert!(v.weak_residual_norm > 10.0 * prob.controls.tolerance);
        let zero = verify_solution(&GridFunction::zeros(prob.mesh.clone()), &prob).unwrap();
        assert!(!zero.passes(prob.controls.tolerance));
    }
}
