//! Discrete truncated problem, penalty, Newton/Kačanov solves with a
//! penalty-parameter schedule, variational subsolutions and the gradient
//! cutoff pipeline.

mod assembly;
mod banded;
mod newton;
mod regularity;
mod variational;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::mesh::Mesh;
use crate::operators::{ConvectionTerm, EllipticOperator};
use crate::young::YoungFunction;

pub use assembly::{assemble_residual, basis_norms, coercivity_probe, sub_super_check, CoercivityProbe, SignCheck};
pub use banded::{BandLu, BandMatrix};
pub use newton::{solve_truncated, verify_solution, Verification};
pub use regularity::{holder_seminorm, nodal_gradients, run_regularity_pipeline, RegularityReport};
pub use variational::{minimize_functional, MinimizeControls, MinimizeReport, VariationalData};

/// Position of a value relative to the band `[sub, super]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Below,
    Inside,
    Above,
}

fn region(u: f64, lo: f64, hi: f64) -> Region {
    if u > hi {
        Region::Above
    } else if u < lo {
        Region::Below
    } else {
        Region::Inside
    }
}

fn check_order(sub: &GridFunction, sup: &GridFunction) -> Result<()> {
    if sub.values().len() != sup.values().len() {
        return Err(Error::Domain("sub and super live on different meshes".into()));
    }
    for (i, (a, b)) in sub.values().iter().zip(sup.values()).enumerate() {
        if !(a <= b) {
            return Err(Error::Domain(format!("sub > super at node {i}: {a} > {b}")));
        }
    }
    Ok(())
}

/// `T(u)`: nodal values clamped to `[sub, super]`.
pub fn truncate(u: &GridFunction, sub: &GridFunction, sup: &GridFunction) -> Result<GridFunction> {
    check_order(sub, sup)?;
    let v = u.values().iter().zip(sub.values().iter().zip(sup.values())).map(|(&x, (&lo, &hi))| x.clamp(lo, hi)).collect();
    u.with_values(v)
}

/// Region classification of one element: per quadrature point (the element
/// vertices) and by majority.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementRule {
    pub points: Vec<Region>,
    pub majority: Region,
}

impl ElementRule {
    /// Gradient selected at quadrature point `k`.
    pub fn gradient_at(&self, k: usize, grad_u: [f64; 2], grad_sub: [f64; 2], grad_sup: [f64; 2]) -> [f64; 2] {
        match self.points[k] {
            Region::Inside => grad_u,
            Region::Below => grad_sub,
            Region::Above => grad_sup,
        }
    }
}

/// Per-element gradient selector of `∇T(u)`.
pub fn truncation_gradient_rule(u: &GridFunction, sub: &GridFunction, sup: &GridFunction) -> Result<Vec<ElementRule>> {
    check_order(sub, sup)?;
    let mesh = u.mesh();
    let (uv, lo, hi) = (u.values(), sub.values(), sup.values());
    Ok((0..mesh.num_elements())
        .map(|e| {
            let points: Vec<Region> = mesh.element(e)[..mesh.dim() + 1].iter().map(|&v| region(uv[v], lo[v], hi[v])).collect();
            let count = |r: Region| points.iter().filter(|&&p| p == r).count();
            let majority =
                [Region::Inside, Region::Below, Region::Above].into_iter().max_by_key(|&r| (count(r), r == Region::Inside)).unwrap();
            ElementRule { points, majority }
        })
        .collect())
}

/// `Ẽ⁻¹(E(d))` for band violations `d >= 0`.
#[derive(Debug, Clone)]
pub struct Penalty {
    e: YoungFunction,
    conj: YoungFunction,
}

impl Penalty {
    pub fn new(e: &YoungFunction) -> Result<Penalty> {
        if !e.is_finite_valued() {
            return Err(Error::Precondition(format!("penalty profile {} is not finite-valued", e.name())));
        }
        Ok(Penalty { e: e.clone(), conj: e.conjugate() })
    }

    pub fn profile(&self) -> &YoungFunction {
        &self.e
    }

    fn magnitude(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return 0.0;
        }
        let y = self.e.value(d);
        if !y.is_finite() {
            return f64::INFINITY;
        }
        self.conj.generalized_inverse(y).unwrap_or(f64::INFINITY)
    }

    /// `π(x, u)` given the band limits at `x`.
    pub fn value(&self, u: f64, lo: f64, hi: f64) -> f64 {
        if u > hi {
            self.magnitude(u - hi)
        } else if u < lo {
            -self.magnitude(lo - u)
        } else {
            0.0
        }
    }
}

/// Nodal values of `π(x, u)`.
pub fn penalty(u: &GridFunction, sub: &GridFunction, sup: &GridFunction, e: &YoungFunction) -> Result<GridFunction> {
    let p = Penalty::new(e)?;
    let v = u.values().iter().zip(sub.values().iter().zip(sup.values())).map(|(&x, (&lo, &hi))| p.value(x, lo, hi)).collect();
    u.with_values(v)
}

/// Starting iterate of the nonlinear solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// Solution of a Poisson problem with the load at `T(0)`, scaled into the band.
    Poisson,
    Zero,
    Sub,
    Super,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverControls {
    /// Cap on Newton plus fixed-point iterations per penalty parameter.
    pub max_outer_iterations: usize,
    /// Tolerance on the weak residual, the enclosure violation and the
    /// penalty norm.
    pub tolerance: f64,
    pub line_search_halvings: usize,
    /// Under-relaxation of the fixed-point fallback.
    pub relaxation: f64,
    /// Fixed-point iterations per fallback phase.
    pub fallback_iterations: usize,
    /// Relative finite-difference step of the Jacobian.
    pub fd_step: f64,
    pub initial_guess: InitialGuess,
}

impl Default for SolverControls {
    fn default() -> Self {
        SolverControls {
            max_outer_iterations: 200,
            tolerance: 1e-8,
            line_search_halvings: 30,
            relaxation: 0.5,
            fallback_iterations: 25,
            fd_step: 1e-7,
            initial_guess: InitialGuess::Poisson,
        }
    }
}

pub fn default_mu_schedule() -> Vec<f64> {
    vec![1.0, 10.0, 100.0, 1000.0, 10000.0]
}

/// Mesh, operator, convection term and band `[sub, super]` of the discrete
/// truncated and penalized problem.
#[derive(Debug, Clone)]
pub struct TruncatedProblem {
    pub mesh: Arc<Mesh>,
    pub operator: EllipticOperator,
    pub convection: ConvectionTerm,
    pub a: YoungFunction,
    pub sub: GridFunction,
    pub sup: GridFunction,
    pub penalty_profile: YoungFunction,
    pub mu_schedule: Vec<f64>,
    pub controls: SolverControls,
}

impl TruncatedProblem {
    /// Validates `sub <= super`, `sub <= 0 <= super` on the boundary, and an
    /// increasing positive penalty schedule.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mesh: Arc<Mesh>,
        operator: EllipticOperator,
        convection: ConvectionTerm,
        a: YoungFunction,
        sub: GridFunction,
        sup: GridFunction,
        penalty_profile: YoungFunction,
        mu_schedule: Vec<f64>,
        controls: SolverControls,
    ) -> Result<TruncatedProblem> {
        if sub.values().len() != mesh.num_nodes() || sup.values().len() != mesh.num_nodes() {
            return Err(Error::Domain("sub and super must live on the problem mesh".into()));
        }
        check_order(&sub, &sup)?;
        for i in 0..mesh.num_nodes() {
            if mesh.is_boundary(i) && !(sub.values()[i] <= 0.0 && sup.values()[i] >= 0.0) {
                return Err(Error::Domain(format!("boundary node {i} needs sub <= 0 <= super")));
            }
        }
        if mu_schedule.is_empty() || mu_schedule.iter().any(|&m| !(m > 0.0)) || mu_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("mu schedule must be a non-empty increasing list of positive values".into()));
        }
        if !penalty_profile.is_finite_valued() {
            return Err(Error::Precondition(format!("penalty profile {} is not finite-valued", penalty_profile.name())));
        }
        if !(controls.tolerance > 0.0) || !(controls.relaxation > 0.0 && controls.relaxation <= 1.0) {
            return Err(Error::Domain("tolerance must be positive and relaxation in (0, 1]".into()));
        }
        Ok(TruncatedProblem { mesh, operator, convection, a, sub, sup, penalty_profile, mu_schedule, controls })
    }

    pub fn with_operator(&self, operator: EllipticOperator) -> TruncatedProblem {
        TruncatedProblem { operator, ..self.clone() }
    }

    pub fn with_convection(&self, convection: ConvectionTerm) -> TruncatedProblem {
        TruncatedProblem { convection, ..self.clone() }
    }
}

/// One nonlinear iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub mu: f64,
    pub iteration: usize,
    pub method: &'static str,
    /// Normalized dual residual after the step.
    pub residual: f64,
    pub step_length: f64,
}

/// Outcome of [`solve_truncated`].
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: GridFunction,
    pub mu_used: f64,
    pub outer_iterations: usize,
    /// Untruncated weak residual, `max_i |<R(u), φ_i>| / ||φ_i||_{W^{1,A}}`.
    pub weak_residual_norm: f64,
    /// The same norm for the truncated, penalized residual at `mu_used`.
    pub truncated_residual_norm: f64,
    pub enclosure_violation: f64,
    pub penalty_norm: f64,
    pub converged: bool,
    pub modular_u: f64,
    pub modular_gradient: f64,
    pub max_value: f64,
    pub min_value: f64,
    pub history: Vec<IterationRecord>,
    pub notes: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshSpec;

    fn line(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::new(MeshSpec::Interval { x0: 0.0, x1: 1.0, nodes: n }).unwrap())
    }

    #[test]
    fn clamp_regions_split_at_quarter_points() {
        let m = line(41);
        let u = GridFunction::from_fn(m.clone(), |x| 2.0 * x[0] - 0.5);
        let (lo, hi) = (GridFunction::zeros(m.clone()), GridFunction::constant(m.clone(), 1.0));
        let t = truncate(&u, &lo, &hi).unwrap();
        for (p, v) in m.nodes().iter().zip(t.values()) {
            assert_eq!(*v, (2.0 * p[0] - 0.5).clamp(0.0, 1.0));
        }
        let rules = truncation_gradient_rule(&u, &lo, &hi).unwrap();
        for (e, r) in rules.iter().enumerate() {
            for (k, &v) in m.element(e).iter().enumerate() {
                let x = m.node(v)[0];
                let want = if x < 0.25 {
                    Region::Below
                } else if x > 0.75 {
                    Region::Above
                } else {
                    Region::Inside
                };
                assert_eq!(r.points[k], want, "node at {x}");
            }
            if m.element(e).iter().all(|&v| m.node(v)[0] < 0.25) {
                assert_eq!(r.majority, Region::Below);
            }
        }
    }

    #[test]
    fn penalty_for_square_profile_is_twice_the_violation() {
        let m = line(5);
        let (lo, hi) = (GridFunction::zeros(m.clone()), GridFunction::constant(m.clone(), 1.0));
        let u = GridFunction::new(m.clone(), vec![-0.3, 0.0, 0.5, 1.0, 1.25]).unwrap();
        let pi = penalty(&u, &lo, &hi, &crate::young::power(2.0)).unwrap();
        let want = [-0.6, 0.0, 0.0, 0.0, 0.5];
        for (g, w) in pi.values().iter().zip(want) {
            assert!((g - w).abs() < 1e-9, "{g} vs {w}");
        }
    }

    #[test]
    fn sub_above_super_is_rejected() {
        let m = line(4);
        let u = GridFunction::zeros(m.clone());
        assert!(truncate(&u, &GridFunction::constant(m.clone(), 1.0), &GridFunction::zeros(m)).is_err());
    }
}
