//! Negative-energy minimizers of `J(u) = ∫ Φ(x, ∇u) + ρ₁ u − G₁(|u|)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::assembly::{laplacian, stamp, Pattern};
use super::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::{norm2, GridFunction};
use crate::mesh::Mesh;
use crate::operators::{EllipticOperator, Profile, ScalarField};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeControls {
    pub armijo: f64,
    pub backtrack: f64,
    /// Stop when the preconditioned gradient norm falls below this.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MinimizeControls {
    fn default() -> Self {
        MinimizeControls { armijo: 1e-4, backtrack: 0.5, gradient_tolerance: 1e-8, max_iterations: 100_000 }
    }
}

/// Data of the functional. The operator must carry a potential `Φ` with
/// `∇_ξ Φ = ā`; it is evaluated at `s = 0`.
#[derive(Clone)]
pub struct VariationalData {
    pub mesh: Arc<Mesh>,
    pub operator: EllipticOperator,
    pub rho1: ScalarField,
    pub g1: Profile,
    pub controls: MinimizeControls,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizeReport {
    #[serde(skip)]
    pub minimizer: GridFunction,
    pub energy: f64,
    /// `sqrt(g · P⁻¹ g)` with `P` the discrete `H¹` Gram matrix.
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Whether `u` was replaced by `−|u|`.
    pub reflected: bool,
}

struct Functional<'a> {
    data: &'a VariationalData,
    rho: Vec<f64>,
    weights: Vec<f64>,
}

impl Functional<'_> {
    fn g1_integral(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let g = &self.data.g1;
        quad::simpson(&|s| g(s), 0.0, t, 1e-10)
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let mesh = &self.data.mesh;
        let mut j = 0.0;
        for e in 0..mesh.num_elements() {
            let verts = &mesh.element(e)[..mesh.dim() + 1];
            let g = grad(mesh, e, u);
            let w = mesh.measure(e) / verts.len() as f64;
            for &v in verts {
                j += w * self.data.operator.potential(mesh.node(v), 0.0, g).unwrap_or(f64::NAN);
            }
        }
        for (i, &ui) in u.iter().enumerate() {
            j += self.weights[i] * (self.rho[i] * ui - self.g1_integral(ui.abs()));
        }
        j
    }

    /// Frozen-coefficient stiffness of the radial field at `u` plus the
    /// lumped mass, a variable metric for the descent direction.
    fn metric(&self, u: &[f64], pattern: &Pattern) -> Option<BandMatrix> {
        let mesh = &self.data.mesh;
        let op = &self.data.operator;
        if !op.is_radial() {
            return None;
        }
        let grads: Vec<f64> = (0..mesh.num_elements()).map(|e| norm2(grad(mesh, e, u))).collect();
        let t_floor = 1e-6 * (1.0 + grads.iter().fold(0.0f64, |m, t| m.max(*t)));
        let coef: Vec<f64> = (0..mesh.num_elements())
            .map(|e| {
                let verts = &mesh.element(e)[..mesh.dim() + 1];
                let t = grads[e].max(t_floor);
                verts.iter().map(|&v| op.factor(mesh.node(v), 0.0, t).unwrap_or(f64::NAN)).sum::<f64>() / verts.len() as f64
            })
            .collect();
        let big = coef.iter().filter(|c| c.is_finite()).fold(0.0f64, |m, c| m.max(*c));
        if !(big > 0.0) {
            return None;
        }
        let mut k = pattern.empty();
        for (e, c) in coef.iter().enumerate() {
            let c = if c.is_finite() && *c > 1e-8 * big { *c } else { 1e-8 * big };
            stamp(mesh, e, c * mesh.measure(e), &mut k);
        }
        for i in mesh.interior_nodes() {
            k.add(i, i, self.weights[i]);
        }
        pattern.pin_boundary(&mut k);
        Some(k)
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let mesh = &self.data.mesh;
        let mut out = vec![0.0; u.len()];
        for e in 0..mesh.num_elements() {
            let verts = &mesh.element(e)[..mesh.dim() + 1];
            let g = grad(mesh, e, u);
            let w = mesh.measure(e) / verts.len() as f64;
            let mut flux = [0.0; 2];
            for &v in verts {
                let a = self.data.operator.evaluate(mesh.node(v), 0.0, g);
                flux[0] += w * a[0];
                flux[1] += w * a[1];
            }
            for (k, &v) in verts.iter().enumerate() {
                let gb = mesh.basis_grads(e)[k];
                out[v] += flux[0] * gb[0] + flux[1] * gb[1];
            }
        }
        for (i, &ui) in u.iter().enumerate() {
            let g1 = if ui == 0.0 { 0.0 } else { (self.data.g1)(ui.abs()) * ui.signum() };
            out[i] += self.weights[i] * (self.rho[i] - g1);
            if mesh.is_boundary(i) {
                out[i] = 0.0;
            }
        }
        out
    }
}

fn grad(mesh: &Mesh, e: usize, u: &[f64]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (&v, gb) in mesh.element(e).iter().zip(mesh.basis_grads(e)) {
        g[0] += u[v] * gb[0];
        g[1] += u[v] * gb[1];
    }
    g
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes the discrete `J` over the zero-trace space by preconditioned
/// gradient descent with Armijo backtracking, then compares with `−|u|`. The
/// descent metric is the frozen-coefficient stiffness of the current iterate
/// (the `H¹` Gram matrix for non-radial fields); the stopping test uses the
/// fixed `H¹` dual norm.
/// Fails with [`Error::NoNegativeEnergy`] when the minimum is not negative.
pub fn minimize_functional(data: &VariationalData) -> Result<MinimizeReport> {
    let mesh = &data.mesh;
    if !data.operator.has_potential() {
        return Err(Error::Precondition(format!("operator {} has no potential", data.operator.name())));
    }
    let c = data.controls;
    if !(c.armijo > 0.0 && c.armijo < 1.0 && c.backtrack > 0.0 && c.backtrack < 1.0) {
        return Err(Error::Domain("armijo and backtrack constants must lie in (0, 1)".into()));
    }
    let n = mesh.num_nodes();
    let f = Functional {
        data,
        rho: mesh.nodes().iter().map(|&x| (data.rho1)(x)).collect(),
        weights: (0..n).map(|i| mesh.node_weight(i)).collect(),
    };
    let pattern = Pattern::new(mesh);
    let mut gram = laplacian(mesh, &pattern);
    for i in mesh.interior_nodes() {
        gram.add(i, i, f.weights[i]);
    }
    let lu = gram.factor(1e-13).ok_or_else(|| Error::Singular { mu: 0.0, detail: "H1 Gram matrix".into() })?;
    let mut u = vec![0.0; n];
    let mut j = f.energy(&u);
    let mut alpha_prev: f64 = 0.5;
    let mut iterations = 0;
    let mut gnorm;
    loop {
        let g = f.gradient(&u);
        gnorm = dot(&g, &lu.solve(&g)).max(0.0).sqrt();
        if !gnorm.is_finite() {
            return Err(Error::NonFinite { node: g.iter().position(|v| !v.is_finite()).unwrap_or(0) });
        }
        if gnorm < c.gradient_tolerance || iterations >= c.max_iterations {
            break;
        }
        let step = f.metric(&u, &pattern).and_then(|m| m.factor(1e-13));
        let d: Vec<f64> = step.as_ref().unwrap_or(&lu).solve(&g).iter().map(|v| -v).collect();
        let slope = dot(&g, &d);
        let mut alpha = (2.0 * alpha_prev).min(1e8);
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let jc = f.energy(&cand);
            if jc <= j + c.armijo * alpha * slope {
                accepted = Some((cand, jc));
                break;
            }
            alpha *= c.backtrack;
        }
        let Some((cand, jc)) = accepted else {
            if gnorm < 1e3 * c.gradient_tolerance {
                // roundoff floor of the energy differences
                break;
            }
            return Err(Error::LineSearch(format!("no Armijo step at iteration {iterations}, gradient norm {gnorm:.3e}")));
        };
        u = cand;
        j = jc;
        alpha_prev = alpha;
        iterations += 1;
    }
    let reflected_u: Vec<f64> = u.iter().map(|v| -v.abs()).collect();
    let jr = f.energy(&reflected_u);
    let reflected = jr <= j && reflected_u != u;
    if jr <= j {
        u = reflected_u;
        j = jr;
    }
    if !(j < 0.0) {
        return Err(Error::NoNegativeEnergy { energy: j });
    }
    Ok(MinimizeReport { minimizer: GridFunction::new(mesh.clone(), u)?, energy: j, gradient_norm: gnorm, iterations, reflected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshSpec;
    use crate::operators::{make_builtin, Params};

    fn data(rho: f64) -> VariationalData {
        let params: Params = [("p".to_string(), 2.0)].into_iter().collect();
        VariationalData {
            mesh: Arc::new(Mesh::new(MeshSpec::Interval { x0: 0.0, x1: 1.0, nodes: 21 }).unwrap()),
            operator: make_builtin("p_laplacian", &params, None).unwrap(),
            rho1: Arc::new(move |_| rho),
            g1: Arc::new(|_| 0.0),
            controls: MinimizeControls::default(),
        }
    }

    #[test]
    fn quadratic_energy_minimizer_is_the_negative_parabola() {
        let rep = minimize_functional(&data(1.0)).unwrap();
        assert!(rep.energy < 0.0);
        for (x, u) in rep.minimizer.mesh().nodes().iter().zip(rep.minimizer.values()) {
            let exact = -x[0] * (1.0 - x[0]) / 2.0;
            assert!((u - exact).abs() < 1e-7, "{u} vs {exact}");
        }
        // J(u) = -1/2 int u' ^2 for the exact minimizer: -1/24
        assert!((rep.energy + 1.0 / 24.0).abs() < 1e-3);
    }

    #[test]
    fn zero_data_signals_no_subsolution() {
        match minimize_functional(&data(0.0)) {
            Err(Error::NoNegativeEnergy { energy }) => assert_eq!(energy, 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
