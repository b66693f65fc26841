//! Residual assembly, dual norms, finite-difference Jacobians and the
//! auxiliary linear systems of the nonlinear solve.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::banded::BandMatrix;
use super::{region, Penalty, Region, TruncatedProblem};
use crate::error::{Error, Result};
use crate::grid::{norm2, GridFunction};
use crate::mesh::Mesh;
use crate::orlicz::luxemburg_of_samples;
use crate::young::YoungFunction;

/// Which residual is assembled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Mode {
    /// `⟨ā(x, Tu, ∇u), ∇φ⟩ + μ⟨π(x, u), φ⟩ − ⟨f(x, Tu, ∇Tu), φ⟩`
    Truncated { mu: f64 },
    /// `⟨ā(x, u, ∇u), ∇φ⟩ − ⟨f(x, u, ∇u), φ⟩`
    Plain,
}

fn gradient(mesh: &Mesh, e: usize, u: &[f64]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (&v, gb) in mesh.element(e).iter().zip(mesh.basis_grads(e)) {
        g[0] += u[v] * gb[0];
        g[1] += u[v] * gb[1];
    }
    g
}

/// Data of a problem reused across residual evaluations.
pub(crate) struct Prepared<'a> {
    pub prob: &'a TruncatedProblem,
    pub penalty: Penalty,
    grad_sub: Vec<[f64; 2]>,
    grad_sup: Vec<[f64; 2]>,
}

impl<'a> Prepared<'a> {
    pub fn new(prob: &'a TruncatedProblem) -> Result<Prepared<'a>> {
        let mesh = &prob.mesh;
        let ne = mesh.num_elements();
        Ok(Prepared {
            prob,
            penalty: Penalty::new(&prob.penalty_profile)?,
            grad_sub: (0..ne).map(|e| gradient(mesh, e, prob.sub.values())).collect(),
            grad_sup: (0..ne).map(|e| gradient(mesh, e, prob.sup.values())).collect(),
        })
    }

    fn element(&self, e: usize, u: &[f64], mode: Mode) -> Result<[f64; 3]> {
        let prob = self.prob;
        let mesh = &prob.mesh;
        let verts = &mesh.element(e)[..mesh.dim() + 1];
        let gb = mesh.basis_grads(e);
        let w = mesh.measure(e) / verts.len() as f64;
        let (lo, hi) = (prob.sub.values(), prob.sup.values());
        let gu = gradient(mesh, e, u);
        let mut flux = [0.0; 2];
        let mut out = [0.0; 3];
        let mut source = [0.0; 3];
        for (k, &v) in verts.iter().enumerate() {
            let x = mesh.node(v);
            let (s, g) = match mode {
                Mode::Plain => (u[v], gu),
                Mode::Truncated { .. } => {
                    let g = match region(u[v], lo[v], hi[v]) {
                        Region::Inside => gu,
                        Region::Below => self.grad_sub[e],
                        Region::Above => self.grad_sup[e],
                    };
                    (u[v].clamp(lo[v], hi[v]), g)
                }
            };
            let a = prob.operator.evaluate(x, s, gu);
            flux[0] += w * a[0];
            flux[1] += w * a[1];
            source[k] = w * prob.convection.evaluate(x, s, g);
        }
        for k in 0..verts.len() {
            out[k] = flux[0] * gb[k][0] + flux[1] * gb[k][1] - source[k];
            if !out[k].is_finite() {
                return Err(Error::NonFinite { node: verts[k] });
            }
        }
        Ok(out)
    }

    /// Residual vector; boundary entries are zero.
    pub fn residual(&self, u: &[f64], mode: Mode) -> Result<Vec<f64>> {
        let mesh = &self.prob.mesh;
        let parts: Vec<Result<[f64; 3]>> = (0..mesh.num_elements()).into_par_iter().map(|e| self.element(e, u, mode)).collect();
        let mut r = vec![0.0; mesh.num_nodes()];
        for (e, part) in parts.into_iter().enumerate() {
            let part = part?;
            for (k, &v) in mesh.element(e)[..mesh.dim() + 1].iter().enumerate() {
                r[v] += part[k];
            }
        }
        if let Mode::Truncated { mu } = mode {
            let (lo, hi) = (self.prob.sub.values(), self.prob.sup.values());
            for (i, ri) in r.iter_mut().enumerate() {
                let p = self.penalty.value(u[i], lo[i], hi[i]);
                if p != 0.0 {
                    *ri += mu * mesh.node_weight(i) * p;
                    if !ri.is_finite() {
                        return Err(Error::NonFinite { node: i });
                    }
                }
            }
        }
        for (i, ri) in r.iter_mut().enumerate() {
            if mesh.is_boundary(i) {
                *ri = 0.0;
            }
        }
        Ok(r)
    }

    /// `int |π(x, u)|` with lumped weights.
    pub fn penalty_norm(&self, u: &[f64]) -> f64 {
        let (lo, hi) = (self.prob.sub.values(), self.prob.sup.values());
        (0..u.len()).map(|i| self.prob.mesh.node_weight(i) * self.penalty.value(u[i], lo[i], hi[i]).abs()).sum()
    }

    /// Frozen-coefficient stiffness of a radial operator at `u` plus the
    /// penalty derivative; `None` for non-radial fields.
    pub fn kacanov(&self, u: &[f64], mu: f64, pattern: &Pattern) -> Option<BandMatrix> {
        let prob = self.prob;
        if !prob.operator.is_radial() {
            return None;
        }
        let mesh = &prob.mesh;
        let (lo, hi) = (prob.sub.values(), prob.sup.values());
        let coef: Vec<f64> = (0..mesh.num_elements())
            .map(|e| {
                let verts = &mesh.element(e)[..mesh.dim() + 1];
                let t = norm2(gradient(mesh, e, u));
                let w = mesh.measure(e) / verts.len() as f64;
                verts
                    .iter()
                    .map(|&v| {
                        let phi = prob.operator.factor(mesh.node(v), u[v].clamp(lo[v], hi[v]), t).unwrap_or(f64::NAN);
                        w * phi
                    })
                    .sum()
            })
            .collect();
        let big = coef.iter().filter(|c| c.is_finite()).fold(0.0f64, |m, c| m.max(c.abs()));
        let floor = if big > 0.0 { 1e-8 * big } else { 1.0 };
        let mut k = pattern.empty();
        for (e, c) in coef.iter().enumerate() {
            let c = if c.is_finite() && *c > floor { *c } else { floor };
            stamp(mesh, e, c, &mut k);
        }
        for i in 0..mesh.num_nodes() {
            if mesh.is_boundary(i) {
                continue;
            }
            if u[i] > hi[i] || u[i] < lo[i] {
                let h = 1e-7 * (1.0 + u[i].abs());
                let dp = (self.penalty.value(u[i] + h, lo[i], hi[i]) - self.penalty.value(u[i] - h, lo[i], hi[i])) / (2.0 * h);
                if dp.is_finite() && dp > 0.0 {
                    k.add(i, i, mu * mesh.node_weight(i) * dp);
                }
            }
        }
        pattern.pin_boundary(&mut k);
        Some(k)
    }
}

/// Adds `c ∇φ_a·∇φ_b` of element `e`, restricted to interior rows and columns.
pub(crate) fn stamp(mesh: &Mesh, e: usize, c: f64, k: &mut BandMatrix) {
    let verts = &mesh.element(e)[..mesh.dim() + 1];
    let gb = mesh.basis_grads(e);
    for (a, &i) in verts.iter().enumerate() {
        if mesh.is_boundary(i) {
            continue;
        }
        for (b, &j) in verts.iter().enumerate() {
            if !mesh.is_boundary(j) {
                k.add(i, j, c * (gb[a][0] * gb[b][0] + gb[a][1] * gb[b][1]));
            }
        }
    }
}

/// Node adjacency, band widths and a distance-2 colouring for Jacobians.
pub(crate) struct Pattern {
    n: usize,
    kl: usize,
    ku: usize,
    boundary: Vec<bool>,
    adjacency: Vec<Vec<usize>>,
    colors: Vec<Vec<usize>>,
}

impl Pattern {
    pub fn new(mesh: &Mesh) -> Pattern {
        let n = mesh.num_nodes();
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in 0..mesh.num_elements() {
            let verts = &mesh.element(e)[..mesh.dim() + 1];
            for &i in verts {
                adjacency[i].extend_from_slice(verts);
            }
        }
        let (mut kl, mut ku) = (0, 0);
        for (i, adj) in adjacency.iter_mut().enumerate() {
            adj.sort_unstable();
            adj.dedup();
            if adj.is_empty() {
                adj.push(i);
            }
            kl = kl.max(i - adj[0].min(i));
            ku = ku.max(adj[adj.len() - 1].max(i) - i);
        }
        let boundary: Vec<bool> = (0..n).map(|i| mesh.is_boundary(i)).collect();
        // greedy distance-2 colouring of the interior nodes
        let mut color = vec![usize::MAX; n];
        let mut colors: Vec<Vec<usize>> = Vec::new();
        let mut used = Vec::new();
        for j in 0..n {
            if boundary[j] {
                continue;
            }
            used.clear();
            for &i in &adjacency[j] {
                for &k in &adjacency[i] {
                    if color[k] != usize::MAX {
                        used.push(color[k]);
                    }
                }
            }
            let c = (0..).find(|c| !used.contains(c)).unwrap();
            color[j] = c;
            if c == colors.len() {
                colors.push(Vec::new());
            }
            colors[c].push(j);
        }
        Pattern { n, kl, ku, boundary, adjacency, colors }
    }

    pub fn empty(&self) -> BandMatrix {
        BandMatrix::zeros(self.n, self.kl, self.ku)
    }

    pub fn pin_boundary(&self, m: &mut BandMatrix) {
        for i in 0..self.n {
            if self.boundary[i] {
                m.set(i, i, 1.0);
            }
        }
    }

    #[cfg(test)]
    pub fn num_colors(&self) -> usize {
        self.colors.len()
    }

    /// Forward-difference Jacobian of `residual` at `u`, whose value `r0` is
    /// given.
    pub fn jacobian(&self, u: &[f64], r0: &[f64], rel_step: f64, residual: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<BandMatrix> {
        let mut jac = self.empty();
        let mut up = u.to_vec();
        let steps: Vec<f64> = u.iter().map(|v| rel_step * (1.0 + v.abs())).collect();
        for group in &self.colors {
            for &j in group {
                up[j] = u[j] + steps[j];
            }
            let r = residual(&up)?;
            for &j in group {
                // the difference actually represented in floating point
                let h = up[j] - u[j];
                for &i in &self.adjacency[j] {
                    if !self.boundary[i] {
                        jac.set(i, j, (r[i] - r0[i]) / h);
                    }
                }
                up[j] = u[j];
            }
        }
        self.pin_boundary(&mut jac);
        Ok(jac)
    }
}

/// Standard P1 stiffness matrix with identity boundary rows.
pub(crate) fn laplacian(mesh: &Mesh, pattern: &Pattern) -> BandMatrix {
    let mut k = pattern.empty();
    for e in 0..mesh.num_elements() {
        stamp(mesh, e, mesh.measure(e), &mut k);
    }
    pattern.pin_boundary(&mut k);
    k
}

/// `‖φ_i‖_A + ‖∇φ_i‖_A` for every nodal basis function, with the quadrature
/// of the modular.
pub fn basis_norms(mesh: &Mesh, a: &YoungFunction) -> Vec<f64> {
    let patches = mesh.node_elements();
    (0..mesh.num_nodes())
        .into_par_iter()
        .map(|i| {
            let patch = &patches[i];
            let (w, v): (Vec<f64>, Vec<f64>) = if mesh.dim() == 1 {
                patch.iter().map(|&e| (mesh.measure(e), 0.5)).unzip()
            } else {
                (vec![mesh.node_weight(i)], vec![1.0])
            };
            let value = luxemburg_of_samples(&w, &v, a).luxemburg_norm;
            let (gw, gv): (Vec<f64>, Vec<f64>) = patch
                .iter()
                .map(|&e| {
                    let k = mesh.element(e).iter().position(|&x| x == i).unwrap();
                    (mesh.measure(e), norm2(mesh.basis_grads(e)[k]))
                })
                .unzip();
            value + luxemburg_of_samples(&gw, &gv, a).luxemburg_norm
        })
        .collect()
}

/// `max_i |r_i| / ‖φ_i‖_{W^{1,A}}` over interior nodes.
pub(crate) fn dual_norm(mesh: &Mesh, r: &[f64], norms: &[f64]) -> f64 {
    (0..r.len()).filter(|&i| !mesh.is_boundary(i)).fold(0.0, |m, i| m.max(r[i].abs() / norms[i]))
}

/// `⟨𝒜_μ(u), φ_i⟩` for every node (zero at boundary nodes).
pub fn assemble_residual(u: &GridFunction, prob: &TruncatedProblem, mu: f64) -> Result<Vec<f64>> {
    if !u.is_zero_trace() {
        return Err(Error::Domain("assemble_residual needs a zero-trace iterate".into()));
    }
    if u.values().len() != prob.mesh.num_nodes() {
        return Err(Error::Domain("iterate does not live on the problem mesh".into()));
    }
    Prepared::new(prob)?.residual(u.values(), Mode::Truncated { mu })
}

/// Outcome of the residual sign test of the band ends.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignCheck {
    pub sub_ok: bool,
    pub super_ok: bool,
    /// Largest normalized positive residual at `sub`.
    pub sub_violation: f64,
    /// Largest normalized negative residual at `super`.
    pub super_violation: f64,
    pub sign_tolerance: f64,
}

/// Tests `⟨ā(x, u̲, ∇u̲), ∇φ⟩ − ⟨f(x, u̲, ∇u̲), φ⟩ <= 0` and the reverse
/// inequality at `ū` for all interior nodal basis functions.
pub fn sub_super_check(prob: &TruncatedProblem, sign_tolerance: f64) -> Result<SignCheck> {
    let prep = Prepared::new(prob)?;
    let norms = basis_norms(&prob.mesh, &prob.a);
    let mesh = &prob.mesh;
    let scaled = |u: &[f64]| -> Result<Vec<f64>> {
        let r = prep.residual(u, Mode::Plain)?;
        Ok((0..r.len()).map(|i| if mesh.is_boundary(i) { 0.0 } else { r[i] / norms[i] }).collect())
    };
    let rs = scaled(prob.sub.values())?;
    let rp = scaled(prob.sup.values())?;
    let sub_violation = rs.iter().fold(0.0f64, |m, v| m.max(*v));
    let super_violation = rp.iter().fold(0.0f64, |m, v| m.max(-v));
    Ok(SignCheck {
        sub_ok: sub_violation <= sign_tolerance,
        super_ok: super_violation <= sign_tolerance,
        sub_violation,
        super_violation,
        sign_tolerance,
    })
}

/// `min over rays of ⟨𝒜_μ(t v), t v⟩ / ‖∇(t v)‖_A` at growing amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoercivityProbe {
    pub amplitudes: Vec<f64>,
    pub min_ratios: Vec<f64>,
    /// The ratio grows from the first to the last amplitude.
    pub growing: bool,
}

/// Probes the coercivity of `𝒜_μ` along random zero-trace rays.
pub fn coercivity_probe(prob: &TruncatedProblem, mu: f64, rays: usize, seed: u64) -> Result<CoercivityProbe> {
    let prep = Prepared::new(prob)?;
    let mesh = &prob.mesh;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amplitudes: Vec<f64> = (0..7).map(|k| 10f64.powi(k - 1)).collect();
    let mut min_ratios = vec![f64::INFINITY; amplitudes.len()];
    for _ in 0..rays.max(1) {
        let v: Vec<f64> = (0..mesh.num_nodes()).map(|i| if mesh.is_boundary(i) { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
        for (k, &t) in amplitudes.iter().enumerate() {
            let tv: Vec<f64> = v.iter().map(|x| t * x).collect();
            let r = prep.residual(&tv, Mode::Truncated { mu })?;
            let pairing: f64 = r.iter().zip(&tv).map(|(a, b)| a * b).sum();
            let g = GridFunction::new(mesh.clone(), tv)?;
            let (w, gv): (Vec<f64>, Vec<f64>) = (0..mesh.num_elements()).map(|e| (mesh.measure(e), norm2(g.element_gradient(e)))).unzip();
            let norm = luxemburg_of_samples(&w, &gv, &prob.a).luxemburg_norm;
            min_ratios[k] = min_ratios[k].min(pairing / norm);
        }
    }
    let growing = min_ratios[min_ratios.len() - 1] > min_ratios[0];
    Ok(CoercivityProbe { amplitudes, min_ratios, growing })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::MeshSpec;
    use crate::operators::{make_builtin, make_convection, Params};
    use crate::solver::{default_mu_schedule, SolverControls};
    use crate::young::power;

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn poisson(mesh: Arc<Mesh>, lo: f64, hi: f64) -> TruncatedProblem {
        TruncatedProblem::new(
            mesh.clone(),
            make_builtin("p_laplacian", &params(&[("p", 2.0)]), None).unwrap(),
            make_convection("constant", &params(&[("c", 1.0)]), None).unwrap(),
            power(2.0),
            GridFunction::constant(mesh.clone(), lo),
            GridFunction::constant(mesh, hi),
            power(2.0),
            default_mu_schedule(),
            SolverControls::default(),
        )
        .unwrap()
    }

    #[test]
    fn linear_residual_matches_the_stiffness_system() {
        let mesh = Arc::new(Mesh::new(MeshSpec::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 2.0, nx: 7, ny: 9 }).unwrap());
        let prob = poisson(mesh.clone(), -100.0, 100.0);
        let pattern = Pattern::new(&mesh);
        let k = laplacian(&mesh, &pattern);
        let mut u = GridFunction::from_fn(mesh.clone(), |x| (3.0 * x[0]).sin() * x[1]);
        u.pin_boundary();
        let r = assemble_residual(&u, &prob, 10.0).unwrap();
        let ku = k.mul_vec(u.values());
        for i in mesh.interior_nodes() {
            let want = ku[i] - mesh.node_weight(i);
            assert!((r[i] - want).abs() < 1e-12, "node {i}: {} vs {want}", r[i]);
        }
        // the frozen-coefficient matrix of p = 2 is the stiffness matrix
        let prep = Prepared::new(&prob).unwrap();
        let kk = prep.kacanov(u.values(), 1.0, &pattern).unwrap();
        for i in 0..mesh.num_nodes() {
            for j in 0..mesh.num_nodes() {
                if k.in_band(i, j) {
                    assert!((k.get(i, j) - kk.get(i, j)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fd_jacobian_of_a_linear_residual_is_exact() {
        let mesh = Arc::new(Mesh::new(MeshSpec::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0, nx: 6, ny: 5 }).unwrap());
        let prob = poisson(mesh.clone(), -100.0, 100.0);
        let prep = Prepared::new(&prob).unwrap();
        let pattern = Pattern::new(&mesh);
        assert!(pattern.num_colors() < 20);
        let u = vec![0.0; mesh.num_nodes()];
        let r0 = prep.residual(&u, Mode::Plain).unwrap();
        let j = pattern.jacobian(&u, &r0, 1e-6, |v| prep.residual(v, Mode::Plain)).unwrap();
        let k = laplacian(&mesh, &pattern);
        for i in 0..mesh.num_nodes() {
            for jj in 0..mesh.num_nodes() {
                if k.in_band(i, jj) {
                    assert!((k.get(i, jj) - j.get(i, jj)).abs() < 1e-7, "({i},{jj})");
                }
            }
        }
    }

    #[test]
    fn zero_is_not_a_solution_with_a_positive_source() {
        let mesh = Arc::new(Mesh::new(MeshSpec::Interval { x0: 0.0, x1: 1.0, nodes: 11 }).unwrap());
        let prob = poisson(mesh.clone(), 0.0, 1.0);
        let r = assemble_residual(&GridFunction::zeros(mesh.clone()), &prob, 1.0).unwrap();
        for i in mesh.interior_nodes() {
            assert!((r[i] + 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn penalty_pushes_back_into_the_band() {
        let mesh = Arc::new(Mesh::new(MeshSpec::Interval { x0: 0.0, x1: 1.0, nodes: 11 }).unwrap());
        let prob =
            TruncatedProblem { convection: make_convection("zero", &Params::new(), None).unwrap(), ..poisson(mesh.clone(), 0.0, 0.5) };
        let u = GridFunction::from_fn(mesh.clone(), |x| if x[0] == 0.0 || x[0] == 1.0 { 0.0 } else { 3.0 * (x[0] - 0.5) });
        let prep = Prepared::new(&prob).unwrap();
        let base = prep.residual(u.values(), Mode::Truncated { mu: 0.0 }).unwrap();
        let r = prep.residual(u.values(), Mode::Truncated { mu: 5.0 }).unwrap();
        for i in mesh.interior_nodes() {
            let v = u.values()[i];
            let extra = r[i] - base[i];
            if v > 0.5 {
                assert!(extra > 0.0);
            } else if v < 0.0 {
                assert!(extra < 0.0);
            } else {
                assert_eq!(extra, 0.0);
            }
        }
    }

    #[test]
    fn constant_band_ends_pass_the_sign_test() {
        let mesh = Arc::new(Mesh::new(MeshSpec::Interval { x0: 0.0, x1: 1.0, nodes: 11 }).unwrap());
        // with f = 1 a constant is a subsolution but not a supersolution
        let check = sub_super_check(&poisson(mesh.clone(), 0.0, 1.0), 1e-6).unwrap();
        assert!(check.sub_ok && !check.super_ok, "{check:?}");
        let neutral = TruncatedProblem { convection: make_convection("zero", &Params::new(), None).unwrap(), ..poisson(mesh, 0.0, 1.0) };
        let check = sub_super_check(&neutral, 1e-6).unwrap();
        assert!(check.sub_ok && check.super_ok, "{check:?}");
    }

    #[test]
    fn basis_norms_of_the_quadratic_young_function() {
        // A = t^2: ||grad phi||^2 = 2/h, ||phi||^2 = 2 * h * 1/4 in 1D
        let mesh = Mesh::new(MeshSpec::Interval { x0: 0.0, x1: 1.0, nodes: 11 }).unwrap();
        let n = basis_norms(&mesh, &power(2.0));
        let h: f64 = 0.1;
        let want = (2.0 * h * 0.25).sqrt() + (2.0 / h).sqrt();
        assert!((n[5] - want).abs() < 1e-9 * want, "{} vs {want}", n[5]);
    }

    #[test]
    fn coercivity_probe_grows_for_the_laplacian() {
        let mesh = Arc::new(Mesh::new(MeshSpec::Interval { x0: 0.0, x1: 1.0, nodes: 21 }).unwrap());
        let probe = coercivity_probe(&poisson(mesh, 0.0, 1.0), 1.0, 3, 7).unwrap();
        assert!(probe.growing, "{probe:?}");
    }
}
