//! Modulars, Luxemburg norms, and the Hölder, coercivity and Poincaré
//! inequalities on grid functions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{norm2, GridFunction};
use crate::mesh::Mesh;
use crate::roots;
use crate::young::{estimate_indices, YoungFunction};

/// Quadrature weights and values of `u`: element midpoints in 1D, lumped
/// vertices in 2D (the three-point vertex rule summed per node).
pub fn quadrature(u: &GridFunction) -> (Vec<f64>, Vec<f64>) {
    let mesh = u.mesh();
    let vals = u.values();
    if mesh.dim() == 1 {
        let w = (0..mesh.num_elements()).map(|e| mesh.measure(e)).collect();
        let v = (0..mesh.num_elements())
            .map(|e| {
                let el = mesh.element(e);
                0.5 * (vals[el[0]] + vals[el[1]])
            })
            .collect();
        (w, v)
    } else {
        ((0..mesh.num_nodes()).map(|i| mesh.node_weight(i)).collect(), vals.to_vec())
    }
}

fn modular_of(w: &[f64], v: &[f64], a: &YoungFunction, scale: f64) -> f64 {
    let mut s = 0.0;
    for (wi, vi) in w.iter().zip(v) {
        let x = a.value(scale * vi.abs());
        if !x.is_finite() {
            return f64::INFINITY;
        }
        s += wi * x;
    }
    s
}

/// `int A(|u|)` with the fixed quadrature rule.
pub fn modular(u: &GridFunction, a: &YoungFunction) -> f64 {
    let (w, v) = quadrature(u);
    modular_of(&w, &v, a, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormReport {
    pub modular_value: f64,
    pub luxemburg_norm: f64,
    /// Final bracket on the norm.
    pub lambda_bracket: (f64, f64),
}

/// `inf{lambda > 0 : int A(|u|/lambda) <= 1}`.
pub fn luxemburg_norm(u: &GridFunction, a: &YoungFunction) -> NormReport {
    let (w, v) = quadrature(u);
    luxemburg_of_samples(&w, &v, a)
}

/// Luxemburg norm of the quadrature samples `v` with weights `w`.
pub fn luxemburg_of_samples(w: &[f64], v: &[f64], a: &YoungFunction) -> NormReport {
    let modular_value = modular_of(w, v, a, 1.0);
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if vmax == 0.0 {
        return NormReport { modular_value, luxemburg_norm: 0.0, lambda_bracket: (0.0, 0.0) };
    }
    // phi(mu) = int A(mu |u|) is non-decreasing in mu = 1/lambda
    let phi = |mu: f64| modular_of(w, v, a, mu);
    let mut hi = 1.0 / vmax;
    while phi(hi) <= 1.0 {
        hi *= 4.0;
    }
    let mut lo = hi;
    while phi(lo) > 1.0 {
        lo *= 0.25;
    }
    let (lo, hi) = roots::sup_below_bracket(phi, 1.0, lo, hi, 1e-15);
    NormReport { modular_value, luxemburg_norm: 1.0 / lo, lambda_bracket: (1.0 / hi, 1.0 / lo) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderReport {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// `int |uv| <= 2 ||u||_A ||v||_conj`, with tolerance `1e-8 (1 + rhs)`.
pub fn holder_pairing_check(u: &GridFunction, v: &GridFunction, a: &YoungFunction, conj: &YoungFunction) -> HolderReport {
    let (w, uq) = quadrature(u);
    let (_, vq) = quadrature(v);
    let lhs: f64 = w.iter().zip(uq.iter().zip(&vq)).map(|(w, (x, y))| w * (x * y).abs()).sum();
    let rhs = 2.0 * luxemburg_norm(u, a).luxemburg_norm * luxemburg_norm(v, conj).luxemburg_norm;
    let slack = rhs - lhs;
    HolderReport { holds: slack >= -1e-8 * (1.0 + rhs), lhs, rhs, slack }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeMargin {
    pub scale: f64,
    pub norm: f64,
    pub modular: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoercivityReport {
    pub holds: bool,
    pub exponent: f64,
    /// Measured constant with `k1 ||w||_A <= ||w||_{A1}` over the probes,
    /// where `A1` agrees with `A` beyond `t0` and is a sum of two powers below.
    pub k1: f64,
    pub t0: f64,
    /// Smallest non-negative constant making the inequality hold on the probes.
    pub k3: f64,
    /// `-min_{t <= t0} (A - A1) |Omega|`.
    pub k3_surrogate: f64,
    pub norm: f64,
    pub modular: f64,
    pub margin: f64,
    pub probes: Vec<ProbeMargin>,
}

struct Surrogate {
    i: f64,
    alpha: f64,
    c1: f64,
    c2: f64,
    t0: f64,
}

impl Surrogate {
    fn new(a: &YoungFunction, i: f64) -> Surrogate {
        // t0: beyond it the index stays above i - eps
        let eps = 0.5 * (i - 1.0).max(1e-6);
        let cap = a.effective_cap();
        let grid = crate::young::log_grid(1e-6, cap, 2000);
        let mut t0 = grid[0];
        for &t in grid.iter().rev() {
            let r = t * a.derivative_or_fd(t) / a.value(t);
            if !(r > i - eps) {
                t0 = t;
                break;
            }
        }
        let alpha = i + 1.0;
        let (at, dt) = (a.value(t0), a.derivative_or_fd(t0));
        let mut c2 = (t0 * dt - i * at) / ((alpha - i) * t0.powf(alpha));
        let mut c1 = (at - c2 * t0.powf(alpha)) / t0.powf(i);
        if c2 < 0.0 || c1 < 0.0 {
            c2 = 0.0;
            c1 = at / t0.powf(i);
        }
        Surrogate { i, alpha, c1, c2, t0 }
    }

    fn young(&self, a: &YoungFunction) -> YoungFunction {
        let (i, alpha, c1, c2, t0) = (self.i, self.alpha, self.c1, self.c2, self.t0);
        let a2 = a.clone();
        YoungFunction::closed_form(
            format!("{}_surrogate", a.name()),
            std::sync::Arc::new(move |t: f64| if t > t0 { a2.value(t) } else { c1 * t.powf(i) + c2 * t.powf(alpha) }),
            None,
            None,
        )
    }
}

/// Coercivity inequality `int A(|v|) >= k1^i ||v||^i - k3` with `i` the
/// near-infinity lower index. Probes are constants and rescalings of `v`.
pub fn coercivity_bound_check(v: &GridFunction, a: &YoungFunction, i_inf_infinity: f64) -> Result<CoercivityReport> {
    if !(i_inf_infinity > 1.0) {
        return Err(Error::Precondition(format!("index {i_inf_infinity} must exceed 1")));
    }
    let i = i_inf_infinity;
    let sur = Surrogate::new(a, i);
    let a1 = sur.young(a);
    let mesh = v.mesh().clone();
    let base = luxemburg_norm(v, a).luxemburg_norm;
    if base == 0.0 {
        return Err(Error::Precondition("probe field is identically zero".into()));
    }
    let vhat = v.scaled(1.0 / base);
    let one = GridFunction::constant(mesh.clone(), 1.0);
    let scales: Vec<f64> = (0..=25).map(|k| 10f64.powf(-2.0 + 0.2 * k as f64)).collect();
    let mut fields = Vec::new();
    for &c in &scales {
        fields.push((c, one.scaled(c)));
        fields.push((c, vhat.scaled(c)));
    }
    let mut k1 = f64::INFINITY;
    for (_, w) in &fields {
        let na = luxemburg_norm(w, a).luxemburg_norm;
        let nb = luxemburg_norm(w, &a1).luxemburg_norm;
        k1 = k1.min(nb / na);
    }
    let m0 = {
        let grid = crate::young::log_grid(1e-6, sur.t0, 400);
        grid.iter().map(|&t| a.value(t) - a1.value(t)).fold(0.0, f64::min)
    };
    let k3_surrogate = -m0 * mesh.domain_measure();
    let mut probes = Vec::new();
    let mut k3 = 0.0f64;
    for (c, w) in &fields {
        let n = luxemburg_norm(w, a);
        if n.luxemburg_norm < 1.0 / k1 {
            continue;
        }
        let bound = (k1 * n.luxemburg_norm).powf(i);
        k3 = k3.max(bound - n.modular_value);
        probes.push(ProbeMargin { scale: *c, norm: n.luxemburg_norm, modular: n.modular_value, bound, margin: 0.0 });
    }
    // rounding noise in the probe modulars is not an offset
    let probe_scale = probes.iter().map(|p| p.modular.abs().max(p.bound.abs())).fold(1.0, f64::max);
    if k3 <= 1e-12 * probe_scale {
        k3 = 0.0;
    }
    for p in probes.iter_mut() {
        p.margin = p.modular - (p.bound - k3);
    }
    if base < 1.0 / k1 {
        return Err(Error::Precondition(format!("||v|| = {base:.6e} is below 1/k1 = {:.6e}", 1.0 / k1)));
    }
    let nv = luxemburg_norm(v, a);
    let bound = (k1 * base).powf(i) - k3;
    let margin = nv.modular_value - bound;
    let scale = 1.0 + nv.modular_value.abs() + bound.abs();
    Ok(CoercivityReport {
        holds: margin >= -1e-9 * scale,
        exponent: i,
        k1,
        t0: sur.t0,
        k3,
        k3_surrogate,
        norm: base,
        modular: nv.modular_value,
        margin,
        probes,
    })
}

/// Coercivity check with the index estimated from `A`.
pub fn coercivity_bound_check_auto(v: &GridFunction, a: &YoungFunction) -> Result<CoercivityReport> {
    let idx = estimate_indices(a)?;
    coercivity_bound_check(v, a, idx.i_inf_infinity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareReport {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub constant: f64,
}

/// Volume of the unit ball in dimension 1 or 2.
pub fn unit_ball_measure(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => std::f64::consts::PI,
        n => {
            // general formula via the gamma recursion
            let mut v = [1.0, 2.0];
            let mut k = 1;
            let mut cur = 2.0;
            while k < n {
                k += 1;
                cur = 2.0 * std::f64::consts::PI / k as f64 * v[0];
                v = [v[1], cur];
            }
            cur
        }
    }
}

/// `int A(|u|) <= int A(omega_n^{-1/n} |Omega|^{1/n} |grad u|)` for
/// zero-trace `u`.
pub fn poincare_modular_check(u: &GridFunction, a: &YoungFunction) -> Result<PoincareReport> {
    if !u.is_zero_trace() {
        return Err(Error::Precondition("field does not vanish on the boundary".into()));
    }
    let mesh: &Mesh = u.mesh();
    let n = mesh.dim() as f64;
    let constant = unit_ball_measure(mesh.dim()).powf(-1.0 / n) * mesh.domain_measure().powf(1.0 / n);
    let lhs = modular(u, a);
    let mut rhs = 0.0;
    for e in 0..mesh.num_elements() {
        rhs += mesh.measure(e) * a.value(constant * norm2(u.element_gradient(e)));
    }
    let slack = rhs - lhs;
    Ok(PoincareReport { holds: slack >= -1e-12 * (1.0 + rhs), lhs, rhs, slack, constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshSpec;
    use crate::young::{power, power_log};
    use std::sync::Arc;

    fn unit(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::new(MeshSpec::Interval { x0: 0.0, x1: 1.0, nodes: n }).unwrap())
    }

    #[test]
    fn modular_examples() {
        let m = unit(101);
        let a = power(2.0);
        assert_eq!(modular(&GridFunction::zeros(m.clone()), &a), 0.0);
        assert!((modular(&GridFunction::constant(m.clone(), 3.0), &a) - 9.0).abs() < 1e-12);
        let x = GridFunction::from_fn(m, |p| p[0]);
        // midpoint rule error for x^2 is h^2/12
        assert!((modular(&x, &a) - 1.0 / 3.0).abs() < 1e-4 / 12.0 + 1e-14);
    }

    #[test]
    fn norm_examples() {
        let m = unit(201);
        for p in [1.5, 2.0, 4.0] {
            let r = luxemburg_norm(&GridFunction::constant(m.clone(), 1.0), &power(p));
            assert!((r.luxemburg_norm - 1.0).abs() < 1e-12);
        }
        let x = GridFunction::from_fn(m, |p| p[0]);
        let r = luxemburg_norm(&x, &power(2.0));
        assert!((r.luxemburg_norm - (1.0f64 / 3.0).sqrt()).abs() < 1e-5);
        assert!(r.lambda_bracket.0 <= r.luxemburg_norm && r.luxemburg_norm <= r.lambda_bracket.1);
    }

    #[test]
    fn holder_with_constants() {
        let m = unit(11);
        let a = power(2.0);
        let one = GridFunction::constant(m, 1.0);
        assert!(holder_pairing_check(&one, &one, &a, &a.conjugate()).holds);
    }

    #[test]
    fn coercivity_pure_power_has_no_offset() {
        let m = unit(21);
        let v = GridFunction::constant(m.clone(), 50.0);
        let r = coercivity_bound_check(&v, &power(3.0), 3.0).unwrap();
        assert!(r.holds);
        assert!((r.k1 - 1.0).abs() < 1e-9);
        assert_eq!(r.k3, 0.0);
        let small = GridFunction::constant(m, 1e-3);
        assert!(coercivity_bound_check(&small, &power_log(2.0, 1.0), 2.0).is_err());
    }

    #[test]
    fn poincare_tent_2d() {
        let m = Arc::new(Mesh::new(MeshSpec::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0, nx: 21, ny: 21 }).unwrap());
        let u = GridFunction::from_fn(m, |x| x[0].min(1.0 - x[0]).min(x[1]).min(1.0 - x[1]));
        let r = poincare_modular_check(&u, &power(2.0)).unwrap();
        assert!(r.holds && r.lhs > 0.0);
    }
}
