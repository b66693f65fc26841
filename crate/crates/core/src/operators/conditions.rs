use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{EllipticOperator, Point, SampleSpec};
use crate::error::{Error, Result};
use crate::young::YoungFunction;

/// Relative tolerance for inequalities evaluated in floating point.
pub(crate) const REL_TOL: f64 = 1e-12;
/// Exponent range of the `2^j` constant search.
const J_MIN: i32 = -30;
const J_MAX: i32 = 30;
/// Log-slope beyond which a ratio trend over the top two decades counts as
/// a growth mismatch rather than a missing constant.
const TREND_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    A1,
    A2,
    A3,
    Dg,
    StructA,
    StructB,
    StructC,
    StructD,
    FGrowth,
    Potential,
}

/// The sample that realizes a report's extreme value.
///
/// For inequalities `lhs <= rhs`, `slack` is `(rhs - lhs) / (1 + max(|lhs|, |rhs|))`;
/// for fitted ratios it is the ratio itself.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleWitness {
    pub x: Point,
    pub s: f64,
    pub xi: Point,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi2: Option<Point>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Point>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl SampleWitness {
    fn new(x: Point, s: f64, xi: Point, lhs: f64, rhs: f64) -> Self {
        SampleWitness { x, s, xi, xi2: None, y: None, w: None, lhs, rhs, slack: slack_of(lhs, rhs) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: ConditionId,
    pub holds: bool,
    pub constants: BTreeMap<String, f64>,
    pub witness: Option<SampleWitness>,
    pub samples: usize,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub(crate) fn new(condition: ConditionId) -> Self {
        ConditionReport { condition, holds: false, constants: BTreeMap::new(), witness: None, samples: 0, notes: Vec::new() }
    }

    pub fn constant(&self, key: &str) -> Option<f64> {
        self.constants.get(key).copied()
    }
}

pub(crate) fn slack_of(lhs: f64, rhs: f64) -> f64 {
    if lhs.is_nan() || rhs.is_nan() || lhs == f64::INFINITY || rhs == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if rhs == f64::INFINITY || lhs == f64::NEG_INFINITY {
        return 1.0;
    }
    (rhs - lhs) / (1.0 + lhs.abs().max(rhs.abs()))
}

fn norm(v: Point) -> f64 {
    v[0].hypot(v[1])
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn scale(t: f64, d: Point) -> Point {
    [t * d[0], t * d[1]]
}

/// `Ã⁻¹(y)` with the conventions `Ã⁻¹(0) = 0`, `Ã⁻¹(∞) = ∞`.
pub(crate) fn inv(conj: &YoungFunction, y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if !y.is_finite() {
        f64::INFINITY
    } else {
        conj.generalized_inverse(y).unwrap_or(f64::INFINITY)
    }
}

/// Least-squares slope of `ln v` against `ln t`; `-inf` if any `v <= 0`.
pub(crate) fn log_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 3 {
        return None;
    }
    if pts.iter().any(|&(_, v)| !(v > 0.0) || !v.is_finite()) {
        return Some(if pts.iter().any(|&(_, v)| v == f64::INFINITY) { f64::INFINITY } else { f64::NEG_INFINITY });
    }
    let n = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(t, v) in pts {
        let (x, y) = (t.ln(), v.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let den = n * sxx - sx * sx;
    if den <= 0.0 {
        return None;
    }
    Some((n * sxy - sx * sy) / den)
}

/// Extreme value over `(x, direction)` per `(s, |ξ|)` cell, with its arguments.
#[derive(Debug, Clone, Copy)]
struct Cell {
    value: f64,
    xi: usize,
    di: usize,
}

fn scan_cells(
    spec: &SampleSpec,
    s_vals: &[f64],
    ts: &[f64],
    dirs: &[Point],
    maximize: bool,
    f: impl Fn(Point, f64, Point) -> f64 + Sync,
) -> Vec<Vec<Cell>> {
    s_vals
        .par_iter()
        .map(|&s| {
            ts.iter()
                .map(|&t| {
                    let mut best = Cell { value: if maximize { f64::NEG_INFINITY } else { f64::INFINITY }, xi: 0, di: 0 };
                    for (xi, &x) in spec.points.iter().enumerate() {
                        for (di, &d) in dirs.iter().enumerate() {
                            let v = f(x, s, scale(t, d));
                            let better = if v.is_nan() {
                                !best.value.is_nan()
                            } else if maximize {
                                v > best.value
                            } else {
                                v < best.value
                            };
                            if better && !best.value.is_nan() {
                                best = Cell { value: v, xi, di };
                            }
                        }
                    }
                    best
                })
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------- (a1)

/// Constants of the growth bound `|ā| <= q + b[Ã⁻¹(F(b|s|)) + Ã⁻¹(A(b|ξ|))]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct A1Constants {
    pub q: f64,
    pub b: f64,
}

fn a1_rhs(k: &A1Constants, inv_f: f64, inv_a: f64) -> f64 {
    k.q + k.b * (inv_f + inv_a)
}

fn a1_inv_f(conj: &YoungFunction, f: Option<&YoungFunction>, b: f64, s: f64) -> f64 {
    f.map_or(0.0, |f| inv(conj, f.value(b * s.abs())))
}

/// Re-evaluates the growth bound at one sample; `conj` is `Ã`.
pub fn a1_slack(
    op: &EllipticOperator,
    a: &YoungFunction,
    conj: &YoungFunction,
    f: Option<&YoungFunction>,
    k: &A1Constants,
    x: Point,
    s: f64,
    xi: Point,
) -> SampleWitness {
    let lhs = norm(op.evaluate(x, s, xi));
    let rhs = a1_rhs(k, a1_inv_f(conj, f, k.b, s), inv(conj, a.value(k.b * norm(xi))));
    SampleWitness::new(x, s, xi, lhs, rhs)
}

/// Samples the growth bound (a1). Without `fixed` constants, `q` is the
/// largest `|ā|` over `|ξ| <= 1, |s| <= 1` and `b` the smallest `2^j` that
/// makes the bound hold on the grid.
pub fn check_a1(
    op: &EllipticOperator,
    a: &YoungFunction,
    f: Option<&YoungFunction>,
    fixed: Option<A1Constants>,
    spec: &SampleSpec,
) -> ConditionReport {
    let conj = a.conjugate();
    let s_vals = spec.s_values();
    let ts = spec.xi_magnitudes();
    let dirs = spec.unit_directions();
    let cells = scan_cells(spec, &s_vals, &ts, &dirs, true, |x, s, xi| norm(op.evaluate(x, s, xi)));
    let mut rep = ConditionReport::new(ConditionId::A1);
    rep.samples = s_vals.len() * ts.len() * spec.points.len() * dirs.len();

    let q = match fixed {
        Some(k) => k.q,
        None => {
            let mut q: f64 = 0.0;
            for (si, &s) in s_vals.iter().enumerate() {
                for (ti, &t) in ts.iter().enumerate() {
                    if t <= 1.0 && s.abs() <= 1.0 {
                        q = q.max(cells[si][ti].value);
                    }
                }
            }
            q
        }
    };
    // worst cell for given b: (slack, si, ti)
    let evaluate = |b: f64| -> (f64, usize, usize) {
        let k = A1Constants { q, b };
        let inv_a: Vec<f64> = ts.iter().map(|&t| inv(&conj, a.value(b * t))).collect();
        let inv_f: Vec<f64> = s_vals.iter().map(|&s| a1_inv_f(&conj, f, b, s)).collect();
        let mut worst = (f64::INFINITY, 0, 0);
        for si in 0..s_vals.len() {
            for ti in 0..ts.len() {
                let sl = slack_of(cells[si][ti].value, a1_rhs(&k, inv_f[si], inv_a[ti]));
                if sl < worst.0 {
                    worst = (sl, si, ti);
                }
            }
        }
        worst
    };
    let passes = |w: (f64, usize, usize)| w.0 >= -REL_TOL;
    let b = match fixed {
        Some(k) => k.b,
        None => {
            let top = evaluate(2f64.powi(J_MAX));
            if !passes(top) {
                rep.notes.push(format!("no b <= 2^{J_MAX} bounds the field on the grid"));
                2f64.powi(J_MAX)
            } else {
                let (mut lo, mut hi) = (J_MIN - 1, J_MAX);
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if passes(evaluate(2f64.powi(mid))) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                2f64.powi(hi)
            }
        }
    };
    let worst = evaluate(b);
    let k = A1Constants { q, b };
    let cell = cells[worst.1][worst.2];
    rep.witness = Some(a1_slack(op, a, &conj, f, &k, spec.points[cell.xi], s_vals[worst.1], scale(ts[worst.2], dirs[cell.di])));
    rep.holds = passes(worst);
    // growth trend of |ā| / bound over the top two decades
    let inv_a: Vec<f64> = ts.iter().map(|&t| inv(&conj, a.value(b * t))).collect();
    let inv_f: Vec<f64> = s_vals.iter().map(|&s| a1_inv_f(&conj, f, b, s)).collect();
    let t_top = *ts.last().unwrap();
    let trend: Vec<(f64, f64)> = ts
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= t_top / 100.0)
        .map(|(ti, &t)| {
            let r = (0..s_vals.len()).map(|si| cells[si][ti].value / a1_rhs(&k, inv_f[si], inv_a[ti])).fold(0.0, |m: f64, v| {
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    m.max(v)
                }
            });
            (t, r)
        })
        .collect();
    if let Some(slope) = log_slope(&trend) {
        rep.constants.insert("trend_slope".into(), slope);
        if slope > TREND_LIMIT {
            rep.holds = false;
            rep.notes.push(format!("|a| / bound grows like |xi|^{slope:.3} over the top two decades"));
        }
    }
    rep.constants.insert("q".into(), q);
    rep.constants.insert("b".into(), b);
    rep
}

// ---------------------------------------------------------------- (a2)

/// Normalized monotonicity pairing `(ā(ξ) - ā(ξ'))·(ξ - ξ') / (|Δā| |Δξ|)`.
pub fn a2_slack(op: &EllipticOperator, x: Point, s: f64, xi: Point, xi2: Point) -> SampleWitness {
    let a1 = op.evaluate(x, s, xi);
    let a2 = op.evaluate(x, s, xi2);
    let da = [a1[0] - a2[0], a1[1] - a2[1]];
    let dx = [xi[0] - xi2[0], xi[1] - xi2[1]];
    let pairing = dot(da, dx);
    let den = norm(da) * norm(dx);
    let slack = if pairing == 0.0 || den == 0.0 { 0.0 } else { pairing / den };
    SampleWitness { x, s, xi, xi2: Some(xi2), y: None, w: None, lhs: 0.0, rhs: pairing, slack }
}

fn random_xi(rng: &mut ChaCha8Rng, spec: &SampleSpec) -> Point {
    let (lo, hi) = (spec.xi_min.ln(), spec.xi_max.ln());
    let t = rng.gen_range(lo..=hi).exp();
    if spec.dim == 1 {
        if rng.gen_bool(0.5) {
            [t, 0.0]
        } else {
            [-t, 0.0]
        }
    } else {
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        [t * a.cos(), t * a.sin()]
    }
}

/// Strict monotonicity (a2) on `spec.random_samples` random pairs.
pub fn check_a2(op: &EllipticOperator, spec: &SampleSpec) -> ConditionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xa2);
    let n = spec.random_samples.max(1);
    let samples: Vec<(Point, f64, Point, Point)> = (0..n)
        .map(|_| {
            let x = spec.points[rng.gen_range(0..spec.points.len())];
            let s = if spec.s_max > spec.s_min { rng.gen_range(spec.s_min..=spec.s_max) } else { spec.s_min };
            let xi = random_xi(&mut rng, spec);
            let xi2 = random_xi(&mut rng, spec);
            (x, s, xi, xi2)
        })
        .collect();
    let slacks: Vec<f64> = samples.par_iter().map(|&(x, s, xi, xi2)| a2_slack(op, x, s, xi, xi2).slack).collect();
    let (k, min) =
        slacks
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 || v.is_nan() && !acc.1.is_nan() { (k, v) } else { acc });
    let (x, s, xi, xi2) = samples[k];
    let mut rep = ConditionReport::new(ConditionId::A2);
    rep.samples = n;
    rep.holds = min > 0.0;
    rep.constants.insert("min_normalized_pairing".into(), min);
    rep.witness = Some(a2_slack(op, x, s, xi, xi2));
    rep
}

// ---------------------------------------------------------------- (a3)

/// Constants of the coercivity bound `ā·ξ >= c A(|ξ|) - d G(d|s|) - r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct A3Constants {
    pub c: f64,
    pub d: f64,
    pub r: f64,
}

fn a3_lhs(k: &A3Constants, a_t: f64, g_term: f64) -> f64 {
    k.c * a_t - k.d * g_term - k.r
}

fn g_term(g: Option<&YoungFunction>, d: f64, s: f64) -> f64 {
    g.map_or(0.0, |g| g.value(d * s.abs()))
}

pub fn a3_slack(
    op: &EllipticOperator,
    a: &YoungFunction,
    g: Option<&YoungFunction>,
    k: &A3Constants,
    x: Point,
    s: f64,
    xi: Point,
) -> SampleWitness {
    let rhs = dot(op.evaluate(x, s, xi), xi);
    let lhs = a3_lhs(k, a.value(norm(xi)), g_term(g, k.d, s));
    SampleWitness::new(x, s, xi, lhs, rhs)
}

/// Samples the coercivity bound (a3). Without `fixed` constants, `c` is the
/// largest `2^j` for which some `d = 2^i` works, `d` the smallest such, and
/// `r` the deficit over `|ξ| <= 1, |s| <= 1`.
pub fn check_a3(
    op: &EllipticOperator,
    a: &YoungFunction,
    g: Option<&YoungFunction>,
    fixed: Option<A3Constants>,
    spec: &SampleSpec,
) -> ConditionReport {
    let s_vals = spec.s_values();
    let ts = spec.xi_magnitudes();
    let dirs = spec.unit_directions();
    let cells = scan_cells(spec, &s_vals, &ts, &dirs, false, |x, s, xi| dot(op.evaluate(x, s, xi), xi));
    let a_t: Vec<f64> = ts.iter().map(|&t| a.value(t)).collect();
    let mut rep = ConditionReport::new(ConditionId::A3);
    rep.samples = s_vals.len() * ts.len() * spec.points.len() * dirs.len();

    let fit_r = |c: f64, d: f64| -> f64 {
        let k = A3Constants { c, d, r: 0.0 };
        let mut r: f64 = 0.0;
        for (si, &s) in s_vals.iter().enumerate() {
            let gt = g_term(g, d, s);
            for (ti, &t) in ts.iter().enumerate() {
                if t <= 1.0 && s.abs() <= 1.0 {
                    r = r.max(a3_lhs(&k, a_t[ti], gt) - cells[si][ti].value);
                }
            }
        }
        r
    };
    let evaluate = |k: &A3Constants| -> (f64, usize, usize) {
        let mut worst = (f64::INFINITY, 0, 0);
        for (si, &s) in s_vals.iter().enumerate() {
            let gt = g_term(g, k.d, s);
            for ti in 0..ts.len() {
                let sl = slack_of(a3_lhs(k, a_t[ti], gt), cells[si][ti].value);
                if sl < worst.0 {
                    worst = (sl, si, ti);
                }
            }
        }
        worst
    };
    let passes = |k: &A3Constants| evaluate(k).0 >= -REL_TOL;
    let with_d = |c: f64, d: f64| A3Constants { c, d, r: fit_r(c, d) };
    let d_max = if g.is_some() { 2f64.powi(J_MAX) } else { 0.0 };
    let k = match fixed {
        Some(k) => k,
        None => {
            let c_passes = |j: i32| passes(&with_d(2f64.powi(j), d_max));
            if !c_passes(J_MIN) {
                rep.notes.push(format!("no c >= 2^{J_MIN} works on the grid"));
                with_d(2f64.powi(J_MIN), d_max)
            } else {
                let (mut lo, mut hi) = (J_MIN, J_MAX + 1);
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if c_passes(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let c = 2f64.powi(lo);
                if g.is_some() {
                    let (mut dlo, mut dhi) = (J_MIN - 1, J_MAX);
                    while dhi - dlo > 1 {
                        let mid = (dlo + dhi) / 2;
                        if passes(&with_d(c, 2f64.powi(mid))) {
                            dhi = mid;
                        } else {
                            dlo = mid;
                        }
                    }
                    with_d(c, 2f64.powi(dhi))
                } else {
                    with_d(c, 0.0)
                }
            }
        }
    };
    let worst = evaluate(&k);
    rep.holds = worst.0 >= -REL_TOL;
    let cell = cells[worst.1][worst.2];
    rep.witness = Some(a3_slack(op, a, g, &k, spec.points[cell.xi], s_vals[worst.1], scale(ts[worst.2], dirs[cell.di])));
    let t_top = *ts.last().unwrap();
    let trend: Vec<(f64, f64)> = ts
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= t_top / 100.0)
        .map(|(ti, &t)| {
            let m = (0..s_vals.len()).map(|si| cells[si][ti].value).fold(f64::INFINITY, f64::min);
            (t, m / a_t[ti])
        })
        .collect();
    if let Some(slope) = log_slope(&trend) {
        rep.constants.insert("trend_slope".into(), slope);
        if slope < -TREND_LIMIT {
            rep.holds = false;
            rep.notes.push(format!("a.xi / A(|xi|) decays like |xi|^{slope:.3} over the top two decades"));
        }
    }
    rep.constants.insert("c".into(), k.c);
    rep.constants.insert("d".into(), k.d);
    rep.constants.insert("r".into(), k.r);
    rep
}

// ---------------------------------------------------------------- structure conditions

/// Reports for `(dg)`, `(a)`, `(b)` and `(c)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureReport {
    pub dg: ConditionReport,
    pub a: ConditionReport,
    pub b: ConditionReport,
    pub c: ConditionReport,
}

impl StructureReport {
    pub fn all_hold(&self) -> bool {
        self.dg.holds && self.a.holds && self.b.holds && self.c.holds
    }
}

/// Central-difference Jacobian `∂a_i/∂η_j` with step `1e-6 (1 + |η|)`.
pub(crate) fn jacobian(op: &EllipticOperator, x: Point, s: f64, eta: Point, dim: usize) -> [[f64; 2]; 2] {
    let h = 1e-6 * (1.0 + norm(eta));
    let mut jac = [[0.0; 2]; 2];
    for j in 0..dim {
        let mut ep = eta;
        let mut em = eta;
        ep[j] += h;
        em[j] -= h;
        let (ap, am) = (op.evaluate(x, s, ep), op.evaluate(x, s, em));
        for i in 0..dim {
            jac[i][j] = (ap[i] - am[i]) / (2.0 * h);
        }
    }
    jac
}

fn min_sym_eigen(j: &[[f64; 2]; 2], dim: usize) -> f64 {
    if dim == 1 {
        return j[0][0];
    }
    let (a, d) = (j[0][0], j[1][1]);
    let b = 0.5 * (j[0][1] + j[1][0]);
    let m = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    m - r
}

/// `A''(t)`, from the closed form or a noise-checked central difference.
fn second_derivative(a: &YoungFunction, t: f64) -> Result<f64> {
    if let Some(v) = a.second_derivative(t) {
        return Ok(v);
    }
    let fd = |h: f64| (a.derivative_or_fd(t + h) - a.derivative_or_fd(t - h)) / (2.0 * h);
    let (v1, v2) = (fd(1e-4 * t), fd(2e-4 * t));
    let noise = (v1 - v2).abs() / v1.abs().max(1e-300);
    if noise > 1e-3 {
        return Err(Error::Noise(format!("{}: finite-difference A'' at t = {t} has relative noise {noise:.2e}", a.name())));
    }
    Ok(v1)
}

/// Ellipticity ratio `λ_min(sym ∂ā/∂η) / (A'(|η|)/|η|)` at one sample.
pub fn struct_a_ratio(op: &EllipticOperator, a: &YoungFunction, x: Point, s: f64, eta: Point, dim: usize) -> SampleWitness {
    let t = norm(eta);
    let lhs = min_sym_eigen(&jacobian(op, x, s, eta, dim), dim);
    let rhs = a.derivative_or_fd(t) / t;
    SampleWitness { x, s, xi: eta, xi2: None, y: None, w: None, lhs, rhs, slack: lhs / rhs }
}

/// Growth ratio `Σ|∂a_i/∂ξ_j| / (A'(|ξ|)/|ξ|)` at one sample.
pub fn struct_b_ratio(op: &EllipticOperator, a: &YoungFunction, x: Point, s: f64, xi: Point, dim: usize) -> SampleWitness {
    let t = norm(xi);
    let j = jacobian(op, x, s, xi, dim);
    let lhs: f64 = (0..dim).flat_map(|i| (0..dim).map(move |k| (i, k))).map(|(i, k)| j[i][k].abs()).sum();
    let rhs = a.derivative_or_fd(t) / t;
    SampleWitness { x, s, xi, xi2: None, y: None, w: None, lhs, rhs, slack: lhs / rhs }
}

/// Hölder ratio `|ā(x,s,ξ) - ā(y,w,ξ)| / ((1 + A'(|ξ|)) (|x-y|^α + |s-w|^α))`.
pub fn struct_c_ratio(
    op: &EllipticOperator,
    a: &YoungFunction,
    alpha: f64,
    x: Point,
    s: f64,
    y: Point,
    w: f64,
    xi: Point,
) -> SampleWitness {
    let (p, q) = (op.evaluate(x, s, xi), op.evaluate(y, w, xi));
    let lhs = norm([p[0] - q[0], p[1] - q[1]]);
    let dist = norm([x[0] - y[0], x[1] - y[1]]).powf(alpha) + (s - w).abs().powf(alpha);
    let rhs = (1.0 + a.derivative_or_fd(norm(xi))) * dist;
    SampleWitness { x, s, xi, xi2: None, y: Some(y), w: Some(w), lhs, rhs, slack: lhs / rhs }
}

/// Checks `(dg)` on a log grid and `(a)`, `(b)`, `(c)` on the sample grids
/// with `s, w ∈ [-m0, m0]`. `(a)` is accepted with any positive ellipticity
/// factor `μ`, reported in the constants.
pub fn check_structure_conditions(op: &EllipticOperator, a: &YoungFunction, m0: f64, spec: &SampleSpec) -> Result<StructureReport> {
    // (dg)
    let mut dg = ConditionReport::new(ConditionId::Dg);
    let grid = crate::young::log_grid(1e-6, 1e6, 600);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_w, mut hi_w) = (None, None);
    for &t in &grid {
        let d1 = a.derivative_or_fd(t);
        let d2 = second_derivative(a, t)?;
        let r = t * d2 / d1;
        let wit = SampleWitness { x: [0.0; 2], s: 0.0, xi: [t, 0.0], xi2: None, y: None, w: None, lhs: t * d2, rhs: d1, slack: r };
        if !(r >= lo) {
            lo = r;
            lo_w = Some(wit.clone());
        }
        if !(r <= hi) {
            hi = r;
            hi_w = Some(wit);
        }
    }
    dg.samples = grid.len();
    dg.holds = lo > 0.0 && hi.is_finite();
    dg.constants.insert("delta".into(), lo);
    dg.constants.insert("g0".into(), hi);
    dg.witness = if lo > 0.0 { hi_w } else { lo_w };

    let mut spec_m = spec.clone();
    spec_m.s_min = -m0;
    spec_m.s_max = m0;
    let s_vals = spec_m.s_values();
    let ts: Vec<f64> = spec.xi_magnitudes().into_iter().filter(|&t| t >= 1e-8).collect();
    let dirs = spec.unit_directions();
    let dim = spec.dim;

    // (a) and (b) share the sweep; per s-slice extremes, reduced in order
    type Best = (f64, Point, f64, Point);
    let per_s: Vec<(Best, Best)> = s_vals
        .par_iter()
        .map(|&s| {
            let mut amin: Best = (f64::INFINITY, [0.0; 2], s, [0.0; 2]);
            let mut bmax: Best = (f64::NEG_INFINITY, [0.0; 2], s, [0.0; 2]);
            for &x in &spec.points {
                for &t in &ts {
                    let ap = a.derivative_or_fd(t) / t;
                    for &d in &dirs {
                        let eta = scale(t, d);
                        let j = jacobian(op, x, s, eta, dim);
                        let ra = min_sym_eigen(&j, dim) / ap;
                        let sum: f64 = (0..dim).flat_map(|i| (0..dim).map(move |k| (i, k))).map(|(i, k)| j[i][k].abs()).sum();
                        let rb = sum / ap;
                        if ra < amin.0 || ra.is_nan() && !amin.0.is_nan() {
                            amin = (ra, x, s, eta);
                        }
                        if rb > bmax.0 || rb.is_nan() && !bmax.0.is_nan() {
                            bmax = (rb, x, s, eta);
                        }
                    }
                }
            }
            (amin, bmax)
        })
        .collect();
    let mut amin: Best = (f64::INFINITY, [0.0; 2], 0.0, [0.0; 2]);
    let mut bmax: Best = (f64::NEG_INFINITY, [0.0; 2], 0.0, [0.0; 2]);
    for (ra, rb) in per_s {
        if ra.0 < amin.0 || ra.0.is_nan() && !amin.0.is_nan() {
            amin = ra;
        }
        if rb.0 > bmax.0 || rb.0.is_nan() && !bmax.0.is_nan() {
            bmax = rb;
        }
    }
    let count = s_vals.len() * spec.points.len() * ts.len() * dirs.len();
    let mut ra = ConditionReport::new(ConditionId::StructA);
    ra.samples = count;
    ra.holds = amin.0 > 0.0;
    ra.constants.insert("mu".into(), amin.0);
    ra.witness = Some(struct_a_ratio(op, a, amin.1, amin.2, amin.3, dim));
    let mut rb = ConditionReport::new(ConditionId::StructB);
    rb.samples = count;
    rb.holds = bmax.0.is_finite();
    rb.constants.insert("lambda".into(), bmax.0);
    rb.witness = Some(struct_b_ratio(op, a, bmax.1, bmax.2, bmax.3, dim));

    // (c): random pairs at geometric separations
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xc);
    let alpha = spec.alpha;
    let per_scale = (spec.random_samples / 10).max(100);
    let scales: Vec<f64> = (0..7).map(|k| 10f64.powi(-k)).collect();
    let mut pairs = Vec::with_capacity(per_scale * scales.len());
    for &eps in &scales {
        for _ in 0..per_scale {
            let x = spec.points[rng.gen_range(0..spec.points.len())];
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            let y = if dim == 1 { [x[0] + eps * ang.cos().signum(), 0.0] } else { [x[0] + eps * ang.cos(), x[1] + eps * ang.sin()] };
            let s = if m0 > 0.0 { rng.gen_range(-m0..=m0) } else { 0.0 };
            let w = (s + eps * rng.gen_range(-1.0..=1.0)).clamp(-m0, m0);
            let xi = random_xi(&mut rng, spec);
            pairs.push((eps, x, s, y, w, xi));
        }
    }
    let ratios: Vec<f64> = pairs.par_iter().map(|&(_, x, s, y, w, xi)| struct_c_ratio(op, a, alpha, x, s, y, w, xi).slack).collect();
    let mut rc = ConditionReport::new(ConditionId::StructC);
    rc.samples = pairs.len();
    let (kmax, lam1) =
        ratios.iter().enumerate().fold((0, 0.0), |acc, (k, &v)| if v > acc.1 || v.is_nan() && !acc.1.is_nan() { (k, v) } else { acc });
    let by_scale: Vec<(f64, f64)> = scales
        .iter()
        .enumerate()
        .map(|(i, &eps)| (eps, ratios[i * per_scale..(i + 1) * per_scale].iter().fold(0.0, |m: f64, &v| m.max(v))))
        .collect();
    rc.holds = lam1.is_finite();
    if let Some(slope) = log_slope(&by_scale[2..]) {
        rc.constants.insert("scale_slope".into(), slope);
        if slope < -TREND_LIMIT {
            rc.holds = false;
            rc.notes.push(format!("Hölder ratio grows like dist^{slope:.3} as pairs approach"));
        }
    }
    rc.constants.insert("lambda1".into(), lam1);
    rc.constants.insert("alpha".into(), alpha);
    let (_, x, s, y, w, xi) = pairs[kmax];
    rc.witness = Some(struct_c_ratio(op, a, alpha, x, s, y, w, xi));
    Ok(StructureReport { dg, a: ra, b: rb, c: rc })
}

// ---------------------------------------------------------------- derived constants

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemlibReport {
    /// `max(Λ √n / δ, 2)`
    pub b: f64,
    /// `μ / g₀`
    pub c: f64,
    pub a1: ConditionReport,
    pub a3: ConditionReport,
    pub holds: bool,
}

/// Derives the growth and coercivity constants from the structure constants
/// `(Λ, δ, g₀, μ)` and re-checks (a1) with `q = 0, F = 0` and (a3) with
/// `d = r = 0`.
pub fn lemlib_constants(op: &EllipticOperator, a: &YoungFunction, structure: &StructureReport, spec: &SampleSpec) -> Result<LemlibReport> {
    if !(structure.dg.holds && structure.a.holds && structure.b.holds) {
        return Err(Error::Precondition("structure conditions (dg), (a), (b) must hold".into()));
    }
    for &x in &spec.points {
        for s in spec.s_values() {
            let v = op.evaluate(x, s, [0.0, 0.0]);
            if v != [0.0, 0.0] {
                return Err(Error::Precondition(format!(
                    "a(x, s, 0) = ({}, {}) is not zero at x = ({}, {}), s = {s}",
                    v[0], v[1], x[0], x[1]
                )));
            }
        }
    }
    let lambda = structure.b.constant("lambda").unwrap_or(f64::INFINITY);
    let delta = structure.dg.constant("delta").unwrap_or(0.0);
    let g0 = structure.dg.constant("g0").unwrap_or(f64::INFINITY);
    let mu = structure.a.constant("mu").unwrap_or(0.0);
    let n = spec.dim as f64;
    let b = (lambda * n.sqrt() / delta).max(2.0);
    let c = mu / g0;
    let a1 = check_a1(op, a, None, Some(A1Constants { q: 0.0, b }), spec);
    let a3 = check_a3(op, a, None, Some(A3Constants { c, d: 0.0, r: 0.0 }), spec);
    let holds = a1.holds && a3.holds;
    Ok(LemlibReport { b, c, a1, a3, holds })
}

// ---------------------------------------------------------------- potentials

/// Checks `Φ(x, 0) = 0`, evenness in `ξ`, and `∇_ξ Φ = ā` by central
/// differences within `max(1e-6, 1e-4 |ā|)` on random samples.
pub fn check_potential(op: &EllipticOperator, spec: &SampleSpec) -> ConditionReport {
    let mut rep = ConditionReport::new(ConditionId::Potential);
    if !op.has_potential() {
        rep.notes.push("operator has no potential".into());
        return rep;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e);
    let n = (spec.random_samples / 10).max(1000);
    let samples: Vec<(Point, f64, Point)> = (0..n)
        .map(|_| {
            let x = spec.points[rng.gen_range(0..spec.points.len())];
            let s = if spec.s_max > spec.s_min { rng.gen_range(spec.s_min..=spec.s_max) } else { spec.s_min };
            (x, s, random_xi(&mut rng, spec))
        })
        .collect();
    let results: Vec<SampleWitness> = samples.par_iter().map(|&(x, s, xi)| potential_gradient_slack(op, x, s, xi)).collect();
    let mut worst = 0;
    for (k, w) in results.iter().enumerate() {
        if w.slack < results[worst].slack || w.slack.is_nan() {
            worst = k;
        }
    }
    let mut holds = results[worst].slack >= 0.0;
    for &x in &spec.points {
        if op.potential(x, 0.0, [0.0, 0.0]) != Some(0.0) {
            holds = false;
            rep.notes.push(format!("potential does not vanish at xi = 0 for x = ({}, {})", x[0], x[1]));
            break;
        }
    }
    for &(x, s, xi) in samples.iter().take(1000) {
        if op.potential(x, s, xi) != op.potential(x, s, [-xi[0], -xi[1]]) {
            holds = false;
            rep.notes.push("potential is not even in xi".into());
            break;
        }
    }
    rep.holds = holds;
    rep.samples = n;
    rep.witness = Some(results[worst].clone());
    rep
}

/// Gradient mismatch `|∇Φ - ā|` against its tolerance `max(1e-6, 1e-4 |ā|)`.
pub fn potential_gradient_slack(op: &EllipticOperator, x: Point, s: f64, xi: Point) -> SampleWitness {
    let h = 1e-6 * (1.0 + norm(xi));
    let mut g = [0.0; 2];
    for (j, gj) in g.iter_mut().enumerate() {
        let mut p = xi;
        let mut m = xi;
        p[j] += h;
        m[j] -= h;
        *gj = (op.potential(x, s, p).unwrap_or(f64::NAN) - op.potential(x, s, m).unwrap_or(f64::NAN)) / (2.0 * h);
    }
    let a = op.evaluate(x, s, xi);
    let err = norm([g[0] - a[0], g[1] - a[1]]);
    let tol = 1e-6f64.max(1e-4 * norm(a));
    SampleWitness::new(x, s, xi, err, tol)
}

/// Fitted constants of the two-sided bound
/// `k₄ A(k₄|ξ|) <= Φ(x, ξ) <= 2 q B(b|ξ|) + k₅ A(k₅|ξ|)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivConstants {
    pub k4: f64,
    pub k5: f64,
    pub holds: bool,
}

/// Fits `k₄` (largest `2^j`) and `k₅` (smallest `2^j`) on the sample grid.
/// `lower` is `(B, sup q, b)` for the lower-order part, if any.
pub fn fit_equiv_constants(
    op: &EllipticOperator,
    a: &YoungFunction,
    lower: Option<(&YoungFunction, f64, f64)>,
    spec: &SampleSpec,
) -> Result<EquivConstants> {
    if !op.has_potential() {
        return Err(Error::Precondition(format!("{} has no potential", op.name())));
    }
    let ts = spec.xi_magnitudes();
    let s_vals = spec.s_values();
    let mut lo_phi = vec![f64::INFINITY; ts.len()];
    let mut hi_phi = vec![f64::NEG_INFINITY; ts.len()];
    for &x in &spec.points {
        for &s in &s_vals {
            for (ti, &t) in ts.iter().enumerate() {
                let v = op.potential(x, s, [t, 0.0]).unwrap();
                lo_phi[ti] = lo_phi[ti].min(v);
                hi_phi[ti] = hi_phi[ti].max(v);
            }
        }
    }
    let lower_ok = |k: f64| ts.iter().zip(&lo_phi).all(|(&t, &p)| k * a.value(k * t) <= p * (1.0 + REL_TOL));
    let upper_ok = |k: f64| {
        ts.iter().zip(&hi_phi).all(|(&t, &p)| {
            let extra = lower.map_or(0.0, |(bf, q, b)| 2.0 * q * bf.value(b * t));
            p <= (extra + k * a.value(k * t)) * (1.0 + REL_TOL)
        })
    };
    let k4 = (J_MIN..=J_MAX).rev().map(|j| 2f64.powi(j)).find(|&k| lower_ok(k));
    let k5 = (J_MIN..=J_MAX).map(|j| 2f64.powi(j)).find(|&k| upper_ok(k));
    Ok(EquivConstants { k4: k4.unwrap_or(0.0), k5: k5.unwrap_or(f64::INFINITY), holds: k4.is_some() && k5.is_some() })
}

/// Largest ratio of `|t^ρ - z^ρ|` to `|t - z| / (t^{1-ρ} + z^{1-ρ})` (for
/// `ρ <= 1`) or to `|t - z| (t^{ρ-1} + z^{ρ-1})` (for `ρ > 1`) over random
/// positive pairs.
pub fn exponent_difference_constant(rho: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c: f64 = 0.0;
    for _ in 0..samples {
        let t = rng.gen_range(-6.0f64..6.0).exp();
        let z = rng.gen_range(-6.0f64..6.0).exp();
        if t == z {
            continue;
        }
        let lhs = (t.powf(rho) - z.powf(rho)).abs();
        let bound = if rho <= 1.0 {
            (t - z).abs() / (t.powf(1.0 - rho) + z.powf(1.0 - rho))
        } else {
            (t - z).abs() * (t.powf(rho - 1.0) + z.powf(rho - 1.0))
        };
        c = c.max(lhs / bound);
    }
    c
}
