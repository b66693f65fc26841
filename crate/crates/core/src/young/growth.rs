use serde::{Deserialize, Serialize};

use super::YoungFunction;
use crate::error::{Error, Result};

/// Where a growth property is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Global,
    NearInfinity,
    NearZero,
}

/// A sampled abscissa together with both sides of the tested inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub regime: Regime,
    pub holds: bool,
    pub constant_k: f64,
    pub threshold_m: f64,
    pub evidence: Vec<Witness>,
}

/// Sampled Boyd-type indices. The near-infinity values are finite-sample
/// estimates, not limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexEstimate {
    pub i_inf: f64,
    pub s_sup: f64,
    pub i_inf_infinity: f64,
    pub s_sup_infinity: f64,
    /// Whether the near-infinity values come from the extrapolated fit in
    /// `1/ln(1+t)` rather than the raw window extremes.
    pub extrapolated: bool,
    #[serde(skip)]
    pub sample_grid: Vec<f64>,
}

pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || hi <= lo {
        return vec![lo];
    }
    let a = lo.ln();
    let step = (hi.ln() - a) / (n - 1) as f64;
    (0..n).map(|k| if k == n - 1 { hi } else { (a + k as f64 * step).exp() }).collect()
}

/// `t A'(t) / A(t)` on a log grid over `[1e-6, T]`.
pub fn estimate_indices(a: &YoungFunction) -> Result<IndexEstimate> {
    if !a.is_finite_valued() {
        return Err(Error::Precondition(format!("{} is not finite-valued", a.name())));
    }
    let cap = a.effective_cap();
    let lo = 1e-6f64.min(cap * 1e-4);
    let grid = log_grid(lo, cap, 10_000);
    let ratio: Vec<f64> = grid
        .iter()
        .map(|&t| {
            let v = a.value(t);
            t * a.derivative_or_fd(t) / v
        })
        .collect();
    let finite: Vec<f64> = ratio.iter().copied().filter(|r| r.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::Degenerate(format!("{}: no finite index samples", a.name())));
    }
    let gmin = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let gmax = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let w_lo = cap / 100.0;
    let window: Vec<(f64, f64)> = grid.iter().zip(&ratio).filter(|(t, r)| **t >= w_lo && r.is_finite()).map(|(t, r)| (*t, *r)).collect();
    let wmin = window.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
    let wmax = window.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max);
    let (mut i_inf_infinity, mut s_sup_infinity, mut extrapolated) = (wmin, wmax, false);
    if let Some(limit) = extrapolate_in_inverse_log(&window) {
        i_inf_infinity = limit;
        s_sup_infinity = limit;
        extrapolated = true;
    }
    Ok(IndexEstimate {
        i_inf: gmin.min(i_inf_infinity),
        s_sup: gmax.max(s_sup_infinity),
        i_inf_infinity,
        s_sup_infinity,
        extrapolated,
        sample_grid: grid,
    })
}

// Quadratic least squares of r against u = 1/ln(1+t), evaluated at u = 0.
// Accepted only when the window is nearly flat and the fit is tight.
fn extrapolate_in_inverse_log(window: &[(f64, f64)]) -> Option<f64> {
    if window.len() < 8 {
        return None;
    }
    let n = window.len() as f64;
    let mean = window.iter().map(|w| w.1).sum::<f64>() / n;
    let wmin = window.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
    let wmax = window.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max);
    if !(mean > 0.0) || (wmax - wmin) > 0.25 * mean {
        return None;
    }
    if wmax - wmin <= 1e-12 * mean {
        return Some(mean);
    }
    let us: Vec<f64> = window.iter().map(|w| 1.0 / w.0.ln_1p()).collect();
    let u0 = us.iter().sum::<f64>() / n;
    let scale = us.iter().map(|u| (u - u0).abs()).fold(0.0, f64::max);
    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (u, w) in us.iter().zip(window) {
        let x = (u - u0) / scale;
        let b = [1.0, x, x * x];
        for i in 0..3 {
            rhs[i] += b[i] * w.1;
            for j in 0..3 {
                m[i][j] += b[i] * b[j];
            }
        }
    }
    let c = solve3(m, rhs)?;
    let fit = |u: f64| {
        let x = (u - u0) / scale;
        c[0] + c[1] * x + c[2] * x * x
    };
    let rms = (us.iter().zip(window).map(|(u, w)| (fit(*u) - w.1).powi(2)).sum::<f64>() / n).sqrt();
    if rms > 1e-6 * mean {
        return None;
    }
    let limit = fit(0.0);
    limit.is_finite().then_some(limit)
}

pub(crate) fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in row + 1..3 {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

fn regime_grid(a: &YoungFunction, regime: Regime) -> (Vec<f64>, f64) {
    let cap = a.effective_cap();
    match regime {
        Regime::Global => (log_grid(1e-6f64.min(cap * 1e-4), cap / 2.0, 2000), 0.0),
        Regime::NearInfinity => (log_grid(cap / 100.0, cap / 2.0, 400), cap / 1e4),
        Regime::NearZero => (log_grid(1e-8, 1e-4f64.min(cap / 2.0), 400), 0.0),
    }
}

/// Doubling condition `A(2t) <= K A(t)`; `K` is the smallest constant over
/// the regime grid. The condition is rejected when the doubling ratio on the
/// upper half of the grid exceeds 1.5 times its maximum on the lower half.
pub fn check_delta2(a: &YoungFunction, regime: Regime) -> GrowthReport {
    let (grid, m) = regime_grid(a, regime);
    let ratios: Vec<(f64, f64, f64)> = grid
        .iter()
        .map(|&t| {
            let at = a.value(t);
            let a2 = a.value(2.0 * t);
            (t, a2, at)
        })
        .collect();
    let r = |x: &(f64, f64, f64)| if x.2 > 0.0 { x.1 / x.2 } else { f64::INFINITY };
    let half = ratios.len() / 2;
    let k_lo = ratios[..half.max(1)].iter().map(r).fold(0.0, f64::max);
    let k_hi = ratios[half..].iter().map(r).fold(0.0, f64::max);
    let k = k_lo.max(k_hi);
    let trend_ok = regime == Regime::NearZero || k_hi <= 1.5 * k_lo;
    if k.is_finite() && trend_ok {
        let k = k * (1.0 + 4.0 * f64::EPSILON);
        let mut ev: Vec<Witness> = ratios.iter().map(|x| Witness { t: x.0, lhs: x.1, rhs: k * x.2 }).collect();
        ev.sort_by(|p, q| (p.rhs - p.lhs).total_cmp(&(q.rhs - q.lhs)));
        ev.truncate(3);
        GrowthReport { regime, holds: true, constant_k: k, threshold_m: m, evidence: ev }
    } else {
        let bound = 1.5 * k_lo;
        let worst = ratios.iter().max_by(|p, q| r(p).total_cmp(&r(q))).unwrap();
        GrowthReport {
            regime,
            holds: false,
            constant_k: bound,
            threshold_m: m,
            evidence: vec![Witness { t: worst.0, lhs: worst.1, rhs: bound * worst.2 }],
        }
    }
}

/// Condition `A(2t) >= K A(t)` with some `K > 2`; `K` is the largest
/// constant over the regime grid.
pub fn check_nabla2(a: &YoungFunction, regime: Regime) -> GrowthReport {
    let (grid, m) = regime_grid(a, regime);
    let mut worst = Witness { t: f64::NAN, lhs: f64::INFINITY, rhs: 1.0 };
    let mut k = f64::INFINITY;
    for &t in &grid {
        let at = a.value(t);
        let a2 = a.value(2.0 * t);
        if at > 0.0 {
            let r = a2 / at;
            if r < k {
                k = r;
                worst = Witness { t, lhs: a2, rhs: at };
            }
        }
    }
    let holds = k > 2.0 * (1.0 + 1e-9) && k.is_finite();
    let kk = if holds { k * (1.0 - 4.0 * f64::EPSILON) } else { 2.0 };
    let evidence = vec![Witness { t: worst.t, lhs: worst.lhs, rhs: kk * worst.rhs }];
    GrowthReport { regime, holds, constant_k: kk, threshold_m: m, evidence }
}

/// `B(t) <= A(kt)` for `t >= M`: thresholds are tried in increasing order and
/// for each the smallest `k` in `{2^j : j = -20..20}`. The global regime only
/// admits `M = 0`. Near infinity a pair `(M, k)` is also rejected when the
/// margin `A(kt)/B(t)` shrinks by more than 10% over the top two decades.
pub fn dominates(a: &YoungFunction, b: &YoungFunction, regime: Regime) -> GrowthReport {
    let cap = a.effective_cap().min(b.effective_cap());
    let thresholds: Vec<f64> = match regime {
        Regime::Global | Regime::NearZero => vec![0.0],
        Regime::NearInfinity => {
            let mut v = Vec::new();
            let mut m = 1.0;
            while m <= cap / 1e4 {
                v.push(m);
                m *= 10.0;
            }
            if v.is_empty() {
                v.push(0.0);
            }
            v
        }
    };
    let mut last_fail = Witness { t: f64::NAN, lhs: f64::NAN, rhs: f64::NAN };
    for &m in &thresholds {
        for j in -20..=20 {
            let k = 2f64.powi(j);
            let lo = match regime {
                Regime::NearZero => 1e-8,
                _ => m.max(1e-6),
            };
            let hi = match regime {
                Regime::NearZero => 1e-2,
                _ => cap,
            };
            if hi <= lo {
                continue;
            }
            let mut ok = true;
            for t in log_grid(lo, hi, 400) {
                let lhs = b.value(t);
                let rhs = a.value(k * t);
                if !(lhs <= rhs * (1.0 + 1e-12)) {
                    ok = false;
                    last_fail = Witness { t, lhs, rhs };
                    break;
                }
            }
            if ok && regime == Regime::NearInfinity {
                // a margin A(kt)/B(t) eroding over the top two decades cannot
                // persist towards infinity
                let rho = |t: f64| a.value(k * t) / b.value(t);
                if rho(hi) < 0.9 * rho(hi / 100.0) {
                    ok = false;
                }
            }
            if ok {
                return GrowthReport {
                    regime,
                    holds: true,
                    constant_k: k,
                    threshold_m: m,
                    evidence: vec![Witness { t: hi, lhs: b.value(hi), rhs: a.value(k * hi) }],
                };
            }
        }
    }
    GrowthReport { regime, holds: false, constant_k: 2f64.powi(20), threshold_m: *thresholds.last().unwrap(), evidence: vec![last_fail] }
}

/// Ratio trace of `A^{-1}(y) / B^{-1}(y)` over decades of `y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EssentialTrace {
    pub holds: bool,
    pub trace: Vec<(f64, f64)>,
}

/// Numeric test of `B << A`: the ratio `A^{-1}(y)/B^{-1}(y)` is traced at
/// `y = 10^2, 10^3, ...` up to the smaller of `A` and `B` at their caps, and
/// must decrease strictly and end below `1e-2`.
pub fn increases_essentially_slower(b: &YoungFunction, a: &YoungFunction) -> EssentialTrace {
    let y_max = a.value(a.effective_cap()).min(b.value(b.effective_cap())).min(1e300);
    let top = y_max.log10().floor() as i32;
    let mut trace = Vec::new();
    for e in 2..=top.max(2) {
        let y = 10f64.powi(e);
        if y > y_max && e > 2 {
            break;
        }
        let ra = a.inverse_unchecked(y);
        let rb = b.inverse_unchecked(y);
        trace.push((y, ra / rb));
    }
    let decreasing = trace.windows(2).all(|w| w[1].1 < w[0].1);
    let last = trace.last().map(|x| x.1).unwrap_or(f64::INFINITY);
    EssentialTrace { holds: trace.len() >= 2 && decreasing && last < 1e-2, trace }
}

#[cfg(test)]
mod tests {
    use super::super::*;

    #[test]
    fn power_indices_exact() {
        let e = estimate_indices(&power(2.7)).unwrap();
        for v in [e.i_inf, e.s_sup, e.i_inf_infinity, e.s_sup_infinity] {
            assert!((v - 2.7).abs() < 1e-6);
        }
    }

    #[test]
    fn exp_index_grows_with_cap() {
        let e = estimate_indices(&exp().with_domain_cap(100.0)).unwrap();
        assert!(e.s_sup_infinity > 50.0);
        assert!(e.i_inf <= e.i_inf_infinity && e.i_inf_infinity <= e.s_sup_infinity && e.s_sup_infinity <= e.s_sup);
    }

    #[test]
    fn delta2_examples() {
        let r = check_delta2(&power(3.0), Regime::Global);
        assert!(r.holds);
        assert!((r.constant_k - 8.0).abs() < 1e-9);
        let r = check_delta2(&exp(), Regime::NearInfinity);
        assert!(!r.holds);
        let w = r.evidence[0];
        assert!(w.lhs > w.rhs);
    }

    #[test]
    fn dominates_examples() {
        let a = power(2.0);
        let r = dominates(&a, &a, Regime::Global);
        assert!(r.holds && r.constant_k == 1.0 && r.threshold_m == 0.0);
        let r = dominates(&power(3.0), &power(2.0), Regime::NearInfinity);
        assert!(r.holds && r.constant_k == 1.0 && r.threshold_m == 1.0, "{r:?}");
        let r = dominates(&power(2.0), &power(3.0), Regime::NearInfinity);
        assert!(!r.holds);
        assert!(r.evidence[0].lhs > r.evidence[0].rhs);
    }

    #[test]
    fn essentially_slower_examples() {
        assert!(increases_essentially_slower(&power(2.0), &power(3.0)).holds);
        assert!(!increases_essentially_slower(&power(2.0), &power(2.0)).holds);
        assert!(!increases_essentially_slower(&power_log(2.0, 0.0), &power_log(2.0, 1.0)).holds);
    }
}
